from tinymmt.numerics.tensor import (
    Tensor,
    add,
    backward,
    concat,
    cross_entropy_masked,
    embedding,
    gelu,
    layer_norm,
    matmul,
    mul,
    no_grad,
    reshape,
    softmax,
    tmean,
    transpose,
    tsum,
)
from tinymmt.numerics.params import ParameterStore
from tinymmt.numerics.optim import AdamState, adam_step
from tinymmt.numerics.gradcheck import grad_check, grad_check_params

__all__ = [
    "AdamState",
    "ParameterStore",
    "Tensor",
    "adam_step",
    "add",
    "backward",
    "concat",
    "cross_entropy_masked",
    "embedding",
    "gelu",
    "grad_check",
    "grad_check_params",
    "layer_norm",
    "matmul",
    "mul",
    "no_grad",
    "reshape",
    "softmax",
    "tmean",
    "transpose",
    "tsum",
]
