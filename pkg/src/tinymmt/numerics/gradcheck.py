"""Finite-difference validation of the recorded backward pass."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from tinymmt.numerics.tensor import Tensor, backward, no_grad


def _rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-4) -> float:
    """Max relative error between backward() and central differences on f at x.

    f must be scalar-valued. Relative error uses max(|analytic|, |numeric|,
    1e-8) as the denominator, so near-zero coordinates don't blow up.
    """
    x.requires_grad = True
    x.grad = None
    out = f(x)
    backward(out)
    analytic = x.grad.copy() if x.grad is not None else np.zeros_like(x.data)

    worst = 0.0
    with no_grad():
        for idx in np.ndindex(x.data.shape):
            orig = x.data[idx]
            x.data[idx] = orig + h
            f_plus = float(f(x).data)
            x.data[idx] = orig - h
            f_minus = float(f(x).data)
            x.data[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, _rel_error(float(analytic[idx]), numeric))
    return worst


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-4,
    rng: np.random.Generator | None = None,
    coords_per_tensor: int | None = None,
) -> float:
    """grad_check over many parameter tensors against a shared loss closure.

    With coords_per_tensor set, checks that many randomly chosen coordinates
    in each tensor instead of every coordinate (the loss itself still runs
    the full computation), which keeps whole-model checks fast.
    """
    for t in tensors:
        t.grad = None
    out = loss_fn()
    backward(out)
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    worst = 0.0
    with no_grad():
        for t, a in zip(tensors, analytic):
            coords = list(np.ndindex(t.data.shape))
            if coords_per_tensor is not None and len(coords) > coords_per_tensor:
                if rng is None:
                    rng = np.random.default_rng(0)
                picks = rng.choice(len(coords), size=coords_per_tensor, replace=False)
                coords = [coords[int(i)] for i in picks]
            for idx in coords:
                orig = t.data[idx]
                t.data[idx] = orig + h
                f_plus = float(loss_fn().data)
                t.data[idx] = orig - h
                f_minus = float(loss_fn().data)
                t.data[idx] = orig
                numeric = (f_plus - f_minus) / (2.0 * h)
                worst = max(worst, _rel_error(float(a[idx]), numeric))
    return worst
