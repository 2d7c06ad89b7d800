"""Model hyperparameters and their consistency rules."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from tinymmt.errors import ConfigError

ADAPTER_MODES = ("linear", "mlp2")
DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class ModelConfig:
    """Shape of the full stack; defaults are the desk-scale configuration.

    The context budget splits into a fixed number of visual slots (one per
    image patch) plus text. c_vis is derived: (image_size / patch_size)^2.
    """

    vocab_size: int
    d_vis: int = 32
    d_model: int = 64
    n_layers_vis: int = 2
    n_layers_lm: int = 2
    n_heads: int = 2
    c_total: int = 256
    image_size: int = 12
    patch_size: int = 4
    adapter_mode: str = "mlp2"
    dtype: str = "float64"

    def __post_init__(self):
        for field in ("vocab_size", "d_vis", "d_model", "n_layers_vis",
                      "n_layers_lm", "n_heads", "c_total", "image_size", "patch_size"):
            value = getattr(self, field)
            if not isinstance(value, int) or value <= 0:
                raise ConfigError(f"model.{field} must be a positive integer, got {value!r}")
        if self.image_size % self.patch_size != 0:
            raise ConfigError(
                f"patch_size {self.patch_size} must divide image_size {self.image_size}"
            )
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.d_vis % self.n_heads != 0:
            raise ConfigError(f"d_vis {self.d_vis} not divisible by n_heads {self.n_heads}")
        if self.c_vis >= self.c_total:
            raise ConfigError(
                f"visual token budget c_vis={self.c_vis} must be below c_total={self.c_total}"
            )
        if self.adapter_mode not in ADAPTER_MODES:
            raise ConfigError(f"adapter_mode must be one of {ADAPTER_MODES}, got {self.adapter_mode!r}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}")

    @property
    def c_vis(self) -> int:
        return (self.image_size // self.patch_size) ** 2

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c_vis"] = self.c_vis
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        c_vis = d.pop("c_vis", None)
        try:
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad model config: {exc}") from exc
        if c_vis is not None and c_vis != cfg.c_vis:
            raise ConfigError(
                f"c_vis={c_vis} inconsistent with (image_size/patch_size)^2={cfg.c_vis}"
            )
        return cfg
