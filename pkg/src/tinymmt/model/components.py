"""Transformer building blocks plus the three model components.

All parameters are registered in a shared ParameterStore under dotted names;
the first segment ("vision", "adapter", "llm") is the unit of freezing.
Weight convention follows the usual (d_out, d_in) layout, y = x @ W.T + b.
"""

from __future__ import annotations

import numpy as np

from tinymmt.errors import ShapeError
from tinymmt.model.config import ModelConfig
from tinymmt.numerics.params import ParameterStore
from tinymmt.numerics.tensor import (
    Tensor,
    embedding,
    gelu,
    layer_norm,
    matmul,
    reshape,
    softmax,
    transpose,
)

INIT_STD = 0.02
ATTN_MASK_VALUE = -1e30  # finite stand-in for -inf; exp() underflows to exactly 0


class Linear:
    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int,
                 rng: np.random.Generator, dtype, bias: bool = True):
        self.name = name
        self.weight = store.add(
            name + ".weight",
            Tensor(rng.normal(0.0, INIT_STD, size=(d_out, d_in)).astype(dtype)),
        )
        self.bias = None
        if bias:
            self.bias = store.add(name + ".bias", Tensor(np.zeros(d_out, dtype=dtype)))
        self.lora = None  # set by lora_attach

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, transpose(self.weight))
        if self.bias is not None:
            y = y + self.bias
        if self.lora is not None:
            y = y + self.lora.delta(x)
        return y


class LayerNorm:
    def __init__(self, store: ParameterStore, name: str, d: int, dtype):
        self.gamma = store.add(name + ".gamma", Tensor(np.ones(d, dtype=dtype)))
        self.beta = store.add(name + ".beta", Tensor(np.zeros(d, dtype=dtype)))

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta)


class SelfAttention:
    """Multi-head self-attention over a (T, d) sequence; optionally causal."""

    def __init__(self, store: ParameterStore, name: str, d: int, n_heads: int,
                 rng: np.random.Generator, dtype, causal: bool):
        self.d = d
        self.n_heads = n_heads
        self.d_head = d // n_heads
        self.causal = causal
        self.dtype = dtype
        self.wq = Linear(store, name + ".wq", d, d, rng, dtype)
        self.wk = Linear(store, name + ".wk", d, d, rng, dtype)
        self.wv = Linear(store, name + ".wv", d, d, rng, dtype)
        self.wo = Linear(store, name + ".wo", d, d, rng, dtype)

    def _split_heads(self, x: Tensor, t: int) -> Tensor:
        return transpose(reshape(x, (t, self.n_heads, self.d_head)), (1, 0, 2))

    def __call__(self, x: Tensor) -> Tensor:
        t = x.shape[0]
        q = self._split_heads(self.wq(x), t)  # (h, T, dh)
        k = self._split_heads(self.wk(x), t)
        v = self._split_heads(self.wv(x), t)
        scores = matmul(q, transpose(k, (0, 2, 1))) * (1.0 / np.sqrt(self.d_head))
        if self.causal:
            mask = np.triu(np.full((t, t), ATTN_MASK_VALUE, dtype=self.dtype), k=1)
            scores = scores + Tensor(mask)
        probs = softmax(scores, axis=-1)
        ctx = matmul(probs, v)  # (h, T, dh)
        merged = reshape(transpose(ctx, (1, 0, 2)), (t, self.d))
        return self.wo(merged)


class Block:
    """Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, store: ParameterStore, name: str, d: int, n_heads: int,
                 rng: np.random.Generator, dtype, causal: bool):
        self.ln1 = LayerNorm(store, name + ".ln1", d, dtype)
        self.attn = SelfAttention(store, name + ".attn", d, n_heads, rng, dtype, causal)
        self.ln2 = LayerNorm(store, name + ".ln2", d, dtype)
        self.fc1 = Linear(store, name + ".mlp.fc1", d, 4 * d, rng, dtype)
        self.fc2 = Linear(store, name + ".mlp.fc2", 4 * d, d, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.ln1(x))
        x = x + self.fc2(gelu(self.fc1(self.ln2(x))))
        return x


class VisionEncoder:
    """Patch embedding + bidirectional transformer; (S, S) image -> (c_vis, d_vis)."""

    def __init__(self, store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator):
        dtype = cfg.np_dtype
        self.cfg = cfg
        self.patch_proj = Linear(store, "vision.patch_emb",
                                 cfg.patch_size ** 2, cfg.d_vis, rng, dtype)
        self.pos_emb = store.add(
            "vision.pos_emb",
            Tensor(rng.normal(0.0, INIT_STD, size=(cfg.c_vis, cfg.d_vis)).astype(dtype)),
        )
        self.blocks = [
            Block(store, f"vision.blocks.{i}", cfg.d_vis, cfg.n_heads, rng, dtype, causal=False)
            for i in range(cfg.n_layers_vis)
        ]
        self.ln_f = LayerNorm(store, "vision.ln_f", cfg.d_vis, dtype)

    def patchify(self, image: np.ndarray) -> np.ndarray:
        s, p = self.cfg.image_size, self.cfg.patch_size
        g = s // p
        return (
            image.reshape(g, p, g, p).transpose(0, 2, 1, 3).reshape(g * g, p * p)
        )

    def __call__(self, image: np.ndarray) -> Tensor:
        image = np.asarray(image, dtype=self.cfg.np_dtype)
        s = self.cfg.image_size
        if image.shape != (s, s):
            raise ShapeError(f"expected a ({s}, {s}) image, got {image.shape}")
        x = self.patch_proj(Tensor(self.patchify(image)))
        x = x + self.pos_emb
        for block in self.blocks:
            x = block(x)
        return self.ln_f(x)


class AdapterProjector:
    """Maps vision embeddings into the LM embedding space.

    linear: one affine map. mlp2: two layers with a nonlinearity between.
    """

    def __init__(self, store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator):
        dtype = cfg.np_dtype
        self.cfg = cfg
        self.mode = cfg.adapter_mode
        if self.mode == "linear":
            self.proj = Linear(store, "adapter.proj", cfg.d_vis, cfg.d_model, rng, dtype)
        else:
            self.fc1 = Linear(store, "adapter.fc1", cfg.d_vis, cfg.d_model, rng, dtype)
            self.fc2 = Linear(store, "adapter.fc2", cfg.d_model, cfg.d_model, rng, dtype)

    def __call__(self, vis: Tensor) -> Tensor:
        if vis.ndim != 2 or vis.shape[1] != self.cfg.d_vis:
            raise ShapeError(
                f"adapter expects (n, {self.cfg.d_vis}) vision embeddings, got {vis.shape}"
            )
        if self.mode == "linear":
            return self.proj(vis)
        return self.fc2(gelu(self.fc1(vis)))


class DecoderLM:
    """Causal decoder over merged visual + text embeddings, tied output head."""

    def __init__(self, store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator):
        dtype = cfg.np_dtype
        self.cfg = cfg
        self.tok_emb = store.add(
            "llm.tok_emb",
            Tensor(rng.normal(0.0, INIT_STD, size=(cfg.vocab_size, cfg.d_model)).astype(dtype)),
        )
        self.pos_emb = store.add(
            "llm.pos_emb",
            Tensor(rng.normal(0.0, INIT_STD, size=(cfg.c_total, cfg.d_model)).astype(dtype)),
        )
        self.blocks = [
            Block(store, f"llm.blocks.{i}", cfg.d_model, cfg.n_heads, rng, dtype, causal=True)
            for i in range(cfg.n_layers_lm)
        ]
        self.ln_f = LayerNorm(store, "llm.ln_f", cfg.d_model, dtype)

    def embed_tokens(self, ids: np.ndarray) -> Tensor:
        return embedding(self.tok_emb, ids)

    def forward_embedded(self, embeds: Tensor, positions: np.ndarray) -> Tensor:
        """(T, d_model) embeddings -> (T, vocab_size) logits."""
        x = embeds + embedding(self.pos_emb, positions)
        for block in self.blocks:
            x = block(x)
        x = self.ln_f(x)
        return matmul(x, transpose(self.tok_emb))
