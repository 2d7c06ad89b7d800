"""The full model: vision encoder -> adapter -> decoder LM.

Sequence layout (token ids; <img> slots carry projected patch embeddings):

    <bos> [<img> x c_vis, image only] <hum> prompt <sys> response <eos>

The loss mask is True exactly on the response tokens and the closing <eos>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tinymmt.errors import BudgetError, ShapeError
from tinymmt.model.components import AdapterProjector, DecoderLM, VisionEncoder
from tinymmt.model.config import ModelConfig
from tinymmt.model.vocab import BOS, EOS, HUM, IMG, SYS, Vocabulary
from tinymmt.numerics.params import ParameterStore
from tinymmt.numerics.tensor import Tensor, concat, cross_entropy_masked, no_grad


@dataclass
class Assembled:
    """One model-ready sequence."""

    ids: np.ndarray         # (T,) token ids, <img> at visual slots
    embeds: Tensor          # (T, d_model)
    loss_mask: np.ndarray   # (T,) bool
    positions: np.ndarray   # (T,) contiguous position ids
    has_image: bool


class MultimodalModel:
    def __init__(self, config: ModelConfig, vocab: Vocabulary, seed: int = 0):
        if len(vocab) != config.vocab_size:
            raise ShapeError(
                f"vocab has {len(vocab)} entries but config.vocab_size={config.vocab_size}"
            )
        self.config = config
        self.vocab = vocab
        self.seed = int(seed)
        self.params = ParameterStore()
        rng = np.random.default_rng(np.random.SeedSequence([self.seed]))
        self.vision = VisionEncoder(self.params, config, rng)
        self.adapter = AdapterProjector(self.params, config, rng)
        self.llm = DecoderLM(self.params, config, rng)
        self.lora_adapters: dict[str, "LoraAdapter"] = {}  # target weight name -> adapter
        self.provenance: list[dict] = []
        self._linears = self._index_linears()

    def _index_linears(self) -> dict[str, object]:
        """Map weight parameter name -> owning Linear, for adapter attachment."""
        linears: dict[str, object] = {}

        def visit(obj):
            from tinymmt.model.components import Block, Linear, SelfAttention

            if isinstance(obj, Linear):
                linears[obj.name + ".weight"] = obj
            elif isinstance(obj, SelfAttention):
                for lin in (obj.wq, obj.wk, obj.wv, obj.wo):
                    visit(lin)
            elif isinstance(obj, Block):
                visit(obj.attn)
                visit(obj.fc1)
                visit(obj.fc2)

        visit(self.vision.patch_proj)
        for block in self.vision.blocks:
            visit(block)
        if self.adapter.mode == "linear":
            visit(self.adapter.proj)
        else:
            visit(self.adapter.fc1)
            visit(self.adapter.fc2)
        for block in self.llm.blocks:
            visit(block)
        return linears

    # ------------------------------------------------------------------
    # forward pieces

    def encode_image(self, image: np.ndarray) -> Tensor:
        return self.vision(image)

    def project(self, vis: Tensor) -> Tensor:
        return self.adapter(vis)

    def visual_tokens(self, image: np.ndarray) -> Tensor:
        return self.project(self.encode_image(image))

    def _assemble(self, prompt_ids, visual_tokens, response_ids, append_eos: bool) -> Assembled:
        cfg = self.config
        prompt_ids = np.asarray(prompt_ids, dtype=np.int64)
        response_ids = (
            np.zeros(0, dtype=np.int64) if response_ids is None
            else np.asarray(response_ids, dtype=np.int64)
        )
        has_image = visual_tokens is not None
        if has_image and visual_tokens.shape != (cfg.c_vis, cfg.d_model):
            raise ShapeError(
                f"visual tokens must have shape ({cfg.c_vis}, {cfg.d_model}), "
                f"got {visual_tokens.shape}"
            )
        n_vis = cfg.c_vis if has_image else 0
        total = 1 + n_vis + 1 + len(prompt_ids) + 1 + len(response_ids) + (1 if append_eos else 0)
        if total > cfg.c_total:
            raise BudgetError(
                f"assembled sequence length {total} exceeds context budget c_total={cfg.c_total}"
            )

        ids = np.concatenate([
            [BOS],
            np.full(n_vis, IMG, dtype=np.int64),
            [HUM],
            prompt_ids,
            [SYS],
            response_ids,
            [EOS] if append_eos else np.zeros(0, dtype=np.int64),
        ]).astype(np.int64)

        head = self.llm.embed_tokens(ids[: 1])
        tail = self.llm.embed_tokens(ids[1 + n_vis:])
        if has_image:
            embeds = concat([head, visual_tokens, tail], axis=0)
        else:
            embeds = concat([head, tail], axis=0)

        loss_mask = np.zeros(total, dtype=bool)
        if append_eos:
            resp_start = 1 + n_vis + 1 + len(prompt_ids) + 1
            loss_mask[resp_start: resp_start + len(response_ids) + 1] = True

        return Assembled(
            ids=ids,
            embeds=embeds,
            loss_mask=loss_mask,
            positions=np.arange(total, dtype=np.int64),
            has_image=has_image,
        )

    def assemble_sequence(self, prompt_ids, visual_tokens: Tensor | None = None,
                          response_ids=None) -> Assembled:
        """Merge prompt, optional visual tokens, and optional response.

        With a response present, a closing <eos> is appended and the loss mask
        covers the response plus that <eos> (so it sums to |response| + 1).
        Overflowing c_total raises; nothing is ever silently truncated.
        """
        return self._assemble(prompt_ids, visual_tokens, response_ids,
                              append_eos=response_ids is not None)

    def forward(self, assembled: Assembled) -> Tensor:
        """Logits (T, vocab_size); strictly causal over the merged sequence."""
        return self.llm.forward_embedded(assembled.embeds, assembled.positions)

    def loss(self, assembled: Assembled) -> tuple[Tensor, int]:
        """Next-token loss over masked positions. Returns (scalar, n_masked)."""
        logits = self.forward(assembled)
        t = len(assembled.ids)
        shifted_mask = assembled.loss_mask[1:]
        ce = cross_entropy_masked(logits[: t - 1], assembled.ids[1:], shifted_mask)
        return ce, int(shifted_mask.sum())

    # ------------------------------------------------------------------
    # inference

    def generate(self, prompt_ids, image: np.ndarray | None = None,
                 max_new_tokens: int = 64) -> np.ndarray:
        """Greedy decoding; stops at <eos> or max_new_tokens. Deterministic."""
        if max_new_tokens < 0:
            raise ValueError(f"max_new_tokens must be >= 0, got {max_new_tokens}")
        with no_grad():
            visual = self.visual_tokens(image) if image is not None else None
            prefix = self._assemble(prompt_ids, visual, None, append_eos=False)
            if len(prefix.ids) + max_new_tokens > self.config.c_total:
                raise BudgetError(
                    f"prompt length {len(prefix.ids)} + max_new_tokens {max_new_tokens} "
                    f"exceeds context budget c_total={self.config.c_total}"
                )
            generated: list[int] = []
            for _ in range(max_new_tokens):
                assembled = self._assemble(
                    prompt_ids, visual, np.array(generated, dtype=np.int64), append_eos=False
                )
                logits = self.forward(assembled)
                next_id = int(np.argmax(logits.data[-1]))
                if next_id == EOS:
                    break
                generated.append(next_id)
        return np.array(generated, dtype=np.int64)

    # ------------------------------------------------------------------
    # copying (used by the hyperparameter sweep)

    def clone(self) -> "MultimodalModel":
        """Deep copy: same config/vocab, parameter values, adapters, provenance."""
        from tinymmt.model.lora import lora_attach

        other = MultimodalModel(self.config, self.vocab, seed=self.seed)
        if self.lora_adapters:
            first = next(iter(self.lora_adapters.values()))
            lora_attach(other, targets=sorted(self.lora_adapters),
                        r=first.r, alpha=first.alpha)
        for name, tensor in self.params.items():
            other.params[name].data = tensor.data.copy()
        other.params.set_trainable(self.params.trainable)
        other.provenance = [dict(p) for p in self.provenance]
        return other
