"""Character-level vocabulary harvested from the training corpus.

Character granularity covers Devanagari/Bengali/Malayalam scripts without a
subword trainer. Six control tokens occupy the low ids; text encoding never
produces them, they are only inserted by sequence assembly.
"""

from __future__ import annotations

import unicodedata
from typing import Iterable

import numpy as np

from tinymmt.errors import VocabularyError

PAD, BOS, EOS, IMG, HUM, SYS = range(6)
SPECIAL_NAMES = ("<pad>", "<bos>", "<eos>", "<img>", "<hum>", "<sys>")
N_SPECIALS = len(SPECIAL_NAMES)


class Vocabulary:
    def __init__(self, symbols: Iterable[str]):
        symbols = list(symbols)
        for s in symbols:
            if len(s) != 1:
                raise VocabularyError(f"vocabulary symbols must be single characters, got {s!r}")
        if len(set(symbols)) != len(symbols):
            raise VocabularyError("duplicate symbols in vocabulary")
        self.symbols = symbols
        self._to_id = {ch: N_SPECIALS + i for i, ch in enumerate(symbols)}

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        chars: set[str] = set()
        for text in texts:
            chars.update(unicodedata.normalize("NFC", text))
        return cls(sorted(chars))

    def __len__(self) -> int:
        return N_SPECIALS + len(self.symbols)

    def __contains__(self, ch: str) -> bool:
        return ch in self._to_id

    def encode(self, text: str) -> np.ndarray:
        missing = sorted({ch for ch in text if ch not in self._to_id})
        if missing:
            raise VocabularyError(
                "text contains characters outside the vocabulary: "
                + ", ".join(repr(ch) for ch in missing)
            )
        return np.array([self._to_id[ch] for ch in text], dtype=np.int64)

    def decode(self, ids, on_special: str = "error") -> str:
        """Inverse of encode. on_special: 'error' rejects control ids,
        'skip' drops them (useful on raw generated sequences)."""
        out: list[str] = []
        for i in np.asarray(ids, dtype=np.int64):
            i = int(i)
            if i < 0 or i >= len(self):
                raise VocabularyError(f"token id {i} out of range [0, {len(self)})")
            if i < N_SPECIALS:
                if on_special == "skip":
                    continue
                raise VocabularyError(f"cannot decode control token {SPECIAL_NAMES[i]}")
            out.append(self.symbols[i - N_SPECIALS])
        return "".join(out)

    def to_dict(self) -> dict:
        return {"symbols": self.symbols}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["symbols"])
