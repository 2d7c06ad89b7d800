"""Rule-based tokenizer for evaluation.

Rules, in order: NFC-normalize, lowercase ASCII letters (other scripts are
left alone), detach punctuation as separate single-character tokens (ASCII
punctuation plus danda U+0964 and double danda U+0965), split on Unicode
whitespace. Idempotent: re-tokenizing the joined tokens changes nothing.
"""

from __future__ import annotations

import string
import unicodedata

PUNCTUATION = frozenset(string.punctuation) | {"।", "॥"}

_ASCII_LOWER = {ord(c): ord(c) + 32 for c in string.ascii_uppercase}


def tokenize(text: str) -> list[str]:
    text = unicodedata.normalize("NFC", text)
    text = text.translate(_ASCII_LOWER)
    parts: list[str] = []
    for ch in text:
        if ch in PUNCTUATION:
            parts.append(f" {ch} ")
        else:
            parts.append(ch)
    return "".join(parts).split()
