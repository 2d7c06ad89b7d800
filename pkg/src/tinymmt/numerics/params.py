"""Named parameter registry with a trainable subset and digest helpers.

Parameter names are dotted paths; the first segment is the component
("vision", "adapter", "llm", "lora"). Freezing is realized by the trainable
set: the optimizer only ever touches trainable entries, and SHA-256 digests
prove frozen components bit-identical across a training stage.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Iterator

import numpy as np

from tinymmt.numerics.tensor import Tensor


class ParameterStore:
    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._trainable: set[str] = set()

    def add(self, name: str, tensor: Tensor, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._entries[name] = tensor
        if trainable:
            self._trainable.add(name)
        tensor.requires_grad = trainable
        return tensor

    def remove(self, name: str) -> None:
        del self._entries[name]
        self._trainable.discard(name)

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in sorted(self._entries):
            yield name, self._entries[name]

    @property
    def trainable(self) -> frozenset[str]:
        return frozenset(self._trainable)

    def set_trainable(self, names: Iterable[str]) -> None:
        names = set(names)
        unknown = names - set(self._entries)
        if unknown:
            raise KeyError(f"unknown parameter names: {sorted(unknown)}")
        self._trainable = names
        for name, tensor in self._entries.items():
            tensor.requires_grad = name in names

    def freeze(self, names: Iterable[str]) -> None:
        for name in names:
            if name not in self._entries:
                raise KeyError(f"unknown parameter name {name!r}")
            self._trainable.discard(name)
            self._entries[name].requires_grad = False

    def components(self) -> list[str]:
        return sorted({name.split(".", 1)[0] for name in self._entries})

    def digest(self, prefix: str = "") -> str:
        """SHA-256 over (name, shape, dtype, raw bytes) of matching parameters."""
        h = hashlib.sha256()
        for name, tensor in self.items():
            if not name.startswith(prefix):
                continue
            h.update(name.encode("utf-8"))
            h.update(str(tensor.data.shape).encode("ascii"))
            h.update(str(tensor.data.dtype).encode("ascii"))
            h.update(np.ascontiguousarray(tensor.data).tobytes())
        return h.hexdigest()

    def component_digests(self) -> dict[str, str]:
        return {comp: self.digest(comp + ".") for comp in self.components()}
