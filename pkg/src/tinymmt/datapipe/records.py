"""Core data records and file formats.

Input TSV rows (7 tab-separated fields): image_id, x, y, w, h, english
utterance, translated utterance. Boxes are top-left plus extent, pixels.
Detector output is one JSON file per image: a list of
{"label": str, "box": [x, y, w, h], "confidence": float}.
Instruction data is JSON-lines, one instance per line with fields
{task, prompt, response, lang, image_id?, source_id}.
"""

from __future__ import annotations

import json
import os
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from tinymmt.errors import DataError, TsvParseError

LANGS = ("hi", "bn", "ml")
LANG_NAMES = {"hi": "Hindi", "bn": "Bengali", "ml": "Malayalam", "en": "English"}
SPLITS = ("train", "valid", "test", "challenge")
TASKS = ("mmt", "text_only", "caption")


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise DataError(f"box extent must be positive, got w={self.w}, h={self.h}")
        if self.x < 0 or self.y < 0:
            raise DataError(f"box origin must be non-negative, got x={self.x}, y={self.y}")

    @property
    def corners(self) -> tuple[int, int, int, int]:
        """(x1, y1, x2, y2) with x2 = x + w, y2 = y + h."""
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class VgRecord:
    image_id: str
    box: BoundingBox
    english: str
    target_lang: str
    target_text: str
    split: str

    def __post_init__(self):
        if not self.image_id:
            raise DataError("image_id must be non-empty")
        if not self.english or not self.target_text:
            raise DataError("english and target text must be non-empty")
        if self.target_lang not in LANGS:
            raise DataError(f"target_lang must be one of {LANGS}, got {self.target_lang!r}")
        if self.split not in SPLITS:
            raise DataError(f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class DetectedObject:
    label: str
    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise DataError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class PromptInstance:
    task: str
    prompt: str
    response: str
    lang: str
    source_id: str
    image_id: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"task must be one of {TASKS}, got {self.task!r}")


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    reason: str


@dataclass
class ParseResult:
    records: list[VgRecord] = field(default_factory=list)
    issues: list[ParseIssue] = field(default_factory=list)


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def parse_vg_tsv(path, lang: str, split: str, strict: bool = True) -> ParseResult:
    """Parse one TSV split. strict: abort on the first bad line; lenient:
    skip bad lines and report them (line numbers are 1-based)."""
    path = Path(path)
    if lang not in LANGS:
        raise DataError(f"lang must be one of {LANGS}, got {lang!r}")
    if split not in SPLITS:
        raise DataError(f"split must be one of {SPLITS}, got {split!r}")
    result = ParseResult()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n\r")
            if not line:
                continue
            try:
                result.records.append(_parse_line(line, line_no, lang, split))
            except DataError as exc:
                if strict:
                    raise TsvParseError(f"{path}:{line_no}: {exc}") from exc
                result.issues.append(ParseIssue(line_no=line_no, reason=str(exc)))
    return result


def _parse_line(line: str, line_no: int, lang: str, split: str) -> VgRecord:
    fields = line.split("\t")
    if len(fields) != 7:
        raise DataError(f"expected 7 tab-separated fields, got {len(fields)}")
    image_id, xs, ys, ws, hs, english, target = fields
    coords = []
    for name, raw in zip(("x", "y", "w", "h"), (xs, ys, ws, hs)):
        try:
            coords.append(int(raw))
        except ValueError:
            raise DataError(f"box field {name} is not an integer: {raw!r}") from None
    box = BoundingBox(*coords)
    return VgRecord(
        image_id=image_id.strip(),
        box=box,
        english=_nfc(english),
        target_lang=lang,
        target_text=_nfc(target),
        split=split,
    )


# ----------------------------------------------------------------------
# detector output

def read_detection_file(path) -> list[DetectedObject]:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError(f"{path}: detector file must hold a JSON array")
    out = []
    for i, entry in enumerate(raw):
        try:
            box = entry["box"]
            out.append(DetectedObject(
                label=str(entry["label"]),
                box=BoundingBox(int(box[0]), int(box[1]), int(box[2]), int(box[3])),
                confidence=float(entry["confidence"]),
            ))
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad detection entry {i}: {exc}") from exc
    return out


def load_detections(detections_dir, image_id: str) -> list[DetectedObject]:
    """Detections for one image; missing file means no detections."""
    if detections_dir is None:
        return []
    path = Path(detections_dir) / f"{image_id}.json"
    if not path.exists():
        return []
    return read_detection_file(path)


# ----------------------------------------------------------------------
# instruction-data files (JSON-lines)

def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def instance_to_json(inst: PromptInstance) -> str:
    d = {
        "task": inst.task,
        "prompt": inst.prompt,
        "response": inst.response,
        "lang": inst.lang,
        "source_id": inst.source_id,
    }
    if inst.image_id is not None:
        d["image_id"] = inst.image_id
    return json.dumps(d, ensure_ascii=False, sort_keys=True)


def write_instances(path, instances: Iterable[PromptInstance]) -> None:
    lines = [instance_to_json(inst) for inst in instances]
    _atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_instances(path) -> list[PromptInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
                out.append(PromptInstance(
                    task=d["task"],
                    prompt=d["prompt"],
                    response=d["response"],
                    lang=d["lang"],
                    source_id=d["source_id"],
                    image_id=d.get("image_id"),
                ))
            except (json.JSONDecodeError, KeyError, DataError) as exc:
                raise DataError(f"{path}:{line_no}: bad instance record: {exc}") from exc
    return out
