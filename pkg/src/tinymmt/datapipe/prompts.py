"""Instruction prompt rendering.

The three task templates are fixed strings; rendering is pure placeholder
substitution, so output is byte-reproducible (golden files in the test suite
pin every template). Box corners render as x2 = x + w, y2 = y + h. The
object-labels sentence appears only when a tag is supplied; by default that
is the single best-IoU detector label, with a multi-label variant available
for ablation.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

from tinymmt.errors import DataError
from tinymmt.datapipe.records import LANG_NAMES, PromptInstance, VgRecord

TEXT_ONLY_TEMPLATE = (
    "Translate the following sentence from {src} into {tgt} language. "
    "{src} sentence is: {sentence}."
)

_BOX_CLAUSE = (
    "You are given an image and coordinates of a bounding box as: "
    "x1={x1}, y1={y1}, x2={x2}, y2={y2}. "
)

_LABELS_CLAUSE = "You are also provided labels of the objects in the image as: {labels}. "

MMT_TEMPLATE = (
    _BOX_CLAUSE
    + "Using the context of the objects or items available in the bounding box "
    "translate the following sentence from English into {tgt} language. "
    + "{labels_clause}"
    + "English sentence is: {sentence}."
)

CAPTION_TEMPLATE = (
    _BOX_CLAUSE
    + "{labels_clause}"
    + "Provide a short caption of the object in {tgt} language."
)

_TEXT_ONLY_RE = re.compile(
    r"^Translate the following sentence from (?P<src>\w+) into (?P<tgt>\w+) language\. "
    r"(?P=src) sentence is: (?P<sentence>.*)\.$",
    re.DOTALL,
)
_SENTENCE_RE = re.compile(r"English sentence is: (?P<sentence>.*)\.$", re.DOTALL)


def _labels_value(tag: str | Sequence[str] | None) -> str | None:
    if tag is None:
        return None
    if isinstance(tag, str):
        return tag
    tags = list(tag)
    if not tags:
        return None
    return ", ".join(tags)


def render_prompt(record: VgRecord, task: str, tag: str | Sequence[str] | None = None) -> PromptInstance:
    """Render one record into an instruction instance.

    task 'mmt' and 'caption' ground the prompt in the record's bounding box
    (and image); 'text_only' uses just the sentence. The response is the
    record's target-language text in every task.
    """
    lang_name = LANG_NAMES[record.target_lang]
    try:
        if task == "text_only":
            prompt = TEXT_ONLY_TEMPLATE.format(
                src="English", tgt=lang_name, sentence=record.english
            )
            image_id = None
        elif task in ("mmt", "caption"):
            x1, y1, x2, y2 = record.box.corners
            labels = _labels_value(tag)
            labels_clause = "" if labels is None else _LABELS_CLAUSE.format(labels=labels)
            template = MMT_TEMPLATE if task == "mmt" else CAPTION_TEMPLATE
            prompt = template.format(
                x1=x1, y1=y1, x2=x2, y2=y2,
                tgt=lang_name,
                labels_clause=labels_clause,
                sentence=record.english,
            )
            image_id = record.image_id
        else:
            raise DataError(f"unknown task {task!r}")
    except (KeyError, IndexError) as exc:
        raise DataError(f"template placeholder left unfilled: {exc}") from exc
    return PromptInstance(
        task=task,
        prompt=prompt,
        response=record.target_text,
        lang=record.target_lang,
        source_id=record.image_id and f"{record.target_lang}/{record.split}/{record.image_id}",
        image_id=image_id,
    )


def _extract_sentence(inst: PromptInstance) -> tuple[str, str]:
    """(source language name, source sentence) recovered from the prompt."""
    if inst.task == "text_only":
        m = _TEXT_ONLY_RE.match(inst.prompt)
        if not m:
            raise DataError(f"prompt does not match the text_only template: {inst.prompt!r}")
        return m.group("src"), m.group("sentence")
    if inst.task == "mmt":
        m = _SENTENCE_RE.search(inst.prompt)
        if not m:
            raise DataError(f"prompt does not match the mmt template: {inst.prompt!r}")
        return "English", m.group("sentence")
    raise DataError(f"cannot extract a source sentence from a {inst.task!r} instance")


_NAME_TO_CODE = {name: code for code, name in LANG_NAMES.items()}


def reverse_instance(inst: PromptInstance) -> PromptInstance:
    """Swap translation direction: the response becomes the source sentence.

    The reversed instance is always a text_only task (target -> source
    translation carries no box grounding).
    """
    src_name, sentence = _extract_sentence(inst)
    tgt_name = LANG_NAMES[inst.lang]
    prompt = TEXT_ONLY_TEMPLATE.format(src=tgt_name, tgt=src_name, sentence=inst.response)
    # toggle the marker so double reversal restores the original id
    if inst.source_id.endswith("#rev"):
        source_id = inst.source_id[: -len("#rev")]
    else:
        source_id = inst.source_id + "#rev"
    return PromptInstance(
        task="text_only",
        prompt=prompt,
        response=sentence,
        lang=_NAME_TO_CODE[src_name],
        source_id=source_id,
        image_id=None,
    )


def back_translation_augment(instances: Iterable[PromptInstance]) -> list[PromptInstance]:
    """Originals plus one reversed-direction copy of each (n in, 2n out)."""
    instances = list(instances)
    out = list(instances)
    for inst in instances:
        if inst.task == "caption":
            raise DataError("back-translation applies to translation tasks, not captioning")
        out.append(reverse_instance(inst))
    return out
