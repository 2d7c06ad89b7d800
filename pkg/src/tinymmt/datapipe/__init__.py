from tinymmt.datapipe.records import (
    LANG_NAMES,
    LANGS,
    SPLITS,
    TASKS,
    BoundingBox,
    DetectedObject,
    ParseIssue,
    ParseResult,
    PromptInstance,
    VgRecord,
    load_detections,
    parse_vg_tsv,
    read_detection_file,
    read_instances,
    write_instances,
)
from tinymmt.datapipe.boxes import iou, select_tag
from tinymmt.datapipe.prompts import (
    CAPTION_TEMPLATE,
    MMT_TEMPLATE,
    TEXT_ONLY_TEMPLATE,
    back_translation_augment,
    render_prompt,
    reverse_instance,
)
from tinymmt.datapipe.sampling import mix_samples
from tinymmt.datapipe.stats import CorpusStats, SplitStats, corpus_stats
from tinymmt.datapipe.images import ImageLoader, make_synth_loader, synth_image

__all__ = [
    "BoundingBox",
    "CAPTION_TEMPLATE",
    "CorpusStats",
    "DetectedObject",
    "ImageLoader",
    "LANGS",
    "LANG_NAMES",
    "MMT_TEMPLATE",
    "ParseIssue",
    "ParseResult",
    "PromptInstance",
    "SPLITS",
    "SplitStats",
    "TASKS",
    "TEXT_ONLY_TEMPLATE",
    "VgRecord",
    "back_translation_augment",
    "corpus_stats",
    "iou",
    "load_detections",
    "make_synth_loader",
    "mix_samples",
    "parse_vg_tsv",
    "read_detection_file",
    "read_instances",
    "render_prompt",
    "reverse_instance",
    "select_tag",
    "synth_image",
    "write_instances",
]
