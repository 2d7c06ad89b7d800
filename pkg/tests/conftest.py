import unicodedata

import numpy as np
import pytest

from tinymmt.datapipe import BoundingBox, VgRecord, render_prompt
from tinymmt.model import ModelConfig, MultimodalModel, Vocabulary

WORDS = ["red", "blue", "green", "cat", "dog", "bird", "sun", "moon",
         "tree", "fish", "hat", "cup"]
HINDI = {
    "red": "लाल", "blue": "नीला", "green": "हरा", "cat": "बिल्ली",
    "dog": "कुत्ता", "bird": "चिड़िया", "sun": "सूरज", "moon": "चाँद",
    "tree": "पेड़", "fish": "मछली", "hat": "टोपी", "cup": "प्याला",
}


def make_records(n, seed=0, split="train", lang="hi", words_per=2):
    """Distinct synthetic translation records over a tiny lexicon."""
    rng = np.random.default_rng(seed)
    seen = set()
    records = []
    i = 0
    while len(records) < n:
        sel = tuple(rng.choice(WORDS, size=words_per, replace=False))
        if sel in seen:
            continue
        seen.add(sel)
        records.append(VgRecord(
            image_id=f"{split}{i:03d}",
            box=BoundingBox(int(rng.integers(0, 16)), int(rng.integers(0, 16)),
                            int(rng.integers(4, 20)), int(rng.integers(4, 20))),
            english=unicodedata.normalize("NFC", " ".join(sel)),
            target_lang=lang,
            target_text=unicodedata.normalize("NFC", " ".join(HINDI[w] for w in sel)),
            split=split,
        ))
        i += 1
    return records


def make_instances(records, task, tag="object"):
    if task == "text_only":
        return [render_prompt(r, task) for r in records]
    return [render_prompt(r, task, tag) for r in records]


def build_model(instances, seed=0, c_total=512, **overrides):
    """Vocabulary harvested from the instances, model built around it."""
    texts = [i.prompt for i in instances] + [i.response for i in instances]
    vocab = Vocabulary.from_texts(texts)
    cfg = ModelConfig(vocab_size=len(vocab), c_total=c_total, **overrides)
    return MultimodalModel(cfg, vocab, seed=seed)


@pytest.fixture
def tiny_text_setup():
    records = make_records(6, seed=1)
    instances = make_instances(records, "text_only")
    model = build_model(instances, seed=7, c_total=256)
    return model, instances


@pytest.fixture
def tiny_mm_setup():
    records = make_records(6, seed=2)
    instances = make_instances(records, "mmt")
    model = build_model(instances, seed=8, c_total=512)
    return model, instances
