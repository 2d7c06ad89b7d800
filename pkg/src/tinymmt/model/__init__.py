from tinymmt.model.config import ModelConfig
from tinymmt.model.vocab import BOS, EOS, HUM, IMG, PAD, SYS, Vocabulary
from tinymmt.model.multimodal import Assembled, MultimodalModel
from tinymmt.model.lora import (
    LORA_DEFAULT_ALPHA,
    LORA_DEFAULT_R,
    LoraAdapter,
    default_lora_targets,
    lora_attach,
    lora_merge,
)

__all__ = [
    "Assembled",
    "BOS",
    "EOS",
    "HUM",
    "IMG",
    "LORA_DEFAULT_ALPHA",
    "LORA_DEFAULT_R",
    "LoraAdapter",
    "ModelConfig",
    "MultimodalModel",
    "PAD",
    "SYS",
    "Vocabulary",
    "default_lora_targets",
    "lora_attach",
    "lora_merge",
]
