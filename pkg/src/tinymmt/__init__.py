"""tinymmt: desk-scale grounded multimodal machine translation.

A from-scratch stack: dense tensors with reverse-mode autodiff, a toy
vision-encoder / adapter / decoder-LM model with optional low-rank adapters,
a staged training schedule with per-component freezing, a Visual Genome
instruction-data pipeline, and a BLEU/RIBES evaluation suite.
"""

__version__ = "0.1.0"
