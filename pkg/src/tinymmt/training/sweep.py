"""Learning-rate / epoch grid search over stage-3 finetuning runs."""

from __future__ import annotations

from typing import Callable, Sequence

from tinymmt.datapipe.images import ImageLoader, make_synth_loader
from tinymmt.datapipe.records import PromptInstance
from tinymmt.errors import DataError
from tinymmt.metrics.bleu import bleu
from tinymmt.metrics.tokenizer import tokenize
from tinymmt.model.multimodal import MultimodalModel
from tinymmt.training.loop import run_stage, validation_loss
from tinymmt.training.stages import StageConfig


def generate_hypotheses(model: MultimodalModel, dataset: Sequence[PromptInstance],
                        image_loader: ImageLoader | None = None,
                        max_new_tokens: int | None = None) -> list[str]:
    """Greedy hypotheses for each instance's prompt, decoded to text."""
    if image_loader is None:
        image_loader = make_synth_loader(model.config.image_size)
    out = []
    for inst in dataset:
        image = image_loader(inst.image_id) if inst.image_id is not None else None
        budget = max_new_tokens
        if budget is None:
            budget = min(2 * len(inst.response) + 8, model.config.c_total)
        ids = model.generate(model.vocab.encode(inst.prompt), image, max_new_tokens=budget)
        out.append(model.vocab.decode(ids, on_special="skip"))
    return out


def evaluate_bleu(model: MultimodalModel, dataset: Sequence[PromptInstance],
                  image_loader: ImageLoader | None = None, smooth: bool = False) -> float:
    hyps = generate_hypotheses(model, dataset, image_loader)
    return bleu([tokenize(h) for h in hyps],
                [tokenize(inst.response) for inst in dataset], smooth=smooth)


def hyperparameter_sweep(
    base_model: MultimodalModel,
    train_dataset: Sequence[PromptInstance],
    val_dataset: Sequence[PromptInstance],
    lrs: Sequence[float],
    epochs_list: Sequence[int],
    seed: int = 0,
    mode: str = "full",
    batch_size: int = 8,
    max_steps: int | None = None,
    eval_fn: Callable[[MultimodalModel, Sequence[PromptInstance]], dict] | None = None,
    image_loader: ImageLoader | None = None,
) -> list[dict]:
    """Train one stage-3 run per (lr, epochs) cell from a shared starting model.

    Rows come back ranked by validation BLEU (descending, validation loss as
    the tiebreaker); a failed cell keeps its slot with an 'error' field
    instead of aborting the sweep. Every cell starts from a clone of
    base_model and uses the same fixed seed, so the ranking is reproducible.
    """
    if not lrs or not epochs_list:
        raise DataError("sweep grid is empty")

    def default_eval(model: MultimodalModel, val: Sequence[PromptInstance]) -> dict:
        return {
            "bleu": evaluate_bleu(model, val, image_loader, smooth=True),
            "val_loss": validation_loss(model, val, image_loader),
        }

    evaluate = eval_fn or default_eval
    rows: list[dict] = []
    for lr in lrs:
        for epochs in epochs_list:
            row: dict = {"lr": lr, "epochs": epochs, "error": None}
            try:
                model = base_model.clone()
                cfg = StageConfig(stage=3, lr=lr, epochs=epochs, batch_size=batch_size,
                                  seed=seed, mode=mode, max_steps=max_steps)
                run_stage(model, train_dataset, cfg, image_loader=image_loader)
                row.update(evaluate(model, val_dataset))
            except Exception as exc:  # propagate per-cell, keep sweeping
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)

    def rank_key(row: dict):
        failed = row["error"] is not None
        return (failed, -row.get("bleu", 0.0), row.get("val_loss", float("inf")))

    return sorted(rows, key=rank_key)
