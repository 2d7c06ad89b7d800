"""Scoring line-aligned hypothesis/reference files and leaderboard tables."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from tinymmt.errors import DataError
from tinymmt.metrics.bleu import bleu
from tinymmt.metrics.ribes import DEFAULT_ALPHA, DEFAULT_BETA, ribes
from tinymmt.metrics.tokenizer import tokenize

# leaderboard column order: challenge then test, per language
TABLE_COLUMNS = [
    ("hi", "challenge", "Hi-Ch"),
    ("hi", "test", "Hi-Test"),
    ("bn", "challenge", "Bn-Ch"),
    ("bn", "test", "Bn-Test"),
    ("ml", "challenge", "Ml-Ch"),
    ("ml", "test", "Ml-Test"),
]


@dataclass(frozen=True)
class MetricReport:
    lang: str
    split: str
    bleu: float      # [0, 100]
    ribes: float     # [0, 1]
    n_sentences: int
    hyp_tokens: int
    ref_tokens: int

    def to_dict(self) -> dict:
        """JSON view; scores rounded the way tables print them (BLEU to one
        decimal, RIBES to three)."""
        return {
            "lang": self.lang,
            "split": self.split,
            "bleu": round(self.bleu, 1),
            "ribes": round(self.ribes, 3),
            "n_sentences": self.n_sentences,
            "hyp_tokens": self.hyp_tokens,
            "ref_tokens": self.ref_tokens,
        }


def evaluate_lines(hyp_lines: Sequence[str], ref_lines: Sequence[str], lang: str,
                   split: str = "test", smooth: bool = False,
                   alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> MetricReport:
    if len(hyp_lines) != len(ref_lines):
        raise DataError(
            f"hypothesis file has {len(hyp_lines)} lines but reference file has "
            f"{len(ref_lines)}; they must be line-aligned"
        )
    if not hyp_lines:
        raise DataError("empty corpus")
    hyps = [tokenize(line) for line in hyp_lines]
    refs = [tokenize(line) for line in ref_lines]
    return MetricReport(
        lang=lang,
        split=split,
        bleu=bleu(hyps, refs, smooth=smooth),
        ribes=ribes(hyps, refs, alpha=alpha, beta=beta),
        n_sentences=len(hyps),
        hyp_tokens=sum(len(h) for h in hyps),
        ref_tokens=sum(len(r) for r in refs),
    )


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def evaluate_files(hyp_path, ref_path, lang: str, split: str = "test",
                   smooth: bool = False, alpha: float = DEFAULT_ALPHA,
                   beta: float = DEFAULT_BETA) -> MetricReport:
    """Score one hypothesis file against one reference file (UTF-8, one
    sentence per line)."""
    return evaluate_lines(_read_lines(hyp_path), _read_lines(ref_path), lang,
                          split=split, smooth=smooth, alpha=alpha, beta=beta)


def write_report(report: MetricReport, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(
        json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, path)


def read_report(path) -> MetricReport:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return MetricReport(
        lang=d["lang"], split=d["split"], bleu=d["bleu"], ribes=d["ribes"],
        n_sentences=d["n_sentences"], hyp_tokens=d["hyp_tokens"],
        ref_tokens=d["ref_tokens"],
    )


def format_leaderboard(reports: Sequence[MetricReport], label: str = "ours") -> str:
    """One leaderboard-style row: challenge and test columns per language,
    '-' where a cell has no report."""
    by_cell = {(r.lang, r.split): r for r in reports}
    header_1 = [""]
    header_2 = ["system"]
    values = [label]
    for lang, split, title in TABLE_COLUMNS:
        header_1.extend([title, ""])
        header_2.extend(["BLEU", "RIBES"])
        report = by_cell.get((lang, split))
        if report is None:
            values.extend(["-", "-"])
        else:
            values.extend([f"{report.bleu:.1f}", f"{report.ribes:.3f}"])
    widths = [max(len(a), len(b), len(c)) for a, b, c in zip(header_1, header_2, values)]
    lines = []
    for row in (header_1, header_2, values):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
