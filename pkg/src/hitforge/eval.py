"""Confusion matrices, accuracy/precision/recall and the results report.

Report files written by :func:`emit_report`:

``results.csv``
    One row per model; columns ``accuracy_<split>``, ``precision_<split>``,
    ``recall_<split>`` for each split (test first, then val, then others).
``confusion_<model>_<split>.csv``
    Predicted (rows) by actual (columns), hit first.
``accuracy.tsv``
    ``model  split  accuracy`` rows for grouped bar charts.
``accuracy.svg``
    The same data as a rendered grouped bar chart.

Metrics are written with 4 decimals (round-half-even); an undefined
precision or recall is written as ``NA``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import HitforgeError

NA = "NA"
SPLIT_ORDER = ("test", "val", "train")
_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3")


class EvalError(HitforgeError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(predictions, labels) -> ConfusionMatrix:
    p = np.asarray(predictions).astype(np.int64).ravel()
    t = np.asarray(labels).astype(np.int64).ravel()
    if p.shape != t.shape:
        raise EvalError(f"{p.size} predictions for {t.size} labels")
    if p.size == 0:
        raise EvalError("empty evaluation set")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (t == 1))), fp=int(np.sum((p == 1) & (t == 0))),
        fn=int(np.sum((p == 0) & (t == 1))), tn=int(np.sum((p == 0) & (t == 0))))


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: Optional[float]  # None when nothing was predicted positive
    recall: Optional[float]  # None when there are no positives


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.total <= 0:
        raise EvalError("empty confusion matrix")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    return Metrics((cm.tp + cm.tn) / cm.total, precision, recall)


@dataclass(frozen=True)
class MetricsReport:
    model: str
    split: str
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    cm: Optional[ConfusionMatrix] = None

    @classmethod
    def from_confusion(cls, model: str, split: str, cm: ConfusionMatrix) -> "MetricsReport":
        m = metrics(cm)
        return cls(model, split, m.accuracy, m.precision, m.recall, cm)

    @classmethod
    def evaluate(cls, model_name: str, split: str, predictions, labels) -> "MetricsReport":
        return cls.from_confusion(model_name, split, confusion(predictions, labels))

    def to_dict(self) -> dict:
        d = {"model": self.model, "split": self.split, "accuracy": self.accuracy,
             "precision": self.precision, "recall": self.recall}
        if self.cm is not None:
            d.update(tp=self.cm.tp, fp=self.cm.fp, fn=self.cm.fn, tn=self.cm.tn)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        cm = None
        if "tp" in d:
            cm = ConfusionMatrix(int(d["tp"]), int(d["fp"]), int(d["fn"]), int(d["tn"]))
        return cls(d["model"], d["split"], d["accuracy"], d["precision"], d["recall"], cm)


def fmt_metric(value: Optional[float]) -> str:
    if value is None:
        return NA
    return str(Decimal(repr(float(value))).quantize(Decimal("0.0001"), ROUND_HALF_EVEN))


def _splits(reports: Sequence[MetricsReport]) -> list[str]:
    present = {r.split for r in reports}
    known = [s for s in SPLIT_ORDER if s in present]
    return known + sorted(present - set(SPLIT_ORDER))


def _models(reports: Sequence[MetricsReport]) -> list[str]:
    seen: list[str] = []
    for r in reports:
        if r.model not in seen:
            seen.append(r.model)
    return seen


def results_rows(reports: Sequence[MetricsReport]) -> tuple[list[str], list[list[str]]]:
    splits = _splits(reports)
    header = ["model"] + [f"{m}_{s}" for m in ("accuracy", "precision", "recall")
                          for s in splits]
    index = {(r.model, r.split): r for r in reports}
    rows = []
    for model in _models(reports):
        row = [model]
        for metric in ("accuracy", "precision", "recall"):
            for s in splits:
                r = index.get((model, s))
                row.append(fmt_metric(getattr(r, metric)) if r else NA)
        rows.append(row)
    return header, rows


def read_results(path) -> list[MetricsReport]:
    """Parse ``results.csv`` back into (confusion-less) reports."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        out = []
        for row in reader:
            vals = dict(zip(header[1:], row[1:]))
            splits = [c[len("accuracy_"):] for c in header if c.startswith("accuracy_")]
            for s in splits:
                if vals[f"accuracy_{s}"] == NA:
                    continue
                get = lambda m: None if vals[f"{m}_{s}"] == NA else float(vals[f"{m}_{s}"])
                out.append(MetricsReport(row[0], s, get("accuracy"), get("precision"),
                                         get("recall")))
    return out


def _svg(reports: Sequence[MetricsReport]) -> str:
    models = _models(reports)
    splits = _splits(reports)
    acc = {(r.model, r.split): r.accuracy for r in reports}
    W, H, left, top, bottom = 640, 360, 60, 30, 60
    plot_h = H - top - bottom
    group_w = (W - left - 20) / max(1, len(models))
    bar_w = group_w * 0.8 / max(1, len(splits))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    for t in range(0, 11, 2):
        y = top + plot_h * (1 - t / 10)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{W - 20}" y2="{y:.2f}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{t / 10:.1f}</text>')
    for gi, model in enumerate(models):
        gx = left + gi * group_w + group_w * 0.1
        for si, split in enumerate(splits):
            a = acc.get((model, split))
            if a is None:
                continue
            h = plot_h * a
            x = gx + si * bar_w
            out.append(f'<rect x="{x:.2f}" y="{top + plot_h - h:.2f}" width="{bar_w:.2f}" '
                       f'height="{h:.2f}" fill="{_PALETTE[si % len(_PALETTE)]}">'
                       f'<title>{model} {split}: {fmt_metric(a)}</title></rect>')
        out.append(f'<text x="{gx + group_w * 0.4:.2f}" y="{H - bottom + 16}" '
                   f'text-anchor="middle">{model}</text>')
    for si, split in enumerate(splits):
        x = left + si * 90
        out.append(f'<rect x="{x}" y="{H - 24}" width="12" height="12" '
                   f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        out.append(f'<text x="{x + 16}" y="{H - 14}">{split}</text>')
    out.append(f'<text x="{left}" y="{top - 10}">accuracy</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(reports: Sequence[MetricsReport], out_dir) -> list[Path]:
    """Write the results table, confusion matrices and accuracy chart data."""
    reports = list(reports)
    if not reports:
        raise EvalError("nothing to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise EvalError(f"cannot create {out}: {exc}") from exc
    written = []

    def write_csv(name, header, rows):
        path = out / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
        except OSError as exc:
            raise EvalError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    header, rows = results_rows(reports)
    write_csv("results.csv", header, rows)
    for r in reports:
        if r.cm is None:
            continue
        write_csv(f"confusion_{r.model}_{r.split}.csv", ["predicted", "actual_hit",
                                                         "actual_non_hit"],
                  [["hit", r.cm.tp, r.cm.fp], ["non_hit", r.cm.fn, r.cm.tn]])
    tsv = out / "accuracy.tsv"
    with open(tsv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("model\tsplit\taccuracy\n")
        for r in reports:
            fh.write(f"{r.model}\t{r.split}\t{fmt_metric(r.accuracy)}\n")
    written.append(tsv)
    svg = out / "accuracy.svg"
    svg.write_text(_svg(reports), encoding="utf-8")
    written.append(svg)
    return written
