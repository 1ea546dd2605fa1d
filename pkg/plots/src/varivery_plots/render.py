"""Figure builders for the three supported CSV shapes.

Input columns are validated against the documented headers before any
drawing happens; a mismatch raises SchemaError carrying the column diff.
Output files are written atomically (temp file + rename) and the input CSVs
are never touched.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMAS = {
    "bp_scaling": ["n", "point_estimate", "std_error", "n_x", "n_theta", "seed"],
    "train_curve": ["step", "risk", "grad_inf_norm"],
    "accuracy_bars": ["method", "train_accuracy", "test_accuracy"],
}


class SchemaError(ValueError):
    def __init__(self, path, missing, extra):
        self.missing = sorted(missing)
        self.extra = sorted(extra)
        super().__init__(f"{path}: missing columns {self.missing}, unexpected {self.extra}")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    log_y: bool | None = None  # None: kind decides
    title: str = ""

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise ValueError(f"unknown figure kind {self.kind!r}; know {sorted(SCHEMAS)}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_rows(path: str, kind: str) -> list[dict]:
    expected = SCHEMAS[kind]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = set(expected) - set(header)
        extra = set(header) - set(expected)
        if missing or extra:
            raise SchemaError(path, missing, extra)
        return list(reader)


def _fit_log_slope(ns, values):
    ns = np.asarray(ns, dtype=float)
    y = np.log(np.asarray(values, dtype=float))
    x_c = ns - ns.mean()
    sxx = float((x_c**2).sum())
    slope = float((x_c * y).sum() / sxx)
    intercept = float(y.mean() - slope * ns.mean())
    if len(ns) > 2:
        resid = y - (intercept + slope * ns)
        se = math.sqrt(float((resid**2).sum()) / (len(ns) - 2) / sxx)
    else:
        se = float("nan")
    return slope, se, intercept


def _atomic_save(fig, output: str):
    out = Path(output)
    out.parent.mkdir(parents=True, exist_ok=True)
    suffix = out.suffix or ".png"
    fd, tmp = tempfile.mkstemp(suffix=suffix, dir=out.parent)
    os.close(fd)
    try:
        fig.savefig(tmp)
        os.replace(tmp, out)
    finally:
        plt.close(fig)
        if os.path.exists(tmp):
            os.unlink(tmp)


def _render_bp_scaling(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5.2, 3.6), dpi=150)
    annotations = []
    for path in spec.inputs:
        rows = read_rows(path, "bp_scaling")
        ns = [int(r["n"]) for r in rows]
        est = [float(r["point_estimate"]) for r in rows]
        err = [float(r["std_error"]) for r in rows]
        label = Path(path).stem
        ax.errorbar(ns, est, yerr=err, marker="o", capsize=3, label=label)
        if len(ns) >= 3 and all(v > 0 for v in est):
            slope, se, intercept = _fit_log_slope(ns, est)
            grid = np.linspace(min(ns), max(ns), 50)
            ax.plot(grid, np.exp(intercept + slope * grid), "--", linewidth=1)
            annotations.append(f"{label}: slope {slope:+.3f} ± {se:.3f} per qubit")
    log_y = spec.log_y if spec.log_y is not None else True
    if log_y and all(
        float(r["point_estimate"]) > 0
        for path in spec.inputs
        for r in read_rows(path, "bp_scaling")
    ):
        ax.set_yscale("log")
    ax.set_xlabel("qubits")
    ax.set_ylabel("variance of circuit output")
    if annotations:
        ax.set_title(spec.title or "; ".join(annotations), fontsize=9)
    elif spec.title:
        ax.set_title(spec.title, fontsize=9)
    if len(spec.inputs) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_train_curve(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5.2, 3.6), dpi=150)
    all_positive = True
    for path in spec.inputs:
        rows = read_rows(path, "train_curve")
        steps = [int(r["step"]) for r in rows]
        risks = [float(r["risk"]) for r in rows]
        all_positive &= all(v > 0 for v in risks)
        ax.plot(steps, risks, label=Path(path).stem)
    log_y = spec.log_y if spec.log_y is not None else all_positive
    if log_y and all_positive:
        ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("empirical risk")
    if spec.title:
        ax.set_title(spec.title, fontsize=9)
    if len(spec.inputs) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _render_accuracy_bars(spec: FigureSpec):
    rows = []
    for path in spec.inputs:
        rows.extend(read_rows(path, "accuracy_bars"))
    methods = [r["method"] for r in rows]
    train = [float(r["train_accuracy"]) for r in rows]
    test = [float(r["test_accuracy"]) for r in rows]
    x = np.arange(len(methods))
    width = 0.38
    fig, ax = plt.subplots(figsize=(5.2, 3.6), dpi=150)
    ax.bar(x - width / 2, train, width, label="train")
    ax.bar(x + width / 2, test, width, label="test")
    ax.set_xticks(x)
    ax.set_xticklabels(methods, rotation=15, fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    if spec.title:
        ax.set_title(spec.title, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "bp_scaling": _render_bp_scaling,
    "train_curve": _render_train_curve,
    "accuracy_bars": _render_accuracy_bars,
}


def render(spec: FigureSpec) -> str:
    """Build the figure and write it atomically; returns the output path."""
    fig = _RENDERERS[spec.kind](spec)
    _atomic_save(fig, spec.output)
    return spec.output
