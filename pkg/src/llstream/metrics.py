"""Confusion-matrix metrics for imbalanced binary classification.

Positive-class F1 is the headline score; the geometric mean of recall and
specificity is reported alongside it because positive rates in the target
streams are low.  Ratios with a zero denominator are reported as 0 and listed
in ``flags`` instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


@dataclass(frozen=True)
class StepMetrics:
    precision: float
    recall: float
    specificity: float
    f1: float
    g_mean: float
    prevalence: float
    flags: tuple[str, ...] = field(default=())


def confusion_from_predictions(pred, labels) -> Confusion:
    pairs = list(zip(pred, labels))
    return Confusion(
        tp=sum(1 for p, y in pairs if p == 1 and y == 1),
        fp=sum(1 for p, y in pairs if p == 1 and y == 0),
        tn=sum(1 for p, y in pairs if p == 0 and y == 0),
        fn=sum(1 for p, y in pairs if p == 0 and y == 1),
    )


def evaluate(confusion: Confusion) -> StepMetrics:
    """Precision, recall, specificity, F1 and G-mean for one confusion matrix."""
    c = confusion
    if c.total == 0:
        raise ValueError("cannot evaluate an all-zero confusion matrix")
    if min(c.tp, c.fp, c.tn, c.fn) < 0:
        raise ValueError("confusion counts must be nonnegative")

    flags: list[str] = []

    def ratio(num: int, denom: int, name: str) -> float:
        if denom == 0:
            flags.append(name)
            return 0.0
        return num / denom

    precision = ratio(c.tp, c.tp + c.fp, "precision_undefined")
    recall = ratio(c.tp, c.tp + c.fn, "recall_undefined")
    specificity = ratio(c.tn, c.tn + c.fp, "specificity_undefined")
    if precision + recall == 0:
        f1 = 0.0
        if "precision_undefined" not in flags and "recall_undefined" not in flags:
            flags.append("f1_zero")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    g_mean = math.sqrt(recall * specificity)
    prevalence = (c.tp + c.fn) / c.total
    return StepMetrics(
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        g_mean=g_mean,
        prevalence=prevalence,
        flags=tuple(flags),
    )


def aggregate(run, mode: str = "pooled") -> tuple[StepMetrics, list[StepMetrics]]:
    """Summarize a run's per-step confusions.

    ``pooled`` sums the confusion matrices and evaluates once;
    ``per_step_mean`` evaluates each step and averages the metric values
    unweighted.  Both also return the per-step metric series.
    """
    confusions = [step.confusion for step in run.steps]
    if not confusions:
        raise ValueError("run has no scored steps")
    series = [evaluate(c) for c in confusions]
    if mode == "pooled":
        total = Confusion()
        for c in confusions:
            total = total + c
        return evaluate(total), series
    if mode == "per_step_mean":
        def mean(attr: str) -> float:
            return sum(getattr(m, attr) for m in series) / len(series)

        summary = StepMetrics(
            precision=mean("precision"),
            recall=mean("recall"),
            specificity=mean("specificity"),
            f1=mean("f1"),
            g_mean=mean("g_mean"),
            prevalence=mean("prevalence"),
        )
        return summary, series
    raise ValueError(f"unknown aggregation mode: {mode!r}")
