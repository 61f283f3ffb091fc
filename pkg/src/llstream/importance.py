"""Feature-importance evolution and stability comparison between setups.

Per-step importances are mean signed input gradients of the model's output
probability over the current validation window.  For readability they are
discretized per step into positive / middle / negative bands relative to that
step's largest magnitude, and setups are compared by the share of features
whose importance varies more over time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nn

POS_CODE = 0.5
MID_CODE = 0.0
NEG_CODE = -0.5
BAND = 0.1  # fraction of the per-step max magnitude treated as "middle"
RAW_VARIANCE_TOL = 1e-9


@dataclass(eq=False)
class ImportanceMatrix:
    """Importance values with shape (features, steps)."""

    values: np.ndarray
    steps: list[int]
    method: str = "mean_input_gradient"

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.steps):
            raise ValueError("values must be (features, steps) matching the step list")


def compute_importance(model: nn.MlpModel, valid_points: np.ndarray) -> np.ndarray:
    """Mean over points of the output-probability gradient per feature."""
    x = np.asarray(valid_points, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a nonempty 2-D sample to attribute")
    grad = nn.output_input_grad(model, x)
    return grad.sum(axis=0)


def discretize_importance(matrix: ImportanceMatrix | np.ndarray) -> np.ndarray:
    """Per-step banding into {+0.5, 0.0, -0.5}.

    A value is positive if it exceeds one tenth of the step's maximum
    magnitude, negative below minus that, middle otherwise; an all-zero step
    is entirely middle.
    """
    values = matrix.values if isinstance(matrix, ImportanceMatrix) else np.asarray(matrix)
    codes = np.full(values.shape, MID_CODE)
    for col in range(values.shape[1]):
        mx = np.max(np.abs(values[:, col]))
        if mx == 0:
            continue
        codes[values[:, col] > BAND * mx, col] = POS_CODE
        codes[values[:, col] < -BAND * mx, col] = NEG_CODE
    return codes


def _population_variance(rows: np.ndarray) -> np.ndarray:
    return np.mean((rows - rows.mean(axis=1, keepdims=True)) ** 2, axis=1)


@dataclass
class VarianceComparison:
    labels: tuple[str, str]
    n_features: int
    raw_pct: dict[str, float] = field(default_factory=dict)
    discretized_pct: dict[str, float] = field(default_factory=dict)


def variance_report(
    matrix_a: ImportanceMatrix | np.ndarray,
    matrix_b: ImportanceMatrix | np.ndarray,
    labels: tuple[str, str] = ("a", "b"),
) -> VarianceComparison:
    """Share of features whose importance varies more in one setup than the
    other, on both raw values and discretized codes."""
    a = matrix_a.values if isinstance(matrix_a, ImportanceMatrix) else np.asarray(matrix_a)
    b = matrix_b.values if isinstance(matrix_b, ImportanceMatrix) else np.asarray(matrix_b)
    if a.shape != b.shape:
        raise ValueError(f"matrix shapes differ: {a.shape} vs {b.shape}")
    n = a.shape[0]

    def shares(var_a: np.ndarray, var_b: np.ndarray, tol: float) -> dict[str, float]:
        higher_a = int(np.sum(var_a > var_b + tol))
        higher_b = int(np.sum(var_b > var_a + tol))
        same = n - higher_a - higher_b
        return {
            labels[0]: 100.0 * higher_a / n,
            labels[1]: 100.0 * higher_b / n,
            "same": 100.0 * same / n,
        }

    report = VarianceComparison(labels=labels, n_features=n)
    report.raw_pct = shares(
        _population_variance(a), _population_variance(b), RAW_VARIANCE_TOL
    )
    report.discretized_pct = shares(
        _population_variance(discretize_importance(a)),
        _population_variance(discretize_importance(b)),
        0.0,
    )
    return report


def select_top_features(matrix: ImportanceMatrix | np.ndarray, k: int = 10) -> list[int]:
    """Indices of the features with the highest sum of absolute mean and
    variance, computed on per-step max-normalized importances."""
    values = matrix.values if isinstance(matrix, ImportanceMatrix) else np.asarray(matrix)
    normed = values.copy().astype(float)
    for col in range(normed.shape[1]):
        mx = np.max(np.abs(normed[:, col]))
        if mx > 0:
            normed[:, col] /= mx
    score = np.abs(normed.mean(axis=1)) + _population_variance(normed)
    order = np.argsort(-score, kind="stable")
    return [int(i) for i in order[:k]]
