"""Synthetic labeled event streams with controlled concept drift.

Points carry i.i.d. standard-normal features; labels come from linear
concepts whose offsets are calibrated by bisection so the stream hits a target
positive rate even under label noise.  Drift between concepts can be sudden,
gradual (probabilistic hand-over), incremental (parameter interpolation) or
recurrent (cycling), and points can optionally be clustered into rerun-style
cohorts and stamped with synthetic timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from .stream import DataPoint
from .util import rng_from

FEATURES_TAG = 11
CONCEPT_TAG = 12
NOISE_TAG = 13
MIX_TAG = 14

# Positive-rate presets covering the imbalance range of the target use cases.
PREVALENCE_PRESETS = (0.05, 0.13, 0.15, 0.24, 0.27, 0.30, 0.37)


@dataclass(frozen=True)
class Concept:
    """A linear labeling rule: positive iff ``w @ x + offset > 0``."""

    weights: np.ndarray
    offset: float = 0.0
    id: str = "c0"


@dataclass(frozen=True)
class Drift:
    kind: str = "none"  # none | sudden | gradual | incremental | recurrent
    at: int | None = None
    start: int | None = None
    length: int | None = None
    period: int | None = None

    @staticmethod
    def none() -> "Drift":
        return Drift(kind="none")

    @staticmethod
    def sudden(at: int) -> "Drift":
        return Drift(kind="sudden", at=at)

    @staticmethod
    def gradual(start: int, length: int) -> "Drift":
        return Drift(kind="gradual", start=start, length=length)

    @staticmethod
    def incremental(start: int, length: int) -> "Drift":
        return Drift(kind="incremental", start=start, length=length)

    @staticmethod
    def recurrent(period: int) -> "Drift":
        return Drift(kind="recurrent", period=period)


@dataclass(frozen=True)
class StreamSpec:
    n: int
    d: int
    beta: float
    drift: Drift = field(default_factory=Drift.none)
    concepts: tuple[Concept, ...] = ()
    noise: float = 0.0
    seed: int = 0
    cohort_pattern: tuple[int, ...] | None = None
    points_per_day: float | None = None
    start_time: datetime = datetime(2020, 1, 1)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0.0 <= self.noise < 0.5:
            raise ValueError(f"noise must lie in [0, 0.5), got {self.noise}")
        if self.cohort_pattern is not None and any(s < 1 for s in self.cohort_pattern):
            raise ValueError("cohort sizes must be positive")
        _validate_drift(self.drift, self.n)


def _validate_drift(drift: Drift, n: int) -> None:
    def inside(value: int | None, name: str) -> None:
        if value is None or not 1 <= value <= n:
            raise ValueError(f"drift {name} must lie in [1, {n}], got {value}")

    if drift.kind == "none":
        return
    if drift.kind == "sudden":
        inside(drift.at, "at")
    elif drift.kind in ("gradual", "incremental"):
        inside(drift.start, "start")
        if drift.length is None or drift.length < 1:
            raise ValueError("drift length must be >= 1")
    elif drift.kind == "recurrent":
        if drift.period is None or drift.period < 1:
            raise ValueError("drift period must be >= 1")
    else:
        raise ValueError(f"unknown drift kind: {drift.kind!r}")


def random_concepts(d: int, count: int, seed: int, orthogonal: bool = False) -> tuple[Concept, ...]:
    """Unit-norm random concept weight vectors (orthonormal if requested)."""
    rng = rng_from(seed, CONCEPT_TAG)
    raw = rng.normal(size=(max(count, 1), d))
    if orthogonal:
        if count > d:
            raise ValueError("cannot build more orthogonal concepts than dimensions")
        q, _ = np.linalg.qr(raw.T)
        raw = q.T[:count]
    raw = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return tuple(Concept(weights=raw[i], id=f"c{i}") for i in range(count))


def _required_concepts(drift: Drift) -> int:
    return 1 if drift.kind == "none" else 2


def _calibrate_offset(scores: np.ndarray, target: float) -> float:
    """Offset such that ``mean(scores + offset > 0)`` is as close to ``target``
    as the empirical score distribution allows."""
    lo = -float(np.max(scores)) - 1.0
    hi = -float(np.min(scores)) + 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(np.mean(scores + mid > 0)) < target:
            lo = mid
        else:
            hi = mid
    offset = hi
    achieved = float(np.mean(scores + offset > 0))
    tolerance = max(2.0 / len(scores), 1e-3)
    if abs(achieved - target) > tolerance:
        raise ValueError(
            f"positive rate {target:.3f} unreachable (best achievable {achieved:.3f}); "
            "the concept weights are likely degenerate"
        )
    return offset


def _active_weights(
    spec: StreamSpec, concepts: Sequence[Concept], x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-point scores and the active-concept index (or -1 for interpolated)."""
    n = spec.n
    drift = spec.drift
    scores_by_concept = [x @ c.weights + c.offset for c in concepts]
    idx = np.zeros(n, dtype=int)

    if drift.kind == "sudden":
        idx[drift.at - 1 :] = 1
    elif drift.kind == "gradual":
        start = drift.start - 1
        ramp = np.clip((np.arange(n) - start) / drift.length, 0.0, 1.0)
        mix_rng = rng_from(spec.seed, MIX_TAG)
        idx = (mix_rng.random(n) < ramp).astype(int)
    elif drift.kind == "recurrent":
        idx = (np.arange(n) // drift.period) % len(concepts)
    elif drift.kind == "incremental":
        start = drift.start - 1
        alpha = np.clip((np.arange(n) - start) / drift.length, 0.0, 1.0)
        scores = (1.0 - alpha) * scores_by_concept[0] + alpha * scores_by_concept[1]
        return scores, np.where(alpha == 0.0, 0, np.where(alpha == 1.0, 1, -1))

    scores = np.choose(idx, scores_by_concept)
    return scores, idx


def _materialize(spec: StreamSpec) -> tuple[np.ndarray, tuple[Concept, ...]]:
    """Feature matrix and offset-calibrated concepts for a spec."""
    concepts = spec.concepts or random_concepts(
        spec.d, _required_concepts(spec.drift), spec.seed
    )
    if len(concepts) < _required_concepts(spec.drift):
        raise ValueError(f"drift kind {spec.drift.kind!r} needs at least two concepts")
    for c in concepts:
        if c.weights.shape != (spec.d,):
            raise ValueError("concept weight dimension does not match spec.d")
        if np.linalg.norm(c.weights) == 0:
            raise ValueError("concept weights must be nonzero")

    # With symmetric label noise the raw concept rate must be deflated so the
    # observed rate still lands on beta.
    raw_target = (spec.beta - spec.noise) / (1.0 - 2.0 * spec.noise)
    if not 0.0 < raw_target < 1.0:
        raise ValueError(
            f"beta {spec.beta} is unreachable under noise {spec.noise}"
        )

    rng_x = rng_from(spec.seed, FEATURES_TAG)
    x = rng_x.normal(size=(spec.n, spec.d))

    calibrated = tuple(
        Concept(
            weights=c.weights,
            offset=_calibrate_offset(x @ c.weights, raw_target),
            id=c.id,
        )
        for c in concepts
    )
    return x, calibrated


def calibrated_concepts(spec: StreamSpec) -> tuple[Concept, ...]:
    """The labeling rules a spec will actually apply, offsets included."""
    return _materialize(spec)[1]


def generate_stream(spec: StreamSpec) -> list[DataPoint]:
    """Materialize the stream described by ``spec`` as ordered data points."""
    x, calibrated = _materialize(spec)
    scores, _ = _active_weights(spec, calibrated, x)
    labels = (scores > 0).astype(int)

    if spec.noise > 0:
        rng_noise = rng_from(spec.seed, NOISE_TAG)
        flips = rng_noise.random(spec.n) < spec.noise
        labels = np.where(flips, 1 - labels, labels)

    cohorts: list[str | None] = [None] * spec.n
    if spec.cohort_pattern is not None:
        pattern = spec.cohort_pattern
        i = 0
        cohort_idx = 0
        while i < spec.n:
            size = pattern[cohort_idx % len(pattern)]
            for j in range(i, min(i + size, spec.n)):
                cohorts[j] = f"c{cohort_idx:06d}"
            i += size
            cohort_idx += 1

    points = []
    for i in range(spec.n):
        timestamp = None
        if spec.points_per_day is not None:
            timestamp = spec.start_time + timedelta(days=i / spec.points_per_day)
        points.append(
            DataPoint(
                id=f"p{i:07d}",
                order=i,
                label=int(labels[i]),
                features=x[i],
                cohort=cohorts[i],
                timestamp=timestamp,
            )
        )
    return points
