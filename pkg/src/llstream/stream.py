"""Chronological dataset model: time groups, pool partitioning, set building.

A stream is cut into successive groups of a fixed number of distinct cohort
keys (falling back to one key per point when cohorts are absent).  Within each
group every point is assigned once and forever to either the training pool or
the validation pool, stratified by class, so that no point can ever appear on
both sides of a fit anywhere in a run.  Test sets are always one full,
untouched group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

from .util import CROSSVAL_TAG, POOL_TAG, rng_from

TRAIN_POOL = "train"
VALID_POOL = "valid"


@dataclass(eq=False)
class DataPoint:
    """One labeled observation in stream order.

    ``cohort`` ties together points that must never be split across groups
    (e.g. reruns of the same job); ``order`` is the stream position key.
    """

    id: str
    order: int
    label: int
    features: np.ndarray
    cohort: str | None = None
    timestamp: datetime | None = None

    def group_key(self) -> str:
        return self.cohort if self.cohort is not None else f"#order:{self.order}"


@dataclass
class TimeGroup:
    index: int  # 1-based
    points: list[DataPoint]

    @property
    def ids(self) -> set[str]:
        return {p.id for p in self.points}

    def end_order(self) -> int:
        return max(p.order for p in self.points)

    def end_time(self) -> datetime | None:
        times = [p.timestamp for p in self.points if p.timestamp is not None]
        return max(times) if times else None


@dataclass
class StepSets:
    step: int
    train: list[DataPoint]
    valid: list[DataPoint]
    test: list[DataPoint]


class PoolLedger:
    """Immutable-once-assigned map from point id to its pool."""

    def __init__(self) -> None:
        self._pool: dict[str, str] = {}
        self._assigned_groups: set[int] = set()

    def pool_of(self, point_id: str) -> str:
        return self._pool[point_id]

    def has_group(self, index: int) -> bool:
        return index in self._assigned_groups

    def train_pool(self, group: TimeGroup) -> list[DataPoint]:
        return [p for p in group.points if self._pool[p.id] == TRAIN_POOL]

    def valid_pool(self, group: TimeGroup) -> list[DataPoint]:
        return [p for p in group.points if self._pool[p.id] == VALID_POOL]

    def _record(self, group: TimeGroup, valid_ids: set[str]) -> None:
        if group.index in self._assigned_groups:
            raise ValueError(f"group {group.index} is already partitioned")
        for p in group.points:
            self._pool[p.id] = VALID_POOL if p.id in valid_ids else TRAIN_POOL
        self._assigned_groups.add(group.index)


def _check_features(points: Sequence[DataPoint]) -> None:
    dims = {p.features.shape for p in points}
    if len(dims) > 1:
        raise ValueError(f"inconsistent feature dimensions in stream: {sorted(dims)}")


def assign_groups(points: Sequence[DataPoint], group_size: int) -> list[TimeGroup]:
    """Cut the stream into groups of ``group_size`` distinct cohort keys.

    Cohorts are packed atomically in order of first appearance, so a group may
    hold more points than keys when cohorts have reruns.  The final group may
    be short.
    """
    if not points:
        raise ValueError("stream is empty")
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")
    _check_features(points)

    ordered = sorted(points, key=lambda p: p.order)
    clusters: dict[str, list[DataPoint]] = {}
    cluster_order: list[str] = []
    for p in ordered:
        key = p.group_key()
        if key not in clusters:
            clusters[key] = []
            cluster_order.append(key)
        clusters[key].append(p)

    groups: list[TimeGroup] = []
    current: list[DataPoint] = []
    keys_in_group = 0
    for key in cluster_order:
        if keys_in_group == group_size:
            groups.append(TimeGroup(index=len(groups) + 1, points=current))
            current = []
            keys_in_group = 0
        current.extend(clusters[key])
        keys_in_group += 1
    groups.append(TimeGroup(index=len(groups) + 1, points=current))

    for g in groups:
        g.points.sort(key=lambda p: p.order)
    return groups


def partition_pools(
    ledger: PoolLedger, group: TimeGroup, valid_fraction: float, seed: int
) -> None:
    """Assign the group's points to pools, stratified by class.

    Per class, ``ceil(valid_fraction * n)`` points go to the validation pool;
    the rest stay trainable.  A group can only be partitioned once.
    """
    if not 0.0 < valid_fraction < 1.0:
        raise ValueError(f"valid_fraction must lie in (0, 1), got {valid_fraction}")
    rng = rng_from(seed, POOL_TAG, group.index)
    valid_ids: set[str] = set()
    for cls in (0, 1):
        members = [p.id for p in group.points if p.label == cls]
        if not members:
            continue
        take = int(np.ceil(valid_fraction * len(members)))
        picked = rng.choice(len(members), size=take, replace=False)
        valid_ids.update(members[i] for i in picked)
    ledger._record(group, valid_ids)


def build_ledger(groups: Sequence[TimeGroup], valid_fraction: float, seed: int) -> PoolLedger:
    ledger = PoolLedger()
    for g in groups:
        partition_pools(ledger, g, valid_fraction, seed)
    return ledger


def build_init_sets(
    groups: Sequence[TimeGroup],
    ledger: PoolLedger,
    init_window: int,
    valid_window: int,
) -> StepSets:
    """Sets for the initialization fit: train on the first ``init_window``
    groups' training pools, validate on the trailing ``valid_window`` groups'
    validation pools, test on the following full group."""
    if valid_window > init_window:
        raise ValueError("valid_window cannot exceed init_window")
    if len(groups) < init_window + 1:
        raise ValueError(
            f"need at least {init_window + 1} groups, stream has {len(groups)}"
        )
    train: list[DataPoint] = []
    for g in groups[:init_window]:
        train.extend(ledger.train_pool(g))
    valid: list[DataPoint] = []
    for g in groups[init_window - valid_window : init_window]:
        valid.extend(ledger.valid_pool(g))
    return StepSets(
        step=init_window,
        train=train,
        valid=valid,
        test=list(groups[init_window].points),
    )


def build_update_sets(
    groups: Sequence[TimeGroup],
    ledger: PoolLedger,
    t: int,
    valid_window: int,
    buffer_points: Sequence[DataPoint] = (),
) -> StepSets:
    """Sets for the incremental update at group ``t`` (1-based).

    Training data is group ``t``'s training pool plus the replay buffer
    contents (deduplicated by id); validation slides over the last
    ``valid_window`` groups' validation pools; the test set is all of group
    ``t + 1``.
    """
    if t < 1 or t + 1 > len(groups):
        raise ValueError(f"update step {t} needs groups {t} and {t + 1} to exist")
    group_t = groups[t - 1]
    if not ledger.has_group(group_t.index):
        raise ValueError(f"group {t} has no pool assignments")

    train = list(ledger.train_pool(group_t))
    seen = {p.id for p in train}
    for p in buffer_points:
        if p.id not in seen:
            train.append(p)
            seen.add(p.id)

    valid: list[DataPoint] = []
    for g in groups[max(0, t - valid_window) : t]:
        valid.extend(ledger.valid_pool(g))
    return StepSets(step=t, train=train, valid=valid, test=list(groups[t].points))


def to_xy(points: Sequence[DataPoint]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([p.features for p in points]) if points else np.empty((0, 0))
    y = np.array([p.label for p in points], dtype=float)
    return x, y


@dataclass
class CrossvalSplit:
    train: list[DataPoint]
    valid: list[DataPoint]
    test: list[DataPoint]
    repeat: int
    fold: int


def _deal_stratified(
    points: Sequence[DataPoint], n_parts: int, rng: np.random.Generator
) -> list[list[DataPoint]]:
    """Round-robin shuffled positives then negatives into ``n_parts`` parts,
    keeping part sizes within one of each other."""
    parts: list[list[DataPoint]] = [[] for _ in range(n_parts)]
    slot = 0
    for cls in (1, 0):
        members = [p for p in points if p.label == cls]
        for i in rng.permutation(len(members)):
            parts[slot % n_parts].append(members[i])
            slot += 1
    return parts


def crossval_splits(
    points: Sequence[DataPoint], repeats: int = 4, seed: int = 0
) -> list[CrossvalSplit]:
    """Repeated stratified 5x2 cross-validation (80-10-10 splits).

    Each repeat shuffles into 5 folds of 2 sub-folds; within a fold each
    sub-fold serves once as validation and once as test, the other four folds
    forming the training set, so a repeat yields 10 splits.  Sub-folds missing
    a class trigger a bounded reshuffle with an incremented seed.
    """
    points = list(points)
    labels = {p.label for p in points}
    if len(points) < 20 or labels != {0, 1}:
        raise ValueError("need at least 20 points containing both classes")

    splits: list[CrossvalSplit] = []
    for repeat in range(repeats):
        for attempt in range(8):
            rng = rng_from(seed + attempt, CROSSVAL_TAG, repeat)
            folds = _deal_stratified(points, 5, rng)
            subfolds = [_deal_stratified(fold, 2, rng) for fold in folds]
            flat = [sf for pair in subfolds for sf in pair]
            if all({p.label for p in sf} == {0, 1} for sf in flat):
                break
        else:
            raise ValueError("could not stratify folds: a class is too rare")

        for fold_idx, (sub_a, sub_b) in enumerate(subfolds):
            rest = [
                p
                for other_idx, fold in enumerate(folds)
                if other_idx != fold_idx
                for p in fold
            ]
            splits.append(
                CrossvalSplit(train=rest, valid=sub_a, test=sub_b, repeat=repeat, fold=fold_idx)
            )
            splits.append(
                CrossvalSplit(train=rest, valid=sub_b, test=sub_a, repeat=repeat, fold=fold_idx)
            )
    return splits
