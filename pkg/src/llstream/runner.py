"""Timeline drivers for the training setups under comparison.

Every setup walks the same prequential loop over the same group boundaries and
pools: each group after the initialization window is first scored by the
current model, and only afterwards may the setup train on it.  The lifelong
setups update the deployed weights incrementally (with or without a replay
buffer); the retrain-from-scratch and scheduled setups fit fresh models on the
accumulated history; the naive setup predicts every point positive.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Sequence

import numpy as np

from . import nn
from .importance import ImportanceMatrix, compute_importance
from .metrics import Confusion, confusion_from_predictions, evaluate
from .replay import ReplayBuffer, advance_buffer, sample_balanced
from .stream import (
    DataPoint,
    PoolLedger,
    TimeGroup,
    build_init_sets,
    build_ledger,
    build_update_sets,
    assign_groups,
    to_xy,
)
from .util import INIT_TAG, SHUFFLE_TAG, SWEEP_TAG, derive_seed


@dataclass(frozen=True)
class Hyperparams:
    """All knobs of a run; every setup on a stream shares one instance."""

    group_size: int = 50
    init_window: int = 10
    valid_window: int = 10
    buffer_pct: float = 10.0
    buffer_window: int = 8
    lr: float = 1e-3
    epochs: int = 50
    minibatch: int = 20
    hidden: tuple[int, ...] = (64, 64)
    valid_fraction: float = 0.2
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.valid_window > self.init_window:
            raise ValueError("valid_window cannot exceed init_window")
        if self.buffer_window < 1:
            raise ValueError("buffer_window must be >= 1")
        for name in ("group_size", "init_window", "valid_window", "lr", "minibatch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.buffer_pct < 0:
            raise ValueError("buffer_pct must be nonnegative")

    def layer_sizes(self, input_dim: int) -> list[int]:
        return [input_dim, *self.hidden, 1]


@dataclass(frozen=True)
class Schedule:
    """Retraining trigger for :func:`run_scheduled`.

    ``periodic`` fires every ``every_groups`` groups (or ``every_days`` days
    when the stream carries timestamps); ``decay`` fires when the rolling mean
    F1 over the last ``window`` scored groups falls below ``rho`` times the F1
    measured right after the previous retraining.
    """

    kind: str  # periodic | decay
    every_groups: int | None = None
    every_days: float | None = None
    rho: float = 0.9
    window: int = 3

    def __post_init__(self):
        if self.kind == "periodic":
            if (self.every_groups is None) == (self.every_days is None):
                raise ValueError("periodic schedule needs every_groups xor every_days")
            if self.every_groups is not None and self.every_groups < 1:
                raise ValueError("every_groups must be >= 1")
            if self.every_days is not None and self.every_days <= 0:
                raise ValueError("every_days must be positive")
        elif self.kind == "decay":
            if not 0.0 < self.rho <= 1.0:
                raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
            if self.window < 1:
                raise ValueError("decay window must be >= 1")
        else:
            raise ValueError(f"unknown schedule kind: {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "periodic":
            return {
                "kind": "periodic",
                "every_groups": self.every_groups,
                "every_days": self.every_days,
            }
        return {"kind": "decay", "rho": self.rho, "window": self.window}


@dataclass
class FitEvent:
    """One completed training, for effort accounting."""

    train_size: int
    fit_seconds: float
    valid_f1: float | None
    version: int
    end_order: int
    end_time: datetime | None


@dataclass
class StepRecord:
    step: int
    confusion: Confusion
    model_version: int
    updated: bool
    skipped_reason: str | None
    train_size: int | None
    fit_seconds: float | None
    valid_f1: float | None
    test_size: int
    end_order: int
    end_time: datetime | None


@dataclass(eq=False)
class RunRecord:
    setup: str
    hyper: Hyperparams
    schedule: Schedule | None = None
    init: FitEvent | None = None
    steps: list[StepRecord] = field(default_factory=list)
    importance: ImportanceMatrix | None = None
    # Audit fields; recomputable, not persisted.
    train_ids: frozenset[str] = frozenset()
    valid_ids: frozenset[str] = frozenset()
    audit_ok: bool = True

    def sliced(self, steps: Sequence[int]) -> "RunRecord":
        """A shallow copy restricted to the given step indices."""
        wanted = set(steps)
        clone = RunRecord(
            setup=self.setup,
            hyper=self.hyper,
            schedule=self.schedule,
            init=self.init,
            steps=[s for s in self.steps if s.step in wanted],
            importance=None,
            train_ids=self.train_ids,
            valid_ids=self.valid_ids,
            audit_ok=self.audit_ok,
        )
        return clone


class _RunState:
    """Shared bookkeeping for one timeline walk."""

    def __init__(self, points: Sequence[DataPoint], hyper: Hyperparams, setup: str):
        self.hyper = hyper
        self.setup = setup
        self.groups: list[TimeGroup] = assign_groups(points, hyper.group_size)
        if len(self.groups) < hyper.init_window + 1:
            raise ValueError(
                f"stream yields {len(self.groups)} groups; "
                f"init_window={hyper.init_window} needs at least {hyper.init_window + 1}"
            )
        self.ledger: PoolLedger = build_ledger(
            self.groups, hyper.valid_fraction, hyper.seed
        )
        self.input_dim = self.groups[0].points[0].features.shape[0]
        self.record = RunRecord(setup=setup, hyper=hyper)
        self._model_data_ids: set[str] = set()
        self._train_ids: set[str] = set()
        self._valid_ids: set[str] = set()
        self._importance_cols: list[np.ndarray] = []
        self._importance_steps: list[int] = []

    def note_fit_data(self, train: Sequence[DataPoint], valid: Sequence[DataPoint]) -> None:
        train_ids = {p.id for p in train}
        valid_ids = {p.id for p in valid}
        self._model_data_ids |= train_ids | valid_ids
        self._train_ids |= train_ids
        self._valid_ids |= valid_ids

    def check_prequential(self, group: TimeGroup) -> None:
        leaked = group.ids & self._model_data_ids
        if leaked:
            self.record.audit_ok = False
            raise RuntimeError(
                f"prequential violation at group {group.index}: "
                f"{len(leaked)} test points already seen in training/validation"
            )

    def score(self, model: nn.MlpModel | None, group: TimeGroup) -> Confusion:
        self.check_prequential(group)
        x, y = to_xy(group.points)
        if model is None:
            pred = np.ones(len(group.points), dtype=int)
        else:
            pred = nn.predict_labels(model, x, self.hyper.threshold)
        return confusion_from_predictions(pred.tolist(), [int(v) for v in y])

    def collect_importance(self, model: nn.MlpModel, t: int) -> None:
        lo = max(0, t - self.hyper.valid_window)
        window_points: list[DataPoint] = []
        for g in self.groups[lo:t]:
            window_points.extend(self.ledger.valid_pool(g))
        if window_points:
            x, _ = to_xy(window_points)
            self._importance_cols.append(compute_importance(model, x))
            self._importance_steps.append(t)

    def finish(self) -> RunRecord:
        if self._train_ids & self._valid_ids:
            self.record.audit_ok = False
            raise RuntimeError("training and validation ids overlap")
        self.record.train_ids = frozenset(self._train_ids)
        self.record.valid_ids = frozenset(self._valid_ids)
        if self._importance_cols:
            self.record.importance = ImportanceMatrix(
                values=np.stack(self._importance_cols, axis=1),
                steps=list(self._importance_steps),
            )
        return self.record


def _timed_fit(
    model: nn.MlpModel,
    train: Sequence[DataPoint],
    valid: Sequence[DataPoint],
    hyper: Hyperparams,
    shuffle_seed: int,
) -> tuple[nn.MlpModel, nn.FitReport, float]:
    started = time.perf_counter()
    fitted, report = nn.fit(
        model, to_xy(train), to_xy(valid), hyper, shuffle_seed=shuffle_seed
    )
    return fitted, report, time.perf_counter() - started


def _best_valid_f1(report: nn.FitReport) -> float | None:
    if report.best_epoch is None or not report.valid_f1:
        return None
    return report.valid_f1[report.best_epoch]


def _valid_degenerate(valid: Sequence[DataPoint]) -> bool:
    labels = {p.label for p in valid}
    return len(labels) < 2


def _fit_event(group: TimeGroup, train, report, seconds) -> FitEvent:
    return FitEvent(
        train_size=len(train),
        fit_seconds=seconds,
        valid_f1=_best_valid_f1(report),
        version=report.version,
        end_order=group.end_order(),
        end_time=group.end_time(),
    )


def run_ll(
    points: Sequence[DataPoint],
    hyper: Hyperparams,
    use_buffer: bool = True,
    *,
    setup: str | None = None,
    collect_importance: bool = False,
) -> RunRecord:
    """Lifelong timeline: one initialization fit, then incremental updates.

    At every step the pending group is scored by the deployed model before the
    model trains on it.  With ``use_buffer`` the update set is topped up with
    the replay-buffer window; a single-class validation window skips the
    update and carries the model over.
    """
    name = setup or ("ll" if use_buffer else "ll-norb")
    state = _RunState(points, hyper, name)
    groups, ledger = state.groups, state.ledger
    itw, vw = hyper.init_window, hyper.valid_window
    total = len(groups)

    sets = build_init_sets(groups, ledger, itw, vw)
    model = nn.init_mlp(hyper.layer_sizes(state.input_dim), derive_seed(hyper.seed, INIT_TAG))
    state.note_fit_data(sets.train, sets.valid)
    model, report, seconds = _timed_fit(
        model, sets.train, sets.valid, hyper, derive_seed(hyper.seed, SHUFFLE_TAG, itw)
    )
    state.record.init = _fit_event(groups[itw - 1], sets.train, report, seconds)

    buffer = None
    pending_sample: list[DataPoint] = []
    if use_buffer:
        buffer = ReplayBuffer(window=hyper.buffer_window, sample_pct=hyper.buffer_pct)
        for g in groups[:itw]:
            buffer.add_sample(
                sample_balanced(
                    ledger.train_pool(g), hyper.buffer_pct, hyper.group_size,
                    hyper.seed, g.index,
                ),
                g.index,
            )

    for t in range(itw + 1, total + 1):
        group = groups[t - 1]
        confusion = state.score(model, group)
        if collect_importance:
            state.collect_importance(model, t)

        updated = False
        skipped = None
        train_size = None
        fit_seconds = None
        valid_f1 = None
        if t < total:
            contents = advance_buffer(buffer, pending_sample, t) if buffer else []
            pending_sample = []
            sets = build_update_sets(groups, ledger, t, vw, contents)
            if _valid_degenerate(sets.valid):
                skipped = "degenerate_validation"
            else:
                state.note_fit_data(sets.train, sets.valid)
                model, report, fit_seconds = _timed_fit(
                    model, sets.train, sets.valid, hyper,
                    derive_seed(hyper.seed, SHUFFLE_TAG, t),
                )
                updated = True
                train_size = len(sets.train)
                valid_f1 = _best_valid_f1(report)
            if buffer is not None:
                pending_sample = sample_balanced(
                    ledger.train_pool(group), hyper.buffer_pct, hyper.group_size,
                    hyper.seed, t,
                )

        state.record.steps.append(
            StepRecord(
                step=t,
                confusion=confusion,
                model_version=model.version,
                updated=updated,
                skipped_reason=skipped,
                train_size=train_size,
                fit_seconds=fit_seconds,
                valid_f1=valid_f1,
                test_size=len(group.points),
                end_order=group.end_order(),
                end_time=group.end_time(),
            )
        )
    return state.finish()


def _rfs_sets(groups, ledger, t: int, vw: int):
    """Full-history training pools up to group ``t`` with a sliding valid window."""
    train: list[DataPoint] = []
    for g in groups[:t]:
        train.extend(ledger.train_pool(g))
    valid: list[DataPoint] = []
    for g in groups[max(0, t - vw) : t]:
        valid.extend(ledger.valid_pool(g))
    return train, valid


def _run_from_scratch(
    points: Sequence[DataPoint],
    hyper: Hyperparams,
    schedule: Schedule | None,
    setup: str,
    collect_importance: bool = False,
) -> RunRecord:
    """Common walk for RFS (retrain every group) and scheduled retraining."""
    state = _RunState(points, hyper, setup)
    groups, ledger = state.groups, state.ledger
    itw, vw = hyper.init_window, hyper.valid_window
    total = len(groups)
    state.record.schedule = schedule

    def fresh_fit(t: int):
        train, valid = _rfs_sets(groups, ledger, t, vw)
        fresh = nn.init_mlp(
            hyper.layer_sizes(state.input_dim), derive_seed(hyper.seed, INIT_TAG, t)
        )
        state.note_fit_data(train, valid)
        fitted, report, seconds = _timed_fit(
            fresh, train, valid, hyper, derive_seed(hyper.seed, SHUFFLE_TAG, t)
        )
        return fitted, report, seconds, len(train)

    model, report, seconds, train_size = fresh_fit(itw)
    state.record.init = FitEvent(
        train_size=train_size,
        fit_seconds=seconds,
        valid_f1=_best_valid_f1(report),
        version=report.version,
        end_order=groups[itw - 1].end_order(),
        end_time=groups[itw - 1].end_time(),
    )

    last_trained_group = itw
    last_trained_time = groups[itw - 1].end_time()
    benchmark_f1: float | None = None
    awaiting_benchmark = True
    recent_f1: list[float] = []

    for t in range(itw + 1, total + 1):
        group = groups[t - 1]
        confusion = state.score(model, group)
        if collect_importance:
            state.collect_importance(model, t)

        step_f1 = evaluate(confusion).f1
        if awaiting_benchmark:
            benchmark_f1 = step_f1
            awaiting_benchmark = False
        recent_f1.append(step_f1)

        updated = False
        skipped = None
        train_size = None
        fit_seconds = None
        valid_f1 = None
        if t < total and _fires(
            schedule, t, group, last_trained_group, last_trained_time,
            benchmark_f1, recent_f1,
        ):
            _, valid = _rfs_sets(groups, ledger, t, vw)
            if _valid_degenerate(valid):
                skipped = "degenerate_validation"
            else:
                model, report, fit_seconds, train_size = fresh_fit(t)
                updated = True
                valid_f1 = _best_valid_f1(report)
                last_trained_group = t
                last_trained_time = group.end_time()
                awaiting_benchmark = True
                recent_f1 = []

        state.record.steps.append(
            StepRecord(
                step=t,
                confusion=confusion,
                model_version=model.version,
                updated=updated,
                skipped_reason=skipped,
                train_size=train_size,
                fit_seconds=fit_seconds,
                valid_f1=valid_f1,
                test_size=len(group.points),
                end_order=group.end_order(),
                end_time=group.end_time(),
            )
        )
    return state.finish()


def _fires(
    schedule: Schedule | None,
    t: int,
    group: TimeGroup,
    last_trained_group: int,
    last_trained_time: datetime | None,
    benchmark_f1: float | None,
    recent_f1: list[float],
) -> bool:
    if schedule is None:
        return True
    if schedule.kind == "periodic":
        if schedule.every_groups is not None:
            return t - last_trained_group >= schedule.every_groups
        now = group.end_time()
        if now is None or last_trained_time is None:
            raise ValueError("day-based schedules need timestamped streams")
        return (now - last_trained_time).total_seconds() / 86400.0 >= schedule.every_days
    # decay
    if benchmark_f1 is None or not recent_f1:
        return False
    window = recent_f1[-schedule.window :]
    return sum(window) / len(window) < schedule.rho * benchmark_f1


def run_rfs(
    points: Sequence[DataPoint],
    hyper: Hyperparams,
    *,
    collect_importance: bool = False,
) -> RunRecord:
    """Retrain-from-scratch on every group: fresh weights, full history."""
    return _run_from_scratch(points, hyper, None, "rfs", collect_importance)


def run_scheduled(
    points: Sequence[DataPoint],
    hyper: Hyperparams,
    schedule: Schedule,
    *,
    setup: str | None = None,
    collect_importance: bool = False,
) -> RunRecord:
    """Retrain-from-scratch only when the schedule fires; the frozen model
    keeps predicting in between."""
    name = setup or schedule.kind
    return _run_from_scratch(points, hyper, schedule, name, collect_importance)


def run_naive_positive(points: Sequence[DataPoint], hyper: Hyperparams) -> RunRecord:
    """Predict every test point positive; no training at all."""
    state = _RunState(points, hyper, "naive-positive")
    groups = state.groups
    for t in range(hyper.init_window + 1, len(groups) + 1):
        group = groups[t - 1]
        confusion = state.score(None, group)
        state.record.steps.append(
            StepRecord(
                step=t,
                confusion=confusion,
                model_version=0,
                updated=False,
                skipped_reason=None,
                train_size=None,
                fit_seconds=None,
                valid_f1=None,
                test_size=len(group.points),
                end_order=group.end_order(),
                end_time=group.end_time(),
            )
        )
    return state.finish()


@dataclass
class SweepEntry:
    hyper: Hyperparams
    mean_valid_f1: float
    update_size_gs: float
    runs: list[RunRecord]


def _run_valid_f1(record: RunRecord) -> float:
    scores = [e.valid_f1 for e in [record.init] if e and e.valid_f1 is not None]
    scores += [s.valid_f1 for s in record.steps if s.valid_f1 is not None]
    return sum(scores) / len(scores) if scores else 0.0


def sweep(
    points: Sequence[DataPoint],
    grid: dict[str, Sequence],
    runs_per_config: int = 4,
    base: Hyperparams | None = None,
) -> list[SweepEntry]:
    """Run every grid combination several times and rank by mean validation F1.

    Ties rank the cheaper configuration (smaller theoretical update size)
    first.  Each repetition uses a distinct derived seed.
    """
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    base = base or Hyperparams()
    names = sorted(grid)
    entries: list[SweepEntry] = []
    for combo in itertools.product(*(grid[name] for name in names)):
        values = dict(zip(names, combo))
        if "hidden" in values:
            values["hidden"] = tuple(values["hidden"])
        cfg = replace(base, **values)
        runs = []
        for i in range(runs_per_config):
            run_seed = derive_seed(cfg.seed, SWEEP_TAG, i)
            runs.append(run_ll(points, replace(cfg, seed=run_seed), use_buffer=True))
        mean_f1 = sum(_run_valid_f1(r) for r in runs) / len(runs)
        update_gs = 1.0 + cfg.buffer_pct / 100.0 * cfg.buffer_window
        entries.append(
            SweepEntry(hyper=cfg, mean_valid_f1=mean_f1, update_size_gs=update_gs, runs=runs)
        )
    entries.sort(key=lambda e: (-e.mean_valid_f1, e.update_size_gs))
    return entries
