"""Computational-effort accounting for retraining setups.

A setup's cost is summarized as training-set size per unit of model lifespan
(the stream time between successive fits).  Dividing by the same coefficient
of a lifelong reference run gives a unit-free relative effort, comparable
across setups that scored the same stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import mean, median, pstdev

from .runner import Hyperparams, RunRecord


@dataclass
class EffortReport:
    setup: str
    unit: str  # "days" or "points"
    lifespans: list[float]
    train_sizes: list[int]
    median_lifespan: float | None
    mean_lifespan: float | None
    sd_lifespan: float | None
    median_train_size: float | None
    mean_train_size: float | None
    coefficient: float | None
    relative_coefficient: float | None
    update_size_gs: float
    speedup: float
    flagged: bool = False


def theoretical_sizes(hyper: Hyperparams) -> tuple[float, float]:
    """Nominal update-set size in group-size units and the implied speedup of
    an incremental update over the initialization fit."""
    update_gs = 1.0 + hyper.buffer_pct / 100.0 * hyper.buffer_window
    return update_gs, hyper.init_window / update_gs


def _fit_timeline(run: RunRecord) -> tuple[list[float], list[int], str]:
    """Event times of all fits plus per-update training sizes.

    Times are fractional days when every fit carries a timestamp, stream
    positions otherwise.  The first fit (initialization) anchors the first
    lifespan interval; its training size is not an update size.
    """
    events = []
    if run.init is not None:
        events.append((run.init.end_time, run.init.end_order, run.init.train_size))
    for step in run.steps:
        if step.updated:
            events.append((step.end_time, step.end_order, step.train_size))

    use_days = bool(events) and all(t is not None for t, _, _ in events)
    times = []
    for t, order, _ in events:
        if use_days:
            times.append(t.timestamp() / 86400.0)
        else:
            times.append(float(order))
    sizes = [size for _, _, size in events[1:]]
    lifespans = [b - a for a, b in zip(times, times[1:])]
    return lifespans, sizes, "days" if use_days else "points"


def effort_report(run: RunRecord, reference_ll: RunRecord | None = None) -> EffortReport:
    """Effort summary of a run, optionally relative to a lifelong reference.

    The coefficient is median update size over median lifespan; a run with
    fewer than two fits has no lifespan and is flagged instead.
    """
    lifespans, sizes, unit = _fit_timeline(run)
    update_gs, speedup = theoretical_sizes(run.hyper)

    flagged = len(lifespans) == 0
    coefficient = None
    if not flagged:
        med_life = median(lifespans)
        coefficient = median(sizes) / med_life if med_life > 0 else None
        flagged = coefficient is None

    relative = None
    if reference_ll is not None and coefficient is not None:
        ref = effort_report(reference_ll)
        if ref.unit != unit:
            raise ValueError(
                f"reference run measures lifespan in {ref.unit}, this run in {unit}"
            )
        if ref.coefficient:
            relative = coefficient / ref.coefficient

    return EffortReport(
        setup=run.setup,
        unit=unit,
        lifespans=lifespans,
        train_sizes=sizes,
        median_lifespan=median(lifespans) if lifespans else None,
        mean_lifespan=mean(lifespans) if lifespans else None,
        sd_lifespan=pstdev(lifespans) if len(lifespans) > 1 else None,
        median_train_size=median(sizes) if sizes else None,
        mean_train_size=mean(sizes) if sizes else None,
        coefficient=coefficient,
        relative_coefficient=relative,
        update_size_gs=update_gs,
        speedup=speedup,
        flagged=flagged,
    )
