"""Dataset ingestion and run persistence.

Datasets are flat CSVs with the header ``id,order,cohort,timestamp,label,
f0..f{d-1}``; cohort and timestamp may be empty.  A persisted run is a
directory holding ``record.json`` (the full record, reloadable without loss),
``metrics.csv`` (one row of metrics per scored step) and, when collected,
``importance.csv`` (long-form discretized feature importances).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .importance import ImportanceMatrix, discretize_importance
from .metrics import Confusion, evaluate
from .runner import FitEvent, Hyperparams, RunRecord, Schedule, StepRecord
from .stream import DataPoint

FIXED_COLUMNS = ["id", "order", "cohort", "timestamp", "label"]


class DatasetError(ValueError):
    """Raised for malformed dataset files, with a line-numbered message."""


@dataclass
class DatasetSummary:
    n: int
    d: int
    positive_rate: float
    distinct_keys: int
    has_cohorts: bool
    has_timestamps: bool

    def describe(self) -> str:
        return (
            f"{self.n} points, {self.d} features, positive rate "
            f"{self.positive_rate:.4f}, {self.distinct_keys} groupable keys"
        )


def _parse_header(header: list[str], path: str) -> int:
    if header[: len(FIXED_COLUMNS)] != FIXED_COLUMNS:
        raise DatasetError(
            f"{path} line 1: header must start with {','.join(FIXED_COLUMNS)}"
        )
    feature_cols = header[len(FIXED_COLUMNS) :]
    expected = [f"f{i}" for i in range(len(feature_cols))]
    if not feature_cols or feature_cols != expected:
        raise DatasetError(
            f"{path} line 1: feature columns must be f0..f{{d-1}}, got {feature_cols}"
        )
    return len(feature_cols)


def load_dataset(path: str | Path) -> tuple[list[DataPoint], DatasetSummary]:
    """Read and validate a dataset CSV, returning points sorted by order."""
    path = str(path)
    points: list[DataPoint] = []
    seen_ids: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: file is empty") from None
        d = _parse_header(header, path)
        width = len(FIXED_COLUMNS) + d

        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise DatasetError(
                    f"{path} line {lineno}: expected {width} fields, got {len(row)}"
                )
            pid, order_s, cohort, ts, label_s = row[:5]
            if pid in seen_ids:
                raise DatasetError(f"{path} line {lineno}: duplicate id {pid!r}")
            seen_ids.add(pid)
            try:
                order = int(order_s)
            except ValueError:
                raise DatasetError(
                    f"{path} line {lineno}: order {order_s!r} is not an integer"
                ) from None
            if order < 0:
                raise DatasetError(f"{path} line {lineno}: order must be nonnegative")
            if label_s not in ("0", "1"):
                raise DatasetError(
                    f"{path} line {lineno}: label must be 0 or 1, got {label_s!r}"
                )
            timestamp = None
            if ts:
                try:
                    timestamp = datetime.fromisoformat(ts)
                except ValueError:
                    raise DatasetError(
                        f"{path} line {lineno}: bad timestamp {ts!r}"
                    ) from None
            try:
                features = np.array([float(v) for v in row[5:]], dtype=float)
            except ValueError:
                raise DatasetError(
                    f"{path} line {lineno}: features must be numeric"
                ) from None
            points.append(
                DataPoint(
                    id=pid,
                    order=order,
                    label=int(label_s),
                    features=features,
                    cohort=cohort or None,
                    timestamp=timestamp,
                )
            )
    if not points:
        raise DatasetError(f"{path}: no data rows")
    points.sort(key=lambda p: p.order)
    summary = DatasetSummary(
        n=len(points),
        d=d,
        positive_rate=sum(p.label for p in points) / len(points),
        distinct_keys=len({p.group_key() for p in points}),
        has_cohorts=any(p.cohort is not None for p in points),
        has_timestamps=all(p.timestamp is not None for p in points),
    )
    return points, summary


def save_dataset(points: Sequence[DataPoint], path: str | Path) -> None:
    if not points:
        raise ValueError("nothing to save")
    d = points[0].features.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIXED_COLUMNS + [f"f{i}" for i in range(d)])
        for p in points:
            writer.writerow(
                [
                    p.id,
                    p.order,
                    p.cohort or "",
                    p.timestamp.isoformat() if p.timestamp else "",
                    p.label,
                ]
                + [repr(float(v)) for v in p.features]
            )


def _time_str(t: datetime | None) -> str | None:
    return t.isoformat() if t is not None else None


def _fit_event_dict(event: FitEvent | None, include_timing: bool) -> dict | None:
    if event is None:
        return None
    return {
        "train_size": event.train_size,
        "fit_seconds": event.fit_seconds if include_timing else None,
        "valid_f1": event.valid_f1,
        "version": event.version,
        "end_order": event.end_order,
        "end_time": _time_str(event.end_time),
    }


def _step_dict(step: StepRecord, include_timing: bool) -> dict:
    return {
        "step": step.step,
        "tp": step.confusion.tp,
        "fp": step.confusion.fp,
        "tn": step.confusion.tn,
        "fn": step.confusion.fn,
        "model_version": step.model_version,
        "updated": step.updated,
        "skipped_reason": step.skipped_reason,
        "train_size": step.train_size,
        "fit_seconds": step.fit_seconds if include_timing else None,
        "valid_f1": step.valid_f1,
        "test_size": step.test_size,
        "end_order": step.end_order,
        "end_time": _time_str(step.end_time),
    }


def record_to_dict(record: RunRecord, include_timing: bool = True) -> dict:
    """Full JSON-ready form of a run; ``include_timing=False`` canonicalizes
    away wall-clock fields for bitwise reproducibility comparisons."""
    hyper = record.hyper
    payload = {
        "tool": "llstream",
        "tool_version": __version__,
        "setup": record.setup,
        "hyper": {
            "group_size": hyper.group_size,
            "init_window": hyper.init_window,
            "valid_window": hyper.valid_window,
            "buffer_pct": hyper.buffer_pct,
            "buffer_window": hyper.buffer_window,
            "lr": hyper.lr,
            "epochs": hyper.epochs,
            "minibatch": hyper.minibatch,
            "hidden": list(hyper.hidden),
            "valid_fraction": hyper.valid_fraction,
            "threshold": hyper.threshold,
            "seed": hyper.seed,
        },
        "schedule": record.schedule.to_dict() if record.schedule else None,
        "init": _fit_event_dict(record.init, include_timing),
        "steps": [_step_dict(s, include_timing) for s in record.steps],
        "importance": None,
        "audit_ok": record.audit_ok,
    }
    if record.importance is not None:
        payload["importance"] = {
            "method": record.importance.method,
            "steps": list(record.importance.steps),
            "values": record.importance.values.tolist(),
        }
    return payload


def record_from_dict(payload: dict) -> RunRecord:
    hyper_d = dict(payload["hyper"])
    hyper_d["hidden"] = tuple(hyper_d["hidden"])
    hyper = Hyperparams(**hyper_d)

    schedule = None
    if payload.get("schedule"):
        sd = payload["schedule"]
        if sd["kind"] == "periodic":
            schedule = Schedule(
                kind="periodic",
                every_groups=sd.get("every_groups"),
                every_days=sd.get("every_days"),
            )
        else:
            schedule = Schedule(kind="decay", rho=sd["rho"], window=sd["window"])

    def parse_time(value):
        return datetime.fromisoformat(value) if value else None

    init = None
    if payload.get("init"):
        e = payload["init"]
        init = FitEvent(
            train_size=e["train_size"],
            fit_seconds=e["fit_seconds"],
            valid_f1=e["valid_f1"],
            version=e["version"],
            end_order=e["end_order"],
            end_time=parse_time(e["end_time"]),
        )

    steps = [
        StepRecord(
            step=s["step"],
            confusion=Confusion(tp=s["tp"], fp=s["fp"], tn=s["tn"], fn=s["fn"]),
            model_version=s["model_version"],
            updated=s["updated"],
            skipped_reason=s["skipped_reason"],
            train_size=s["train_size"],
            fit_seconds=s["fit_seconds"],
            valid_f1=s["valid_f1"],
            test_size=s["test_size"],
            end_order=s["end_order"],
            end_time=parse_time(s["end_time"]),
        )
        for s in payload["steps"]
    ]

    importance = None
    if payload.get("importance"):
        im = payload["importance"]
        importance = ImportanceMatrix(
            values=np.array(im["values"], dtype=float),
            steps=list(im["steps"]),
            method=im["method"],
        )
    return RunRecord(
        setup=payload["setup"],
        hyper=hyper,
        schedule=schedule,
        init=init,
        steps=steps,
        importance=importance,
        audit_ok=payload["audit_ok"],
    )


METRIC_COLUMNS = [
    "step", "tp", "fp", "tn", "fn", "precision", "recall", "specificity",
    "f1", "g_mean", "prevalence", "train_size", "updated", "model_version",
    "fit_seconds", "test_size", "end_order", "end_time",
]


def persist_run(record: RunRecord, run_dir: str | Path) -> Path:
    """Write record.json, metrics.csv and (if present) importance.csv."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    (run_dir / "record.json").write_text(json.dumps(record_to_dict(record), indent=1))

    with open(run_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for step in record.steps:
            m = evaluate(step.confusion)
            c = step.confusion
            writer.writerow(
                [
                    step.step, c.tp, c.fp, c.tn, c.fn,
                    repr(m.precision), repr(m.recall), repr(m.specificity),
                    repr(m.f1), repr(m.g_mean), repr(m.prevalence),
                    "" if step.train_size is None else step.train_size,
                    int(step.updated),
                    step.model_version,
                    "" if step.fit_seconds is None else repr(step.fit_seconds),
                    step.test_size,
                    step.end_order,
                    _time_str(step.end_time) or "",
                ]
            )

    if record.importance is not None:
        write_importance_csv(record.importance, run_dir / "importance.csv")
    return run_dir


def write_importance_csv(matrix: ImportanceMatrix, path: str | Path) -> None:
    """Long-form discretized importance: one (feature, step, code) row each."""
    codes = discretize_importance(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "step", "code"])
        for f in range(codes.shape[0]):
            for j, step in enumerate(matrix.steps):
                writer.writerow([f, step, codes[f, j]])


def load_run(run_dir: str | Path) -> RunRecord:
    payload = json.loads((Path(run_dir) / "record.json").read_text())
    return record_from_dict(payload)
