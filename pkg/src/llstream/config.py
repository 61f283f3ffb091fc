"""Experiment configuration files.

A config is a JSON object with a fixed key set; unknown keys anywhere are
rejected so typos cannot silently change an experiment.  Exactly one of
``dataset`` (a CSV path) or ``stream`` (a synthetic stream spec) provides the
data; ``setups`` lists the training setups to run, and ``seeds`` the run
seeds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .driftgen import Drift, StreamSpec
from .runner import Hyperparams, Schedule


class ConfigError(ValueError):
    """Raised for invalid or unknown configuration content."""


SETUP_KINDS = ("ll", "ll_norb", "rfs", "periodic", "decay", "naive")

_TOP_KEYS = {"dataset", "stream", "hyper", "setups", "seeds", "output_dir", "sweep"}
_HYPER_KEYS = {
    "group_size", "init_window", "valid_window", "buffer_pct", "buffer_window",
    "lr", "epochs", "minibatch", "hidden", "valid_fraction", "threshold", "seed",
}
_STREAM_KEYS = {
    "n", "d", "beta", "noise", "seed", "drift", "concepts", "cohort_pattern",
    "points_per_day",
}
_DRIFT_KEYS = {"kind", "at", "start", "length", "period"}
_SETUP_KEYS = {"name", "kind", "every_groups", "every_days", "rho", "window"}
_SWEEP_KEYS = {"grid", "runs_per_config"}


@dataclass
class SetupSpec:
    name: str
    kind: str
    schedule: Schedule | None = None


@dataclass
class ExperimentConfig:
    hyper: Hyperparams
    setups: list[SetupSpec]
    seeds: list[int]
    output_dir: str
    dataset: str | None = None
    stream: StreamSpec | None = None
    sweep_grid: dict | None = None
    sweep_runs: int = 4


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _parse_hyper(obj: dict) -> Hyperparams:
    _check_keys(obj, _HYPER_KEYS, "hyper")
    values = dict(obj)
    if "hidden" in values:
        values["hidden"] = tuple(int(h) for h in values["hidden"])
    try:
        return Hyperparams(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid hyper: {exc}") from None


def _parse_stream(obj: dict) -> StreamSpec:
    _check_keys(obj, _STREAM_KEYS, "stream")
    drift = Drift.none()
    if "drift" in obj:
        d = obj["drift"]
        _check_keys(d, _DRIFT_KEYS, "stream.drift")
        drift = Drift(
            kind=d.get("kind", "none"),
            at=d.get("at"),
            start=d.get("start"),
            length=d.get("length"),
            period=d.get("period"),
        )
    if "concepts" in obj and not isinstance(obj["concepts"], int):
        raise ConfigError("stream.concepts must be an integer count")
    try:
        spec = StreamSpec(
            n=int(obj["n"]),
            d=int(obj["d"]),
            beta=float(obj["beta"]),
            drift=drift,
            noise=float(obj.get("noise", 0.0)),
            seed=int(obj.get("seed", 0)),
            cohort_pattern=(
                tuple(int(v) for v in obj["cohort_pattern"])
                if obj.get("cohort_pattern")
                else None
            ),
            points_per_day=(
                float(obj["points_per_day"]) if obj.get("points_per_day") else None
            ),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid stream: {exc}") from None
    return spec


def _parse_setup(obj: dict, index: int) -> SetupSpec:
    _check_keys(obj, _SETUP_KEYS, f"setups[{index}]")
    kind = obj.get("kind")
    if kind not in SETUP_KINDS:
        raise ConfigError(
            f"setups[{index}].kind must be one of {', '.join(SETUP_KINDS)}, got {kind!r}"
        )
    name = obj.get("name", kind)
    schedule = None
    try:
        if kind == "periodic":
            schedule = Schedule(
                kind="periodic",
                every_groups=obj.get("every_groups"),
                every_days=obj.get("every_days"),
            )
        elif kind == "decay":
            schedule = Schedule(
                kind="decay",
                rho=float(obj.get("rho", 0.9)),
                window=int(obj.get("window", 3)),
            )
        elif {"every_groups", "every_days", "rho", "window"} & set(obj):
            raise ConfigError(f"setups[{index}]: schedule keys only apply to "
                              "periodic/decay setups")
    except ValueError as exc:
        raise ConfigError(f"invalid setups[{index}]: {exc}") from None
    return SetupSpec(name=name, kind=kind, schedule=schedule)


def parse_config(payload: dict) -> ExperimentConfig:
    _check_keys(payload, _TOP_KEYS, "config")
    has_dataset = "dataset" in payload
    has_stream = "stream" in payload
    if has_dataset == has_stream:
        raise ConfigError("config needs exactly one of 'dataset' or 'stream'")

    hyper = _parse_hyper(payload.get("hyper", {}))
    setups = [_parse_setup(s, i) for i, s in enumerate(payload.get("setups", []))]
    names = [s.name for s in setups]
    if len(names) != len(set(names)):
        raise ConfigError("setup names must be unique")

    seeds = payload.get("seeds", [hyper.seed])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds must be a list of integers")

    sweep_grid = None
    sweep_runs = 4
    if "sweep" in payload:
        _check_keys(payload["sweep"], _SWEEP_KEYS, "sweep")
        sweep_grid = payload["sweep"].get("grid")
        if not isinstance(sweep_grid, dict) or not sweep_grid:
            raise ConfigError("sweep.grid must be a nonempty object")
        unknown = set(sweep_grid) - _HYPER_KEYS
        if unknown:
            raise ConfigError(f"sweep.grid has unknown hyper key(s): {sorted(unknown)}")
        sweep_runs = int(payload["sweep"].get("runs_per_config", 4))

    return ExperimentConfig(
        hyper=hyper,
        setups=setups,
        seeds=list(seeds),
        output_dir=payload.get("output_dir", "runs"),
        dataset=payload.get("dataset"),
        stream=_parse_stream(payload["stream"]) if has_stream else None,
        sweep_grid=sweep_grid,
        sweep_runs=sweep_runs,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return parse_config(payload)
