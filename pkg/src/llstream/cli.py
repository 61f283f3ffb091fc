"""Command-line surface: generate streams, run setups, compare, sweep, report.

Exit codes: 0 on success, 1 for configuration/validation errors, 2 for
runtime failures.  All outputs are plain files (CSV/JSON) intended for
downstream plotting; nothing is interactive.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, ExperimentConfig, SetupSpec, load_config
from .driftgen import Drift, StreamSpec, generate_stream
from .effort import effort_report
from .io import DatasetError, load_dataset, load_run, persist_run, save_dataset
from .metrics import aggregate
from .runner import RunRecord, run_ll, run_naive_positive, run_rfs, run_scheduled, sweep
from .stats import compare_runs


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise ConfigError(message)


def _add_generate(sub) -> None:
    p = sub.add_parser("generate", help="write a synthetic drifting stream as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drift", default="none",
                   choices=["none", "sudden", "gradual", "incremental", "recurrent"])
    p.add_argument("--drift-at", type=int)
    p.add_argument("--drift-start", type=int)
    p.add_argument("--drift-length", type=int)
    p.add_argument("--drift-period", type=int)
    p.add_argument("--cohort-pattern", help="comma-separated cohort sizes, e.g. 1,1,1,2")
    p.add_argument("--points-per-day", type=float)


def _add_run_like(sub, name: str, help_text: str) -> None:
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config output directory")
    p.add_argument("--seed", type=int, help="override the run seed(s)")
    p.add_argument("--importance", action="store_true",
                   help="collect per-step feature importances")
    if name == "run":
        p.add_argument("--setup", help="setup name from the config (default: first)")
    if name == "compare":
        p.add_argument("--reference", help="reference setup name (default: first ll)")
        p.add_argument("--metric", default="f1", choices=["f1", "g_mean"])
        p.add_argument("--alpha", type=float, default=0.05)


def _build_parser() -> _Parser:
    parser = _Parser(prog="llstream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_run_like(sub, "run", "execute one training setup")
    _add_run_like(sub, "compare", "run all setups over all seeds and test differences")
    p = sub.add_parser("sweep", help="grid-search hyperparameters")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config output directory")
    rep = sub.add_parser("report", help="effort and importance tables for stored runs")
    rep.add_argument("--run", required=True, help="run directory")
    rep.add_argument("--reference", help="reference run directory for relative effort")
    return parser


def _cmd_generate(args) -> int:
    drift = Drift(
        kind=args.drift,
        at=args.drift_at,
        start=args.drift_start,
        length=args.drift_length,
        period=args.drift_period,
    )
    pattern = None
    if args.cohort_pattern:
        pattern = tuple(int(v) for v in args.cohort_pattern.split(","))
    spec = StreamSpec(
        n=args.n, d=args.d, beta=args.beta, drift=drift, noise=args.noise,
        seed=args.seed, cohort_pattern=pattern, points_per_day=args.points_per_day,
    )
    points = generate_stream(spec)
    save_dataset(points, args.out)
    rate = sum(p.label for p in points) / len(points)
    print(f"wrote {len(points)} points (d={args.d}, positive rate {rate:.4f}) to {args.out}")
    return 0


def _load_points(cfg: ExperimentConfig):
    if cfg.dataset is not None:
        points, summary = load_dataset(cfg.dataset)
        print(f"loaded {cfg.dataset}: {summary.describe()}")
        return points
    return generate_stream(cfg.stream)


def _execute(points, setup: SetupSpec, cfg: ExperimentConfig, seed: int,
             collect_importance: bool) -> RunRecord:
    hyper = replace(cfg.hyper, seed=seed)
    if setup.kind == "ll":
        return run_ll(points, hyper, True, setup=setup.name,
                      collect_importance=collect_importance)
    if setup.kind == "ll_norb":
        return run_ll(points, hyper, False, setup=setup.name,
                      collect_importance=collect_importance)
    if setup.kind == "rfs":
        return run_rfs(points, hyper, collect_importance=collect_importance)
    if setup.kind == "naive":
        return run_naive_positive(points, hyper)
    return run_scheduled(points, hyper, setup.schedule, setup=setup.name,
                         collect_importance=collect_importance)


def _run_dir(out_dir: str, setup: str, seed: int) -> Path:
    return Path(out_dir) / f"{setup}-seed{seed}"


def _summary_line(record: RunRecord) -> str:
    pooled, _ = aggregate(record, "pooled")
    return (
        f"{record.setup}: steps={len(record.steps)} pooled F1={pooled.f1:.4f} "
        f"GM={pooled.g_mean:.4f} precision={pooled.precision:.4f} "
        f"recall={pooled.recall:.4f}"
    )


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if not cfg.setups:
        raise ConfigError("config defines no setups")
    setup = cfg.setups[0]
    if args.setup:
        matches = [s for s in cfg.setups if s.name == args.setup]
        if not matches:
            raise ConfigError(f"no setup named {args.setup!r} in config")
        setup = matches[0]
    out_dir = args.out or cfg.output_dir
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    points = _load_points(cfg)
    for seed in seeds:
        record = _execute(points, setup, cfg, seed, args.importance)
        target = persist_run(record, _run_dir(out_dir, setup.name, seed))
        print(f"{_summary_line(record)}  -> {target}")
    return 0


def _cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if len(cfg.setups) < 2:
        raise ConfigError("compare needs at least two setups")
    if len(cfg.seeds) < 2:
        raise ConfigError("compare needs at least two seeds for the statistics")
    out_dir = args.out or cfg.output_dir
    points = _load_points(cfg)

    runs: dict[str, list[RunRecord]] = {}
    for setup in cfg.setups:
        runs[setup.name] = []
        for seed in cfg.seeds:
            record = _execute(points, setup, cfg, seed, args.importance)
            persist_run(record, _run_dir(out_dir, setup.name, seed))
            runs[setup.name].append(record)

    reference = args.reference
    if reference is None:
        ll_like = [s.name for s in cfg.setups if s.kind == "ll"]
        reference = ll_like[0] if ll_like else cfg.setups[0].name
    if reference not in runs:
        raise ConfigError(f"no setup named {reference!r} in config")

    rows = []
    for setup in cfg.setups:
        values = [aggregate(r, "pooled")[0] for r in runs[setup.name]]
        med_f1 = sorted(v.f1 for v in values)[len(values) // 2]
        med_gm = sorted(v.g_mean for v in values)[len(values) // 2]
        if setup.name == reference:
            rows.append([setup.name, f"{med_f1:.4f}", f"{med_gm:.4f}", "", "", "", "ref"])
            continue
        result = compare_runs(runs[reference], runs[setup.name],
                              metric=args.metric, alpha=args.alpha)
        rows.append([
            setup.name, f"{med_f1:.4f}", f"{med_gm:.4f}",
            f"{result.p:.4g}", f"{result.delta:.3f}", result.magnitude, result.mark,
        ])

    header = ["setup", "median_f1", "median_gm", "p_value", "delta", "magnitude", "mark"]
    out_path = Path(out_dir) / "comparison.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)

    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    for row in [header] + rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    print(f"comparison vs {reference!r} written to {out_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if cfg.sweep_grid is None:
        raise ConfigError("config has no sweep section")
    out_dir = Path(args.out or cfg.output_dir)
    points = _load_points(cfg)
    grid = dict(cfg.sweep_grid)
    if "hidden" in grid:
        grid["hidden"] = [tuple(h) for h in grid["hidden"]]
    entries = sweep(points, grid, runs_per_config=cfg.sweep_runs, base=cfg.hyper)

    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "sweep.csv"
    keys = sorted(cfg.sweep_grid)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", *keys, "mean_valid_f1", "update_size_gs"])
        for rank, entry in enumerate(entries, start=1):
            writer.writerow(
                [rank]
                + [getattr(entry.hyper, k) for k in keys]
                + [repr(entry.mean_valid_f1), repr(entry.update_size_gs)]
            )
    best = entries[0]
    print(f"best config: {', '.join(f'{k}={getattr(best.hyper, k)}' for k in keys)} "
          f"(mean valid F1 {best.mean_valid_f1:.4f}); ranking in {out_path}")
    return 0


def _cmd_report(args) -> int:
    record = load_run(args.run)
    reference = load_run(args.reference) if args.reference else None
    report = effort_report(record, reference)

    out_path = Path(args.run) / "effort.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "setup", "unit", "updates", "median_lifespan", "mean_lifespan",
            "median_train_size", "coefficient", "relative_coefficient",
            "update_size_gs", "speedup", "flagged",
        ])
        writer.writerow([
            report.setup, report.unit, len(report.train_sizes),
            report.median_lifespan, report.mean_lifespan,
            report.median_train_size, report.coefficient,
            report.relative_coefficient, report.update_size_gs,
            report.speedup, int(report.flagged),
        ])
    print(
        f"{report.setup}: {len(report.train_sizes)} updates, median lifespan "
        f"{report.median_lifespan} {report.unit}, median train size "
        f"{report.median_train_size}, coefficient {report.coefficient}"
        + (f", relative {report.relative_coefficient:.3f}" if report.relative_coefficient else "")
    )
    print(f"effort table written to {out_path}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, DatasetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
