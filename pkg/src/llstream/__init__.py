"""Lifelong-learning experiment harness for drifting binary event streams."""

__version__ = "0.1.0"

from .driftgen import Concept, Drift, StreamSpec, generate_stream, random_concepts
from .effort import EffortReport, effort_report, theoretical_sizes
from .importance import (
    ImportanceMatrix,
    compute_importance,
    discretize_importance,
    select_top_features,
    variance_report,
)
from .metrics import Confusion, StepMetrics, aggregate, evaluate
from .nn import FitReport, MlpModel, OptState, adam_step, fit, forward, init_mlp, \
    loss_and_grad, predict_labels
from .replay import ReplayBuffer, advance_buffer, sample_balanced
from .runner import (
    Hyperparams,
    RunRecord,
    Schedule,
    run_ll,
    run_naive_positive,
    run_rfs,
    run_scheduled,
    sweep,
)
from .stats import StatResult, cliffs_delta, compare_runs, compare_samples, kruskal_wallis
from .stream import (
    DataPoint,
    PoolLedger,
    StepSets,
    TimeGroup,
    assign_groups,
    build_init_sets,
    build_ledger,
    build_update_sets,
    crossval_splits,
    partition_pools,
    to_xy,
)

__all__ = [
    "__version__",
    "Concept", "Drift", "StreamSpec", "generate_stream", "random_concepts",
    "EffortReport", "effort_report", "theoretical_sizes",
    "ImportanceMatrix", "compute_importance", "discretize_importance",
    "select_top_features", "variance_report",
    "Confusion", "StepMetrics", "aggregate", "evaluate",
    "FitReport", "MlpModel", "OptState", "adam_step", "fit", "forward",
    "init_mlp", "loss_and_grad", "predict_labels",
    "ReplayBuffer", "advance_buffer", "sample_balanced",
    "Hyperparams", "RunRecord", "Schedule", "run_ll", "run_naive_positive",
    "run_rfs", "run_scheduled", "sweep",
    "StatResult", "cliffs_delta", "compare_runs", "compare_samples", "kruskal_wallis",
    "DataPoint", "PoolLedger", "StepSets", "TimeGroup", "assign_groups",
    "build_init_sets", "build_ledger", "build_update_sets", "crossval_splits",
    "partition_pools", "to_xy",
]
