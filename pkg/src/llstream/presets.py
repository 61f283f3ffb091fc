"""Bundled reference hyperparameter configurations.

These are the tuned values shipped with the original deployment studies of
the brown-build and change-risk detectors; they are convenient starting
points for comparable streams and are exercised by the acceptance suite.
"""

from __future__ import annotations

from .runner import Hyperparams

REFERENCE_CONFIGS: dict[str, Hyperparams] = {
    "brown-1": Hyperparams(group_size=50, init_window=15, valid_window=15,
                           buffer_pct=10.0, buffer_window=8),
    "brown-2": Hyperparams(group_size=50, init_window=10, valid_window=10,
                           buffer_pct=5.0, buffer_window=10),
    "brown-3": Hyperparams(group_size=50, init_window=10, valid_window=10,
                           buffer_pct=5.0, buffer_window=5),
    "brown-oss": Hyperparams(group_size=100, init_window=10, valid_window=10,
                             buffer_pct=20.0, buffer_window=10),
    "risk-1": Hyperparams(group_size=500, init_window=15, valid_window=8,
                          buffer_pct=10.0, buffer_window=8),
    "risk-2": Hyperparams(group_size=500, init_window=15, valid_window=15,
                          buffer_pct=10.0, buffer_window=15),
    "risk-3": Hyperparams(group_size=1000, init_window=15, valid_window=8,
                          buffer_pct=10.0, buffer_window=8),
    "risk-4": Hyperparams(group_size=500, init_window=15, valid_window=8,
                          buffer_pct=10.0, buffer_window=8),
}

# Update sizes (in group-size units) quoted on the original tuning sheets.
# For brown-oss the quoted 2.0 disagrees with the configured buffer settings,
# which imply 1 + 20/100 * 10 = 3.0; the formula is authoritative and the
# quoted figure is kept only so the discrepancy stays visible and tested.
QUOTED_UPDATE_GS: dict[str, float] = {
    "brown-1": 1.8,
    "brown-2": 1.5,
    "brown-3": 1.25,
    "brown-oss": 2.0,  # known discrepancy, see note above
    "risk-1": 1.8,
    "risk-2": 2.5,
    "risk-3": 1.8,
    "risk-4": 1.8,
}
