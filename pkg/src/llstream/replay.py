"""Class-balanced replay buffer with FIFO eviction by group window.

After each training step a balanced sample of the just-trained group's
training pool is appended; entries whose origin group falls out of the sliding
window are evicted before the next update so the buffer only ever carries the
most recent ``window`` groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .stream import DataPoint
from .util import BUFFER_TAG, rng_from


def sample_balanced(
    group_train_pool: Sequence[DataPoint],
    sample_pct: float,
    group_size: int,
    seed: int,
    group_index: int,
) -> list[DataPoint]:
    """Draw ``sample_pct`` percent of the nominal group size, split evenly by class.

    An odd target gives the extra slot to the positive class on even group
    indices and to the negative class on odd ones.  When a class cannot cover
    its share, both classes are capped to the smaller count so the sample stays
    balanced rather than full-sized.
    """
    k = int(math.floor(sample_pct * group_size / 100.0 + 0.5))
    if k <= 0 or not group_train_pool:
        return []

    share_hi, share_lo = (k + 1) // 2, k // 2
    share_pos, share_neg = (share_hi, share_lo) if group_index % 2 == 0 else (share_lo, share_hi)

    pos = [p for p in group_train_pool if p.label == 1]
    neg = [p for p in group_train_pool if p.label == 0]
    take_pos = min(share_pos, len(pos))
    take_neg = min(share_neg, len(neg))
    if take_pos < share_pos or take_neg < share_neg:
        take_pos = take_neg = min(take_pos, take_neg)

    rng = rng_from(seed, BUFFER_TAG, group_index)
    sample: list[DataPoint] = []
    for members, take in ((pos, take_pos), (neg, take_neg)):
        if take > 0:
            picked = rng.choice(len(members), size=take, replace=False)
            sample.extend(members[i] for i in sorted(picked))
    return sample


@dataclass
class ReplayBuffer:
    """FIFO store of (point, origin group) pairs bounded by a group window."""

    window: int
    sample_pct: float
    entries: list[tuple[DataPoint, int]] = field(default_factory=list)
    _last_t: int = 0

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError(f"buffer window must be >= 1, got {self.window}")

    def add_sample(self, points: Sequence[DataPoint], origin_group: int) -> None:
        self.entries.extend((p, origin_group) for p in points)

    def advance(self, t: int) -> list[DataPoint]:
        """Evict entries older than ``t - window`` and return the contents."""
        if t < self._last_t:
            raise ValueError(f"buffer advanced backwards: {t} after {self._last_t}")
        self._last_t = t
        self.entries = [(p, g) for p, g in self.entries if g >= t - self.window]
        return [p for p, _ in self.entries]

    def origins(self) -> list[int]:
        return [g for _, g in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def advance_buffer(
    buffer: ReplayBuffer, new_sample: Sequence[DataPoint], t: int
) -> list[DataPoint]:
    """Append the sample taken from group ``t - 1``, slide the window to ``t``,
    and return the points eligible for the update at ``t``."""
    if new_sample:
        buffer.add_sample(new_sample, t - 1)
    return buffer.advance(t)
