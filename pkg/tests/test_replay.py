import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llstream.replay import ReplayBuffer, advance_buffer, sample_balanced
from llstream.stream import DataPoint


def pool(n_pos, n_neg, seed=0):
    rng = np.random.default_rng(seed)
    points = []
    for i in range(n_pos + n_neg):
        points.append(
            DataPoint(
                id=f"p{i}", order=i, label=1 if i < n_pos else 0,
                features=rng.normal(size=2),
            )
        )
    return points


class TestSampleBalanced:
    def test_split_three_two(self):
        sample = sample_balanced(pool(20, 20), sample_pct=10, group_size=50,
                                 seed=0, group_index=2)
        labels = sorted(p.label for p in sample)
        assert len(sample) == 5
        assert labels.count(1) == 3 and labels.count(0) == 2

    def test_odd_extra_alternates_with_parity(self):
        even = sample_balanced(pool(20, 20), 10, 50, seed=0, group_index=2)
        odd = sample_balanced(pool(20, 20), 10, 50, seed=0, group_index=3)
        assert sum(p.label for p in even) == 3
        assert sum(p.label for p in odd) == 2

    def test_minority_shortfall_caps_both_classes(self):
        sample = sample_balanced(pool(2, 20), 10, 50, seed=0, group_index=2)
        labels = [p.label for p in sample]
        assert labels.count(1) == 2 and labels.count(0) == 2

    def test_no_positives_gives_empty_sample(self):
        assert sample_balanced(pool(0, 20), 10, 50, seed=0, group_index=2) == []

    def test_zero_pct_gives_empty_sample(self):
        assert sample_balanced(pool(10, 10), 0, 50, seed=0, group_index=1) == []

    def test_empty_pool_is_not_an_error(self):
        assert sample_balanced([], 10, 50, seed=0, group_index=1) == []

    def test_deterministic_and_without_replacement(self):
        a = sample_balanced(pool(30, 30), 20, 50, seed=7, group_index=4)
        b = sample_balanced(pool(30, 30), 20, 50, seed=7, group_index=4)
        assert [p.id for p in a] == [p.id for p in b]
        assert len({p.id for p in a}) == len(a)


class TestReplayBuffer:
    def test_window_one_keeps_only_previous_group(self):
        buffer = ReplayBuffer(window=1, sample_pct=10)
        for t in range(2, 6):
            contents = advance_buffer(buffer, pool(1, 1, seed=t), t)
            assert buffer.origins() == [t - 1, t - 1]
            assert len(contents) == 2

    def test_forty_points_after_warmup(self):
        buffer = ReplayBuffer(window=8, sample_pct=10)
        for t in range(2, 22):
            contents = advance_buffer(buffer, pool(3, 2, seed=t), t)
        assert len(contents) == 40

    def test_fifo_eviction_order(self):
        buffer = ReplayBuffer(window=3, sample_pct=10)
        for t in range(2, 8):
            advance_buffer(buffer, pool(1, 0, seed=t), t)
            origins = buffer.origins()
            assert origins == sorted(origins)
            assert min(origins) >= t - 3 and max(origins) < t

    def test_nonmonotone_advance_rejected(self):
        buffer = ReplayBuffer(window=2, sample_pct=10)
        buffer.advance(5)
        with pytest.raises(ValueError):
            buffer.advance(4)

    def test_bad_window(self):
        with pytest.raises(ValueError):
            ReplayBuffer(window=0, sample_pct=10)

    @given(st.integers(1, 6), st.integers(2, 12))
    @settings(max_examples=30, deadline=None)
    def test_window_exactness_and_size_bound(self, window, steps):
        buffer = ReplayBuffer(window=window, sample_pct=10)
        per_group = 4
        for t in range(2, 2 + steps):
            contents = advance_buffer(buffer, pool(2, 2, seed=t), t)
            origins = buffer.origins()
            assert all(t - window <= g < t for g in origins)
            assert len(contents) <= window * per_group

    def test_per_group_balance(self):
        buffer = ReplayBuffer(window=5, sample_pct=20)
        for t in range(2, 10):
            advance_buffer(
                buffer,
                sample_balanced(pool(30, 30, seed=t), 20, 50, seed=t, group_index=t - 1),
                t,
            )
        by_origin: dict[int, list[int]] = {}
        for p, g in buffer.entries:
            by_origin.setdefault(g, []).append(p.label)
        for labels in by_origin.values():
            assert abs(labels.count(1) - labels.count(0)) <= 1
