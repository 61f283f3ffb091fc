import numpy as np
import pytest

from llstream import nn
from llstream.driftgen import (
    Concept,
    Drift,
    StreamSpec,
    calibrated_concepts,
    generate_stream,
    random_concepts,
)
from llstream.runner import Hyperparams
from llstream.stream import to_xy


def labels_and_features(points):
    x = np.stack([p.features for p in points])
    y = np.array([p.label for p in points])
    return x, y


def concept_rule(concept: Concept, x: np.ndarray) -> np.ndarray:
    return (x @ concept.weights + concept.offset > 0).astype(int)


class TestSpecValidation:
    def test_bad_beta_noise_and_pattern(self):
        with pytest.raises(ValueError):
            StreamSpec(n=10, d=2, beta=0.0)
        with pytest.raises(ValueError):
            StreamSpec(n=10, d=2, beta=0.3, noise=0.5)
        with pytest.raises(ValueError):
            StreamSpec(n=10, d=2, beta=0.3, cohort_pattern=(1, 0))

    def test_drift_indices_must_be_in_range(self):
        with pytest.raises(ValueError):
            StreamSpec(n=10, d=2, beta=0.3, drift=Drift.sudden(at=11))
        with pytest.raises(ValueError):
            StreamSpec(n=10, d=2, beta=0.3, drift=Drift.gradual(start=0, length=5))
        with pytest.raises(ValueError):
            StreamSpec(n=10, d=2, beta=0.3, drift=Drift(kind="wobbly"))

    def test_unreachable_beta_under_noise(self):
        with pytest.raises(ValueError):
            generate_stream(StreamSpec(n=100, d=2, beta=0.05, noise=0.05, seed=0))

    def test_degenerate_concept_rejected(self):
        spec = StreamSpec(
            n=100, d=2, beta=0.3,
            concepts=(Concept(weights=np.zeros(2)),),
        )
        with pytest.raises(ValueError):
            generate_stream(spec)


class TestCalibration:
    def test_positive_rate_close_at_10k(self):
        for beta in (0.05, 0.3, 0.37):
            points = generate_stream(StreamSpec(n=10_000, d=8, beta=beta, seed=1))
            rate = sum(p.label for p in points) / len(points)
            assert abs(rate - beta) <= 0.02

    def test_positive_rate_with_noise_compensated(self):
        points = generate_stream(
            StreamSpec(n=10_000, d=8, beta=0.3, noise=0.05, seed=2)
        )
        rate = sum(p.label for p in points) / len(points)
        assert abs(rate - 0.3) <= 0.02

    def test_rate_tolerance_at_1k(self):
        points = generate_stream(StreamSpec(n=1000, d=4, beta=0.25, seed=3))
        rate = sum(p.label for p in points) / len(points)
        assert abs(rate - 0.25) <= 0.05


class TestDeterminism:
    def test_same_seed_same_stream(self):
        spec = StreamSpec(n=500, d=3, beta=0.4, noise=0.1, seed=9)
        a = generate_stream(spec)
        b = generate_stream(spec)
        assert all(
            p.id == q.id and p.label == q.label and np.array_equal(p.features, q.features)
            for p, q in zip(a, b)
        )

    def test_different_seed_differs(self):
        a = generate_stream(StreamSpec(n=500, d=3, beta=0.4, seed=1))
        b = generate_stream(StreamSpec(n=500, d=3, beta=0.4, seed=2))
        assert any(p.label != q.label for p, q in zip(a, b))


class TestDriftKinds:
    def test_sudden_switches_rule_at_position(self):
        spec = StreamSpec(n=400, d=4, beta=0.4, seed=5, drift=Drift.sudden(at=201))
        points = generate_stream(spec)
        c0, c1 = calibrated_concepts(spec)
        x, y = labels_and_features(points)
        assert np.array_equal(y[:200], concept_rule(c0, x[:200]))
        assert np.array_equal(y[200:], concept_rule(c1, x[200:]))

    def test_gradual_pins_rule_outside_ramp(self):
        spec = StreamSpec(
            n=600, d=4, beta=0.4, seed=6, drift=Drift.gradual(start=201, length=200)
        )
        points = generate_stream(spec)
        c0, c1 = calibrated_concepts(spec)
        x, y = labels_and_features(points)
        assert np.array_equal(y[:200], concept_rule(c0, x[:200]))
        assert np.array_equal(y[400:], concept_rule(c1, x[400:]))
        ramp = slice(200, 400)
        agrees_c0 = np.mean(y[ramp] == concept_rule(c0, x[ramp]))
        agrees_c1 = np.mean(y[ramp] == concept_rule(c1, x[ramp]))
        assert 0 < agrees_c0 < 1 and 0 < agrees_c1 < 1

    def test_incremental_interpolates_parameters(self):
        spec = StreamSpec(
            n=400, d=4, beta=0.4, seed=7, drift=Drift.incremental(start=101, length=200)
        )
        points = generate_stream(spec)
        c0, c1 = calibrated_concepts(spec)
        x, y = labels_and_features(points)
        assert np.array_equal(y[:100], concept_rule(c0, x[:100]))
        assert np.array_equal(y[300:], concept_rule(c1, x[300:]))
        i = 200  # halfway through the ramp: alpha = 0.5
        w = 0.5 * c0.weights + 0.5 * c1.weights
        b = 0.5 * c0.offset + 0.5 * c1.offset
        assert y[i] == int(x[i] @ w + b > 0)

    def test_recurrent_repeats_with_double_period(self):
        spec = StreamSpec(n=800, d=4, beta=0.4, seed=8, drift=Drift.recurrent(period=100))
        points = generate_stream(spec)
        c0, c1 = calibrated_concepts(spec)
        x, y = labels_and_features(points)
        for block in range(8):
            rule = c0 if block % 2 == 0 else c1
            sl = slice(block * 100, (block + 1) * 100)
            assert np.array_equal(y[sl], concept_rule(rule, x[sl]))


class TestLearnabilityOracles:
    def train(self, x, y, seed=0, epochs=15):
        hyper = Hyperparams(group_size=10, init_window=2, valid_window=1,
                            epochs=epochs, lr=0.01, hidden=(16,), seed=seed)
        model = nn.init_mlp([x.shape[1], 16, 1], seed=seed)
        split = int(0.8 * len(y))
        fitted, _ = nn.fit(model, (x[:split], y[:split]), (x[split:], y[split:]), hyper)
        return fitted

    def f1_of(self, model, x, y):
        pred = nn.predict_labels(model, x)
        tp = np.sum((pred == 1) & (y == 1))
        fp = np.sum((pred == 1) & (y == 0))
        fn = np.sum((pred == 0) & (y == 1))
        return 2 * tp / (2 * tp + fp + fn)

    def test_stationary_noiseless_stream_is_learnable(self):
        points = generate_stream(StreamSpec(n=2000, d=5, beta=0.4, seed=11))
        x, y = to_xy(points)
        model = self.train(x[:1400], y[:1400])
        assert self.f1_of(model, x[1400:], y[1400:]) >= 0.95

    def test_frozen_model_degrades_after_sudden_orthogonal_drift(self):
        concepts = random_concepts(6, 2, seed=12, orthogonal=True)
        spec = StreamSpec(
            n=4000, d=6, beta=0.4, seed=12, drift=Drift.sudden(at=2001),
            concepts=concepts,
        )
        points = generate_stream(spec)
        x, y = to_xy(points)
        model = self.train(x[:1600], y[:1600], seed=1)
        pre = self.f1_of(model, x[1600:2000], y[1600:2000])
        post = self.f1_of(model, x[2000:], y[2000:])
        assert post < pre


class TestCohortsAndTime:
    def test_cohort_pattern_repeats_contiguously(self):
        spec = StreamSpec(n=20, d=2, beta=0.4, seed=13, cohort_pattern=(1, 1, 1, 2))
        points = generate_stream(spec)
        sizes = {}
        for p in points:
            sizes.setdefault(p.cohort, 0)
            sizes[p.cohort] += 1
        # pattern 1,1,1,2 over 20 points: 16 cohorts of sizes 1,1,1,2 repeating
        assert sorted(sizes.values()) == [1] * 12 + [2] * 4
        # contiguity: each cohort occupies one run of consecutive orders
        for cohort in sizes:
            orders = [p.order for p in points if p.cohort == cohort]
            assert orders == list(range(min(orders), max(orders) + 1))

    def test_timestamps_advance_by_points_per_day(self):
        spec = StreamSpec(n=10, d=2, beta=0.4, seed=14, points_per_day=2.0)
        points = generate_stream(spec)
        delta = points[2].timestamp - points[0].timestamp
        assert delta.total_seconds() == pytest.approx(86400.0)

    def test_no_cohorts_or_timestamps_by_default(self):
        points = generate_stream(StreamSpec(n=5, d=2, beta=0.4, seed=15))
        assert all(p.cohort is None and p.timestamp is None for p in points)
