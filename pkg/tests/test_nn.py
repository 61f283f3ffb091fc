import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llstream import nn
from llstream.runner import Hyperparams


def hyper(**kw):
    defaults = dict(group_size=10, init_window=2, valid_window=1, epochs=10,
                    minibatch=4, lr=0.05, hidden=(8,), seed=0)
    defaults.update(kw)
    return Hyperparams(**defaults)


class TestInit:
    def test_shapes(self):
        model = nn.init_mlp([2, 1], seed=7)
        assert model.weights[0].shape == (2, 1)
        assert model.biases[0].shape == (1,)
        assert model.version == 0

    def test_deterministic(self):
        a = nn.init_mlp([20, 64, 64, 1], seed=1)
        b = nn.init_mlp([20, 64, 64, 1], seed=1)
        assert a.params_equal(b)

    def test_seed_changes_params(self):
        a = nn.init_mlp([20, 64, 1], seed=1)
        b = nn.init_mlp([20, 64, 1], seed=2)
        assert not a.params_equal(b)

    def test_bounds_follow_fan_in_out(self):
        model = nn.init_mlp([10, 5, 1], seed=0)
        assert np.max(np.abs(model.weights[0])) <= math.sqrt(6 / 15)
        assert np.max(np.abs(model.weights[1])) <= math.sqrt(6 / 6)
        assert all(np.all(b == 0) for b in model.biases)

    @pytest.mark.parametrize("sizes", [[], [3], [3, 2], [3, 0, 1], [3, -1, 1]])
    def test_rejects_bad_shapes(self, sizes):
        with pytest.raises(ValueError):
            nn.init_mlp(sizes, seed=0)


def zero_model(sizes):
    model = nn.init_mlp(sizes, seed=0)
    for w in model.weights:
        w[:] = 0.0
    return model


def manual_model(w, b):
    model = zero_model([len(w), 1])
    model.weights[0][:, 0] = w
    model.biases[0][0] = b
    return model


class TestForward:
    def test_zero_model_outputs_half(self):
        model = zero_model([3, 4, 1])
        x = np.random.default_rng(0).normal(size=(6, 3))
        assert np.allclose(nn.forward(model, x), 0.5)

    def test_orthogonal_input(self):
        model = manual_model([1.0, 0.0], 0.0)
        assert nn.forward(model, np.array([[0.0, 5.0]]))[0] == pytest.approx(0.5)

    def test_hand_evaluated_sigmoid(self):
        model = manual_model([1.0, 0.0], 0.0)
        out = nn.forward(model, np.array([[2.0, 0.0]]))[0]
        assert out == pytest.approx(0.8807970779778823, abs=1e-10)

    def test_outputs_strictly_inside_unit_interval(self):
        model = manual_model([100.0, 100.0], 50.0)
        out = nn.forward(model, np.array([[10.0, 10.0], [-10.0, -10.0]]))
        assert np.all(out > 0) and np.all(out < 1)

    def test_dimension_mismatch(self):
        model = zero_model([3, 1])
        with pytest.raises(ValueError):
            nn.forward(model, np.zeros((2, 4)))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_row_permutation_equivariance(self, seed):
        rng = np.random.default_rng(seed)
        model = nn.init_mlp([4, 6, 1], seed=seed % 1000)
        x = rng.normal(size=(8, 4))
        perm = rng.permutation(8)
        assert np.array_equal(nn.forward(model, x)[perm], nn.forward(model, x[perm]))


def finite_difference_grads(model, x, y, h=1e-4):
    """Central differences of the implemented loss over every parameter."""
    grads_w = []
    grads_b = []
    for kind, grads in (("weights", grads_w), ("biases", grads_b)):
        for arr in getattr(model, kind):
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                up, _, _ = nn.loss_and_grad(model, x, y)
                arr[idx] = orig - h
                down, _, _ = nn.loss_and_grad(model, x, y)
                arr[idx] = orig
                g[idx] = (up - down) / (2 * h)
                it.iternext()
            grads.append(g)
    return grads_w, grads_b


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=rtol, atol=atol)


class TestLossAndGrad:
    def test_bce_at_half_is_ln2(self):
        model = zero_model([2, 3, 1])
        x = np.random.default_rng(1).normal(size=(5, 2))
        y = np.array([0, 1, 1, 0, 1], dtype=float)
        loss, _, _ = nn.loss_and_grad(model, x, y)
        assert loss == pytest.approx(math.log(2), abs=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        for case in range(5):
            sizes = [3, 5, 1] if case % 2 else [4, 1]
            model = nn.init_mlp(sizes, seed=case)
            x = rng.normal(size=(6, sizes[0]))
            y = (rng.random(6) < 0.5).astype(float)
            _, grads, _ = nn.loss_and_grad(model, x, y)
            fd_w, fd_b = finite_difference_grads(model, x, y)
            assert_grads_close(grads.weights, fd_w)
            assert_grads_close(grads.biases, fd_b)

    def test_duplicated_rows_leave_loss_and_grads_unchanged(self):
        rng = np.random.default_rng(3)
        model = nn.init_mlp([3, 4, 1], seed=3)
        x = rng.normal(size=(5, 3))
        y = (rng.random(5) < 0.5).astype(float)
        loss1, g1, _ = nn.loss_and_grad(model, x, y)
        loss2, g2, _ = nn.loss_and_grad(model, np.tile(x, (2, 1)), np.tile(y, 2))
        assert loss1 == pytest.approx(loss2)
        for a, b in zip(g1.weights, g2.weights):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_input_grad_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        model = nn.init_mlp([3, 4, 1], seed=5)
        x = rng.normal(size=(4, 3))
        y = np.zeros(4)
        _, _, input_grad = nn.loss_and_grad(model, x, y)
        h = 1e-5
        fd = np.zeros_like(x)
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                bumped = x.copy()
                bumped[i, j] += h
                up = nn.forward(model, bumped).mean()
                bumped[i, j] -= 2 * h
                down = nn.forward(model, bumped).mean()
                fd[i, j] = (up - down) / (2 * h)
        np.testing.assert_allclose(input_grad, fd, rtol=1e-4, atol=1e-8)

    def test_rejects_nan_and_empty(self):
        model = zero_model([2, 1])
        with pytest.raises(ValueError):
            nn.loss_and_grad(model, np.array([[np.nan, 0.0]]), np.array([1.0]))
        with pytest.raises(ValueError):
            nn.loss_and_grad(model, np.zeros((0, 2)), np.zeros(0))

    def test_rejects_non_binary_labels(self):
        model = zero_model([2, 1])
        with pytest.raises(ValueError):
            nn.loss_and_grad(model, np.zeros((1, 2)), np.array([0.5]))


class TestAdam:
    def test_zero_grads_keep_params(self):
        model = nn.init_mlp([3, 4, 1], seed=0)
        state = nn.init_opt_state(model, lr=0.1)
        grads = nn.Grads(
            weights=[np.zeros_like(w) for w in model.weights],
            biases=[np.zeros_like(b) for b in model.biases],
        )
        updated, new_state = nn.adam_step(model, grads, state)
        assert updated.params_equal(model)
        assert new_state.step == 1

    def test_first_step_is_lr_times_sign(self):
        model = manual_model([1.0, -2.0], 0.5)
        state = nn.init_opt_state(model, lr=0.1)
        grads = nn.Grads(
            weights=[np.array([[0.3], [-0.7]])],
            biases=[np.array([0.2])],
        )
        updated, _ = nn.adam_step(model, grads, state)
        step_w = updated.weights[0] - model.weights[0]
        np.testing.assert_allclose(step_w[:, 0], [-0.1, 0.1], rtol=1e-6)
        assert updated.biases[0][0] - model.biases[0][0] == pytest.approx(-0.1, rel=1e-6)

    def test_quadratic_convergence(self):
        # Independent recurrence on f(w) = w^2 with plain python floats.
        w, m, v = 1.0, 0.0, 0.0
        for t in range(1, 201):
            g = 2.0 * w
            m = nn.ADAM_BETA1 * m + (1 - nn.ADAM_BETA1) * g
            v = nn.ADAM_BETA2 * v + (1 - nn.ADAM_BETA2) * g * g
            w -= 0.1 * (m / (1 - nn.ADAM_BETA1**t)) / (
                math.sqrt(v / (1 - nn.ADAM_BETA2**t)) + nn.ADAM_EPS
            )
        assert abs(w) < 1e-2

        # The vectorized implementation follows the same trajectory.
        model = manual_model([1.0], 0.0)
        state = nn.init_opt_state(model, lr=0.1)
        for _ in range(200):
            g = nn.Grads(
                weights=[2.0 * model.weights[0]],
                biases=[np.zeros(1)],
            )
            model, state = nn.adam_step(model, g, state)
        assert model.weights[0][0, 0] == pytest.approx(w, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        model = manual_model([1.0, 2.0], 0.0)
        state = nn.init_opt_state(model, lr=0.1)
        grads = nn.Grads(weights=[np.zeros((3, 1))], biases=[np.zeros(1)])
        with pytest.raises(ValueError):
            nn.adam_step(model, grads, state)


def blobs(n_per_class, d=2, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(loc=-2.0, size=(n_per_class, d))
    x1 = rng.normal(loc=2.0, size=(n_per_class, d))
    x = np.vstack([x0, x1])
    y = np.concatenate([np.zeros(n_per_class), np.ones(n_per_class)])
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


class TestFit:
    def test_zero_epochs_returns_input_unchanged(self):
        model = nn.init_mlp([2, 4, 1], seed=1)
        x, y = blobs(10)
        fitted, report = nn.fit(model, (x, y), (x, y), hyper(epochs=0))
        assert fitted.params_equal(model)
        assert fitted.version == model.version
        assert report.best_epoch is None and report.train_loss == []

    def test_separable_blobs_reach_high_f1(self):
        x, y = blobs(200, seed=4)
        xv, yv = blobs(50, seed=5)
        model = nn.init_mlp([2, 8, 1], seed=0)
        fitted, report = nn.fit(model, (x, y), (xv, yv), hyper(epochs=15))
        assert max(report.valid_f1) >= 0.95
        assert fitted.version == 1

    def test_training_loss_below_ln2_on_separable_data(self):
        x, y = blobs(100, seed=8)
        model = nn.init_mlp([2, 8, 1], seed=2)
        _, report = nn.fit(model, (x, y), (x[:40], y[:40]), hyper(epochs=15))
        assert report.train_loss[report.best_epoch] < math.log(2)

    def test_deterministic_reports(self):
        x, y = blobs(30, seed=1)
        model = nn.init_mlp([2, 6, 1], seed=9)
        fit_a = nn.fit(model, (x, y), (x, y), hyper())
        fit_b = nn.fit(model, (x, y), (x, y), hyper())
        assert fit_a[1] == fit_b[1]
        assert fit_a[0].params_equal(fit_b[0])

    def test_best_epoch_attains_max_valid_f1(self):
        x, y = blobs(50, seed=2)
        model = nn.init_mlp([2, 4, 1], seed=3)
        _, report = nn.fit(model, (x, y), (x, y), hyper(epochs=12))
        assert report.valid_f1[report.best_epoch] == max(report.valid_f1)
        # earliest epoch wins ties
        best = report.valid_f1[report.best_epoch]
        first = next(i for i, v in enumerate(report.valid_f1) if v == best)
        assert report.best_epoch == first

    def test_input_model_not_mutated(self):
        x, y = blobs(30, seed=6)
        model = nn.init_mlp([2, 4, 1], seed=4)
        snapshot = model.copy()
        nn.fit(model, (x, y), (x, y), hyper())
        assert model.params_equal(snapshot)

    def test_single_class_validation_flagged_and_uses_loss(self):
        x, y = blobs(30, seed=7)
        xv = x[:10]
        yv = np.zeros(10)
        model = nn.init_mlp([2, 4, 1], seed=5)
        _, report = nn.fit(model, (x, y), (xv, yv), hyper(epochs=8))
        assert report.degenerate_validation
        assert report.valid_loss[report.best_epoch] == min(report.valid_loss)

    def test_incremental_update_changes_version_only_once(self):
        x, y = blobs(30, seed=9)
        model = nn.init_mlp([2, 4, 1], seed=6)
        first, _ = nn.fit(model, (x, y), (x, y), hyper(epochs=3))
        second, _ = nn.fit(first, (x, y), (x, y), hyper(epochs=3))
        assert (model.version, first.version, second.version) == (0, 1, 2)

    def test_empty_sets_rejected(self):
        model = nn.init_mlp([2, 4, 1], seed=0)
        x, y = blobs(5)
        with pytest.raises(ValueError):
            nn.fit(model, (np.zeros((0, 2)), np.zeros(0)), (x, y), hyper())


class TestPredictLabels:
    def test_zero_model_ties_go_positive(self):
        model = zero_model([2, 1])
        labels = nn.predict_labels(model, np.zeros((4, 2)), threshold=0.5)
        assert np.all(labels == 1)

    def test_high_threshold_blocks_everything(self):
        model = zero_model([2, 1])
        labels = nn.predict_labels(model, np.zeros((4, 2)), threshold=1 - 1e-9)
        assert np.all(labels == 0)

    @given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
    @settings(max_examples=30, deadline=None)
    def test_raising_threshold_is_monotone(self, t1, t2):
        lo, hi = sorted((t1, t2))
        model = nn.init_mlp([3, 4, 1], seed=11)
        x = np.random.default_rng(11).normal(size=(12, 3))
        at_lo = nn.predict_labels(model, x, lo)
        at_hi = nn.predict_labels(model, x, hi)
        assert np.all(at_hi <= at_lo)

    def test_bad_threshold(self):
        model = zero_model([2, 1])
        with pytest.raises(ValueError):
            nn.predict_labels(model, np.zeros((1, 2)), threshold=1.5)


class TestSerialization:
    def test_round_trip_lossless(self, tmp_path):
        model = nn.init_mlp([4, 7, 3, 1], seed=13)
        model.version = 5
        path = tmp_path / "model.json"
        nn.save_model(model, path)
        loaded = nn.load_model(path)
        assert loaded.params_equal(model)
        assert loaded.version == 5
        assert loaded.layer_sizes == model.layer_sizes

    def test_rejects_unknown_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "other"}')
        with pytest.raises(ValueError):
            nn.load_model(path)
