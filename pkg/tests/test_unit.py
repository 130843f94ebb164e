import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvm_saccade.errors import ConfigurationError
from pvm_saccade.unit import (
    LearningConfig,
    Rect,
    UnitSpec,
    forward,
    init_state,
    init_weights,
    precompute_features,
    sigmoid,
    train_step,
)

from conftest import make_unit


class TestPrecompute:
    def test_zero_derivative_when_signal_repeats(self):
        spec, _, state = make_unit(signal_dim=3)
        state.initialized = True
        state.P[:] = [0.2, 0.7, 0.9]
        precompute_features(spec, state, np.array([0.2, 0.7, 0.9]), tau=0.99)
        assert np.all(state.D == 0.5)

    def test_perfect_prediction_maps_to_midpoint(self):
        spec, _, state = make_unit(signal_dim=3)
        state.initialized = True
        p = np.array([0.1, 0.5, 0.9])
        state.P_star[:] = p
        precompute_features(spec, state, p, tau=0.5)
        assert np.all(state.E == 0.5)

    def test_scalar_derivative_and_error(self):
        spec, _, state = make_unit(signal_dim=1)
        state.initialized = True
        state.P[:] = 0.2
        precompute_features(spec, state, np.array([0.8]), tau=0.99)
        assert state.D[0] == pytest.approx(0.8)

        spec, _, state = make_unit(signal_dim=1)
        state.initialized = True
        state.P_star[:] = 1.0
        precompute_features(spec, state, np.array([0.0]), tau=0.99)
        assert state.E[0] == pytest.approx(1.0)

    def test_tau_zero_is_memoryless(self):
        spec, _, state = make_unit(signal_dim=4)
        state.initialized = True
        state.I[:] = 0.123
        p = np.array([0.3, 0.4, 0.5, 0.6])
        precompute_features(spec, state, p, tau=0.0)
        assert np.array_equal(state.I, p)

    def test_dimension_mismatch_rejected(self):
        spec, _, state = make_unit(signal_dim=4)
        with pytest.raises(ConfigurationError):
            precompute_features(spec, state, np.zeros(5), tau=0.5)

    def test_first_signal_seeds_history(self):
        spec, _, state = make_unit(signal_dim=2)
        p = np.array([0.3, 0.8])
        precompute_features(spec, state, p, tau=0.99)
        assert np.all(state.D == 0.5)
        assert np.all(state.E == 0.5)
        assert np.allclose(state.I, p)


class TestForward:
    def test_zero_weights_give_midpoint(self):
        spec, weights, state = make_unit(signal_dim=3, hidden_dim=2, context_dim=2)
        for arr in (weights.W_h, weights.b_h, weights.W_p, weights.b_p):
            arr[:] = 0.0
        state.P[:] = [0.1, 0.2, 0.3]
        forward(spec, weights, state)
        assert np.all(state.H == 0.5)
        assert np.all(state.P_star == 0.5)

    def test_hand_computed_single_neuron(self):
        spec, weights, state = make_unit(signal_dim=1, hidden_dim=1, context_dim=1)
        weights.W_h[:] = 0.0
        weights.W_h[0, 0] = 4.0
        weights.b_h[:] = -2.0
        weights.W_p[:] = 0.0
        weights.b_p[:] = 0.0
        state.P[:] = 0.5
        forward(spec, weights, state)
        assert state.H[0] == pytest.approx(0.5)

    def test_deterministic(self):
        outs = []
        for _ in range(2):
            spec, weights, state = make_unit(seed=7)
            state.P[:] = [0.1, 0.9, 0.4, 0.6]
            state.C[:] = 0.25
            forward(spec, weights, state)
            outs.append((state.H.copy(), state.P_star.copy()))
        assert np.array_equal(outs[0][0], outs[1][0])
        assert np.array_equal(outs[0][1], outs[1][1])


def _loss(spec, W_h, b_h, W_p, b_p, x, target):
    H = sigmoid(W_h @ x + b_h)
    P_star = sigmoid(W_p @ H + b_p)
    return 0.5 * np.sum((P_star - target) ** 2)


class TestTrain:
    def test_zero_gradient_at_target(self):
        spec, weights, state = make_unit()
        state.P[:] = [0.3, 0.6, 0.2, 0.8]
        forward(spec, weights, state)
        before = weights.copy()
        train_step(spec, weights, state, state.P_star.copy(), lr=0.5)
        assert np.array_equal(weights.W_h, before.W_h)
        assert np.array_equal(weights.W_p, before.W_p)

    def test_zero_learning_rate(self):
        spec, weights, state = make_unit()
        state.P[:] = [0.3, 0.6, 0.2, 0.8]
        forward(spec, weights, state)
        before = weights.copy()
        train_step(spec, weights, state, np.zeros(4), lr=0.0)
        assert np.array_equal(weights.W_h, before.W_h)
        assert np.array_equal(weights.b_p, before.b_p)

    def test_gradient_matches_finite_differences(self, rng):
        # 4-2-4 unit; central differences with eps=1e-5 as the oracle
        spec, weights, state = make_unit(signal_dim=4, hidden_dim=2, context_dim=2, seed=3)
        state.P[:] = rng.uniform(0, 1, 4)
        state.D[:] = rng.uniform(0, 1, 4)
        state.I[:] = rng.uniform(0, 1, 4)
        state.E[:] = rng.uniform(0, 1, 4)
        state.C[:] = rng.uniform(0, 1, 2)
        forward(spec, weights, state)
        target = rng.uniform(0, 1, 4)
        x = state.input_prev.copy()

        lr = 1e-3
        before = weights.copy()
        train_step(spec, weights, state, target, lr=lr)

        eps = 1e-5
        for name in ("W_h", "b_h", "W_p", "b_p"):
            w0 = getattr(before, name)
            analytic = (w0 - getattr(weights, name)) / lr
            fd = np.zeros_like(w0)
            for idx in np.ndindex(w0.shape):
                mats = {k: getattr(before, k).copy() for k in ("W_h", "b_h", "W_p", "b_p")}
                mats[name][idx] += eps
                lp = _loss(spec, mats["W_h"], mats["b_h"], mats["W_p"], mats["b_p"], x, target)
                mats[name][idx] -= 2 * eps
                lm = _loss(spec, mats["W_h"], mats["b_h"], mats["W_p"], mats["b_p"], x, target)
                fd[idx] = (lp - lm) / (2 * eps)
            denom = np.maximum(np.maximum(np.abs(fd), np.abs(analytic)), 1e-8)
            rel = np.abs(fd - analytic) / denom
            assert rel.max() < 1e-4, f"{name}: max rel err {rel.max():.2e}"


class TestInitWeights:
    def test_same_seed_identical(self):
        spec, w1, _ = make_unit(seed=42)
        w2 = init_weights(spec, 42)
        assert np.array_equal(w1.W_h, w2.W_h)
        assert np.array_equal(w1.b_p, w2.b_p)

    def test_bound(self):
        tile = Rect(0, 0, 1, 1)
        spec = UnitSpec(0, 0, 1, 4, 4, tile)  # fan_in for W_p layer = 4
        w = init_weights(spec, 0)
        assert np.all(np.abs(w.W_p) <= 0.5)
        assert np.all(np.abs(w.b_p) <= 0.5)
        lim_h = 1.0 / np.sqrt(spec.input_dim)
        assert np.all(np.abs(w.W_h) <= lim_h)

    def test_per_unit_streams_differ(self):
        tile = Rect(0, 0, 1, 1)
        a = init_weights(UnitSpec(0, 0, 4, 2, 4, tile), 0)
        b = init_weights(UnitSpec(1, 0, 4, 2, 4, tile), 0)
        assert not np.array_equal(a.W_h, b.W_h)


class TestLearningConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ConfigurationError):
            LearningConfig(learning_rate=0.0)
        with pytest.raises(ConfigurationError):
            LearningConfig(tau_integral=1.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), tau=st.floats(0.0, 1.0), n_steps=st.integers(1, 40))
def test_range_invariant_under_fuzzing(seed, tau, n_steps):
    spec, weights, state = make_unit(signal_dim=3, hidden_dim=2, context_dim=2, seed=seed)
    gen = np.random.default_rng(seed)
    for _ in range(n_steps):
        p = gen.uniform(0, 1, 3)
        state.C[:] = np.resize(state.H, 2)
        precompute_features(spec, state, p, tau)
        if state.trainable:
            train_step(spec, weights, state, state.P, lr=0.05)
        forward(spec, weights, state)
        for arr in (state.I, state.D, state.E, state.H, state.P_star):
            assert np.all(arr >= 0.0) and np.all(arr <= 1.0)


def test_learning_on_alternating_sequence():
    spec, weights, state = make_unit(signal_dim=4, hidden_dim=4, context_dim=4, seed=11)
    gen = np.random.default_rng(11)
    sig = [gen.uniform(0, 1, 4), gen.uniform(0, 1, 4)]
    errs = []
    for t in range(2000):
        p = sig[t % 2]
        state.C[:] = state.H
        precompute_features(spec, state, p, tau=0.99)
        errs.append(float(np.mean((2.0 * state.E - 1.0) ** 2)))
        if state.trainable:
            train_step(spec, weights, state, state.P, lr=0.01)
        forward(spec, weights, state)
    early = np.mean(errs[:100])
    late = np.mean(errs[-100:])
    assert late < 0.25 * early


def test_weight_trajectory_determinism():
    snapshots = []
    for _ in range(2):
        spec, weights, state = make_unit(signal_dim=4, hidden_dim=2, context_dim=2, seed=5)
        gen = np.random.default_rng(5)
        for _ in range(50):
            p = gen.uniform(0, 1, 4)
            state.C[:] = state.H
            precompute_features(spec, state, p, tau=0.99)
            if state.trainable:
                train_step(spec, weights, state, state.P, lr=0.01)
            forward(spec, weights, state)
        snapshots.append((weights.W_h.copy(), weights.W_p.copy()))
    assert np.array_equal(snapshots[0][0], snapshots[1][0])
    assert np.array_equal(snapshots[0][1], snapshots[1][1])
