import math

import numpy as np
import pytest

from sparkxd.snn import (
    NeuronState,
    SnnParams,
    assign_classes,
    infer,
    init_model,
    lif_step,
    rate_encode,
    run_sample,
    stdp_update,
    train,
)

SMALL = SnnParams(n_in=16, n_exc=6, duration_ms=100.0)


class TestRateEncode:
    def test_zero_image_is_silent(self):
        train_ = rate_encode(np.zeros(10), 350, 1.0, 63.75, seed=1)
        assert train_.shape == (350, 10)
        assert train_.sum() == 0

    def test_mean_count_matches_poisson_oracle(self):
        # intensity 1.0 at 63.75 Hz for 350 ms -> expected 22.3125 spikes;
        # per-bin Bernoulli thinning keeps the mean, variance np(1-p)
        p = 63.75 * 1e-3
        n = 350
        counts = [
            rate_encode(np.ones(1), 350, 1.0, 63.75, seed=s).sum() for s in range(300)
        ]
        mean_sigma = math.sqrt(n * p * (1 - p) / len(counts))
        assert abs(np.mean(counts) - n * p) < 3 * mean_sigma

    def test_deterministic_per_seed(self):
        img = np.linspace(0, 1, 20)
        a = rate_encode(img, 100, 1.0, 63.75, seed=9)
        b = rate_encode(img, 100, 1.0, 63.75, seed=9)
        assert np.array_equal(a, b)

    def test_rejects_out_of_range_intensity(self):
        with pytest.raises(ValueError):
            rate_encode(np.array([1.5]), 100, 1.0, 63.75, seed=1)


class TestLifStep:
    def test_resting_is_fixed_point(self):
        state = NeuronState.resting(SMALL)
        no_input = np.zeros(SMALL.n_in, np.uint8)
        w = np.zeros((SMALL.n_in, SMALL.n_exc), np.float32)
        state2, fired = lif_step(state, no_input, w, SMALL)
        assert not fired.any()
        assert np.allclose(state2.v, SMALL.v_rest_mv)

    def test_huge_weight_forces_immediate_fire(self):
        state = NeuronState.resting(SMALL)
        spikes = np.zeros(SMALL.n_in, np.uint8)
        spikes[0] = 1
        w = np.zeros((SMALL.n_in, SMALL.n_exc), np.float32)
        w[0, 2] = 1e4
        state2, fired = lif_step(state, spikes, w, SMALL)
        assert fired[2]
        assert state2.v[2] == SMALL.v_reset_mv
        assert state2.refrac[2] == SMALL.refrac_steps
        assert state2.theta[2] > 0

    def test_leak_halves_every_tau_ln2(self):
        # closed form: V(t) - v_rest = (V0 - v_rest) e^(-t/tau)
        params = SnnParams(n_in=4, n_exc=2, tau_mem_ms=100.0, dt_ms=1.0)
        state = NeuronState.resting(params)
        state.v[:] = params.v_rest_mv + 8.0
        no_input = np.zeros(params.n_in, np.uint8)
        w = np.zeros((params.n_in, params.n_exc), np.float32)
        half_life = int(round(params.tau_mem_ms * math.log(2)))
        for _ in range(half_life):
            state, _ = lif_step(state, no_input, w, params)
        expected = 8.0 * math.exp(-half_life / params.tau_mem_ms)
        assert state.v[0] - params.v_rest_mv == pytest.approx(expected, rel=1e-9)
        assert state.v[0] - params.v_rest_mv == pytest.approx(4.0, rel=2e-2)

    def test_leak_matches_analytic_to_1e6(self):
        # dt = tau/100 over one full tau: integrator error < 1e-6 relative
        params = SnnParams(n_in=2, n_exc=2, tau_mem_ms=100.0, dt_ms=1.0)
        state = NeuronState.resting(params)
        state.v[:] = params.v_rest_mv + 5.0
        no_input = np.zeros(params.n_in, np.uint8)
        w = np.zeros((params.n_in, params.n_exc), np.float32)
        for _ in range(100):
            state, _ = lif_step(state, no_input, w, params)
        analytic = 5.0 * math.exp(-1.0)
        rel_err = abs((state.v[0] - params.v_rest_mv) - analytic) / analytic
        assert rel_err < 1e-6

    def test_refractory_blocks_refire(self):
        params = SnnParams(n_in=2, n_exc=1, refrac_ms=5.0)
        state = NeuronState.resting(params)
        spikes = np.array([1, 0], np.uint8)
        w = np.full((2, 1), 1e4, np.float32)
        fires = []
        for _ in range(12):
            state, fired = lif_step(state, spikes, w, params)
            fires.append(bool(fired[0]))
        fire_steps = [i for i, f in enumerate(fires) if f]
        for a, b in zip(fire_steps, fire_steps[1:]):
            assert b - a > params.refrac_steps

    def test_inhibition_never_increases_spikes(self):
        rng = np.random.default_rng(17)
        spikes = (rng.random((100, 16)) < 0.3).astype(np.uint8)
        w = (rng.random((16, 6)) * 0.9).astype(np.float32)
        totals = []
        for inhib in (0.0, 5.0, 17.0, 40.0):
            params = SnnParams(n_in=16, n_exc=6, inhib_mv=inhib)
            state = NeuronState.resting(params)
            total = 0
            for t in range(100):
                state, fired = lif_step(state, spikes[t], w, params)
                total += int(fired.sum())
            totals.append(total)
        assert all(a >= b for a, b in zip(totals, totals[1:]))


class TestStdpUpdate:
    def _traces(self, params):
        return np.zeros(params.n_in), np.zeros(params.n_exc)

    def test_no_spikes_no_change(self):
        x_pre, x_post = self._traces(SMALL)
        w = np.full((SMALL.n_in, SMALL.n_exc), 0.5, np.float32)
        out = stdp_update(w, x_pre, x_post,
                          np.zeros(SMALL.n_in), np.zeros(SMALL.n_exc), SMALL)
        assert np.array_equal(out, w)

    def test_pre_then_post_potentiates(self):
        x_pre, x_post = self._traces(SMALL)
        x_pre[3] = 0.9  # recent presynaptic spike on input 3
        w = np.full((SMALL.n_in, SMALL.n_exc), 0.5, np.float32)
        post = np.zeros(SMALL.n_exc)
        post[1] = 1
        out = stdp_update(w, x_pre, x_post, np.zeros(SMALL.n_in), post, SMALL)
        assert out[3, 1] > w[3, 1]

    def test_post_then_pre_depresses(self):
        x_pre, x_post = self._traces(SMALL)
        x_post[1] = 0.9  # recent postsynaptic spike on neuron 1
        w = np.full((SMALL.n_in, SMALL.n_exc), 0.5, np.float32)
        pre = np.zeros(SMALL.n_in)
        pre[3] = 1
        out = stdp_update(w, x_pre, x_post, pre, np.zeros(SMALL.n_exc), SMALL)
        assert out[3, 1] < w[3, 1]

    def test_clips_at_w_max(self):
        x_pre, x_post = self._traces(SMALL)
        x_pre[:] = 5.0
        w = np.full((SMALL.n_in, SMALL.n_exc), SMALL.w_max, np.float32)
        post = np.ones(SMALL.n_exc)
        out = stdp_update(w, x_pre, x_post, np.zeros(SMALL.n_in), post, SMALL)
        assert np.all(out == SMALL.w_max)


class TestTrainingInvariants:
    def test_weights_stay_bounded(self):
        rng = np.random.default_rng(23)
        params = SnnParams(n_in=16, n_exc=6, duration_ms=80.0)
        model = init_model(params, seed=3, n_classes=2)
        images = rng.random((12, 16)).astype(np.float32)
        train(model, images, epochs=2, seed=5)
        assert model.weights.min() >= 0.0
        assert model.weights.max() <= params.w_max + 1e-6

    def test_training_is_deterministic(self):
        params = SnnParams(n_in=16, n_exc=6, duration_ms=80.0)
        rng = np.random.default_rng(29)
        images = rng.random((10, 16)).astype(np.float32)
        m1 = init_model(params, seed=3, n_classes=2)
        m2 = init_model(params, seed=3, n_classes=2)
        train(m1, images, epochs=1, seed=5)
        train(m2, images, epochs=1, seed=5)
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.theta, m2.theta)


class TestInfer:
    def _toy_model(self):
        params = SnnParams(n_in=8, n_exc=4, duration_ms=120.0, inhib_mv=0.0,
                           theta_plus_mv=0.0)
        model = init_model(params, seed=11, n_classes=2)
        # neuron 0/1 tuned to the low half, 2/3 to the high half
        w = np.zeros((8, 4), np.float32)
        w[:4, :2] = 1.0
        w[4:, 2:] = 1.0
        model.weights = w
        model.assignments = np.array([0, 0, 1, 1], np.int64)
        return model

    def _toy_data(self):
        images = np.zeros((6, 8), np.float32)
        images[:3, :4] = 1.0  # class 0: low pixels lit
        images[3:, 4:] = 1.0  # class 1
        labels = np.array([0, 0, 0, 1, 1, 1], np.int64)
        return images, labels

    def test_dominant_group_classifies_perfectly(self):
        model = self._toy_model()
        images, labels = self._toy_data()
        acc, preds = infer(model, images, labels, seed=7)
        assert acc == 1.0
        assert preds.tolist() == labels.tolist()

    def test_zero_weights_hit_chance_level(self):
        model = self._toy_model()
        model.weights = np.zeros_like(model.weights)
        # silent network + lowest-class tie break -> predicts class 0 always
        assign_classes(model, *self._toy_data(), seed=3)
        images, labels = self._toy_data()
        acc, preds = infer(model, images, labels, seed=7)
        assert set(preds.tolist()) == {0}
        assert acc == pytest.approx(0.5)  # balanced two-class set

    def test_deterministic(self):
        model = self._toy_model()
        images, labels = self._toy_data()
        a1, p1 = infer(model, images, labels, seed=9)
        a2, p2 = infer(model, images, labels, seed=9)
        assert a1 == a2
        assert np.array_equal(p1, p2)

    def test_empty_dataset_rejected(self):
        model = self._toy_model()
        with pytest.raises(ValueError):
            infer(model, np.zeros((0, 8)), np.zeros(0, np.int64), seed=1)

    def test_unassigned_model_rejected(self):
        model = self._toy_model()
        model.assignments[:] = -1
        images, labels = self._toy_data()
        with pytest.raises(ValueError):
            infer(model, images, labels, seed=1)


class TestAssignClasses:
    def test_assigns_by_strongest_response(self):
        model = TestInfer()._toy_model()
        images, labels = TestInfer()._toy_data()
        model.assignments[:] = -1
        assign_classes(model, images, labels, seed=13)
        assert model.assignments.tolist() == [0, 0, 1, 1]


class TestRunSample:
    def test_learn_false_leaves_model_untouched(self):
        params = SnnParams(n_in=16, n_exc=6, duration_ms=60.0)
        model = init_model(params, seed=3, n_classes=2)
        w0 = model.weights.copy()
        th0 = model.theta.copy()
        spikes = rate_encode(np.linspace(0, 1, 16), 60, 1.0, 63.75, seed=21)
        run_sample(model, spikes, learn=False)
        assert np.array_equal(model.weights, w0)
        assert np.array_equal(model.theta, th0)
