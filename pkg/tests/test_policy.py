import math

import numpy as np
import pytest

from conftest import random_params
from synstress import policy
from synstress.numerics import RngStream, finite_diff_grad, gaussian_draw
from synstress.policy import (
    Minibatch,
    MlpSpec,
    PolicyParams,
    flatten,
    forward_mean,
    grad_params_objective,
    grad_state_neglogprob,
    layer_views,
    log_prob,
    sample_action,
    unflatten,
    with_theta,
)


def naive_forward(p: PolicyParams, s):
    """Independent forward pass from the (W, b) views, plain Python loops."""
    h = list(map(float, s))
    views = layer_views(p)
    for l, (w, b) in enumerate(views):
        out = []
        for j in range(w.shape[0]):
            acc = float(b[j])
            for i in range(w.shape[1]):
                acc += float(w[j, i]) * h[i]
            if l < len(views) - 1:
                acc = max(acc, 0.0)
            out.append(acc)
        h = out
    return np.array(h)


def linear_policy(w: float, b: float = 0.0, log_std: float = 0.0) -> PolicyParams:
    """1-in 1-out purely linear policy mu(s) = w*s + b."""
    spec = MlpSpec(input_dim=1, hidden=(), output_dim=1)
    return PolicyParams(
        spec=spec, theta=np.array([w, b]), log_std=np.array([log_std])
    )


class TestSpec:
    def test_param_count(self):
        spec = MlpSpec(input_dim=3, hidden=(4,), output_dim=2)
        assert spec.param_count == 3 * 4 + 4 + 4 * 2 + 2

    def test_rejects_bad_widths(self):
        with pytest.raises(ValueError):
            MlpSpec(input_dim=3, hidden=(0,), output_dim=1)
        with pytest.raises(ValueError):
            MlpSpec(input_dim=0, hidden=(4,), output_dim=1)

    def test_rejects_bad_activation(self):
        with pytest.raises(ValueError):
            MlpSpec(input_dim=1, hidden=(2,), output_dim=1, activation="tanh")


class TestForward:
    def test_zero_network(self):
        spec = MlpSpec(input_dim=3, hidden=(4,), output_dim=2)
        p = PolicyParams(spec=spec, theta=np.zeros(spec.param_count), log_std=np.zeros(2))
        assert np.array_equal(forward_mean(p, np.array([1.0, -2.0, 3.0])), [0.0, 0.0])

    def test_single_linear_layer(self):
        p = linear_policy(w=2.0, b=1.0)
        assert forward_mean(p, np.array([3.0]))[0] == 7.0

    def test_matches_naive_oracle(self):
        spec = MlpSpec(input_dim=4, hidden=(8,), output_dim=2)
        p = random_params(3, spec)
        s = gaussian_draw(RngStream(17), 4)
        assert np.allclose(forward_mean(p, s), naive_forward(p, s), atol=1e-12)

    def test_dimension_mismatch(self):
        spec = MlpSpec(input_dim=3, hidden=(4,), output_dim=1)
        p = random_params(1, spec)
        with pytest.raises(ValueError, match="input_dim"):
            forward_mean(p, np.zeros(5))

    def test_piecewise_linear_in_state(self):
        spec = MlpSpec(input_dim=3, hidden=(6, 5), output_dim=2)
        p = random_params(9, spec)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(2)))
        checked = 0
        for _ in range(50):
            s = rng.standard_normal(3)
            d = rng.standard_normal(3)
            ts = [0.0, 5e-5, 1e-4]
            if not _same_relu_pattern(p, [s + t * d for t in ts]):
                continue
            f = [forward_mean(p, s + t * d) for t in ts]
            second_diff = f[0] - 2.0 * f[1] + f[2]
            assert np.all(np.abs(second_diff) < 1e-9)
            checked += 1
        assert checked >= 10


def _same_relu_pattern(p, states):
    patterns = []
    for s in states:
        h = np.asarray(s, dtype=np.float64)
        bits = []
        views = layer_views(p)
        for l, (w, b) in enumerate(views[:-1]):
            z = w @ h + b
            bits.append(tuple(z > 0))
            h = np.maximum(z, 0.0)
        patterns.append(tuple(bits))
    return len(set(patterns)) == 1


class TestLogProb:
    def test_at_mean_unit_std(self):
        p = linear_policy(w=1.5, b=0.0, log_std=0.0)
        s = np.array([2.0])
        mu = forward_mean(p, s)
        assert log_prob(p, s, mu) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_one_std_above_mean(self):
        p = linear_policy(w=1.5, log_std=0.0)
        s = np.array([2.0])
        a = forward_mean(p, s) + 1.0
        expected = -0.5 - 0.5 * math.log(2 * math.pi)
        assert log_prob(p, s, a) == pytest.approx(expected, abs=1e-12)

    def test_matches_density_formula(self):
        spec = MlpSpec(input_dim=3, hidden=(5,), output_dim=2)
        p = random_params(11, spec)
        s = gaussian_draw(RngStream(5), 3)
        a = gaussian_draw(RngStream(6), 2)
        mu = naive_forward(p, s)
        # independent density evaluation
        var = np.exp(2.0 * p.log_std)
        expected = float(
            np.sum(-0.5 * np.log(2 * math.pi * var) - (a - mu) ** 2 / (2 * var))
        )
        assert log_prob(p, s, a) == pytest.approx(expected, abs=1e-12)

    def test_density_integrates_to_one(self):
        p = linear_policy(w=0.7, b=0.3, log_std=0.2)
        s = np.array([1.1])
        mu = float(forward_mean(p, s)[0])
        sigma = math.exp(0.2)
        grid = np.linspace(mu - 8 * sigma, mu + 8 * sigma, 4001)
        dens = [math.exp(log_prob(p, s, np.array([a]))) for a in grid]
        integral = np.trapezoid(dens, grid) if hasattr(np, "trapezoid") else np.trapz(dens, grid)
        assert integral == pytest.approx(1.0, abs=1e-3)

    def test_rejects_nonfinite(self):
        p = linear_policy(w=1.0)
        with pytest.raises(ValueError):
            log_prob(p, np.array([np.nan]), np.array([0.0]))


class TestStateGrad:
    def test_zero_at_mean(self):
        spec = MlpSpec(input_dim=3, hidden=(6,), output_dim=2)
        p = random_params(2, spec)
        s = gaussian_draw(RngStream(3), 3)
        g = grad_state_neglogprob(p, s, forward_mean(p, s))
        assert np.all(g == 0.0)

    def test_matches_finite_differences(self):
        spec = MlpSpec(input_dim=4, hidden=(8, 6), output_dim=2)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(77)))
        checked = 0
        trial = 0
        while checked < 20 and trial < 200:
            trial += 1
            p = random_params(100 + trial, spec)
            s = rng.standard_normal(4)
            a = rng.standard_normal(2)
            if _near_relu_boundary(p, s, tol=1e-3):
                continue
            g = grad_state_neglogprob(p, s, a)
            fd = finite_diff_grad(lambda x: -log_prob(p, x, a), s)
            assert np.allclose(g, fd, rtol=1e-5, atol=1e-8)
            checked += 1
        assert checked == 20

    def test_linear_gradient_scales_with_residual(self):
        p = linear_policy(w=1.3, b=0.2, log_std=0.1)
        s = np.array([0.8])
        mu = forward_mean(p, s)
        g1 = grad_state_neglogprob(p, s, mu + 0.5)
        g2 = grad_state_neglogprob(p, s, mu + 1.0)
        assert np.allclose(g2, 2.0 * g1, rtol=1e-12)


def _near_relu_boundary(p, s, tol):
    h = np.asarray(s, dtype=np.float64)
    for w, b in layer_views(p)[:-1]:
        z = w @ h + b
        if np.any(np.abs(z) < tol):
            return True
        h = np.maximum(z, 0.0)
    return False


class _Cfg:
    clip = 0.2
    entropy_coef = 0.0


class TestParamsGrad:
    def _toy_batch(self, p, n=16, seed=50):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        states = rng.standard_normal((n, p.spec.input_dim))
        actions = rng.standard_normal((n, p.spec.output_dim))
        old_logp = np.array([log_prob(p, s, a) for s, a in zip(states, actions)])
        old_logp += rng.uniform(-0.3, 0.3, size=n)  # off-policy ratios
        adv = rng.standard_normal(n)
        return Minibatch(states, actions, old_logp, adv)

    def test_zero_advantages_zero_gradient(self):
        spec = MlpSpec(input_dim=2, hidden=(4,), output_dim=1)
        p = random_params(1, spec)
        mb = self._toy_batch(p)
        mb = Minibatch(mb.states, mb.actions, mb.old_log_probs, np.zeros(len(mb.advantages)))
        g = grad_params_objective(p, mb, _Cfg())
        assert np.all(g.d_theta == 0.0)
        assert np.all(g.d_log_std == 0.0)

    def test_matches_finite_differences_tiny_net(self):
        # 1-in 1-out linear head: 3 differentiable parameters (w, b, log_std)
        p = linear_policy(w=0.9, b=-0.2, log_std=0.1)
        mb = self._toy_batch(p, n=8, seed=51)

        g = grad_params_objective(p, mb, _Cfg())

        def objective(vec):
            q = PolicyParams(
                spec=p.spec, theta=vec[:2], log_std=vec[2:]
            )
            out = grad_params_objective(q, mb, _Cfg())
            return out.objective

        x0 = np.concatenate([p.theta, p.log_std])
        fd = finite_diff_grad(objective, x0, h=1e-6)
        analytic = np.concatenate([g.d_theta, g.d_log_std])
        assert np.allclose(analytic, fd, rtol=1e-4, atol=1e-8)

    def test_matches_finite_differences_ten_param_net(self):
        # 2-2-1 ReLU net: 9 weights/biases + 1 log_std = 10 parameters
        spec = MlpSpec(input_dim=2, hidden=(2,), output_dim=1)
        p = random_params(60, spec)
        mb = self._toy_batch(p, n=12, seed=61)
        g = grad_params_objective(p, mb, _Cfg())

        def objective(vec):
            q = PolicyParams(spec=spec, theta=vec[:9], log_std=vec[9:])
            return grad_params_objective(q, mb, _Cfg()).objective

        x0 = np.concatenate([p.theta, p.log_std])
        fd = finite_diff_grad(objective, x0, h=1e-6)
        analytic = np.concatenate([g.d_theta, g.d_log_std])
        assert np.allclose(analytic, fd, rtol=1e-4, atol=1e-7)

    def test_clipped_sample_has_zero_policy_gradient(self):
        p = linear_policy(w=1.0, b=0.0, log_std=0.0)
        s = np.array([[1.0]])
        a = np.array([[0.5]])
        lp = log_prob(p, s[0], a[0])
        # ratio = exp(lp - old) = 2.0 > 1 + clip, advantage positive -> clipped
        mb = Minibatch(s, a, np.array([lp - math.log(2.0)]), np.array([1.0]))
        g = grad_params_objective(p, mb, _Cfg())
        assert np.all(g.d_theta == 0.0)
        assert np.all(g.d_log_std == 0.0)

    def test_empty_batch_rejected(self):
        p = linear_policy(w=1.0)
        mb = Minibatch(
            np.zeros((0, 1)), np.zeros((0, 1)), np.zeros(0), np.zeros(0)
        )
        with pytest.raises(ValueError):
            grad_params_objective(p, mb, _Cfg())


class TestFlatten:
    def test_round_trip_bit_exact(self):
        spec = MlpSpec(input_dim=3, hidden=(4,), output_dim=2)
        p = random_params(21, spec)
        flat = flatten(p, include_log_std=True)
        q = unflatten(spec, flat, include_log_std=True)
        assert q.theta.tobytes() == p.theta.tobytes()
        assert q.log_std.tobytes() == p.log_std.tobytes()

    def test_round_trip_many_random_vectors(self):
        spec = MlpSpec(input_dim=2, hidden=(3,), output_dim=1)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(5)))
        for _ in range(1000):
            flat = rng.standard_normal(spec.param_count)
            p = unflatten(spec, flat)
            assert np.array_equal(flatten(p), flat)

    def test_flat_length(self):
        spec = MlpSpec(input_dim=3, hidden=(4,), output_dim=2)
        p = random_params(1, spec)
        assert flatten(p).size == 3 * 4 + 4 + 4 * 2 + 2  # = 26
        assert flatten(p, include_log_std=True).size == 26 + 2

    def test_positional_contract(self):
        spec = MlpSpec(input_dim=2, hidden=(2,), output_dim=1)
        p = random_params(33, spec)
        flat = flatten(p)
        i, j = 1, 5
        flat2 = flat.copy()
        flat2[i], flat2[j] = flat2[j], flat2[i]
        q = unflatten(spec, flat2, log_std=p.log_std)
        diff = np.flatnonzero(q.theta != p.theta)
        assert diff.tolist() == [i, j]

    def test_length_mismatch(self):
        spec = MlpSpec(input_dim=2, hidden=(2,), output_dim=1)
        with pytest.raises(ValueError):
            unflatten(spec, np.zeros(spec.param_count + 1))


class TestSampling:
    def test_sample_consistent_with_moments(self):
        spec = MlpSpec(input_dim=3, hidden=(4,), output_dim=2)
        p = random_params(8, spec)
        s = gaussian_draw(RngStream(2), 3)
        act = sample_action(p, s, RngStream(55))
        z = (act.sampled - act.mean) / np.exp(act.log_std)
        assert np.array_equal(
            act.sampled, act.mean + np.exp(act.log_std) * z
        )

    def test_with_theta_preserves_rest(self):
        spec = MlpSpec(input_dim=2, hidden=(2,), output_dim=1)
        p = random_params(3, spec)
        q = with_theta(p, np.zeros(spec.param_count))
        assert q.spec == p.spec
        assert np.array_equal(q.log_std, p.log_std)
        assert np.all(q.theta == 0.0)
