import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synstress.scoring import (
    ClassificationPolicy,
    ScoreRecord,
    classify,
    integrated_score,
    score_adversarial,
    score_clean,
    score_combined,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestScores:
    def test_identity_filter_zero(self):
        assert score_clean(100.0, 100.0) == 0.0

    def test_positive_direction(self):
        assert score_clean(150.0, 100.0) == 50.0

    def test_adversarial_zero(self):
        assert score_adversarial(-10.0, -10.0) == 0.0

    def test_combined(self):
        assert score_combined(80.0, 100.0) == -20.0

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            score_clean(float("nan"), 0.0)

    @settings(max_examples=100)
    @given(a=finite, b=finite)
    def test_antisymmetry(self, a, b):
        assert score_clean(a, b) == -score_clean(b, a)

    @settings(max_examples=100)
    @given(a=finite, b=finite, c=st.floats(-1e3, 1e3, allow_nan=False))
    def test_translation_invariance(self, a, b, c):
        assert score_clean(a + c, b + c) == pytest.approx(score_clean(a, b), abs=1e-6)


class TestIntegratedScore:
    def test_zero_integrand(self):
        x = np.array([0.0, 1.0, 2.0])
        assert integrated_score(x, x * 0 + 5, x * 0 + 5) == 0.0

    def test_constant_difference(self):
        x = np.array([0.0, 1.0, 2.0])
        assert integrated_score(x, np.array([3.0, 3.0, 3.0]), np.array([2.0, 2.0, 2.0])) == 2.0

    def test_matches_fine_grid_riemann_sum(self):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(4)))
        x = np.sort(rng.uniform(0, 3, size=12))
        x[0], x[-1] = 0.0, 3.0
        ys = rng.standard_normal(12)
        yb = rng.standard_normal(12)
        got = integrated_score(x, ys, yb)
        # oracle: midpoint Riemann sum of the piecewise-linear interpolant
        fine = np.linspace(0.0, 3.0, 300_001)
        mids = (fine[:-1] + fine[1:]) / 2.0
        d_mid = np.interp(mids, x, ys - yb)
        riemann = float(np.sum(d_mid * np.diff(fine)))
        assert got == pytest.approx(riemann, abs=1e-6)

    def test_linear_in_integrand(self):
        x = np.array([0.0, 0.5, 1.5, 2.0])
        ys = np.array([1.0, -2.0, 0.5, 3.0])
        yb = np.zeros(4)
        s1 = integrated_score(x, ys, yb)
        s2 = integrated_score(x, 7.0 * ys, yb)
        assert s2 == pytest.approx(7.0 * s1, rel=1e-12)

    def test_rejects_mismatch_and_unsorted(self):
        with pytest.raises(ValueError):
            integrated_score(np.array([0.0, 1.0]), np.zeros(3), np.zeros(2))
        with pytest.raises(ValueError):
            integrated_score(np.array([1.0, 0.0]), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            integrated_score(np.array([1.0]), np.zeros(1), np.zeros(1))


class TestClassify:
    def test_dead_center(self):
        assert classify(0.0, 1.0) == "robust"

    def test_thresholds(self):
        assert classify(-2.0, 1.0) == "fragile"
        assert classify(2.0, 1.0) == "antifragile"
        assert classify(1.0, 1.0) == "robust"  # band is inclusive

    def test_monotone_in_score(self):
        order = {"fragile": 0, "robust": 1, "antifragile": 2}
        labels = [classify(s, 0.5) for s in np.linspace(-2, 2, 41)]
        ranks = [order[l] for l in labels]
        assert ranks == sorted(ranks)

    def test_policy_resolution(self):
        pol = ClassificationPolicy(tau=0.05, relative=True)
        assert pol.resolve(-200.0) == pytest.approx(10.0)
        pol = ClassificationPolicy(tau=3.0, relative=False)
        assert pol.resolve(-200.0) == 3.0

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            ClassificationPolicy(tau=-1.0)
        with pytest.raises(ValueError):
            classify(0.0, -1.0)


class TestScoreRecord:
    def test_identity_holds(self):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(2)))
        for _ in range(200):
            jcb, jcf, jab, jaf = rng.uniform(-1000, 1000, size=4)
            r = ScoreRecord.from_evaluations(
                "hpf", 0.5, 1.0, jcb, jcf, jab, jaf, compactness=0.5, tau=10.0
            )
            residual = r.s_delta - (r.s_adv - r.s_clean + (jab - jcb))
            assert abs(residual) <= 1e-9
            assert r.s_clean == jcf - jcb
            assert r.s_adv == jaf - jab
            assert r.s_delta == jaf - jcf
