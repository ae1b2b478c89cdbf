import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synstress.filters import (
    apply_mask,
    compactness,
    hpf_mask,
    identity_alpha,
    lpf_mask,
    make_grid,
    make_mask,
    pwf_mask,
)

THETA = np.array([0.1, -0.5, 2.0])


def nonzero_theta(draw_len=st.integers(4, 64)):
    return draw_len.flatmap(
        lambda n: st.lists(
            st.floats(
                min_value=1e-6,
                max_value=10.0,
                allow_nan=False,
                allow_infinity=False,
            ).flatmap(lambda m: st.sampled_from([m, -m])),
            min_size=n,
            max_size=n,
        ).map(np.array)
    )


class TestGrid:
    def test_hand_case(self):
        g = make_grid(THETA, 2)
        assert np.allclose(g.values, [0.1, 1.05, 2.0], atol=1e-12)
        assert g.alpha_min == 0.1 and g.alpha_max == 2.0

    def test_zero_entry_rejected_with_index(self):
        with pytest.raises(ValueError, match="index 1"):
            make_grid(np.array([0.5, 0.0, 1.0]), 3)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            make_grid(np.array([0.5, -0.5, 0.5]), 3)

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError):
            make_grid(THETA, 0)

    def test_uniform_spacing(self):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(1)))
        theta = rng.standard_normal(200) + np.sign(rng.standard_normal(200)) * 1e-3
        g = make_grid(theta, 20)
        gaps = np.diff(g.values)
        assert np.max(np.abs(gaps - g.delta_alpha)) < 1e-12


class TestMasks:
    def test_hpf_hand_case_boundary_removed(self):
        m = hpf_mask(THETA, 0.5)
        assert m.bits.tolist() == [0, 0, 1]

    def test_hpf_below_range_identity(self):
        assert hpf_mask(THETA, 0.05).bits.tolist() == [1, 1, 1]

    def test_hpf_at_max_removes_all(self):
        assert hpf_mask(THETA, 2.0).bits.tolist() == [0, 0, 0]

    def test_lpf_hand_case(self):
        assert lpf_mask(THETA, 0.5).bits.tolist() == [1, 0, 0]

    def test_lpf_above_range_identity(self):
        assert lpf_mask(THETA, 2.5).bits.tolist() == [1, 1, 1]

    def test_lpf_at_min_removes_all(self):
        assert lpf_mask(THETA, 0.1).bits.tolist() == [0, 0, 0]

    def test_pwf_band_membership(self):
        assert pwf_mask(THETA, 0.5, 0.2).bits.tolist() == [1, 0, 1]

    def test_pwf_half_open_boundaries(self):
        # |theta| exactly at the lower edge is kept, at the upper edge removed
        theta = np.array([0.4, 0.6])
        m = pwf_mask(theta, 0.5, 0.2)
        assert m.bits.tolist() == [1, 0]

    def test_pwf_requires_positive_width(self):
        with pytest.raises(ValueError):
            pwf_mask(THETA, 0.5, 0.0)


class TestApplyMask:
    def test_identity(self):
        m = hpf_mask(THETA, 0.05)
        assert apply_mask(THETA, m).tobytes() == THETA.tobytes()

    def test_annihilation(self):
        m = hpf_mask(THETA, 2.0)
        assert np.all(apply_mask(THETA, m) == 0.0)

    def test_hand_case(self):
        m = hpf_mask(THETA, 0.5)
        assert apply_mask(THETA, m).tolist() == [0.0, 0.0, 2.0]

    def test_length_mismatch(self):
        m = hpf_mask(THETA, 0.5)
        with pytest.raises(ValueError, match="length"):
            apply_mask(np.zeros(4), m)

    def test_idempotent(self):
        m = lpf_mask(THETA, 0.5)
        once = apply_mask(THETA, m)
        assert np.array_equal(apply_mask(once, m), once)


class TestCompactness:
    def test_arithmetic(self):
        m = hpf_mask(np.array([0.1, 0.2, 0.3, 0.4]), 0.1)
        rec = compactness(m)
        assert rec.removed_count == 1
        assert rec.compactness == 0.75

    def test_extremes(self):
        assert compactness(hpf_mask(THETA, 0.0)).compactness == 1.0
        assert compactness(hpf_mask(THETA, 2.0)).compactness == 0.0


@settings(max_examples=100, deadline=None)
@given(theta=nonzero_theta(), alpha=st.floats(0.0, 12.0))
def test_hpf_lpf_complementarity(theta, alpha):
    mags = np.abs(theta)
    if np.any(mags == alpha):
        return  # excluded by the property's precondition
    h = hpf_mask(theta, alpha).bits
    l = lpf_mask(theta, alpha).bits
    assert np.all(h | l == 1)
    assert np.all(h & l == 0)


@settings(max_examples=50, deadline=None)
@given(theta=nonzero_theta())
def test_compactness_monotonicity(theta):
    if np.abs(theta).max() == np.abs(theta).min():
        return
    grid = make_grid(theta, 8)
    hpf_c = [compactness(hpf_mask(theta, a)).compactness for a in grid.values]
    lpf_c = [compactness(lpf_mask(theta, a)).compactness for a in grid.values]
    assert all(a >= b for a, b in zip(hpf_c, hpf_c[1:]))  # non-increasing
    assert all(a <= b for a, b in zip(lpf_c, lpf_c[1:]))  # non-decreasing


@settings(max_examples=50, deadline=None)
@given(theta=nonzero_theta())
def test_pwf_tiling(theta):
    if np.abs(theta).max() == np.abs(theta).min():
        return
    grid = make_grid(theta, 6)
    edges = [grid.values[0] - grid.delta_alpha / 2.0] + [
        a + grid.delta_alpha / 2.0 for a in grid.values
    ]
    mags = np.abs(theta)
    if any(np.any(mags == e) for e in edges):
        return  # generic case only: no magnitude on a band boundary
    total_removed = sum(
        compactness(pwf_mask(theta, a, grid.delta_alpha)).removed_count
        for a in grid.values
    )
    assert total_removed == theta.size


def test_identity_alpha_is_identity():
    rng = np.random.Generator(np.random.Philox(key=np.uint64(9)))
    theta = rng.standard_normal(500) + np.sign(rng.standard_normal(500)) * 1e-3
    grid = make_grid(theta, 10)
    for kind in ("hpf", "lpf", "pwf"):
        m = make_mask(kind, theta, identity_alpha(kind, grid), grid.delta_alpha)
        assert np.all(m.bits == 1)


def test_mask_runs_round_trip():
    from synstress.filters import mask_runs

    m = hpf_mask(np.array([0.1, 0.2, 2.0, 3.0, 0.1]), 0.5)
    assert mask_runs(m) == "0x2 1x2 0x1"
    # decode and compare
    decoded = []
    for tok in mask_runs(m).split():
        bit, n = tok.split("x")
        decoded += [int(bit)] * int(n)
    assert decoded == m.bits.tolist()
    assert mask_runs(hpf_mask(THETA, 0.05)) == "1x3"


def test_unmasked_coordinates_unchanged():
    rng = np.random.Generator(np.random.Philox(key=np.uint64(10)))
    theta = rng.standard_normal(100) + np.sign(rng.standard_normal(100)) * 1e-3
    g = make_grid(theta, 5)
    m = pwf_mask(theta, g.values[2], g.delta_alpha)
    filtered = apply_mask(theta, m)
    kept = m.bits == 1
    assert np.array_equal(filtered[kept], theta[kept])
