import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from margin_lab import classifiers
from margin_lab.errors import ValidationError
from margin_lab.geometry import (
    cap_fraction_mc,
    clean_noisy_decomposition,
    exact_cap_fraction_3d,
    orthogonal_nu_formulas,
    subset,
    z_perp,
)
from margin_lab.model import ModelSpec, balanced_norm_fixture, make_orthogonal_fixture, sample_dataset

coords = st.floats(-3, 3, allow_nan=False)


class TestZPerp:
    def test_two_points(self):
        z = z_perp(np.array([[1.0, 0.0], [0.0, 2.0]]))
        np.testing.assert_allclose(z, [0.8, 0.4], atol=1e-15)
        assert z @ z == pytest.approx(0.8, rel=1e-14)

    def test_single_row(self):
        np.testing.assert_allclose(z_perp(np.array([[3.0, -1.0, 2.0]])), [3.0, -1.0, 2.0], rtol=1e-15)

    @pytest.mark.parametrize("n,c", [(2, 1.0), (5, 3.0), (9, 0.5)])
    def test_equal_orthogonal_rows(self, n, c):
        z = z_perp(c * np.eye(n))
        assert z @ z == pytest.approx(c**2 / n, rel=1e-13)

    @given(st.lists(coords, min_size=3, max_size=3), st.lists(coords, min_size=3, max_size=3), st.floats(-4, 4))
    def test_minimum_norm_on_the_line(self, a, b, t):
        a, b = np.array(a), np.array(b)
        if np.linalg.matrix_rank(np.vstack([a, b]), tol=1e-3) < 2:
            return
        z = z_perp(np.vstack([a, b]))
        assert z @ z <= np.sum((a + t * (b - a)) ** 2) + 1e-9
        np.testing.assert_allclose(np.vstack([a, b]) @ z, [z @ z] * 2, atol=1e-8)


class TestDecomposition:
    def test_all_clean(self):
        ds = make_orthogonal_fixture(3, 0, [1.0, 2.0, 0.5], 1.5, 6)
        dec = clean_noisy_decomposition(ds, classifiers.max_margin(ds))
        assert dec.nu_n == 0 and dec.nu_c == pytest.approx(1.0, abs=1e-12)
        assert dec.empty_side == "noisy"

    def test_balanced_fixture_mass(self):
        ds = balanced_norm_fixture(0.25, 1.0, 3, 1, rng=np.random.default_rng(0))
        dec = clean_noisy_decomposition(ds, classifiers.max_margin(ds))
        assert dec.nu_c == pytest.approx(9 / 14, abs=1e-10)
        assert dec.nu_n == pytest.approx(5 / 14, abs=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_reconstruction(self, seed):
        ds = sample_dataset(ModelSpec(n=15, p=3000, mu_norm=3.0, eta=0.2), seed)
        dec = clean_noisy_decomposition(ds, classifiers.max_margin(ds))
        assert dec.reconstruction_residual <= 1e-8 * dec.scaled_w_norm
        assert dec.alpha.sum() == pytest.approx(1.0, abs=1e-9)
        assert dec.alpha.min() >= -1e-10
        assert dec.nu_c + dec.nu_n == pytest.approx(1.0, abs=1e-9)

    def test_zero_classifier(self):
        ds = sample_dataset(ModelSpec(n=4, p=50), 0)
        with pytest.raises(ValidationError):
            clean_noisy_decomposition(ds, np.zeros(50))

    @given(st.lists(st.floats(0.2, 5.0), min_size=2, max_size=6), st.floats(0.1, 4.0))
    def test_clean_projection_identity(self, norms, mu_norm):
        n = len(norms)
        ds = make_orthogonal_fixture(n, 0, norms, mu_norm, n + 2)
        w = classifiers.max_margin(ds).w
        lhs = z_perp(ds.folded_Z) + ds.mu
        np.testing.assert_allclose(lhs, w / (w @ w), atol=1e-9)

    def test_subset(self):
        ds = sample_dataset(ModelSpec(n=6, p=40, eta=0.3), 1)
        part = subset(ds, ~ds.noisy_mask)
        assert part.n == int((~ds.noisy_mask).sum()) and not part.noisy_mask.any()
        with pytest.raises(ValidationError):
            subset(ds, np.zeros(6, dtype=bool))


class TestFormulas:
    def test_no_signal(self):
        assert orthogonal_nu_formulas(0.2, 0.0) == pytest.approx((0.8, 0.2))

    def test_noiseless(self):
        assert orthogonal_nu_formulas(0.0, 7.0) == (1.0, 0.0)

    def test_exact_fraction(self):
        nu_c, nu_n = orthogonal_nu_formulas(0.25, 1.0)
        assert nu_c == pytest.approx(9 / 14, rel=1e-15) and nu_n == pytest.approx(5 / 14, rel=1e-15)

    def test_large_signal_balances(self):
        eta, x = 0.1, 1e8
        nu_c, nu_n = orthogonal_nu_formulas(eta, x)
        gap = (0.5 - eta) / (1 + 4 * eta * (1 - eta) * x)
        assert nu_c - 0.5 == pytest.approx(gap, rel=1e-6) and 0.5 - nu_n == pytest.approx(gap, rel=1e-6)

    @given(st.floats(0, 0.49), st.floats(0, 1e6))
    def test_masses_sum_to_one(self, eta, x):
        nu_c, nu_n = orthogonal_nu_formulas(eta, x)
        assert nu_c + nu_n == pytest.approx(1.0, rel=1e-12)
        assert nu_c >= nu_n - 1e-12

    def test_bad_input(self):
        with pytest.raises(ValidationError):
            orthogonal_nu_formulas(0.5, 1.0)


class TestCapFraction:
    def test_hemisphere(self):
        est = cap_fraction_mc(20, 0.0, n_mc=50_000, seed=1)
        assert abs(est.fraction - 0.5) <= 4 * est.standard_error

    def test_exact_three_dimensional(self):
        exact = exact_cap_fraction_3d(1.0)
        assert exact == pytest.approx((1 + 1 / math.sqrt(3)) / 2, rel=1e-15)
        assert exact == pytest.approx(0.78868, abs=1e-5)
        est = cap_fraction_mc(3, 1.0, n_mc=100_000, seed=2)
        assert abs(est.fraction - exact) <= 4 * est.standard_error

    def test_far_band_covers_almost_everything(self):
        assert cap_fraction_mc(50, 10.0, n_mc=20_000, seed=0).fraction >= 0.99

    def test_monotone_in_distance(self):
        fractions = [cap_fraction_mc(10, d, n_mc=20_000, seed=4).fraction for d in (0.0, 0.3, 1.0, 2.0)]
        assert fractions == sorted(fractions)

    def test_chordal_is_stricter(self):
        for d in (0.2, 1.0, 3.0):
            half = cap_fraction_mc(10, d, n_mc=20_000, seed=6, metric="halfspace").fraction
            chord = cap_fraction_mc(10, d, n_mc=20_000, seed=6, metric="chordal").fraction
            assert 0.5 <= chord <= half

    def test_validation(self):
        with pytest.raises(ValidationError):
            cap_fraction_mc(1, 1.0)
        with pytest.raises(ValidationError):
            cap_fraction_mc(5, 1.0, n_mc=100, metric="geodesic")
