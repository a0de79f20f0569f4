import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from margin_lab.errors import ValidationError
from margin_lab.model import (
    CoordinateLaw,
    Dataset,
    ModelSpec,
    ScaleLaw,
    SigmaSpec,
    covariance_factor,
    make_orthogonal_fixture,
    sample_dataset,
)


class TestCovarianceFactor:
    def test_identity(self):
        assert np.array_equal(covariance_factor(SigmaSpec(), 3), np.eye(3))

    def test_diagonal(self):
        F = covariance_factor(SigmaSpec(kind="diagonal", eigenvalues=[4.0, 1.0]))
        assert np.allclose(F, np.diag([2.0, 1.0]), atol=0)

    def test_full_matrix_reconstructs(self):
        S = np.array([[2.0, 1.0], [1.0, 2.0]])
        F = covariance_factor(SigmaSpec(kind="full", matrix=S))
        assert np.linalg.norm(F @ F.T - S) <= 1e-12

    def test_rejects_indefinite_with_eigenvalue(self):
        with pytest.raises(ValidationError, match="-1"):
            SigmaSpec(kind="full", matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_clips_tiny_negative_eigenvalue(self):
        S = np.array([[1.0, 1.0], [1.0, 1.0]]) - 1e-12 * np.eye(2)
        F = covariance_factor(SigmaSpec(kind="full", matrix=S))
        assert np.linalg.norm(F @ F.T - S) <= 1e-10

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_random_psd_reconstruction(self, p, seed):
        B = np.random.default_rng(seed).standard_normal((p, p))
        S = B @ B.T
        F = covariance_factor(SigmaSpec(kind="full", matrix=S))
        assert np.linalg.norm(F @ F.T - S) / max(1.0, np.linalg.norm(S)) <= 1e-10

    def test_spiked_spectrum(self):
        sig = SigmaSpec(kind="spiked", lambda_max=4.0, lambda_min=1.0, n_spikes=2)
        assert sig.spectrum(5).tolist() == [4.0, 4.0, 1.0, 1.0, 1.0]
        assert sig.trace(5) == 11.0


class TestLaws:
    def test_gaussian_fourth_moment(self):
        assert CoordinateLaw("gaussian").K == pytest.approx(3.0, abs=1e-12)

    def test_student_t_fourth_moment(self):
        # unit-variance t with 10 dof has kurtosis 3 + 6/(10-4) = 4
        assert CoordinateLaw("student_t", df=10.0).K == pytest.approx(4.0, abs=1e-12)

    def test_student_t_needs_df_above_r(self):
        with pytest.raises(ValidationError):
            CoordinateLaw("student_t", r=4.0, df=4.0)

    @pytest.mark.parametrize("law", [ScaleLaw("constant"), ScaleLaw("two_point", value=0.5, weight=0.3),
                                     ScaleLaw("lognormal", sigma=0.3, ell=8.0)])
    def test_unit_second_moment(self, law):
        assert law.moment(2.0) == pytest.approx(1.0, abs=1e-12)

    def test_lognormal_needs_finite_ell(self):
        with pytest.raises(ValidationError):
            ScaleLaw("lognormal")

    def test_two_point_rejects_impossible_mass(self):
        with pytest.raises(ValidationError):
            ScaleLaw("two_point", value=2.0, weight=0.5)

    @pytest.mark.parametrize("law", [ScaleLaw("two_point", value=0.5, weight=0.3), ScaleLaw("lognormal", sigma=0.3, ell=8.0)])
    def test_moments_match_sampling(self, law):
        g = law.sample(np.random.default_rng(0), 200_000)
        for order in (2.0, -2.0):
            emp = np.mean(g**order)
            se = np.std(g**order) / math.sqrt(g.size)
            assert abs(emp - law.moment(order)) <= 5 * se

    def test_rademacher_and_t_unit_variance(self):
        rng = np.random.default_rng(1)
        for law in (CoordinateLaw("rademacher"), CoordinateLaw("student_t", df=10.0)):
            x = law.sample(rng, 200_000)
            assert abs(x.mean()) < 0.01 and abs(x.var() - 1) < 0.02


class TestSampling:
    def test_noiseless_labels_untouched(self):
        ds = sample_dataset(ModelSpec(n=50, p=5), seed=9)
        assert np.array_equal(ds.y_noisy, ds.y)

    def test_moments_standard(self):
        ds = sample_dataset(ModelSpec(n=100_000, p=2, mu_norm=0.0), seed=1)
        assert np.all(np.abs(ds.Z.mean(axis=0)) <= 3 / math.sqrt(1e5))
        assert np.all(np.abs(ds.Z.var(axis=0) - 1) <= 0.02)

    def test_covariance_diag41(self):
        spec = ModelSpec(n=100_000, p=2, mu_norm=0.0, sigma=SigmaSpec(kind="diagonal", eigenvalues=[4.0, 1.0]))
        cov = np.cov(sample_dataset(spec, seed=2).Z.T)
        assert np.all(np.abs(cov - np.diag([4.0, 1.0])) <= 0.05)

    def test_reconstruction_and_determinism(self):
        spec = ModelSpec(n=30, p=12, mu_norm=2.0, eta=0.2, g_law=ScaleLaw("two_point", value=0.5, weight=0.4))
        a, b = sample_dataset(spec, 123), sample_dataset(spec, 123)
        assert np.array_equal(a.X, a.y[:, None] * a.mu[None, :] + a.Z)
        for name in ("X", "y", "y_noisy", "Z", "g_values"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()

    def test_noise_rate(self):
        eta = 0.3
        ds = sample_dataset(ModelSpec(n=10_000, p=1, eta=eta), seed=5)
        assert set(np.unique(ds.y_noisy * ds.y)) <= {-1.0, 1.0}
        assert abs(ds.noisy_mask.mean() - eta) <= 3 * math.sqrt(eta * (1 - eta) / 1e4)

    def test_rejects_bad_eta(self):
        with pytest.raises(ValidationError):
            ModelSpec(n=2, p=2, eta=0.5)

    def test_json_round_trip(self):
        spec = ModelSpec(n=4, p=6, mu_norm=1.5, eta=0.1, sigma=SigmaSpec(kind="spiked", lambda_max=3.0, n_spikes=2),
                         g_law=ScaleLaw("lognormal", sigma=0.2, ell=6.0), xi_law=CoordinateLaw("student_t", df=9.0))
        back = ModelSpec.from_json(spec.to_json())
        assert back.to_dict() == spec.to_dict()
        assert np.array_equal(sample_dataset(back, 3).X, sample_dataset(spec, 3).X)

    def test_save_load(self, tmp_path):
        ds = sample_dataset(ModelSpec(n=5, p=7, eta=0.2), 4)
        ds.save(tmp_path / "d.npz")
        back = Dataset.load(tmp_path / "d.npz")
        assert np.array_equal(back.X, ds.X) and back.seed == 4 and back.spec.to_dict() == ds.spec.to_dict()


class TestOrthogonalFixture:
    def test_single_clean_point(self):
        ds = make_orthogonal_fixture(1, 0, [2.0], 1.0, 3)
        assert np.array_equal(ds.X[0], [1.0, 2.0, 0.0])

    def test_gram_is_identity(self):
        ds = make_orthogonal_fixture(2, 0, [1.0, 1.0], 1.0, 4)
        assert np.array_equal(ds.Z @ ds.Z.T, np.eye(2)) and np.all(ds.Z @ ds.mu == 0)

    def test_folded_rows(self):
        ds = make_orthogonal_fixture(1, 1, [1.0, 1.0], 1.0, 4)
        folded = ds.folded_X
        assert np.array_equal(folded[0], ds.mu + ds.folded_Z[0])
        assert np.array_equal(folded[1], -ds.mu + ds.folded_Z[1])

    def test_too_small_dimension(self):
        with pytest.raises(ValidationError):
            make_orthogonal_fixture(2, 1, [1.0, 1.0, 1.0], 1.0, 3)

    @given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=6))
    def test_checked_rows_orthonormal(self, norms):
        ds = make_orthogonal_fixture(len(norms), 0, norms, 1.0, len(norms) + 1)
        Zc = ds.Z / np.linalg.norm(ds.Z, axis=1)[:, None]
        assert np.array_equal(Zc @ Zc.T, np.eye(len(norms)))
        assert np.all(Zc @ ds.mu == 0)
