import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from margin_lab.errors import DegeneratePerturbationError, SingularMatrixError, ValidationError
from margin_lab.gram import (
    checked_transform,
    expansion_vector,
    gram_quantities,
    matrix_to_csv,
    noiseless_expansion,
    woodbury_inverse,
)
from margin_lab.model import Dataset, ModelSpec, sample_dataset


def three_axis_fixture(mu=(0.0, 0.0, 1.0)):
    return Dataset.from_arrays(np.eye(3)[:2], y=[1, 1], mu=np.array(mu))


def random_dataset(n, p, eta, seed, mu_norm=2.0):
    return sample_dataset(ModelSpec(n=n, p=p, mu_norm=mu_norm, eta=eta), seed)


class TestCheckedTransform:
    def test_axis_rows(self):
        ds = Dataset.from_arrays(np.array([[2.0, 0, 0], [0, 3.0, 0]]), y=[1, -1])
        view = checked_transform(ds)
        assert np.array_equal(view.z_norms, [2.0, 3.0])
        assert np.array_equal(view.Z_checked, np.eye(3)[:2])

    def test_zero_row_named(self):
        ds = Dataset.from_arrays(np.array([[1.0, 0], [0, 0]]), y=[1, 1])
        with pytest.raises(ValidationError, match="row 1"):
            checked_transform(ds)

    def test_scale_invariance(self):
        ds = random_dataset(5, 20, 0.2, 3)
        view = checked_transform(ds)
        A = ds.Z @ ds.Z.T
        Ac = view.Z_checked @ view.Z_checked.T
        raw = ds.y @ np.linalg.solve(A, ds.y)
        checked = view.y_checked @ np.linalg.solve(Ac, view.y_checked)
        assert raw == pytest.approx(checked, rel=1e-8)

    @given(st.integers(0, 10_000))
    def test_unit_rows_and_equal_label_norms(self, seed):
        view = checked_transform(random_dataset(6, 15, 0.3, seed))
        assert np.allclose(np.linalg.norm(view.Z_checked, axis=1), 1, atol=1e-10)
        assert np.linalg.norm(view.y_checked) == np.linalg.norm(view.yN_checked)


class TestGramQuantities:
    def test_hand_fixture(self):
        g = gram_quantities(three_axis_fixture())
        assert np.array_equal(g.A, np.eye(2)) and np.array_equal(g.nu, [0, 0])
        assert (g.s, g.t, g.h, g.d) == (2.0, 0.0, 0.0, 3.0)

    def test_zero_signal(self):
        g = gram_quantities(three_axis_fixture(mu=(0, 0, 0)))
        assert g.d == pytest.approx((1 + g.h) ** 2)

    def test_singular(self):
        ds = Dataset.from_arrays(np.array([[1.0, 0], [2.0, 0]]), y=[1, 1])
        with pytest.raises(SingularMatrixError) as info:
            gram_quantities(ds)
        assert info.value.condition > 1e10

    @given(st.integers(2, 12), st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 0.3]))
    def test_invariants(self, n, seed, eta):
        g = gram_quantities(random_dataset(n, 4 * n, eta, seed))
        assert g.d == pytest.approx(g.d_from_parts(), rel=1e-10)
        assert g.s >= 0 and g.s_NN >= 0
        assert 0 <= g.t <= g.mu_norm_sq + 1e-8

    def test_noiseless_collapse(self):
        g = gram_quantities(random_dataset(7, 30, 0.0, 1))
        assert g.s_N == g.s == g.s_NN and g.h_N == g.h


class TestClosedForms:
    def test_sherman_morrison_fixture(self):
        g = gram_quantities(three_axis_fixture())
        y = np.ones(2)
        assert np.allclose(woodbury_inverse(g), np.eye(2) - np.outer(y, y) / 3, atol=1e-15)
        assert np.allclose(expansion_vector(g), [1 / 3, 1 / 3], atol=1e-15)

    def test_zero_signal_is_plain_inverse(self):
        ds = random_dataset(6, 25, 0.2, 2, mu_norm=0.0)
        g = gram_quantities(ds)
        assert np.allclose(woodbury_inverse(g), np.linalg.inv(g.A), rtol=1e-10, atol=0)
        assert np.allclose(noiseless_expansion(g), np.linalg.solve(g.A, ds.y), rtol=1e-10)

    @given(st.integers(2, 40), st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 0.25, 0.4]))
    def test_match_direct_algebra(self, n, seed, eta):
        ds = random_dataset(n, 3 * n + 5, eta, seed, mu_norm=3.0)
        g = gram_quantities(ds)
        G = ds.X @ ds.X.T
        W = woodbury_inverse(g)
        assert np.linalg.norm(W - np.linalg.inv(G)) / np.linalg.norm(np.linalg.inv(G)) <= 1e-8
        assert np.linalg.norm(W @ G - np.eye(n), 2) <= 1e-8
        v = np.linalg.solve(G, ds.y_noisy)
        assert np.linalg.norm(expansion_vector(g) - v) / np.linalg.norm(v) <= 1e-8

    def test_general_expansion_reduces_to_noiseless(self):
        g = gram_quantities(random_dataset(8, 40, 0.0, 5))
        assert np.allclose(expansion_vector(g), noiseless_expansion(g), rtol=1e-12, atol=1e-14)

    def test_degenerate_perturbation(self):
        # X = 0 when z = -y mu, so XX^T is singular while A is not
        mu = np.array([1.0, 0.0])
        ds = Dataset.from_arrays(np.array([[-1.0, 0.0]]), y=[1], mu=mu)
        with pytest.raises(DegeneratePerturbationError):
            expansion_vector(gram_quantities(ds))


def test_matrix_csv_round_trip():
    M = np.array([[1 / 3, 2.0], [-1e-20, 5.0]])
    text = matrix_to_csv(M)
    back = np.array([[float(v) for v in line.split(",")] for line in text.strip().splitlines()])
    assert np.array_equal(back, M)
