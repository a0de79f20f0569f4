import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from margin_lab.errors import ValidationError
from margin_lab.events import (
    EventThresholds,
    em_event_parameters,
    event_report,
    model_constants,
    noisy_constant,
    realized_thresholds,
    theorem_preconditions,
    verify_quad_bounds,
)
from margin_lab.gram import gram_quantities
from margin_lab.model import CoordinateLaw, ModelSpec, ScaleLaw, SigmaSpec, make_orthogonal_fixture, sample_dataset


def loose(rho=1.0, **kw):
    base = dict(eps=0.5, alpha2=1.0, alpha_inf=1.0, M=1e9, beta=1e9, gamma=1e9, rho=rho)
    return EventThresholds(**(base | kw))


class TestEventReport:
    def test_orthogonal_unit_norms(self):
        ds = make_orthogonal_fixture(2, 1, [1.0, 1.0, 1.0], 2.0, 5)
        rep = event_report(ds, loose())
        assert rep.eps_realized == 0 and rep.alpha2_realized == 0 and rep.alphaInf_realized == 0

    @pytest.mark.parametrize("beta", [0.0, 0.3, 5.0])
    def test_equal_norms_hold_e4(self, beta):
        ds = make_orthogonal_fixture(2, 0, [1.0, 1.0], 1.0, 3)
        rep = event_report(ds, loose(beta=beta))
        assert rep.beta_realized == 0 and rep.holds["E4"]

    def test_zero_row_rejected(self):
        from margin_lab.model import Dataset
        ds = Dataset.from_arrays(np.array([[1.0, 0.0], [0.0, 0.0]]), y=[1, 1])
        with pytest.raises(ValidationError):
            event_report(ds, loose())

    def test_gaussian_near_orthogonality_frequency(self):
        spec = ModelSpec(n=20, p=4000)
        good = sum(event_report(sample_dataset(spec, s), loose(rho=spec.rho)).eps_realized <= 0.5 for s in range(100))
        assert good >= 95

    @given(st.integers(0, 5000), st.floats(0.0, 1.0), st.floats(0.0, 2.0), st.floats(0.0, 1.0))
    def test_booleans_are_literal_inequalities(self, seed, eps, beta, gamma):
        spec = ModelSpec(n=6, p=60, mu_norm=1.5, eta=0.2, g_law=ScaleLaw("two_point", value=0.6, weight=0.5))
        ds = sample_dataset(spec, seed)
        th = EventThresholds(eps=eps, alpha2=0.3, alpha_inf=0.2, M=9.0, beta=beta, gamma=gamma, rho=spec.rho)
        rep = event_report(ds, th)
        inv = np.linalg.norm(ds.Z, axis=1) ** -2.0
        assert rep.holds["E1"] == (rep.eps_realized <= eps)
        assert rep.holds["E3"] == (rep.M_realized <= 9.0)
        assert rep.holds["E4"] == (abs(inv.mean() - spec.rho) <= beta * spec.rho)
        signed = np.mean(ds.y * ds.y_noisy * inv)
        assert rep.holds["E5"] == (abs(signed - 0.6 * spec.rho) <= gamma * spec.rho)
        assert rep.eps_realized >= 0

    @given(st.integers(0, 5000))
    def test_m_squared_rho_lower_bound(self, seed):
        spec = ModelSpec(n=8, p=50, g_law=ScaleLaw("lognormal", sigma=0.4, ell=6.0))
        ds = sample_dataset(spec, seed)
        rep = event_report(ds, realized_thresholds(ds, spec.rho))
        assert rep.first_four
        assert rep.M_realized**2 * rep.rho >= 1 / (1 + rep.beta_realized) * (1 - 1e-12)


class TestConstants:
    def test_c2_trivial_law(self):
        assert model_constants(4, 3, 4, ScaleLaw()).C2 == pytest.approx(2**2.5, abs=1e-12)

    def test_c_at_r4_k3(self):
        c = 2 * (2 * (math.sqrt(3) + 1) ** 2 + 2)
        assert c == pytest.approx(33.856406, abs=1e-6)
        assert model_constants(4, 3, 4, ScaleLaw()).C == pytest.approx(c, rel=1e-14)

    def test_c1_at_r4_k3(self):
        # 4 * sqrt(2 * 33.856406...) by hand; the often-quoted 32.9198 is an arithmetic slip
        oracle = 4 * math.sqrt(67.71281292110204)
        got = model_constants(4, 3, 4, ScaleLaw()).C1
        assert got == pytest.approx(oracle, rel=1e-12)
        assert got == pytest.approx(32.91512, abs=1e-5)

    def test_monotone_in_k(self):
        values = [model_constants(3.0, K, 4, ScaleLaw()).C for K in (1.0, 2.0, 5.0)]
        assert values[0] < values[1] < values[2]

    @pytest.mark.parametrize("r,k,K", [(2.0, 4, 3), (4.5, 4, 3), (4, 2.0, 3), (4, 4, 0.5)])
    def test_out_of_range(self, r, k, K):
        with pytest.raises(ValidationError):
            model_constants(r, K, k, ScaleLaw())


class TestPredictedParameters:
    def test_identity_p100(self):
        P = em_event_parameters(ModelSpec(n=5, p=100), 0.1)
        assert P.rho == pytest.approx(0.01, rel=1e-15)
        assert P.M == pytest.approx((1 + P.eps) * 10, rel=1e-14)
        assert P.alpha2 == P.alphaInf

    def test_eps_example_fails_gate(self):
        P = em_event_parameters(ModelSpec(n=10, p=10**4), 0.1)
        c1 = 4 * math.sqrt(2 * 33.856406460551014)
        assert P.eps == pytest.approx(c1 * 10 * math.sqrt(10) / 100, rel=1e-12)
        assert P.eps == pytest.approx(10.41, abs=0.01) and not P.gate_passes

    def test_beta_gamma(self):
        n, delta = 10, 0.1
        P = em_event_parameters(ModelSpec(n=n, p=10**4), delta)
        expected = P.eps + 2**2.5 * delta**-0.5 * n**-0.5
        assert P.beta == P.gamma == pytest.approx(expected, rel=1e-14)

    def test_rho_from_analytic_moments(self):
        law = ScaleLaw("lognormal", sigma=0.3, ell=8.0)
        spec = ModelSpec(n=4, p=50, g_law=law, sigma=SigmaSpec(kind="diagonal", eigenvalues=np.linspace(1, 2, 50)))
        assert em_event_parameters(spec, 0.1).rho == pytest.approx(math.exp(4 * 0.09) / 75.0, rel=1e-12)

    def test_bad_delta(self):
        with pytest.raises(ValidationError):
            em_event_parameters(ModelSpec(n=4, p=10), 1.5)


class TestChecklists:
    def test_identity_corollary_exponent(self):
        n = 6
        cl = theorem_preconditions(ModelSpec(n=n, p=10**4, mu_norm=50.0, eta=0.1), 0.1, "identity-corollary")
        item = next(i for i in cl.items if i.name == "p")
        assert item.required == pytest.approx(n**3, rel=1e-12)
        assert cl.notes["dimension_exponents"] == [2.0, 3.0]

    def test_noisy_theorem_rejects_eta_zero(self):
        with pytest.raises(ValidationError, match="eta"):
            theorem_preconditions(ModelSpec(n=4, p=100), 0.1, "noisy-main")

    def test_noiseless_theorem_rejects_noise(self):
        with pytest.raises(ValidationError):
            theorem_preconditions(ModelSpec(n=4, p=100, eta=0.1), 0.1, "noiseless-main")

    def test_unknown_theorem(self):
        with pytest.raises(ValidationError, match="unknown theorem"):
            theorem_preconditions(ModelSpec(n=4, p=100), 0.1, "made-up")

    def test_noisy_constant(self):
        assert noisy_constant(0.25) == 88.0

    def test_constants_echoed(self):
        cl = theorem_preconditions(ModelSpec(n=4, p=100, eta=0.2), 0.1, "noisy-simple", {"C": 7})
        assert cl.to_dict()["constants"]["C"] == 7.0 and cl.constants["c1"] == 1.0

    def test_regimes_combine_by_or(self):
        cl = theorem_preconditions(ModelSpec(n=4, p=100, mu_norm=1e6), 0.1, "noiseless-main")
        results = cl.regime_results
        assert set(results) == {"i", "ii"}
        assert cl.passed == (cl.group_passes("common") and (results["i"] or results["ii"]))

    @pytest.mark.parametrize("theorem,eta", [("noiseless-ext-small", 0.0), ("noiseless-ext-large", 0.0),
                                            ("noisy-ext", 0.1), ("phase-sandwich", 0.1),
                                            ("subgaussian-noisy", 0.1), ("subgaussian-noiseless", 0.0)])
    def test_every_theorem_renders(self, theorem, eta):
        cl = theorem_preconditions(ModelSpec(n=10, p=1000, mu_norm=3.0, eta=eta), 0.1, theorem)
        text = cl.render()
        assert text.startswith(theorem) and len(cl.items) >= 2

    def test_large_signal_regime_can_pass(self):
        spec = ModelSpec(n=3, p=400_000, mu_norm=1e4)
        cl = theorem_preconditions(spec, 0.1, "noiseless-ext-large", {"C_prime": 2.5})
        assert cl.passed


class TestQuadBounds:
    def test_orthogonal_interval_collapses(self):
        ds = make_orthogonal_fixture(2, 0, [1.0, 1.0], 1.0, 3)
        g = gram_quantities(ds)
        rep = event_report(ds, EventThresholds(eps=0.0, alpha2=0.0, alpha_inf=0.0, M=1.0, beta=0.0, gamma=0.0, rho=1.0))
        out = verify_quad_bounds(g, rep, ds)
        assert g.s == 2.0 and out.ok and out.checked > 0 and not out.skipped

    def test_signal_orthogonal_to_noise(self):
        ds = make_orthogonal_fixture(2, 1, [1.0, 2.0, 0.5], 3.0, 5)
        assert gram_quantities(ds).t == 0.0

    def test_failed_hypotheses_are_skipped(self):
        ds = sample_dataset(ModelSpec(n=10, p=12), 1)
        rep = event_report(ds, loose(eps=1e-6, rho=1 / 12))
        out = verify_quad_bounds(gram_quantities(ds), rep, ds)
        assert "quadratic form" in out.skipped and out.ok

    def test_tampered_quantity_is_flagged(self):
        ds = sample_dataset(ModelSpec(n=10, p=2000, mu_norm=1.0), 2)
        g = gram_quantities(ds)
        rep = event_report(ds, realized_thresholds(ds, 1 / 2000))
        bad = dataclasses.replace(g, s=3 * g.s)
        out = verify_quad_bounds(bad, rep, ds)
        assert any(v.quantity == "s" for v in out.violations)

    @given(st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 0.3]),
           st.sampled_from(["gaussian", "rademacher", "student_t"]))
    def test_no_violations_when_events_hold(self, seed, eta, xi):
        spec = ModelSpec(n=12, p=3000, mu_norm=2.0, eta=eta, xi_law=CoordinateLaw(xi),
                         g_law=ScaleLaw("two_point", value=0.7, weight=0.5))
        ds = sample_dataset(spec, seed)
        rep = event_report(ds, realized_thresholds(ds, spec.rho))
        out = verify_quad_bounds(gram_quantities(ds), rep, ds)
        assert out.ok, out.violations[:3]
        assert out.checked > 0
