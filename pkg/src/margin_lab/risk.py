"""Test error (exact and simulated), predicted orders of the margin ratio,
closed-form error bounds, the kappa tail function and the two-sided sandwich."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtr

from .errors import ValidationError
from .model import CoordinateLaw, Dataset, ModelSpec, ScaleLaw, SigmaSpec

EXACT, MONTE_CARLO = "exact-gaussian", "monte-carlo"
MC_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    standard_error: float
    method: str
    n_mc: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _alignment(w, mu) -> float:
    inner = float(np.dot(w, mu))
    if not inner > 0:
        raise ValidationError(f"need <w, mu> > 0, got {inner:.6g}")
    return inner


def zeta(w, mu) -> float:
    """||w|| / <w, mu>; scale invariant in w."""
    w = np.asarray(getattr(w, "w", w), dtype=float)
    inner = _alignment(w, mu)
    return float(np.linalg.norm(w) / inner)


def test_error_exact(w, mu, sigma: SigmaSpec, eta: float, spec: ModelSpec | None = None) -> RiskEstimate:
    """P(<w, y_N x> < 0) for Gaussian noise: eta + (1 - 2 eta) Phi(-<w,mu> / sqrt(w' Sigma w))."""
    if spec is not None and not spec.is_gaussian:
        raise ValidationError("exact error needs Gaussian noise (g = 1, Gaussian coordinates); use test_error_mc")
    if not (0 <= eta < 0.5):
        raise ValidationError("eta must lie in [0, 1/2)")
    w = np.asarray(getattr(w, "w", w), dtype=float)
    inner = _alignment(w, mu)
    spread = math.sqrt(sigma.quad_form(w))
    tail = float(ndtr(-inner / spread)) if spread > 0 else 0.0
    return RiskEstimate(value=eta + (1 - 2 * eta) * tail, standard_error=0.0, method=EXACT)


test_error_exact.__test__ = False  # keep pytest from collecting it


def _chunk_sizes(n_mc: int, p: int):
    size = max(1, min(n_mc, MC_CHUNK_ENTRIES // max(p, 1)))
    full, rest = divmod(n_mc, size)
    return [size] * full + ([rest] if rest else [])


def _mc_chunk(w_sqrt, inner, spec: ModelSpec, size: int, seed_seq) -> int:
    rng = np.random.default_rng(seed_seq)
    y = np.where(rng.random(size) < 0.5, 1.0, -1.0)
    flips = rng.random(size) < spec.eta
    y_noisy = np.where(flips, -y, y)
    g = spec.g_law.sample(rng, size)
    xi = spec.xi_law.sample(rng, (size, spec.p))
    # <w, y_N x> = y_N (y <w,mu> + g <Sigma^{1/2} w, xi>)
    scores = y_noisy * (y * inner + g * (xi @ w_sqrt))
    return int(np.count_nonzero(scores < 0))


def test_error_mc(w, spec: ModelSpec, n_mc: int = 100_000, seed: int = 0) -> RiskEstimate:
    """Fraction of fresh (x, y_N) pairs misclassified by w.

    Chunks draw from independent child seeds and only their counts are summed,
    so the result does not depend on chunking order.
    """
    if n_mc < 1000:
        raise ValidationError("n_mc must be at least 1000")
    w = np.asarray(getattr(w, "w", w), dtype=float)
    if w.shape != (spec.p,):
        raise ValidationError(f"w has length {w.shape[0]}, expected {spec.p}")
    w_sqrt = spec.sigma.apply_sqrt(w[None, :])[0]
    inner = float(w @ spec.mu)
    sizes = _chunk_sizes(n_mc, spec.p)
    children = np.random.SeedSequence(int(seed)).spawn(len(sizes))
    errors = sum(_mc_chunk(w_sqrt, inner, spec, size, child) for size, child in zip(sizes, children))
    value = errors / n_mc
    return RiskEstimate(value=value, standard_error=math.sqrt(value * (1 - value) / n_mc), method=MONTE_CARLO, n_mc=n_mc)


test_error_mc.__test__ = False


# ---------------------------------------------------------------------------
# predicted orders and bounds


@dataclass(frozen=True)
class ZetaPrediction:
    zeta_sq_predicted: float
    regime: str
    components: dict
    zeta_sq_observed: float | None = None

    @property
    def ratio(self) -> float | None:
        if self.zeta_sq_observed is None:
            return None
        return self.zeta_sq_observed / self.zeta_sq_predicted

    def to_dict(self) -> dict:
        return asdict(self) | {"ratio": self.ratio}


def predicted_zeta_sq(eta: float, n_rho: float, mu_norm: float, regime: str = "noisy", observed: float | None = None) -> ZetaPrediction:
    if regime not in ("noisy", "noiseless"):
        raise ValidationError(f"unknown regime {regime!r}")
    if n_rho <= 0 or mu_norm <= 0:
        raise ValidationError("n_rho and mu_norm must be positive")
    signal = 1 / mu_norm**2
    small = 1 / (n_rho * mu_norm**4)
    if regime == "noiseless":
        comps = {"noise_term": 0.0, "signal_term": signal, "small_signal_term": small, "prefactor": 1.0}
    else:
        if not (0 < eta < 0.5):
            raise ValidationError("the noisy prediction needs eta in (0, 1/2)")
        comps = {"noise_term": eta * n_rho, "signal_term": signal, "small_signal_term": small,
                 "prefactor": 1 / (1 - 2 * eta) ** 2}
    total = comps["prefactor"] * (comps["noise_term"] + comps["signal_term"] + comps["small_signal_term"])
    return ZetaPrediction(zeta_sq_predicted=total, regime=regime, components=comps, zeta_sq_observed=observed)


@dataclass(frozen=True)
class BoundSet:
    noiseless_bound: float
    noisy_bound: float | None
    noiseless_exp: float | None = None
    noisy_exp: float | None = None
    vacuous: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _clip(value: float) -> tuple[float, bool]:
    return min(max(value, 0.0), 1.0), value >= 1.0


def risk_bounds(eta: float, n_rho: float, mu_norm: float, op_norm_Ezz: float, constants: dict | None = None,
                psi2_norm: float | None = None) -> BoundSet:
    """Polynomial test-error bounds; exponential ones only when ``psi2_norm`` is given."""
    consts = {"c": 1.0, "c1": 1.0, "c2": 1.0} | dict(constants or {})
    m2 = mu_norm**2
    noiseless_raw = consts["c"] * op_norm_Ezz * (1 / m2 + 1 / (n_rho * m2**2))
    noiseless, vac_a = _clip(noiseless_raw)
    vacuous = {"noiseless_bound": vac_a}
    noisy = None
    if eta > 0:
        brace = eta * n_rho + 1 / m2 + 1 / (n_rho * m2**2)
        noisy, vacuous["noisy_bound"] = _clip(eta + consts["c1"] * op_norm_Ezz / (1 - 2 * eta) ** 2 * brace)
    noiseless_exp = noisy_exp = None
    if psi2_norm is not None:
        # the small-signal term carries ||mu||^3 in this bound
        rate = 1 / m2 + 1 / (n_rho * mu_norm**3)
        noiseless_exp = min(1.0, math.exp(-consts["c"] / psi2_norm**2 / rate))
        if eta > 0:
            brace = eta * n_rho + 1 / m2 + 1 / (n_rho * m2**2)
            noisy_exp = min(1.0, eta + (1 - eta) * math.exp(-consts["c2"] * (1 - 2 * eta) ** 2 / psi2_norm**2 / brace))
    return BoundSet(noiseless, noisy, noiseless_exp, noisy_exp, vacuous, consts)


# ---------------------------------------------------------------------------
# kappa


def _abs_tail(xi: CoordinateLaw, s: float) -> float:
    """P(|xi_1| > s)."""
    if xi.kind == "gaussian":
        return float(2 * ndtr(-s))
    if xi.kind == "rademacher":
        return 1.0 if s < 1 else 0.0
    scale = math.sqrt(xi.df / (xi.df - 2))
    return float(2 * stats.t.sf(s * scale, xi.df))


def kappa(t: float, eta: float, g_law: ScaleLaw | None = None, xi_law: CoordinateLaw | None = None,
          mode: str = "closed-form", n_mc: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """((1 - 2 eta)/2) P(g |xi_1| > t); returns (value, standard error)."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    g_law = g_law or ScaleLaw()
    xi_law = xi_law or CoordinateLaw()
    half = (1 - 2 * eta) / 2
    if mode == "monte-carlo":
        rng = np.random.default_rng(seed)
        g = g_law.sample(rng, n_mc)
        xi = xi_law.sample(rng, n_mc)
        frac = float(np.mean(g * np.abs(xi) > t))
        return half * frac, half * math.sqrt(frac * (1 - frac) / n_mc)
    if mode != "closed-form":
        raise ValidationError(f"unknown mode {mode!r}")
    if g_law.kind == "constant":
        return half * _abs_tail(xi_law, t), 0.0
    if g_law.kind == "two_point":
        q = g_law.weight
        prob = q * _abs_tail(xi_law, t / g_law.value) + (1 - q) * _abs_tail(xi_law, t / g_law.partner)
        return half * prob, 0.0
    # lognormal: log g ~ N(-sigma^2, sigma^2)
    sd = g_law.sigma
    dens = stats.norm(loc=-sd**2, scale=sd)
    prob, _ = integrate.quad(lambda u: dens.pdf(u) * _abs_tail(xi_law, t * math.exp(-u)),
                             -sd**2 - 12 * sd, -sd**2 + 12 * sd, limit=200)
    return half * prob, 0.0


def kappa_sphere(t: float, eta: float, spec: ModelSpec, n_mc: int = 20_000, seed: int = 0) -> tuple[float, float]:
    """((1 - 2 eta)/2) P(||z|| |u_1| > t) with u uniform on the unit sphere, simulated."""
    rng = np.random.default_rng(seed)
    hits = 0
    for size in _chunk_sizes(n_mc, spec.p):
        g = spec.g_law.sample(rng, size)
        z = g[:, None] * spec.sigma.apply_sqrt(spec.xi_law.sample(rng, (size, spec.p)))
        u = rng.standard_normal((size, spec.p))
        u1 = u[:, 0] / np.linalg.norm(u, axis=1)
        hits += int(np.count_nonzero(np.linalg.norm(z, axis=1) * np.abs(u1) > t))
    frac = hits / n_mc
    half = (1 - 2 * eta) / 2
    return half * frac, half * math.sqrt(frac * (1 - frac) / n_mc)


# ---------------------------------------------------------------------------
# sandwich


@dataclass(frozen=True)
class SandwichResult:
    lower: float
    observed_excess: float
    upper: float
    band: float
    exact_excess: float
    zeta: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self) | {"pass": self.passed}


def sandwich_check(dataset: Dataset, classifier, band_se: float = 3.0, method: str = "exact",
                   n_mc: int = 20_000, seed: int = 0) -> SandwichResult:
    """Compare the excess error with kappa at the extreme eigenvalues.

    ``method="mc"`` uses a simulated error as the observation and widens the
    interval by ``band_se`` standard errors on each side.
    """
    spec = dataset.spec
    if spec is None:
        raise ValidationError("sandwich check needs a dataset generated from a spec")
    if not spec.xi_law.is_gaussian or spec.g_law.kind != "constant":
        raise ValidationError("sandwich check needs Gaussian coordinates and g = 1")
    if not (0 < spec.eta < 0.5):
        raise ValidationError("sandwich check needs eta in (0, 1/2)")
    w = np.asarray(getattr(classifier, "w", classifier), dtype=float)
    z = zeta(w, spec.mu)
    spectrum = spec.sigma.spectrum(spec.p)
    lmax, lmin = float(spectrum.max()), float(spectrum.min())
    lower = kappa(1 / (math.sqrt(lmin) * z), spec.eta)[0]
    upper = kappa(1 / (math.sqrt(lmax) * z), spec.eta)[0]
    exact = test_error_exact(w, spec.mu, spec.sigma, spec.eta).value - spec.eta
    if method == "exact":
        observed, band = exact, 0.0
    elif method == "mc":
        est = test_error_mc(w, spec, n_mc=n_mc, seed=seed)
        observed, band = est.value - spec.eta, band_se * est.standard_error
    else:
        raise ValidationError(f"unknown method {method!r}")
    # a relative epsilon absorbs rounding when the interval collapses to a point
    slack = band + 1e-12 * max(abs(upper), abs(lower), 1e-300)
    passed = lower - slack <= observed <= upper + slack
    return SandwichResult(lower, observed, upper, band, exact, z, bool(passed))
