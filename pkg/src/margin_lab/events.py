"""Near-orthogonality events, their predicted parameters, theorem precondition
checklists and numeric verification of the quadratic-form bounds.

Event meanings (realized on a dataset):

* E1: ||Zc Zc^T - I|| <= eps, with Zc the row-normalized noise matrix.
* E2: ||Zc mu|| <= alpha2 ||mu|| and ||Zc mu||_inf <= alpha_inf ||mu||.
* E3: max_i ||z_i|| <= M.
* E4: |mean(||z_i||^-2) - rho| <= beta rho.
* E5: |mean(yN_i y_i ||z_i||^-2) - (1 - 2 eta) rho| <= gamma rho.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .gram import GramDecomposition, checked_transform
from .model import Dataset, ModelSpec, ScaleLaw

DEFAULT_CONSTANTS = {
    "C": 1.0,
    "C_prime": 3.0,
    "c": 1.0,
    "c1": 1.0,
    "c2": 1.0,
    "C_tilde1": 1.0,
    "C_tilde2": 1.0,
    "C_tilde3": 1.0,
    "C_tilde4": 1.0,
    "C_mu": 1.0,
    "C_p": 1.0,
}
# C_prime defaults above 2 because the large-signal regime requires it.


def resolve_constants(overrides: dict | None = None) -> dict:
    consts = dict(DEFAULT_CONSTANTS)
    for key, value in (overrides or {}).items():
        consts[key] = float(value)
    return consts


# ---------------------------------------------------------------------------
# realized events


@dataclass(frozen=True)
class EventThresholds:
    eps: float
    alpha2: float
    alpha_inf: float
    M: float
    beta: float
    gamma: float
    rho: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EventReport:
    eps_realized: float
    alpha2_realized: float
    alphaInf_realized: float
    M_realized: float
    beta_realized: float
    gamma_realized: float
    rho: float
    inv_sq_mean: float
    signed_inv_sq_mean: float
    eta: float
    n: int
    thresholds: EventThresholds
    holds: dict

    @property
    def first_four(self) -> bool:
        return all(self.holds[k] for k in ("E1", "E2", "E3", "E4"))

    @property
    def all_five(self) -> bool:
        return self.first_four and self.holds["E5"]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["thresholds"] = self.thresholds.to_dict()
        return out


def _realized(dataset: Dataset):
    view = checked_transform(dataset)
    Zc = view.Z_checked
    n = dataset.n
    eig = np.linalg.eigvalsh(Zc @ Zc.T - np.eye(n))
    eps = float(max(abs(eig[0]), abs(eig[-1])))
    mu_norm = float(np.linalg.norm(dataset.mu))
    proj = Zc @ dataset.mu
    if mu_norm > 0:
        a2 = float(np.linalg.norm(proj)) / mu_norm
        ainf = float(np.abs(proj).max()) / mu_norm
    else:
        a2 = ainf = 0.0
    inv_sq = view.z_norms**-2.0
    return view, eps, a2, ainf, float(view.z_norms.max()), float(inv_sq.mean()), float(np.mean(dataset.y_noisy * dataset.y * inv_sq))


def event_report(dataset: Dataset, thresholds: EventThresholds | dict) -> EventReport:
    if isinstance(thresholds, dict):
        thresholds = EventThresholds(**thresholds)
    th = thresholds
    if th.rho <= 0:
        raise ValidationError("rho threshold must be positive")
    _, eps, a2, ainf, M, inv_mean, signed_mean = _realized(dataset)
    eta = dataset.eta
    mu_norm = float(np.linalg.norm(dataset.mu))
    holds = {
        "E1": eps <= th.eps,
        "E2": a2 * mu_norm <= th.alpha2 * mu_norm and ainf * mu_norm <= th.alpha_inf * mu_norm,
        "E3": M <= th.M,
        "E4": abs(inv_mean - th.rho) <= th.beta * th.rho,
        "E5": abs(signed_mean - (1 - 2 * eta) * th.rho) <= th.gamma * th.rho,
    }
    return EventReport(
        eps_realized=eps, alpha2_realized=a2, alphaInf_realized=ainf, M_realized=M,
        beta_realized=abs(inv_mean - th.rho) / th.rho,
        gamma_realized=abs(signed_mean - (1 - 2 * eta) * th.rho) / th.rho,
        rho=th.rho, inv_sq_mean=inv_mean, signed_inv_sq_mean=signed_mean, eta=eta, n=dataset.n,
        thresholds=th, holds={k: bool(v) for k, v in holds.items()},
    )


def realized_thresholds(dataset: Dataset, rho: float) -> EventThresholds:
    """Smallest thresholds at which every event holds for this dataset."""
    _, eps, a2, ainf, M, inv_mean, signed_mean = _realized(dataset)
    eta = dataset.eta
    return EventThresholds(
        eps=eps, alpha2=a2, alpha_inf=ainf, M=M,
        beta=_ratio_covering(abs(inv_mean - rho), rho),
        gamma=_ratio_covering(abs(signed_mean - (1 - 2 * eta) * rho), rho), rho=rho,
    )


def _ratio_covering(gap: float, rho: float) -> float:
    # smallest float b with b * rho >= gap, so the event test holds despite rounding
    b = gap / rho
    while b * rho < gap:
        b = np.nextafter(b, np.inf)
    return float(b)


# ---------------------------------------------------------------------------
# constants and predicted parameters


@dataclass(frozen=True)
class ModelConstants:
    C: float
    C1: float
    C2: float


def constant_C(r: float, K: float) -> float:
    return 2 ** (r / 2 - 1) * (2 * (K ** (2 / r) + 1) ** (r / 2) + 2 ** (r / 4))


def model_constants(r: float, K: float, k: float, g_law: ScaleLaw) -> ModelConstants:
    if not (2 < r <= 4) or not (2 < k <= 4):
        raise ValidationError(f"moment orders must lie in (2, 4]: r={r}, k={k}")
    if K < 1:
        raise ValidationError(f"K must be at least 1, got {K}")
    c = constant_C(r, K)
    c1 = 4 * (2 * c) ** (2 / r)
    c2 = 2 ** (2 + 2 / k) * g_law.inv_sq_norm(k / 2) / g_law.inv_sq_norm(1.0)
    return ModelConstants(C=c, C1=c1, C2=c2)


def _dim_factor(n: int, p: int, r: float) -> float:
    return max(p ** (2 / r - 0.5), n ** (2 / r))


def _n_over_delta_power(n: int, delta: float, ell: float) -> float:
    # (n/delta)^{1/ell}, read as 1 when ell is infinite
    return 1.0 if math.isinf(ell) else (n / delta) ** (1 / ell)


@dataclass(frozen=True)
class PredictedParameters:
    eps: float
    alpha2: float
    alphaInf: float
    beta: float
    gamma: float
    rho: float
    M: float
    constants: ModelConstants
    delta: float
    gate_passes: bool

    def thresholds(self) -> EventThresholds:
        return EventThresholds(self.eps, self.alpha2, self.alphaInf, self.M, self.beta, self.gamma, self.rho)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constants"] = asdict(self.constants)
        return out


def em_event_parameters(spec: ModelSpec, delta: float) -> PredictedParameters:
    if not (0 < delta < 1):
        raise ValidationError("delta must lie in (0, 1)")
    n, p = spec.n, spec.p
    g, xi = spec.g_law, spec.xi_law
    consts = model_constants(xi.r, xi.K, g.k, g)
    tr = spec.trace
    fro = spec.sigma.frobenius(p)
    eps = consts.C1 * (n / delta) ** (2 / xi.r) * _dim_factor(n, p, xi.r) * fro / tr
    mu_norm = spec.mu_norm
    alpha = 2 * math.sqrt(n) * spec.sigma_half_mu_norm() / (math.sqrt(delta * tr) * mu_norm) if mu_norm > 0 else 0.0
    beta = eps + consts.C2 * delta ** (-2 / g.k) * n ** (-(1 - 2 / g.k))
    rho = g.moment(-2.0) / tr
    M = (1 + eps) * g.lp_norm() * _n_over_delta_power(n, delta, g.ell) * math.sqrt(tr)
    return PredictedParameters(
        eps=eps, alpha2=alpha, alphaInf=alpha, beta=beta, gamma=beta, rho=rho, M=M,
        constants=consts, delta=delta, gate_passes=eps <= 0.5,
    )


# ---------------------------------------------------------------------------
# theorem checklists


@dataclass(frozen=True)
class CheckItem:
    name: str
    realized: float
    relation: str
    required: float
    group: str = "common"

    @property
    def passed(self) -> bool:
        lhs, rhs = self.realized, self.required
        if self.relation == "<=":
            return bool(lhs <= rhs)
        if self.relation == "<":
            return bool(lhs < rhs)
        if self.relation == ">=":
            return bool(lhs >= rhs)
        if self.relation == ">":
            return bool(lhs > rhs)
        raise ValueError(self.relation)

    def to_dict(self) -> dict:
        return {"name": self.name, "group": self.group, "realized": self.realized,
                "relation": self.relation, "required": self.required, "pass": self.passed}


@dataclass(frozen=True)
class Checklist:
    theorem: str
    items: list
    regimes: tuple
    constants: dict
    notes: dict = field(default_factory=dict)

    def group_passes(self, group: str) -> bool:
        return all(item.passed for item in self.items if item.group == group)

    @property
    def regime_results(self) -> dict:
        return {name: self.group_passes(name) for name in self.regimes}

    @property
    def passed(self) -> bool:
        common = self.group_passes("common")
        if not self.regimes:
            return common
        return common and any(self.regime_results.values())

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem, "pass": self.passed, "regimes": self.regime_results,
            "items": [item.to_dict() for item in self.items], "constants": self.constants, "notes": self.notes,
        }

    def render(self) -> str:
        width = max(len(item.name) for item in self.items)
        lines = [f"{self.theorem}: {'PASS' if self.passed else 'FAIL'}"]
        for item in self.items:
            mark = "ok " if item.passed else "no "
            lines.append(f"  [{mark}] {item.group:<8} {item.name:<{width}}  {item.realized:.6g} {item.relation} {item.required:.6g}")
        lines.append("  constants: " + json.dumps(self.constants, sort_keys=True))
        return "\n".join(lines)


def noisy_constant(eta: float) -> float:
    """max{22/eta, 17/(1 - 2 eta)}."""
    return max(22 / eta, 17 / (1 - 2 * eta))


def _require_noisy(spec: ModelSpec, theorem: str) -> None:
    if not (0 < spec.eta < 0.5):
        raise ValidationError(f"{theorem} needs eta in (0, 1/2), got eta={spec.eta}")


def _require_noiseless(spec: ModelSpec, theorem: str) -> None:
    if spec.eta != 0:
        raise ValidationError(f"{theorem} is a noiseless statement; got eta={spec.eta}")


def _sub_gaussian_norm(spec: ModelSpec, consts: dict) -> float:
    if "L" in consts:
        return consts["L"]
    if spec.g_law.kind != "constant":
        raise ValidationError("sub-Gaussian conditions need g = 1 (z = Sigma^{1/2} xi)")
    L = spec.xi_law.psi2_norm
    if math.isinf(L):
        raise ValidationError("coordinate law is not sub-Gaussian")
    return L


def _checks_noiseless_main(spec, P, consts):
    n, mu = spec.n, spec.mu_norm
    nr = n * P.rho
    a2, ainf, b, e, M = P.alpha2, P.alphaInf, P.beta, P.eps, P.M
    items = [
        CheckItem("event gate eps", e, "<=", 0.5),
        CheckItem("beta", b, "<", 0.5, "i"),
        CheckItem("|mu| sqrt((1-beta) n rho) / alpha2", mu * math.sqrt(max(1 - b, 0) * nr) / a2 if a2 > 0 else math.inf, ">=", consts["C"], "i"),
        CheckItem("alpha2 |mu| sqrt((1+beta) n rho)", a2 * mu * math.sqrt((1 + b) * nr), "<=", 0.25, "i"),
        CheckItem("eps M sqrt((1+beta) n rho)", e * M * math.sqrt((1 + b) * nr), "<=", 0.25, "i"),
        CheckItem("M alpha_inf |mu| (1+beta) n rho", M * ainf * mu * (1 + b) * nr, "<", 3 / 32, "i"),
        CheckItem("C' (large-signal constant)", consts["C_prime"], ">", 2.0, "ii"),
        CheckItem("|mu| / M", mu / M, ">=", consts["C_prime"], "ii"),
    ]
    return items, ("i", "ii")


def _checks_nc(spec, P, consts):
    n, mu, eta = spec.n, spec.mu_norm, spec.eta
    nr = n * P.rho
    C = noisy_constant(eta)
    a2, ainf, e, M = P.alpha2, P.alphaInf, P.eps, P.M
    items = [
        CheckItem("event gate eps", e, "<=", 0.5),
        CheckItem("eps M sqrt(n rho)", e * M * math.sqrt(nr), "<=", eta / 2),
        CheckItem("|mu| sqrt(n rho) / alpha2", mu * math.sqrt(nr) / a2 if a2 > 0 else math.inf, ">=", C),
        CheckItem("max(eps, beta, gamma)", max(e, P.beta, P.gamma), "<=", min(eta, 1 - 2 * eta) / 8),
        CheckItem("alpha2 |mu| sqrt(n rho)", a2 * mu * math.sqrt(nr), "<=", 1 / 30, "i"),
        CheckItem("alpha_inf |mu| M n rho", ainf * mu * M * nr, "<=", 1 / 64, "i"),
        CheckItem("|mu| / (alpha_inf M)", mu / (ainf * M) if ainf > 0 else math.inf, ">=", C, "ii"),
        CheckItem("max(alpha2^2, alpha2 alpha_inf M sqrt(n rho))", max(a2**2, a2 * ainf * M * math.sqrt(nr)), "<=", 1 / C, "ii"),
    ]
    return items, ("i", "ii")


def _checks_noisy_simple(spec, P, consts):
    n, mu, eta = spec.n, spec.mu_norm, spec.eta
    nr = n * P.rho
    C = noisy_constant(eta)
    cap = 16 / (17 * C)
    items = [
        CheckItem("event gate eps", P.eps, "<=", 0.5),
        CheckItem("|mu| / (alpha2 M)", mu / (P.alpha2 * P.M) if P.alpha2 > 0 else math.inf, ">=", 17 / 16 * C),
        CheckItem("max(alpha2, eps) M sqrt(n rho)", max(P.alpha2, P.eps) * P.M * math.sqrt(nr), "<=", cap),
        CheckItem("max(beta, gamma)", max(P.beta, P.gamma), "<=", cap),
    ]
    return items, ()


def _common_em(spec, delta):
    n, p = spec.n, spec.p
    g, xi = spec.g_law, spec.xi_law
    tr = spec.trace
    fro = spec.sigma.frobenius(p)
    return n, p, g, xi, tr, fro, spec.sigma_half_mu_norm(), _n_over_delta_power(n, delta, g.ell)


def _checks_noiseless_ext1(spec, P, consts, delta):
    n, p, g, xi, tr, fro, smu, nd_ell = _common_em(spec, delta)
    C = consts["C"]
    k, r = g.k, xi.r
    n_min = (4 * P.constants.C2 / delta ** (2 / k)) ** (k / (k - 2))
    need_tr = C * nd_ell * max(
        (n / delta) ** (2 / r) * math.sqrt(n) * fro * _dim_factor(n, p, r),
        math.sqrt(n / delta) * n * smu,
    )
    items = [
        CheckItem("n", n, ">=", n_min),
        CheckItem("|mu|^2", spec.mu_norm**2, ">=", C * delta**-0.5 * smu),
        CheckItem("tr(Sigma)", tr, ">=", need_tr),
    ]
    return items, ()


def _checks_noiseless_ext2(spec, P, consts, delta):
    n, p, g, xi, tr, fro, smu, nd_ell = _common_em(spec, delta)
    C = consts["C_prime"]
    items = [
        CheckItem("delta", delta, "<", 0.5),
        CheckItem("C' (large-signal constant)", C, ">", 2.0),
        CheckItem("|mu|", spec.mu_norm, ">=", 1.5 * C * g.lp_norm() * nd_ell * math.sqrt(tr)),
        CheckItem("tr(Sigma)", tr, ">=", 2 * P.constants.C1 * (n / delta) ** (2 / xi.r) * _dim_factor(n, p, xi.r) * fro),
    ]
    return items, ()


def _checks_noisy_ext1(spec, P, consts, delta):
    n, p, g, xi, tr, fro, smu, nd_ell = _common_em(spec, delta)
    eta, C = spec.eta, consts["C"]
    k, r = g.k, xi.r
    low = min(eta, 1 - 2 * eta)
    mu_sq = spec.mu_norm**2
    n_min = delta ** (-2 / (k - 2)) * (16 * P.constants.C2 / low) ** (k / (k - 2))
    items = [
        CheckItem("n", n, ">=", n_min),
        CheckItem("|mu|^2", mu_sq, ">=", C * max(1 / eta, 1 / (1 - 2 * eta)) * delta**-0.5 * smu),
        CheckItem("tr(Sigma)", tr, ">=", C / eta * (n / delta) ** (2 / r) * nd_ell * math.sqrt(n) * _dim_factor(n, p, r) * fro),
        CheckItem("tr(Sigma) [signal cap]", tr, ">=", C * math.sqrt(n / delta) * nd_ell * n * smu, "i"),
        CheckItem("|mu|^2 [strong signal]", mu_sq, ">=", C / low * math.sqrt(n / delta) * nd_ell * smu, "ii"),
        CheckItem("tr(Sigma) [strong signal]", tr, ">=",
                  C / low * (n / delta) * nd_ell * math.sqrt(n) * smu**2 / mu_sq if mu_sq > 0 else math.inf, "ii"),
    ]
    return items, ("i", "ii")


def _checks_identity_corollary(spec, P, consts, delta):
    if spec.sigma.kind != "identity":
        raise ValidationError("the isotropic corollary needs Sigma = I")
    n, p = spec.n, spec.p
    g, xi = spec.g_law, spec.xi_law
    r, inv_ell = xi.r, (0.0 if math.isinf(g.ell) else 1 / g.ell)
    exp_a = (4 + (1 + 2 * inv_ell) * r) / (2 * (r - 2))
    exp_b = 8 / r + 1 + 2 * inv_ell
    items = [
        CheckItem("|mu| / (p/n)^{1/4}", spec.mu_norm / (p / n) ** 0.25, ">=", consts["C_mu"]),
        CheckItem("p", p, ">=", consts["C_p"] * max(n**exp_a, n**exp_b)),
    ]
    notes = {"dimension_exponents": [exp_a, exp_b]}
    return items, (), notes


def _checks_phase_simple(spec, P, consts, delta):
    if not spec.xi_law.is_gaussian:
        raise ValidationError("the two-sided sandwich statement needs Gaussian coordinates")
    if not (0 < delta <= 0.2):
        raise ValidationError("delta must lie in (0, 1/5]")
    n, p = spec.n, spec.p
    g = spec.g_law
    eta, C = spec.eta, consts["C"]
    low = min(eta, 1 - 2 * eta)
    inv_ell = 0.0 if math.isinf(g.ell) else 1 / g.ell
    c_eta_delta = delta ** (-1 - inv_ell) * math.sqrt(math.log(1 / delta)) / low
    spectrum = spec.sigma.spectrum(p)
    lmax, lmin = float(spectrum.max()), float(spectrum.min())
    k = g.k
    items = [
        CheckItem("p", p, ">=", C**2 * c_eta_delta**2 * (lmax / lmin) ** 2 * n ** (2 + 2 * inv_ell)),
        CheckItem("|mu|", spec.mu_norm, ">=", C * c_eta_delta * lmax),
        CheckItem("n", n, ">=", delta ** (-2 / (k - 2)) * (16 * P.constants.C2 / low) ** (k / (k - 2))),
    ]
    return items, ()


def _checks_sg_noisy(spec, P, consts, delta):
    L = _sub_gaussian_norm(spec, consts)
    n, p = spec.n, spec.p
    eta = spec.eta
    tr, fro, op = spec.trace, spec.sigma.frobenius(p), spec.sigma.op_norm(p)
    smu, mu_sq = spec.sigma_half_mu_norm(), spec.mu_norm**2
    c1, c2, c3, c4 = (consts[f"C_tilde{i}"] for i in range(1, 5))
    Ce = noisy_constant(eta)
    lg = math.log(1 / delta)
    low = min(eta, 1 - 2 * eta)
    items = [
        CheckItem("tr(Sigma)", tr, ">=", 33 * c1 * L**2 / (16 * eta) * max(n**1.5 * lg * op, n * math.sqrt(lg) * fro)),
        CheckItem("|mu|^2", mu_sq, ">=", 2 * c2 * Ce * L * math.sqrt(lg) * smu),
        CheckItem("n", n, ">=", lg * (16 * c4 / low) ** 2),
        CheckItem("tr(Sigma) [signal cap]", tr, ">=",
                  max(60 * c2 * n * math.sqrt(lg), 132 * c3 * n * math.sqrt(math.log(n)) / delta) * L * smu, "i"),
        CheckItem("|mu|^2 [strong signal]", mu_sq, ">=", 33 / 16 * c3 * Ce * L / delta * math.sqrt(math.log(n)) * smu, "ii"),
        CheckItem("tr(Sigma) [strong signal]", tr, ">=",
                  4 * c2 * Ce * L**2 * max(c2 * n * lg, 33 / 32 * c3 / delta * math.sqrt(lg * n * math.log(n)))
                  * (smu**2 / mu_sq if mu_sq > 0 else math.inf), "ii"),
    ]
    return items, ("i", "ii")


def _checks_sg_noiseless(spec, P, consts, delta):
    L = _sub_gaussian_norm(spec, consts)
    n, p = spec.n, spec.p
    tr, fro, op = spec.trace, spec.sigma.frobenius(p), spec.sigma.op_norm(p)
    smu, mu = spec.sigma_half_mu_norm(), spec.mu_norm
    c1, c2, c3 = (consts[f"C_tilde{i}"] for i in range(1, 4))
    c5 = consts.get("C_tilde5", max(3 * math.sqrt(6) * c1, 4 * math.sqrt(6) * c2, 48 * c3))
    lg = math.log(1 / delta)
    items = [
        CheckItem("|mu|^2", mu**2, ">=", 2 * math.sqrt(2) * consts["C"] * c2 * L * math.sqrt(lg) * smu, "i"),
        CheckItem("tr(Sigma)", tr, ">=", c5 * max(L**2 * n * math.sqrt(lg) * fro, L**2 * n**1.5 * lg * op,
                                                   L * n * math.sqrt(math.log(n)) / delta * smu), "i"),
        CheckItem("|mu|", mu, ">=", 1.5 * consts["C_prime"] * math.sqrt(tr), "ii"),
        CheckItem("tr(Sigma) [strong signal]", tr, ">=", 2 * c1 * L**2 * max(math.sqrt(n * lg) * fro, n * lg * op), "ii"),
    ]
    return items, ("i", "ii"), {"C_tilde5": c5}


THEOREMS = {
    "noiseless-main": ("noiseless", _checks_noiseless_main, False),
    "noisy-main": ("noisy", _checks_nc, False),
    "noisy-simple": ("noisy", _checks_noisy_simple, False),
    "noiseless-ext-small": ("noiseless", _checks_noiseless_ext1, True),
    "noiseless-ext-large": ("noiseless", _checks_noiseless_ext2, True),
    "noisy-ext": ("noisy", _checks_noisy_ext1, True),
    "identity-corollary": ("noisy", _checks_identity_corollary, True),
    "phase-sandwich": ("noisy", _checks_phase_simple, True),
    "subgaussian-noisy": ("noisy", _checks_sg_noisy, True),
    "subgaussian-noiseless": ("noiseless", _checks_sg_noiseless, True),
}


def theorem_preconditions(spec: ModelSpec, delta: float, theorem_id: str, universal_constants: dict | None = None) -> Checklist:
    """Evaluate every inequality of a theorem's hypothesis with predicted parameters."""
    if theorem_id not in THEOREMS:
        raise ValidationError(f"unknown theorem id {theorem_id!r}; choose from {sorted(THEOREMS)}")
    domain, builder, needs_delta = THEOREMS[theorem_id]
    if domain == "noisy":
        _require_noisy(spec, theorem_id)
    else:
        _require_noiseless(spec, theorem_id)
    consts = resolve_constants(universal_constants)
    P = em_event_parameters(spec, delta)
    out = builder(spec, P, consts, delta) if needs_delta else builder(spec, P, consts)
    items, regimes = out[0], out[1]
    notes = out[2] if len(out) > 2 else {}
    notes = dict(notes, predicted=P.to_dict())
    return Checklist(theorem=theorem_id, items=items, regimes=regimes, constants=consts, notes=notes)


# ---------------------------------------------------------------------------
# quadratic-form bounds


@dataclass(frozen=True)
class BoundCheck:
    family: str
    quantity: str
    lower: float
    value: float
    upper: float

    def violated(self, rel: float = 1e-9) -> bool:
        slack = rel * (abs(self.lower) + abs(self.upper) + abs(self.value)) + 1e-300
        return self.value < self.lower - slack or self.value > self.upper + slack


@dataclass
class QuadBoundReport:
    violations: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"checked": self.checked, "skipped": self.skipped,
                "violations": [asdict(v) for v in self.violations]}


def verify_quad_bounds(gram: GramDecomposition, report: EventReport, dataset: Dataset) -> QuadBoundReport:
    """Check each applicable bound at the report's thresholds.

    Bounds are evaluated only when the events in their hypotheses hold at those
    thresholds; the others are listed as skipped.
    """
    th = report.thresholds
    eps, a2, ainf, M, beta, gamma, rho = th.eps, th.alpha2, th.alpha_inf, th.M, th.beta, th.gamma, th.rho
    n, eta = report.n, report.eta
    view = checked_transform(dataset)
    norms = view.z_norms
    y_chk_sq = float(view.y_checked @ view.y_checked)
    y_chk = math.sqrt(y_chk_sq)
    nu_chk = view.nu_checked
    mu_norm = math.sqrt(gram.mu_norm_sq)
    nr = n * rho

    h1 = report.holds["E1"] and 0 <= eps <= 0.5
    h2 = report.holds["E2"] and a2 >= ainf >= 0
    h3 = report.holds["E3"] and M > 0
    h4 = report.holds["E4"] and beta >= 0
    h5 = report.holds["E5"] and 0 <= gamma < 0.5

    out = QuadBoundReport()

    def run(name, hyp, checks):
        if not hyp:
            out.skipped.append(name)
            return
        for quantity, lo, val, hi in checks:
            item = BoundCheck(name, quantity, float(lo), float(val), float(hi))
            out.checked += 1
            if item.violated():
                out.violations.append(item)

    nu_sq = float(nu_chk @ nu_chk)
    cross = float(view.yN_checked @ view.y_checked)
    run("quadratic form", h1, [
        ("s", y_chk_sq / (1 + eps), gram.s, y_chk_sq / (1 - eps)),
        ("s_NN", y_chk_sq / (1 + eps), gram.s_NN, y_chk_sq / (1 - eps)),
        ("t", nu_sq / (1 + eps), gram.t, nu_sq / (1 - eps)),
        ("s_N", (cross - eps * y_chk_sq) / (1 - eps**2), gram.s_N, (cross + eps * y_chk_sq) / (1 - eps**2)),
    ])
    run("s bounds (i, ii)", h1 and h4, [
        ("s", (1 - beta) * nr / (1 + eps), gram.s, (1 + beta) * nr / (1 - eps)),
        ("s_NN", (1 - beta) * nr / (1 + eps), gram.s_NN, (1 + beta) * nr / (1 - eps)),
    ])
    spread = gamma + eps * (1 + beta)
    run("s bounds (iii)", h1 and h4 and h5, [
        ("s_N", ((1 - 2 * eta) - spread) * nr / (1 - eps**2), gram.s_N, ((1 - 2 * eta) + spread) * nr / (1 - eps**2)),
    ])
    run("t bound", h1 and h2, [
        ("t", 0.0, gram.t, min(a2**2 / (1 - eps), 1.0) * gram.mu_norm_sq),
    ])
    h_cap = y_chk * a2 * mu_norm / (1 - eps)
    h_cap_outer = a2 * mu_norm * math.sqrt((1 + beta) * nr) / (1 - eps)
    run("h bounds", h1 and h2 and h4, [
        ("|h|", 0.0, abs(gram.h), h_cap),
        ("|h_N|", 0.0, abs(gram.h_N), h_cap),
        ("|h| outer", 0.0, abs(gram.h), h_cap_outer),
        ("|h_N| outer", 0.0, abs(gram.h_N), h_cap_outer),
    ])
    y = gram.y
    yN = gram.y_noisy
    diag_y = y * gram.a_inv_y
    diag_yN = yN * gram.a_inv_yN
    diag_cross = np.abs(yN * gram.a_inv_y)
    denom = (1 - eps**2) * norms**2
    inner = eps * norms * y_chk
    checks = []
    for i in range(n):
        lo, hi = (1 - inner[i]) / denom[i], (1 + inner[i]) / denom[i]
        checks += [(f"y A^-1 y_i e_{i}", lo, diag_y[i], hi),
                   (f"yN A^-1 yN_i e_{i}", lo, diag_yN[i], hi),
                   (f"|y A^-1 yN_i e_{i}|", min(lo, 0.0) if lo < 0 else lo, diag_cross[i], hi)]
    run("row terms (i-iii)", h1, checks)
    outer = eps * M * math.sqrt((1 + beta) * nr)
    checks = []
    for i in range(n):
        lo, hi = (1 - outer) / denom[i], (1 + outer) / denom[i]
        checks += [(f"y A^-1 y_i e_{i} outer", lo, diag_y[i], hi),
                   (f"yN A^-1 yN_i e_{i} outer", lo, diag_yN[i], hi),
                   (f"|y A^-1 yN_i e_{i}| outer", min(lo, 0.0) if lo < 0 else lo, diag_cross[i], hi)]
    run("row terms (iv-vi)", h1 and h3 and h4, checks)
    nu_rows = np.abs(gram.a_inv_nu)
    cap = (ainf + eps * a2) * mu_norm / ((1 - eps**2) * norms)
    run("nu row terms", h1 and h2, [(f"|nu A^-1 e_{i}|", 0.0, nu_rows[i], cap[i]) for i in range(n)])
    run("M^2 rho lower bound", h3 and h4, [("M^2 rho", 1 / (1 + beta), M**2 * rho, math.inf)])
    inv_a = h1 and ((h2 and h4 and a2 * mu_norm * math.sqrt((1 + beta) * nr) <= 0.25) or (h2 and a2 < 1 / math.sqrt(2)))
    run("invertibility", inv_a, [("d", 0.0, gram.d, math.inf)])
    return out
