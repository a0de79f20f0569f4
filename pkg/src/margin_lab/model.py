"""Model specifications and dataset sampling.

A sample is ``x = y * mu + z`` with ``z = g * Sigma^{1/2} xi``.  The noisy label
equals ``-y`` with probability ``eta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import ValidationError

PSD_CLIP = 1e-8
MOMENT_TOL = 1e-6


# ---------------------------------------------------------------------------
# covariance descriptors


@dataclass(frozen=True, eq=False)
class SigmaSpec:
    """Covariance descriptor.

    ``kind`` is one of ``identity``, ``diagonal`` (``eigenvalues``), ``full``
    (``matrix``) or ``spiked`` (``lambda_max`` on the first ``n_spikes``
    coordinates, ``lambda_min`` on the rest).
    """

    kind: str = "identity"
    eigenvalues: np.ndarray | None = None
    matrix: np.ndarray | None = None
    lambda_max: float = 1.0
    lambda_min: float = 1.0
    n_spikes: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("identity", "diagonal", "full", "spiked"):
            raise ValidationError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "diagonal":
            if self.eigenvalues is None:
                raise ValidationError("diagonal covariance needs eigenvalues")
            ev = np.asarray(self.eigenvalues, dtype=float)
            object.__setattr__(self, "eigenvalues", ev)
            if np.any(ev < 0):
                raise ValidationError(f"covariance is not PSD: eigenvalue {ev.min()!r}")
        if self.kind == "full":
            if self.matrix is None:
                raise ValidationError("full covariance needs a matrix")
            mat = np.asarray(self.matrix, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValidationError("covariance matrix must be square")
            if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise ValidationError("covariance matrix must be symmetric")
            object.__setattr__(self, "matrix", mat)
            self._eigh()
        if self.kind == "spiked":
            if self.lambda_min < 0 or self.lambda_max < 0:
                raise ValidationError("spiked covariance needs nonnegative eigenvalues")
            if self.n_spikes < 0:
                raise ValidationError("n_spikes must be nonnegative")

    # -- helpers ----------------------------------------------------------
    def _eigh(self):
        if "eigh" not in self._cache:
            mat = self.matrix
            vals, vecs = np.linalg.eigh(mat)
            scale = max(np.abs(vals).max(initial=0.0), 0.0)
            worst = vals.min(initial=0.0)
            if worst < -PSD_CLIP * scale:
                raise ValidationError(f"covariance is not PSD: eigenvalue {worst!r}")
            vals = np.where(vals < 0, 0.0, vals)
            self._cache["eigh"] = (vals, vecs)
        return self._cache["eigh"]

    def dimension(self) -> int | None:
        if self.kind == "diagonal":
            return len(self.eigenvalues)
        if self.kind == "full":
            return self.matrix.shape[0]
        return None

    def check_dimension(self, p: int) -> None:
        dim = self.dimension()
        if dim is not None and dim != p:
            raise ValidationError(f"covariance has dimension {dim}, model has p={p}")
        if self.kind == "spiked" and self.n_spikes > p:
            raise ValidationError("more spikes than dimensions")

    def spectrum(self, p: int) -> np.ndarray:
        """Eigenvalues (ascending for ``full``, coordinate order otherwise)."""
        self.check_dimension(p)
        if self.kind == "identity":
            return np.ones(p)
        if self.kind == "diagonal":
            return self.eigenvalues
        if self.kind == "spiked":
            out = np.full(p, float(self.lambda_min))
            out[: self.n_spikes] = self.lambda_max
            return out
        return self._eigh()[0]

    def diagonal(self, p: int) -> np.ndarray | None:
        """Diagonal of Sigma when Sigma is diagonal, else None."""
        if self.kind == "full":
            return None
        return self.spectrum(p)

    def dense(self, p: int) -> np.ndarray:
        diag = self.diagonal(p)
        if diag is not None:
            return np.diag(diag)
        return self.matrix.copy()

    def trace(self, p: int) -> float:
        return float(self.spectrum(p).sum())

    def frobenius(self, p: int) -> float:
        return float(np.sqrt(np.sum(self.spectrum(p) ** 2)))

    def op_norm(self, p: int) -> float:
        return float(self.spectrum(p).max())

    def min_eigenvalue(self, p: int) -> float:
        return float(self.spectrum(p).min())

    def quad_form(self, w: np.ndarray) -> float:
        """w^T Sigma w."""
        w = np.asarray(w, dtype=float)
        diag = self.diagonal(len(w))
        if diag is not None:
            return float(np.dot(diag * w, w))
        return float(w @ self.matrix @ w)

    def apply_sqrt(self, rows: np.ndarray) -> np.ndarray:
        """Map each row ``xi`` to ``Sigma^{1/2} xi``."""
        rows = np.asarray(rows, dtype=float)
        p = rows.shape[-1]
        diag = self.diagonal(p)
        if diag is not None:
            if self.kind == "identity":
                return rows.copy()
            return rows * np.sqrt(diag)
        factor = covariance_factor(self)
        return rows @ factor.T

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "diagonal":
            out["eigenvalues"] = self.eigenvalues.tolist()
        elif self.kind == "full":
            out["matrix"] = self.matrix.tolist()
        elif self.kind == "spiked":
            out.update(lambda_max=self.lambda_max, lambda_min=self.lambda_min, n_spikes=self.n_spikes)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "SigmaSpec":
        doc = dict(doc)
        kind = doc.pop("kind", "identity")
        if "eigenvalues" in doc:
            doc["eigenvalues"] = np.asarray(doc["eigenvalues"], dtype=float)
        if "matrix" in doc:
            doc["matrix"] = np.asarray(doc["matrix"], dtype=float)
        return cls(kind=kind, **doc)


def covariance_factor(sigma: SigmaSpec, p: int | None = None) -> np.ndarray:
    """Symmetric square root F of Sigma, so that F @ F.T equals Sigma."""
    if sigma.kind == "full":
        if "factor" not in sigma._cache:
            vals, vecs = sigma._eigh()
            sigma._cache["factor"] = (vecs * np.sqrt(vals)) @ vecs.T
        return sigma._cache["factor"]
    if p is None:
        p = sigma.dimension()
        if p is None:
            raise ValidationError("dimension p is required for this covariance kind")
    return np.diag(np.sqrt(sigma.spectrum(p)))


# ---------------------------------------------------------------------------
# radial scale laws


@dataclass(frozen=True)
class ScaleLaw:
    """Law of the positive radial factor ``g`` with ``E g^2 = 1``.

    ``constant``: g = 1.  ``two_point``: g = ``value`` with probability
    ``weight``, otherwise the partner value fixed by ``E g^2 = 1``.
    ``lognormal``: log g ~ N(-sigma^2, sigma^2).
    """

    kind: str = "constant"
    value: float = 0.5
    weight: float = 0.5
    sigma: float = 0.25
    ell: float = math.inf
    k: float = 4.0

    def __post_init__(self):
        if self.kind not in ("constant", "two_point", "lognormal"):
            raise ValidationError(f"unknown g law {self.kind!r}")
        if not (2 < self.k <= 4):
            raise ValidationError(f"moment order k must lie in (2, 4], got {self.k}")
        if not (self.ell >= 2):
            raise ValidationError(f"moment order ell must lie in [2, inf], got {self.ell}")
        if self.kind == "two_point":
            if not (0 < self.weight < 1) or self.value <= 0:
                raise ValidationError("two-point law needs value > 0 and weight in (0, 1)")
            if self.weight * self.value**2 >= 1:
                raise ValidationError("two-point law cannot reach E g^2 = 1 with these parameters")
        if self.kind == "lognormal":
            if self.sigma <= 0:
                raise ValidationError("log-normal law needs sigma > 0")
            if math.isinf(self.ell):
                raise ValidationError("log-normal g is unbounded; declare a finite ell")
        if abs(self.moment(2.0) - 1.0) > MOMENT_TOL:
            raise ValidationError("g law violates E g^2 = 1")

    @property
    def partner(self) -> float:
        return math.sqrt((1 - self.weight * self.value**2) / (1 - self.weight))

    def moment(self, order: float) -> float:
        """E g^order (closed form; any real order)."""
        if self.kind == "constant":
            return 1.0
        if self.kind == "two_point":
            return self.weight * self.value**order + (1 - self.weight) * self.partner**order
        s2 = self.sigma**2
        return math.exp(-order * s2 + 0.5 * order**2 * s2)

    def lp_norm(self, order: float | None = None) -> float:
        """||g||_{L^order}; ``order`` defaults to the declared ell."""
        order = self.ell if order is None else order
        if math.isinf(order):
            if self.kind == "constant":
                return 1.0
            if self.kind == "two_point":
                return max(self.value, self.partner)
            return math.inf
        return self.moment(order) ** (1.0 / order)

    def inv_sq_norm(self, order: float) -> float:
        """||g^{-2}||_{L^order} = (E g^{-2 order})^{1/order}."""
        return self.moment(-2.0 * order) ** (1.0 / order)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.kind == "constant":
            return np.ones(size) if size is not None else 1.0
        if self.kind == "two_point":
            u = rng.random(size)
            return np.where(u < self.weight, self.value, self.partner)
        return np.exp(rng.normal(-(self.sigma**2), self.sigma, size))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "ell": _encode_inf(self.ell), "k": self.k}
        if self.kind == "two_point":
            out.update(value=self.value, weight=self.weight)
        if self.kind == "lognormal":
            out["sigma"] = self.sigma
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ScaleLaw":
        doc = dict(doc)
        if "ell" in doc:
            doc["ell"] = _decode_inf(doc["ell"])
        elif doc.get("kind") == "lognormal":
            doc["ell"] = 4.0
        return cls(**doc)


# ---------------------------------------------------------------------------
# coordinate laws


@dataclass(frozen=True)
class CoordinateLaw:
    """Law of the i.i.d. coordinates of ``xi`` (mean 0, variance 1).

    ``r`` is the declared moment order and ``K`` (a property) the analytic
    value of E|xi|^r.
    """

    kind: str = "gaussian"
    r: float = 4.0
    df: float = 10.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "student_t"):
            raise ValidationError(f"unknown coordinate law {self.kind!r}")
        if not (2 < self.r <= 4):
            raise ValidationError(f"moment order r must lie in (2, 4], got {self.r}")
        if self.kind == "student_t" and not self.df > self.r:
            raise ValidationError("Student-t needs degrees of freedom above r")

    @property
    def K(self) -> float:
        r = self.r
        if self.kind == "gaussian":
            return float(2 ** (r / 2) * gamma_fn((r + 1) / 2) / math.sqrt(math.pi))
        if self.kind == "rademacher":
            return 1.0
        nu = self.df
        return float(
            (nu - 2) ** (r / 2) * gamma_fn((r + 1) / 2) * gamma_fn((nu - r) / 2)
            / (math.sqrt(math.pi) * gamma_fn(nu / 2))
        )

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian"

    @property
    def psi2_norm(self) -> float:
        """Sub-Gaussian norm, ``inf`` for the heavy-tailed law."""
        if self.kind == "gaussian":
            return math.sqrt(8.0 / 3.0)
        if self.kind == "rademacher":
            return 1.0 / math.sqrt(math.log(2.0))
        return math.inf

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size) - 1.0
        return rng.standard_t(self.df, size) * math.sqrt((self.df - 2) / self.df)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "r": self.r}
        if self.kind == "student_t":
            out["df"] = self.df
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "CoordinateLaw":
        return cls(**doc)


# ---------------------------------------------------------------------------
# full model


def _encode_inf(value: float):
    return "inf" if math.isinf(value) else value


def _decode_inf(value) -> float:
    return math.inf if value in ("inf", "Infinity", None) else float(value)


def mu_vector(direction, mu_norm: float, p: int) -> np.ndarray:
    """Signal vector of norm ``mu_norm`` along a named or explicit direction."""
    if isinstance(direction, str):
        if direction == "e1":
            unit = np.zeros(p)
            unit[0] = 1.0
        elif direction == "ones":
            unit = np.full(p, 1.0 / math.sqrt(p))
        else:
            raise ValidationError(f"unknown mu direction {direction!r}")
    else:
        unit = np.asarray(direction, dtype=float)
        if unit.shape != (p,):
            raise ValidationError(f"mu direction has shape {unit.shape}, expected ({p},)")
        norm = np.linalg.norm(unit)
        if norm == 0:
            raise ValidationError("mu direction must be nonzero")
        unit = unit / norm
    return mu_norm * unit


@dataclass(frozen=True, eq=False)
class ModelSpec:
    n: int
    p: int
    mu_norm: float = 1.0
    mu_direction: str | np.ndarray = "e1"
    eta: float = 0.0
    sigma: SigmaSpec = field(default_factory=SigmaSpec)
    g_law: ScaleLaw = field(default_factory=ScaleLaw)
    xi_law: CoordinateLaw = field(default_factory=CoordinateLaw)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if int(self.p) != self.p or self.p < 1:
            raise ValidationError(f"p must be a positive integer, got {self.p}")
        if not (0 <= self.eta < 0.5):
            raise ValidationError(f"eta must lie in [0, 0.5), got {self.eta}")
        if self.mu_norm < 0:
            raise ValidationError("mu_norm must be nonnegative")
        self.sigma.check_dimension(self.p)
        # validates the direction eagerly
        object.__setattr__(self, "_mu", mu_vector(self.mu_direction, float(self.mu_norm), self.p))

    @classmethod
    def from_mu(cls, mu, **kwargs) -> "ModelSpec":
        mu = np.asarray(mu, dtype=float)
        norm = float(np.linalg.norm(mu))
        direction = mu if norm > 0 else "e1"
        return cls(p=len(mu), mu_norm=norm, mu_direction=direction, **kwargs)

    @property
    def mu(self) -> np.ndarray:
        return self._mu

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    # derived scalars used throughout
    @property
    def trace(self) -> float:
        return self.sigma.trace(self.p)

    @property
    def rho(self) -> float:
        return self.g_law.moment(-2.0) / self.trace

    @property
    def is_gaussian(self) -> bool:
        return self.g_law.kind == "constant" and self.xi_law.is_gaussian

    def sigma_half_mu_norm(self) -> float:
        return math.sqrt(max(self.sigma.quad_form(self.mu), 0.0))

    def to_dict(self) -> dict:
        direction = self.mu_direction
        if not isinstance(direction, str):
            direction = np.asarray(direction, dtype=float).tolist()
        return {
            "n": int(self.n),
            "p": int(self.p),
            "mu": {"norm": float(self.mu_norm), "direction": direction},
            "eta": float(self.eta),
            "sigma": self.sigma.to_dict(),
            "g_law": self.g_law.to_dict(),
            "xi_law": self.xi_law.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        try:
            mu = doc.get("mu", {})
            if isinstance(mu, list):
                return cls.from_mu(
                    mu,
                    n=int(doc["n"]),
                    eta=float(doc.get("eta", 0.0)),
                    sigma=SigmaSpec.from_dict(doc.get("sigma", {"kind": "identity"})),
                    g_law=ScaleLaw.from_dict(doc.get("g_law", {"kind": "constant"})),
                    xi_law=CoordinateLaw.from_dict(doc.get("xi_law", {"kind": "gaussian"})),
                )
            direction = mu.get("direction", "e1")
            if not isinstance(direction, str):
                direction = np.asarray(direction, dtype=float)
            return cls(
                n=int(doc["n"]),
                p=int(doc["p"]),
                mu_norm=float(mu.get("norm", 1.0)),
                mu_direction=direction,
                eta=float(doc.get("eta", 0.0)),
                sigma=SigmaSpec.from_dict(doc.get("sigma", {"kind": "identity"})),
                g_law=ScaleLaw.from_dict(doc.get("g_law", {"kind": "constant"})),
                xi_law=CoordinateLaw.from_dict(doc.get("xi_law", {"kind": "gaussian"})),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed model document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    y_noisy: np.ndarray
    Z: np.ndarray
    g_values: np.ndarray
    mu: np.ndarray
    spec: ModelSpec | None = None
    seed: int | None = None

    def __post_init__(self):
        for name in ("X", "Z"):
            arr = getattr(self, name)
            if arr.ndim != 2:
                raise ValidationError(f"{name} must be a matrix")
        n, p = self.X.shape
        if self.Z.shape != (n, p) or self.mu.shape != (p,):
            raise ValidationError("inconsistent dataset shapes")
        for name in ("y", "y_noisy"):
            labels = getattr(self, name)
            if labels.shape != (n,) or not np.all(np.abs(labels) == 1):
                raise ValidationError(f"{name} must be a vector of +-1 of length {n}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def noisy_mask(self) -> np.ndarray:
        return self.y_noisy != self.y

    @property
    def eta(self) -> float:
        """Declared flip rate, or the realized one for hand-built data."""
        if self.spec is not None:
            return self.spec.eta
        return float(np.mean(self.noisy_mask))

    @property
    def folded_X(self) -> np.ndarray:
        return self.y_noisy[:, None] * self.X

    @property
    def folded_Z(self) -> np.ndarray:
        return self.y_noisy[:, None] * self.Z

    @classmethod
    def from_arrays(cls, Z, y, y_noisy=None, mu=None) -> "Dataset":
        """Build a dataset around a user-supplied noise matrix."""
        Z = np.array(Z, dtype=float, ndmin=2)
        n, p = Z.shape
        y = np.asarray(y, dtype=float).reshape(n)
        y_noisy = y.copy() if y_noisy is None else np.asarray(y_noisy, dtype=float).reshape(n)
        mu = np.zeros(p) if mu is None else np.asarray(mu, dtype=float).reshape(p)
        X = y[:, None] * mu[None, :] + Z
        return cls(X=X, y=y, y_noisy=y_noisy, Z=Z, g_values=np.ones(n), mu=mu)

    def save(self, path) -> None:
        extra = {}
        if self.spec is not None:
            extra["spec_json"] = np.array(self.spec.to_json())
        if self.seed is not None:
            extra["seed"] = np.array(self.seed, dtype=np.uint64)
        np.savez(
            path, X=self.X, y=self.y, y_noisy=self.y_noisy, Z=self.Z,
            g_values=self.g_values, mu=self.mu, **extra,
        )

    @classmethod
    def load(cls, path) -> "Dataset":
        with np.load(Path(path), allow_pickle=False) as data:
            if "Z" not in data or "y" not in data:
                raise ValidationError("dataset file needs at least Z and y arrays")
            Z = data["Z"]
            mu = data["mu"] if "mu" in data else np.zeros(Z.shape[1])
            y = data["y"].astype(float)
            y_noisy = data["y_noisy"].astype(float) if "y_noisy" in data else y.copy()
            spec = ModelSpec.from_json(str(data["spec_json"])) if "spec_json" in data else None
            seed = int(data["seed"]) if "seed" in data else None
            g_values = data["g_values"] if "g_values" in data else np.ones(Z.shape[0])
        X = y[:, None] * mu[None, :] + Z
        return cls(X=X, y=y, y_noisy=y_noisy, Z=Z, g_values=g_values, mu=mu, spec=spec, seed=seed)


def row_generator(seed: int, row: int) -> np.random.Generator:
    """Counter-based stream for one row: Philox keyed by the seed, counter by the row."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    counter = np.array([0, 0, 0, int(row)], dtype=np.uint64)
    key = np.array([seed, 0x9E3779B97F4A7C15], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def sample_dataset(spec: ModelSpec, seed: int) -> Dataset:
    n, p = spec.n, spec.p
    y = np.empty(n)
    flips = np.empty(n, dtype=bool)
    g = np.empty(n)
    xi = np.empty((n, p))
    for i in range(n):
        rng = row_generator(seed, i)
        y[i] = 1.0 if rng.random() < 0.5 else -1.0
        flips[i] = rng.random() < spec.eta
        g[i] = spec.g_law.sample(rng)
        xi[i] = spec.xi_law.sample(rng, p)
    Z = g[:, None] * spec.sigma.apply_sqrt(xi)
    y_noisy = np.where(flips, -y, y)
    X = y[:, None] * spec.mu[None, :] + Z
    return Dataset(X=X, y=y, y_noisy=y_noisy, Z=Z, g_values=g, mu=spec.mu.copy(), spec=spec, seed=int(seed))


def make_orthogonal_fixture(n_clean: int, n_noisy: int, norms, mu_norm: float, p: int, y=None) -> Dataset:
    """Noise rows on distinct canonical axes, orthogonal to ``mu = mu_norm * e_1``.

    Clean rows come first.  Labels default to +1.
    """
    n = n_clean + n_noisy
    norms = np.asarray(norms, dtype=float)
    if norms.shape != (n,):
        raise ValidationError(f"norms must have length {n}")
    if np.any(norms <= 0):
        raise ValidationError("norms must be positive")
    if p < n + 1:
        raise ValidationError(f"p={p} too small for {n} orthogonal rows plus mu (need {n + 1})")
    Z = np.zeros((n, p))
    Z[np.arange(n), np.arange(1, n + 1)] = norms
    mu = np.zeros(p)
    mu[0] = mu_norm
    y = np.ones(n) if y is None else np.asarray(y, dtype=float)
    y_noisy = y.copy()
    y_noisy[n_clean:] *= -1
    X = y[:, None] * mu[None, :] + Z
    return Dataset(X=X, y=y, y_noisy=y_noisy, Z=Z, g_values=np.ones(n), mu=mu)


def balanced_norm_fixture(eta: float, x: float, n_clean: int, n_noisy: int, rng=None, rho: float = 1.0) -> Dataset:
    """Orthogonal fixture whose inverse squared norms sum to ``(1-eta) n rho`` over
    clean rows and ``eta n rho`` over noisy rows, with ``n rho ||mu||^2 = x``.
    """
    if not (0 < eta < 0.5) or n_clean < 1 or n_noisy < 1:
        raise ValidationError("need eta in (0, 1/2) and both sides non-empty")
    n = n_clean + n_noisy
    raw = np.ones(n) if rng is None else rng.uniform(0.5, 2.0, n)
    inv_sq = raw**-2
    inv_sq[:n_clean] *= (1 - eta) * n * rho / inv_sq[:n_clean].sum()
    inv_sq[n_clean:] *= eta * n * rho / inv_sq[n_clean:].sum()
    mu_norm = math.sqrt(x / (n * rho))
    return make_orthogonal_fixture(n_clean, n_noisy, inv_sq**-0.5, mu_norm, n + 1)
