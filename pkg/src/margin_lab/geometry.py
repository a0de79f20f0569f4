"""Geometric view of the max-margin direction: convex weights over folded
samples, the clean/noisy split and a sphere blow-up estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .gram import SPDSolver
from .model import Dataset

NU_TOL = 1e-10


def z_perp(folded_rows: np.ndarray) -> np.ndarray:
    """Minimum-norm point of the affine hull of the rows.

    Equals R^T G^{-1} 1 / (1^T G^{-1} 1) with G = R R^T, so R z = ||z||^2 1.
    """
    rows = np.atleast_2d(np.asarray(folded_rows, dtype=float))
    weights = SPDSolver(rows @ rows.T, "Gram matrix of the folded rows").solve(np.ones(rows.shape[0]))
    return rows.T @ weights / weights.sum()


@dataclass(frozen=True, eq=False)
class GeometricDecomposition:
    alpha: np.ndarray
    nu_c: float
    nu_n: float
    z_perp_c: np.ndarray
    z_perp_n: np.ndarray
    reconstruction_residual: float
    scaled_w_norm: float
    empty_side: str | None = None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "nu_c": self.nu_c,
            "nu_n": self.nu_n,
            "alpha_sum": float(self.alpha.sum()),
            "reconstruction_residual": self.reconstruction_residual,
            "relative_residual": self.reconstruction_residual / self.scaled_w_norm,
            "empty_side": self.empty_side,
        }


def _side(alpha, rows, mask):
    mass = float(alpha[mask].sum())
    if not mask.any() or mass == 0:
        return 0.0, np.zeros(rows.shape[1])
    return mass, alpha[mask] @ rows[mask] / mass


def clean_noisy_decomposition(dataset: Dataset, classifier) -> GeometricDecomposition:
    """Write w/||w||^2 as nu_C (z_C + mu) + nu_N (z_N - mu).

    The weights are alpha = (Xf Xf^T)^{-1} Xf w / ||w||^2 over the folded samples
    Xf. For a max-margin w these are the normalized dual variables, so they are
    nonnegative and sum to one; when every sample is a support vector they
    reduce to (Xf Xf^T)^{-1} 1 / 1^T (Xf Xf^T)^{-1} 1.
    """
    w = np.asarray(getattr(classifier, "w", classifier), dtype=float)
    folded = dataset.folded_X
    sq = float(w @ w)
    if sq == 0:
        raise ValidationError("classifier is zero")
    target = w / sq
    alpha = SPDSolver(folded @ folded.T, "folded Gram matrix").solve(folded @ target)
    clean = ~dataset.noisy_mask
    fz = dataset.folded_Z
    nu_c, zc = _side(alpha, fz, clean)
    nu_n, zn = _side(alpha, fz, ~clean)
    recon = nu_c * (zc + dataset.mu) + nu_n * (zn - dataset.mu)
    empty = "noisy" if not (~clean).any() else ("clean" if not clean.any() else None)
    return GeometricDecomposition(
        alpha=alpha, nu_c=nu_c, nu_n=nu_n, z_perp_c=zc, z_perp_n=zn,
        reconstruction_residual=float(np.linalg.norm(target - recon)),
        scaled_w_norm=float(np.linalg.norm(target)), empty_side=empty,
    )


def subset(dataset: Dataset, mask) -> Dataset:
    """Rows selected by ``mask`` as a stand-alone dataset."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValidationError("empty subset")
    return Dataset(
        X=dataset.X[mask], y=dataset.y[mask], y_noisy=dataset.y_noisy[mask], Z=dataset.Z[mask],
        g_values=dataset.g_values[mask], mu=dataset.mu, spec=None, seed=dataset.seed,
    )


def orthogonal_nu_formulas(eta: float, x: float) -> tuple[float, float]:
    """Clean and noisy masses on orthogonal data with balanced norms; x = n rho ||mu||^2."""
    if not (0 <= eta < 0.5) or x < 0:
        raise ValidationError("need eta in [0, 1/2) and x >= 0")
    spread = 4 * eta * (1 - eta) * x
    nu_c = (1 - eta + 0.5 * spread) / (1 + spread)
    nu_n = (eta + 0.5 * spread) / (1 + spread)
    return nu_c, nu_n


@dataclass(frozen=True)
class CapEstimate:
    fraction: float
    standard_error: float
    n_mc: int
    metric: str


def cap_fraction_mc(p: int, d: float, n_mc: int = 100_000, seed: int = 0, metric: str = "halfspace") -> CapEstimate:
    """Share of the radius-sqrt(p) sphere within distance d of the hemisphere {u_1 >= 0}.

    ``halfspace`` measures the distance to the half-space, so the set is
    {u_1 >= -d}. ``chordal`` uses the Euclidean distance to the hemisphere
    as a subset of the sphere, which is slightly stricter. Points come from
    normalized Gaussian vectors drawn from ``seed``, so calls with the same
    seed share their random numbers.
    """
    if p < 2 or d < 0 or n_mc < 1:
        raise ValidationError("need p >= 2, d >= 0 and n_mc >= 1")
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, 2_000_000 // p)
    done = 0
    while done < n_mc:
        size = min(chunk, n_mc - done)
        g = rng.standard_normal((size, p))
        v1 = g[:, 0] / np.linalg.norm(g, axis=1)
        if metric == "halfspace":
            inside = math.sqrt(p) * v1 >= -d
        elif metric == "chordal":
            # nearest hemisphere point lies on the equator when v1 < 0
            cos_angle = np.sqrt(np.clip(1 - v1**2, 0, 1))
            dist = math.sqrt(p) * np.sqrt(np.clip(2 - 2 * cos_angle, 0, None))
            inside = (v1 >= 0) | (dist <= d)
        else:
            raise ValidationError(f"unknown metric {metric!r}")
        hits += int(np.count_nonzero(inside))
        done += size
    frac = hits / n_mc
    return CapEstimate(frac, math.sqrt(frac * (1 - frac) / n_mc), n_mc, metric)


def exact_cap_fraction_3d(d: float) -> float:
    """Half-space version in p = 3, where the first coordinate of a uniform point is uniform."""
    return min(1.0, (1 + d / math.sqrt(3)) / 2)
