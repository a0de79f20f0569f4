"""Gram matrix quantities, rescaled ("checked") coordinates and the rank-two
closed form for the inverse of X X^T.

Every product with A^{-1} goes through one Cholesky factorization of A = Z Z^T.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DegeneratePerturbationError, SingularMatrixError, ValidationError
from .model import Dataset

SINGULAR_RATIO = 1e-10
DEGENERATE_RATIO = 1e-10


@dataclass(frozen=True, eq=False)
class CheckedView:
    z_norms: np.ndarray
    Z_checked: np.ndarray
    y_checked: np.ndarray
    yN_checked: np.ndarray
    mu: np.ndarray

    @property
    def nu_checked(self) -> np.ndarray:
        return self.Z_checked @ self.mu


def row_norms(Z: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(Z, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValidationError(f"noise row {int(zero[0])} is zero")
    return norms


def checked_transform(dataset: Dataset) -> CheckedView:
    norms = row_norms(dataset.Z)
    return CheckedView(
        z_norms=norms,
        Z_checked=dataset.Z / norms[:, None],
        y_checked=dataset.y / norms,
        yN_checked=dataset.y_noisy / norms,
        mu=dataset.mu,
    )


class SPDSolver:
    """Factorize a symmetric positive definite matrix once and solve repeatedly."""

    def __init__(self, matrix: np.ndarray, what: str = "matrix"):
        matrix = np.asarray(matrix, dtype=float)
        eig = np.linalg.eigvalsh(matrix)
        lo, hi = float(eig[0]), float(eig[-1])
        self.condition = hi / lo if lo > 0 else np.inf
        if hi <= 0 or lo <= SINGULAR_RATIO * hi:
            raise SingularMatrixError(
                f"{what} is singular or indefinite (eigenvalue ratio {lo / hi if hi > 0 else 0.0:.3e})",
                condition=self.condition,
            )
        self.matrix = matrix
        self._factor = cho_factor(matrix, lower=True, check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return cho_solve(self._factor, rhs, check_finite=False)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.matrix.shape[0]))


@dataclass(frozen=True, eq=False)
class GramDecomposition:
    A: np.ndarray
    nu: np.ndarray
    y: np.ndarray
    y_noisy: np.ndarray
    s: float
    s_N: float
    s_NN: float
    t: float
    h: float
    h_N: float
    d: float
    mu_norm_sq: float
    a_inv_y: np.ndarray
    a_inv_yN: np.ndarray
    a_inv_nu: np.ndarray
    solver: SPDSolver

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def d_from_parts(self) -> float:
        return self.s * (self.mu_norm_sq - self.t) + (1 + self.h) ** 2

    def check_nondegenerate(self) -> None:
        scale = DEGENERATE_RATIO * self.s * max(1.0, self.mu_norm_sq)
        if not abs(self.d) > scale:
            raise DegeneratePerturbationError(f"degenerate perturbation: |d| = {abs(self.d):.3e} <= {scale:.3e}")

    def to_dict(self) -> dict:
        keys = ("s", "s_N", "s_NN", "t", "h", "h_N", "d", "mu_norm_sq")
        return {key: float(getattr(self, key)) for key in keys} | {"condition_A": float(self.solver.condition)}


def gram_quantities(dataset: Dataset) -> GramDecomposition:
    Z, mu = dataset.Z, dataset.mu
    A = Z @ Z.T
    solver = SPDSolver(A, "Gram matrix Z Z^T")
    nu = Z @ mu
    y, yN = dataset.y, dataset.y_noisy
    a_inv_y, a_inv_yN, a_inv_nu = solver.solve(np.column_stack([y, yN, nu])).T
    s = float(y @ a_inv_y)
    s_N = float(yN @ a_inv_y)
    s_NN = float(yN @ a_inv_yN)
    t = float(nu @ a_inv_nu)
    h = float(y @ a_inv_nu)
    h_N = float(yN @ a_inv_nu)
    mu_sq = float(mu @ mu)
    d = s * (mu_sq - t) + (1 + h) ** 2
    return GramDecomposition(
        A=A, nu=nu, y=y, y_noisy=yN, s=s, s_N=s_N, s_NN=s_NN, t=t, h=h, h_N=h_N, d=d,
        mu_norm_sq=mu_sq, a_inv_y=a_inv_y, a_inv_yN=a_inv_yN, a_inv_nu=a_inv_nu, solver=solver,
    )


def woodbury_inverse(gram: GramDecomposition) -> np.ndarray:
    """(X X^T)^{-1} as a rank-two correction of A^{-1}."""
    gram.check_nondegenerate()
    ay, an = gram.a_inv_y, gram.a_inv_nu
    correction = (
        (1 + gram.h) * (np.outer(ay, an) + np.outer(an, ay))
        - gram.s * np.outer(an, an)
        + (gram.mu_norm_sq - gram.t) * np.outer(ay, ay)
    )
    return gram.solver.inverse() - correction / gram.d


def expansion_vector(gram: GramDecomposition) -> np.ndarray:
    """(X X^T)^{-1} y_N written through A^{-1} y_N, A^{-1} y and A^{-1} nu."""
    gram.check_nondegenerate()
    g = gram
    coef_y = g.s_N * (g.mu_norm_sq - g.t) + g.h_N * (1 + g.h)
    coef_nu = g.h_N * g.s - g.s_N * (1 + g.h)
    return g.a_inv_yN + (coef_nu * g.a_inv_nu - coef_y * g.a_inv_y) / g.d


def noiseless_expansion(gram: GramDecomposition) -> np.ndarray:
    """(X X^T)^{-1} y when the labels are clean."""
    gram.check_nondegenerate()
    return ((1 + gram.h) * gram.a_inv_y - gram.s * gram.a_inv_nu) / gram.d


def matrix_to_csv(matrix: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(matrix):
        writer.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue()
