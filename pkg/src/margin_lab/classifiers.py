"""Three routes to the maximum-margin linear classifier."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DivergenceError, NotSeparableError, SingularMatrixError, ValidationError
from .gram import SPDSolver, expansion_vector, gram_quantities
from .model import Dataset

LS, ORACLE, GD = "least-squares-interpolator", "hard-margin-oracle", "logistic-gd"
SUPPORT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Classifier:
    w: np.ndarray
    method: str
    margins: np.ndarray
    support_flags: np.ndarray
    iterations: int | None = None
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "w": self.w.tolist(),
            "margins": self.margins.tolist(),
            "support_flags": self.support_flags.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Classifier":
        margins = np.asarray(doc["margins"], dtype=float)
        flags = doc.get("support_flags")
        return cls(
            w=np.asarray(doc["w"], dtype=float),
            method=doc["method"],
            margins=margins,
            support_flags=np.asarray(flags, dtype=bool) if flags is not None else margins <= 1 + SUPPORT_TOL,
            iterations=doc.get("iterations"),
            converged=doc.get("converged", True),
            diagnostics=doc.get("diagnostics", {}),
        )


def _wrap(w, folded, method, **extra) -> Classifier:
    margins = folded @ w
    return Classifier(w=w, method=method, margins=margins, support_flags=margins <= 1 + SUPPORT_TOL, **extra)


# ---------------------------------------------------------------------------
# least squares interpolation


def interpolation_coefficients(dataset: Dataset) -> np.ndarray:
    """(X X^T)^{-1} y_N, through the rank-two expansion when Z Z^T is invertible."""
    try:
        return expansion_vector(gram_quantities(dataset))
    except SingularMatrixError:
        # Z Z^T can be singular while X X^T is not (e.g. Z without full row rank)
        return SPDSolver(dataset.X @ dataset.X.T, "X X^T").solve(dataset.y_noisy)


def ls_interpolator(dataset: Dataset) -> Classifier:
    coef = interpolation_coefficients(dataset)
    return _wrap(dataset.X.T @ coef, dataset.folded_X, LS)


def least_squares_folded(folded: np.ndarray) -> np.ndarray:
    """Minimum-norm w with every folded margin equal to one."""
    return folded.T @ SPDSolver(folded @ folded.T, "folded Gram").solve(np.ones(folded.shape[0]))


@dataclass(frozen=True, eq=False)
class SupportCondition:
    holds: bool
    vector: np.ndarray


def support_condition(dataset: Dataset) -> SupportCondition:
    vec = dataset.y_noisy * interpolation_coefficients(dataset)
    return SupportCondition(holds=bool(np.all(vec > 0)), vector=vec)


# ---------------------------------------------------------------------------
# hard-margin oracle


def separability_probe(folded: np.ndarray, max_iter: int = 20_000) -> np.ndarray | None:
    """Gradient descent on the mean squared hinge; returns a strict separator or None."""
    n = folded.shape[0]
    smooth = 2.0 * np.linalg.eigvalsh(folded @ folded.T)[-1] / n
    if smooth <= 0:
        return None
    w = np.zeros(folded.shape[1])
    for _ in range(max_iter):
        m = folded @ w
        if np.all(m > 0):
            return w
        slack = np.maximum(0.0, 1.0 - m)
        w += (2.0 / (n * smooth)) * (slack @ folded)
    return None


def kkt_report(folded: np.ndarray, lam: np.ndarray, w: np.ndarray) -> dict:
    margins = folded @ w
    primal = 0.5 * float(w @ w)
    dual = float(lam.sum()) - primal
    return {
        "primal_violation": float(max(0.0, 1.0 - margins.min())),
        "complementary_slackness": float(np.max(np.abs(lam * (margins - 1.0)))),
        "dual_feasibility": float(max(0.0, -lam.min())),
        "duality_gap": float(abs(primal - dual) / max(1.0, abs(primal))),
    }


def max_margin_folded(folded, tol=1e-8, max_iter=100_000, kkt_tol=1e-6) -> Classifier:
    """Hard-margin SVM through the folded rows y_N,i x_i."""
    folded = np.asarray(folded, dtype=float)
    if np.any(np.einsum("ij,ij->i", folded, folded) == 0):
        raise NotSeparableError("not linearly separable: a zero sample cannot have positive margin")
    Q = folded @ folded.T
    lam, status, sweeps = kernels.dual_coordinate_ascent(Q, tol=tol, max_sweeps=max_iter)
    w = folded.T @ lam
    kkt = kkt_report(folded, lam, w)
    converged = (
        status == kernels.CONVERGED
        and kkt["primal_violation"] <= tol
        and kkt["complementary_slackness"] <= kkt_tol
        and kkt["duality_gap"] <= kkt_tol
    )
    if status != kernels.CONVERGED:
        witness = separability_probe(folded)
        if witness is None and status == kernels.DIVERGING:
            raise NotSeparableError("not linearly separable: dual diverges and no separator was found")
        kkt["separator_found"] = witness is not None
    kkt["dual"] = lam.tolist()
    return _wrap(w, folded, ORACLE, iterations=sweeps, converged=converged, diagnostics=kkt)


def hard_margin_oracle(dataset: Dataset, tol: float = 1e-8, max_iter: int = 100_000, kkt_tol: float = 1e-6) -> Classifier:
    return max_margin_folded(dataset.folded_X, tol=tol, max_iter=max_iter, kkt_tol=kkt_tol)


def max_margin(dataset: Dataset, **oracle_kwargs) -> Classifier:
    """The max-margin classifier: closed form when every sample is a support vector."""
    try:
        cond = support_condition(dataset)
        if cond.holds:
            return ls_interpolator(dataset)
    except SingularMatrixError:
        pass
    return hard_margin_oracle(dataset, **oracle_kwargs)


# ---------------------------------------------------------------------------
# logistic gradient descent


def smoothness_step(folded: np.ndarray) -> float:
    """4 / lambda_max(Xt^T Xt / n), the guarded step for the logistic loss."""
    n = folded.shape[0]
    top = np.linalg.eigvalsh(folded @ folded.T)[-1] / n
    if top <= 0:
        raise ValidationError("all samples are zero")
    return 4.0 / top


@dataclass(frozen=True, eq=False)
class GDTrajectory:
    iterations: np.ndarray
    loss: np.ndarray
    w_norm: np.ndarray
    cosine: np.ndarray
    directions: np.ndarray
    final: Classifier
    step: float
    reached_target: bool

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "loss", "w_norm", "cosine_to_reference"])
            for row in zip(self.iterations, self.loss, self.w_norm, self.cosine):
                writer.writerow([int(row[0])] + [format(float(v), ".17g") for v in row[1:]])


def logistic_gd(
    dataset: Dataset,
    step: float | None = None,
    max_iter: int = 100_000,
    record_every: int = 1000,
    reference: np.ndarray | None = None,
    stop_cosine: float | None = None,
) -> GDTrajectory:
    """Gradient descent on the mean logistic loss, started at w = 0.

    ``stop_cosine`` ends the run once the cosine with ``reference`` reaches it.
    """
    folded = dataset.folded_X
    guard = smoothness_step(folded)
    step = guard if step is None else float(step)
    if step <= 0:
        raise ValidationError("step must be positive")
    if max_iter < 1 or record_every < 1:
        raise ValidationError("max_iter and record_every must be positive")
    w, snaps, dirs, status, it = kernels.logistic_gd_run(
        folded, step, max_iter, record_every, reference=reference,
        stop_cosine=np.inf if stop_cosine is None else stop_cosine,
    )
    if status == kernels.DIVERGING:
        raise DivergenceError(f"logistic loss rose over 10 consecutive snapshots; try a step below {guard:.6g}")
    final = _wrap(w, folded, GD, iterations=it, converged=status == kernels.CONVERGED,
                  diagnostics={"step": step, "guard_step": guard})
    return GDTrajectory(
        iterations=snaps[:, 0].astype(np.int64), loss=snaps[:, 1], w_norm=snaps[:, 2], cosine=snaps[:, 3],
        directions=dirs, final=final, step=step, reached_target=status == kernels.CONVERGED,
    )


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
