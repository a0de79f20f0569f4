"""Hot loops, each with a numba version and a vectorized numpy version.

``dual_coordinate_ascent`` and ``logistic_gd_run`` dispatch on
``_accel.HAVE_NUMBA``; the ``*_numpy`` and ``*_numba`` variants stay callable
for cross-checks and benchmarks.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

CONVERGED, EXHAUSTED, DIVERGING = 0, 1, 2
# loss increases below this relative size are rounding, not divergence
RISE_TOL = 1e-12
DUAL_BLOWUP = 1e12
# at the optimum sum(lam) equals lam^T Q lam; a much larger sum means the dual runs away
RUNAWAY_RATIO = 1e3


# ---------------------------------------------------------------------------
# hard-margin dual: max sum(lam) - 0.5 lam^T Q lam subject to lam >= 0


@njit(cache=True)
def _dual_violation(Q, lam, grad):
    n = Q.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += Q[i, j] * lam[j]
        grad[i] = acc
    worst = 0.0
    for i in range(n):
        if lam[i] > 0.0:
            v = abs(1.0 - grad[i])
        else:
            v = max(0.0, 1.0 - grad[i])
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def dual_cd_numba(Q, lam, tol, max_sweeps, check_every):
    n = Q.shape[0]
    grad = np.zeros(n)
    min_diag = Q[0, 0]
    for i in range(n):
        if Q[i, i] < min_diag:
            min_diag = Q[i, i]
    _dual_violation(Q, lam, grad)
    for sweep in range(max_sweeps):
        for i in range(n):
            new = lam[i] + (1.0 - grad[i]) / Q[i, i]
            if new < 0.0:
                new = 0.0
            delta = new - lam[i]
            if delta != 0.0:
                lam[i] = new
                for j in range(n):
                    grad[j] += delta * Q[j, i]
        if (sweep + 1) % check_every == 0 or sweep + 1 == max_sweeps:
            worst = _dual_violation(Q, lam, grad)
            if worst <= tol:
                return CONVERGED, sweep + 1
            total = 0.0
            wsq = 0.0
            for i in range(n):
                total += lam[i]
                wsq += lam[i] * grad[i]
            if total * min_diag > DUAL_BLOWUP:
                return DIVERGING, sweep + 1
            if total * min_diag > RUNAWAY_RATIO and total > RUNAWAY_RATIO * wsq:
                return DIVERGING, sweep + 1
    return EXHAUSTED, max_sweeps


def dual_cd_numpy(Q, lam, tol, max_sweeps, check_every):
    n = Q.shape[0]
    diag = np.diag(Q).copy()
    grad = Q @ lam
    for sweep in range(max_sweeps):
        for i in range(n):
            new = max(0.0, lam[i] + (1.0 - grad[i]) / diag[i])
            delta = new - lam[i]
            if delta != 0.0:
                lam[i] = new
                grad += delta * Q[:, i]
        if (sweep + 1) % check_every == 0 or sweep + 1 == max_sweeps:
            grad = Q @ lam
            viol = np.where(lam > 0, np.abs(1.0 - grad), np.maximum(0.0, 1.0 - grad))
            if viol.max() <= tol:
                return CONVERGED, sweep + 1
            total = lam.sum()
            if total * diag.min() > DUAL_BLOWUP:
                return DIVERGING, sweep + 1
            if total * diag.min() > RUNAWAY_RATIO and total > RUNAWAY_RATIO * float(lam @ grad):
                return DIVERGING, sweep + 1
    return EXHAUSTED, max_sweeps


def dual_coordinate_ascent(Q, tol=1e-8, max_sweeps=100_000, check_every=10, lam0=None):
    """Returns (lam, status, sweeps)."""
    Q = np.ascontiguousarray(Q, dtype=float)
    lam = np.zeros(Q.shape[0]) if lam0 is None else np.array(lam0, dtype=float)
    impl = dual_cd_numba if _accel.HAVE_NUMBA else dual_cd_numpy
    status, sweeps = impl(Q, lam, float(tol), int(max_sweeps), int(check_every))
    return lam, int(status), int(sweeps)


# ---------------------------------------------------------------------------
# logistic-loss gradient descent from w = 0


@njit(cache=True)
def _softplus_neg(m):
    # log(1 + exp(-m)) without overflow
    if m > 0:
        return math.log1p(math.exp(-m))
    return -m + math.log1p(math.exp(m))


@njit(cache=True)
def _sigmoid_neg(m):
    # 1 / (1 + exp(m))
    if m >= 0:
        e = math.exp(-m)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(m))


@njit(cache=True)
def logistic_gd_numba(Xt, step, max_iter, record_every, reference, stop_cosine, patience):
    n, p = Xt.shape
    w = np.zeros(p)
    weights = np.zeros(n)
    n_snap = max_iter // record_every + 2
    snaps = np.zeros((n_snap, 4))
    dirs = np.zeros((n_snap, p))
    k = 0
    rising = 0
    last_loss = np.inf
    status = EXHAUSTED
    it = 0
    while True:
        if it % record_every == 0 or it == max_iter:
            loss = 0.0
            for i in range(n):
                acc = 0.0
                for j in range(p):
                    acc += Xt[i, j] * w[j]
                loss += _softplus_neg(acc)
            loss /= n
            wn = 0.0
            dot = 0.0
            for j in range(p):
                wn += w[j] * w[j]
                dot += w[j] * reference[j]
            wn = math.sqrt(wn)
            cos = dot / wn if wn > 0 else 0.0
            snaps[k, 0] = it
            snaps[k, 1] = loss
            snaps[k, 2] = wn
            snaps[k, 3] = cos
            if wn > 0:
                for j in range(p):
                    dirs[k, j] = w[j] / wn
            k += 1
            if loss > last_loss * (1.0 + RISE_TOL):
                rising += 1
                if rising >= patience:
                    status = DIVERGING
                    break
            else:
                rising = 0
            last_loss = loss
            if cos >= stop_cosine:
                status = CONVERGED
                break
        if it == max_iter:
            break
        for i in range(n):
            acc = 0.0
            for j in range(p):
                acc += Xt[i, j] * w[j]
            weights[i] = _sigmoid_neg(acc) * step / n
        for i in range(n):
            c = weights[i]
            for j in range(p):
                w[j] += c * Xt[i, j]
        it += 1
    return w, snaps[:k], dirs[:k], status, it


def logistic_gd_numpy(Xt, step, max_iter, record_every, reference, stop_cosine, patience):
    n, p = Xt.shape
    w = np.zeros(p)
    snaps = []
    dirs = []
    rising = 0
    last_loss = np.inf
    status = EXHAUSTED
    it = 0
    while True:
        if it % record_every == 0 or it == max_iter:
            m = Xt @ w
            loss = float(np.mean(np.logaddexp(0.0, -m)))
            wn = float(np.linalg.norm(w))
            cos = float(w @ reference) / wn if wn > 0 else 0.0
            snaps.append((it, loss, wn, cos))
            dirs.append(w / wn if wn > 0 else np.zeros(p))
            if loss > last_loss * (1.0 + RISE_TOL):
                rising += 1
                if rising >= patience:
                    status = DIVERGING
                    break
            else:
                rising = 0
            last_loss = loss
            if cos >= stop_cosine:
                status = CONVERGED
                break
        if it == max_iter:
            break
        m = Xt @ w
        # sigmoid(-m) = 0.5 * (1 - tanh(m / 2)) is overflow-free
        w += (step / n) * ((0.5 * (1.0 - np.tanh(0.5 * m))) @ Xt)
        it += 1
    return w, np.array(snaps, dtype=float).reshape(-1, 4), np.array(dirs).reshape(-1, p), status, it


def logistic_gd_run(Xt, step, max_iter, record_every, reference=None, stop_cosine=np.inf, patience=10):
    """Returns (w, snapshots[iter, loss, norm, cosine], directions, status, iterations)."""
    Xt = np.ascontiguousarray(Xt, dtype=float)
    p = Xt.shape[1]
    ref = np.zeros(p) if reference is None else np.asarray(reference, dtype=float)
    norm = np.linalg.norm(ref)
    ref = ref / norm if norm > 0 else ref
    impl = logistic_gd_numba if _accel.HAVE_NUMBA else logistic_gd_numpy
    w, snaps, dirs, status, it = impl(
        Xt, float(step), int(max_iter), int(record_every), ref, float(stop_cosine), int(patience)
    )
    return w, snaps, dirs, int(status), int(it)
