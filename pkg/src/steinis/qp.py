"""Deterministic solver for min_w w^T K w over the probability simplex.

Accelerated projected gradient descent with Euclidean simplex
projection, momentum restart on non-monotone candidates, and step size
1/(2L) where L bounds ||K||_2 (max absolute row sum, tightened by power
iteration every 100 iterations).  Objective history is non-increasing
by construction: an accelerated candidate that would increase the
objective is replaced by a plain descent step.

Projected gradient alone parks at a floating-point fixed point whose
KKT residual can sit just above tight tolerances, so the solver
periodically refines the iterate by solving the equality-constrained
stationarity system on the current support (dropping negative
coordinates); a refinement is adopted only if it lowers both the
objective and the residual, which preserves monotonicity.

Optimality is certified by the KKT residual: with g = 2 K w and mu the
largest gradient entry over the support {i : w_i > 0},

    residual = max(0, mu - min_i g_i) + |sum w - 1| + ||min(w, 0)||_inf

which is zero exactly when all support gradients coincide with the
global minimum gradient entry and w is feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericalError


@dataclass
class QpSettings:
    tol: float = 1e-8
    max_iter: int | None = None  # defaults to 50 n + 10000
    jitter: float = 0.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ContractViolation("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ContractViolation("max_iter must be >= 1")

    def iterations_for(self, n: int) -> int:
        return self.max_iter if self.max_iter is not None else 50 * n + 10000


@dataclass
class QpSolution:
    w: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    status: str  # "converged" | "max-iter"
    jitter: float = 0.0
    history: np.ndarray = field(default=None, repr=False)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1} (sorted-threshold rule)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolation("v must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise ContractViolation("v must be finite")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _kkt_from_gradient(g: np.ndarray, w: np.ndarray) -> float:
    support = w > 0
    mu = float(g[support].max())
    stationarity = max(0.0, mu - float(g.min()))
    feasibility = abs(float(w.sum()) - 1.0) + max(0.0, -float(w.min()))
    return stationarity + feasibility


def kkt_residual(K, w) -> float:
    """Optimality residual of feasible w for the simplex QP on K."""
    K = np.asarray(K, dtype=float)
    w = np.asarray(w, dtype=float)
    return _kkt_from_gradient(2.0 * (K @ w), w)


def _spectral_upper(K: np.ndarray, current: float) -> float:
    # Power iteration from a fixed start; shrink-only refinement of L.
    n = K.shape[0]
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 0.0
    for _ in range(30):
        u = K @ v
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            return current
        lam = nrm
        v = u / nrm
    return min(current, 1.05 * lam) if lam > 0 else current


def _support_polish(K: np.ndarray, w: np.ndarray):
    """Solve the stationarity system 2 K_SS w_S = mu, sum w_S = 1 on the
    support of w, dropping coordinates that come back nonpositive.
    Returns a feasible candidate or None.
    """
    n = K.shape[0]
    support = np.nonzero(w > 0)[0]
    for _ in range(60):
        m = len(support)
        if m == 0:
            return None
        if m == 1:
            ws = np.array([1.0])
        else:
            A = np.zeros((m + 1, m + 1))
            A[:m, :m] = 2.0 * K[np.ix_(support, support)]
            A[:m, m] = -1.0
            A[m, :m] = 1.0
            b = np.zeros(m + 1)
            b[m] = 1.0
            try:
                sol = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(A, b, rcond=None)
            if not np.all(np.isfinite(sol)):
                return None
            ws = sol[:m]
        if np.all(ws >= 0.0):
            total = float(ws.sum())
            if total <= 0.0:
                return None
            out = np.zeros(n)
            out[support] = ws / total
            return out
        keep = ws > 0.0
        if keep.all():
            return None
        support = support[keep]
    return None


def _apgd(K: np.ndarray, tol: float, max_iter: int):
    """Monotone accelerated projected gradient with support refinement.

    Returns (w, iterations, history, descent_ok); descent_ok is False
    when even a plain gradient step increased the objective after step
    halving, the signature of indefiniteness beyond round-off.
    """
    n = K.shape[0]
    w = np.full(n, 1.0 / n)
    Kw = K @ w
    f = float(w @ Kw)
    history = [f]
    L = float(np.abs(K).sum(axis=1).max())
    if L == 0.0:  # zero matrix: every feasible point optimal
        return w, 0, np.asarray(history), True
    y = w.copy()
    t = 1.0
    stall = 0
    it = 0
    descent_ok = True
    # best stationarity-refined candidate seen so far: (w, residual)
    refined = None

    def try_polish():
        nonlocal refined
        cand = _support_polish(K, w)
        if cand is None:
            return
        fc = float(cand @ (K @ cand))
        res_now = _kkt_from_gradient(2.0 * Kw, w)
        res_cand = kkt_residual(K, cand)
        best_res = refined[1] if refined is not None else res_now
        # equality up to round-off in f; strict improvement in residual
        if fc <= f + 1e-12 * max(1.0, abs(f)) and res_cand < best_res:
            refined = (cand, res_cand)

    def finish(w_final, res_final, iterations):
        if refined is not None and refined[1] < res_final:
            w_final = refined[0]
        return w_final, iterations, np.asarray(history), descent_ok

    for it in range(1, max_iter + 1):
        gy = 2.0 * (K @ y)
        cand = project_simplex(y - gy / (2.0 * L))
        Kc = K @ cand
        fc = float(cand @ Kc)
        if fc > f:
            # accelerated candidate overshot: restart momentum, take the
            # plain projected-gradient step, doubling L on round-off upsets
            t = 1.0
            g = 2.0 * Kw
            recovered = False
            for _ in range(60):
                cand = project_simplex(w - g / (2.0 * L))
                Kc = K @ cand
                fc = float(cand @ Kc)
                if fc <= f:
                    recovered = True
                    break
                L *= 2.0
            if not recovered:
                # ulp-scale violations are projection round-off (stall);
                # anything larger signals real indefiniteness
                if fc > f + 1e-12 * max(1.0, abs(f)):
                    descent_ok = False
                cand, Kc, fc = w, Kw, f
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = cand + ((t - 1.0) / t_new) * (cand - w)
        w, Kw, f = cand, Kc, fc
        t = t_new
        history.append(f)
        res = _kkt_from_gradient(2.0 * Kw, w)
        if res <= tol:
            return finish(w, res, it)
        if not descent_ok:
            return finish(w, res, it)
        stall = stall + 1 if f == history[-2] else 0
        if it % 250 == 0 or stall >= 300:
            try_polish()
            if refined is not None and refined[1] <= tol:
                return finish(w, res, it)
            if stall >= 300:
                # parked at a floating-point fixed point; nothing left to do
                return finish(w, res, it)
        if it % 100 == 0:
            L = _spectral_upper(K, L)
    try_polish()
    return finish(w, _kkt_from_gradient(2.0 * Kw, w), it)


def solve(K, settings: QpSettings | None = None) -> QpSolution:
    """Minimize w^T K w over the simplex; deterministic given inputs."""
    settings = settings or QpSettings()
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:
        raise ContractViolation("K must be a square matrix")
    if not np.all(np.isfinite(K)):
        raise ContractViolation("K must be finite")
    n = K.shape[0]
    scale = max(float(np.abs(K).max()), 1.0)
    if float(np.abs(K - K.T).max()) > 1e-10 * scale:
        raise ContractViolation("K must be symmetric")
    if n == 1:
        w = np.array([1.0])
        obj = float(K[0, 0])
        return QpSolution(w, obj, 0.0, 0, "converged", settings.jitter, np.array([obj]))

    max_iter = settings.iterations_for(n)
    trace = float(np.trace(K))
    ladder = [settings.jitter]
    base_jitter = 1e-10 * abs(trace) / n if trace != 0.0 else 1e-10
    ladder.extend(base_jitter * 10.0**k for k in range(7))

    last = None
    for jitter in ladder:
        K_eff = K if jitter == 0.0 else K + jitter * np.eye(n)
        w, iterations, history, descent_ok = _apgd(K_eff, settings.tol, max_iter)
        last = (w, iterations, history, jitter)
        if descent_ok:
            break
    else:
        raise NumericalError("indefiniteness beyond jitter escalation")

    w, iterations, history, jitter = last
    w = np.maximum(w, 0.0)
    objective = float(np.sum(K * np.outer(w, w)))
    residual = kkt_residual(K, w)
    status = "converged" if residual <= settings.tol else "max-iter"
    return QpSolution(w, objective, residual, iterations, status, jitter, history)
