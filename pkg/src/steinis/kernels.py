"""Reproducing base kernels and the Stein kernels built from them.

Base kernels are radial: k(x, y) = kappa(||x - y||^2) with kappa
completely monotone (inverse multiquadric, Gaussian, inverse-log).  The
derivative identities used throughout, with r2 = ||x - y||^2:

    grad_x k = 2 kappa'(r2) (x - y)
    grad_y k = -grad_x k
    div_x grad_y k = -2 d kappa'(r2) - 4 r2 kappa''(r2)

Five Stein kernel variants are provided: the canonical kernel on R^d,
the coordinate-marginal kernel, a ratio-form kernel on Z^d lattices, a
balanced-jump kernel on finite graphs, and the subsampled canonical
kernel with per-sample-index memoized gradient subsamples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, DomainError
from .rng import stream
from .targets import subsampled_score


@dataclass(frozen=True)
class BaseKernel:
    """Radial reproducing kernel k(x, y) = kappa(||x - y||^2).

    Families:
        imq:         kappa(s) = (alpha + s)^(-beta)
        gaussian:    kappa(s) = exp(-alpha s)
        inverse-log: kappa(s) = (alpha + log(1 + s))^(-1)
    """

    family: str
    alpha: float = 1.0
    beta: float = 0.5

    def __post_init__(self):
        if self.family not in ("imq", "gaussian", "inverse-log"):
            raise ContractViolation(f"unknown kernel family {self.family!r}")
        if self.alpha <= 0:
            raise ContractViolation("alpha must be positive")
        if self.family == "imq" and self.beta <= 0:
            raise ContractViolation("beta must be positive")

    def kappa(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "imq":
            return (self.alpha + s) ** (-self.beta)
        if self.family == "gaussian":
            return np.exp(-self.alpha * s)
        return 1.0 / (self.alpha + np.log1p(s))

    def kappa_prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "imq":
            return -self.beta * (self.alpha + s) ** (-self.beta - 1.0)
        if self.family == "gaussian":
            return -self.alpha * np.exp(-self.alpha * s)
        u = self.alpha + np.log1p(s)
        return -1.0 / (u * u * (1.0 + s))

    def kappa_double_prime(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "imq":
            return self.beta * (self.beta + 1.0) * (self.alpha + s) ** (-self.beta - 2.0)
        if self.family == "gaussian":
            return self.alpha * self.alpha * np.exp(-self.alpha * s)
        u = self.alpha + np.log1p(s)
        sp1 = 1.0 + s
        return 2.0 / (u ** 3 * sp1 * sp1) + 1.0 / (u * u * sp1 * sp1)

    def id(self) -> str:
        if self.family == "imq":
            return f"imq(alpha={self.alpha:g},beta={self.beta:g})"
        return f"{self.family}(alpha={self.alpha:g})"


def imq(alpha: float = 1.0, beta: float = 0.5) -> BaseKernel:
    return BaseKernel("imq", alpha=alpha, beta=beta)


def gaussian(alpha: float = 1.0) -> BaseKernel:
    return BaseKernel("gaussian", alpha=alpha)


def inverse_log(alpha: float = 1.0) -> BaseKernel:
    return BaseKernel("inverse-log", alpha=alpha)


def _pair_points(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractViolation("x and y must be vectors of equal length")
    return x, y


def base_eval(kernel: BaseKernel, x, y) -> float:
    """kappa(||x - y||^2)."""
    x, y = _pair_points(x, y)
    d = x - y
    return float(kernel.kappa(np.dot(d, d)))


def base_derivatives(kernel: BaseKernel, x, y):
    """(grad_x k, grad_y k, div_x grad_y k) at (x, y)."""
    x, y = _pair_points(x, y)
    diff = x - y
    r2 = float(np.dot(diff, diff))
    kp = float(kernel.kappa_prime(r2))
    kpp = float(kernel.kappa_double_prime(r2))
    grad_x = 2.0 * kp * diff
    cross_div = -2.0 * len(x) * kp - 4.0 * r2 * kpp
    return grad_x, -grad_x, cross_div


class CanonicalSteinKernel:
    """Stein kernel on R^d from the canonical score operator.

    k_pi(x, y) = div_x grad_y k + s(x).grad_y k + s(y).grad_x k
                 + k(x, y) s(x).s(y)

    with s the target score.  Scores may be injected via ``pair`` to
    support caching and estimator substitution.
    """

    variant = "canonical"

    def __init__(self, base: BaseKernel, model):
        self.base = base
        self.model = model

    def pair(self, x, y, sx=None, sy=None) -> float:
        x, y = _pair_points(x, y)
        sx = self.model.score(x) if sx is None else np.asarray(sx, dtype=float)
        sy = self.model.score(y) if sy is None else np.asarray(sy, dtype=float)
        grad_x, grad_y, cross = base_derivatives(self.base, x, y)
        k = base_eval(self.base, x, y)
        return float(cross + sx @ grad_y + sy @ grad_x + k * (sx @ sy))

    def gram(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        scores = self.model.score_batch(points)
        return _canonical_gram(self.base, points, scores)

    def provenance(self) -> dict:
        return {"variant": self.variant, "base": self.base.id()}


def _canonical_gram(base: BaseKernel, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Dense canonical Stein Gram matrix from points x and score rows s."""
    n, d = x.shape
    sq = np.einsum("ij,ij->i", x, x)
    r2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(r2, 0.0, out=r2)
    k = base.kappa(r2)
    kp = base.kappa_prime(r2)
    kpp = base.kappa_double_prime(r2)
    cross = -2.0 * d * kp - 4.0 * r2 * kpp
    sx_dot_x = np.einsum("ij,ij->i", s, x)
    s_xt = s @ x.T  # (i, j) -> s_i . x_j
    term_sx = -2.0 * kp * (sx_dot_x[:, None] - s_xt)
    term_sy = 2.0 * kp * (s_xt.T - sx_dot_x[None, :])
    return cross + term_sx + term_sy + k * (s @ s.T)


class MarginalSteinKernel:
    """Coordinate-wise Stein kernel with a univariate base kernel.

    Sums the four-term univariate Stein expression over coordinates,
    pairing k(x_i, y_i) with the i-th score component.  Coincides with
    the canonical kernel when d = 1.
    """

    variant = "marginal"

    def __init__(self, base: BaseKernel, model):
        self.base = base
        self.model = model

    def pair(self, x, y, sx=None, sy=None) -> float:
        x, y = _pair_points(x, y)
        sx = self.model.score(x) if sx is None else np.asarray(sx, dtype=float)
        sy = self.model.score(y) if sy is None else np.asarray(sy, dtype=float)
        du = x - y
        r2 = du * du
        k = self.base.kappa(r2)
        kp = self.base.kappa_prime(r2)
        kpp = self.base.kappa_double_prime(r2)
        cross = -2.0 * kp - 4.0 * r2 * kpp
        dk_dx = 2.0 * kp * du
        total = cross + sx * (-dk_dx) + sy * dk_dx + k * sx * sy
        return float(np.sum(total))

    def gram(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        s = self.model.score_batch(x)
        n, d = x.shape
        out = np.zeros((n, n))
        for i in range(d):
            u = x[:, i]
            du = u[:, None] - u[None, :]
            r2 = du * du
            k = self.base.kappa(r2)
            kp = self.base.kappa_prime(r2)
            kpp = self.base.kappa_double_prime(r2)
            si = s[:, i]
            out += -2.0 * kp - 4.0 * r2 * kpp
            out += -2.0 * kp * du * si[:, None]
            out += 2.0 * kp * du * si[None, :]
            out += k * np.outer(si, si)
        return out

    def provenance(self) -> dict:
        return {"variant": self.variant, "base": self.base.id()}


class LatticeSteinKernel:
    """Ratio-form Stein kernel on Z^d for pmf targets.

    Default form uses the pmf ratios r_i(x) = pi(x - e_i)/pi(x) and the
    neighbour indicator directly; terms whose indicator vanishes are
    skipped rather than evaluated.  It arises from the mass-scaled base
    kernel k(x, y)/(pi+(x) pi+(y)).  ``form="pmf"`` keeps the plain base
    kernel and weights by raw masses instead, which is a valid Stein
    kernel in its own right but fragile when the pmf decays fast.
    """

    variant = "discrete-zd"

    def __init__(self, base: BaseKernel, target, form: str = "ratio"):
        if form not in ("ratio", "pmf"):
            raise ContractViolation("form must be 'ratio' or 'pmf'")
        self.base = base
        self.target = target
        self.form = form

    def pair(self, x, y) -> float:
        x = np.asarray(x, dtype=int)
        y = np.asarray(y, dtype=int)
        t = self.target
        if not t.in_support(x):
            raise DomainError(f"lattice point {x!r} outside support")
        if not t.in_support(y):
            raise DomainError(f"lattice point {y!r} outside support")
        if self.form == "pmf":
            return self._pair_pmf(x, y)
        total = 0.0
        for i in range(t.dim):
            ei = np.zeros(t.dim, dtype=int)
            ei[i] = 1
            ix = t.in_support(x + ei)
            iy = t.in_support(y + ei)
            rx = t.ratio(x, i)
            ry = t.ratio(y, i)
            if ix and iy:
                total += base_eval(self.base, (x + ei).astype(float), (y + ei).astype(float))
            if iy and rx != 0.0:
                total -= rx * base_eval(self.base, x.astype(float), (y + ei).astype(float))
            if ix and ry != 0.0:
                total -= ry * base_eval(self.base, (x + ei).astype(float), y.astype(float))
            if rx != 0.0 and ry != 0.0:
                total += rx * ry * base_eval(self.base, x.astype(float), y.astype(float))
        return total

    def _pair_pmf(self, x, y) -> float:
        # Raw-mass form with the plain base kernel; a distinct (equally
        # valid) Stein kernel from the ratio form, fragile when the pmf
        # decays fast.
        t = self.target

        def mass(p):
            return float(np.exp(t.log_pmf(p))) if t.in_support(p) else 0.0

        def k(u, v):
            return base_eval(self.base, u.astype(float), v.astype(float))

        total = 0.0
        for i in range(t.dim):
            ei = np.zeros(t.dim, dtype=int)
            ei[i] = 1
            total += (
                mass(x + ei) * mass(y + ei) * k(x + ei, y + ei)
                - mass(x - ei) * mass(y + ei) * k(x, y + ei)
                - mass(x + ei) * mass(y - ei) * k(x + ei, y)
                + mass(x - ei) * mass(y - ei) * k(x, y)
            )
        return total

    def gram(self, points) -> np.ndarray:
        pts = [np.asarray(p, dtype=int) for p in np.asarray(points, dtype=int)]
        n = len(pts)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = self.pair(pts[i], pts[j])
        return out + np.triu(out, 1).T

    def provenance(self) -> dict:
        return {"variant": self.variant, "base": self.base.id(), "form": self.form}


def balancing_min(t: float) -> float:
    return min(1.0, t)


def balancing_ratio(t: float) -> float:
    return t / (1.0 + t)


_BALANCING = {"min": balancing_min, "ratio": balancing_ratio}


@dataclass
class GraphSpec:
    """Finite graph target for the balanced-jump Stein kernel.

    Attributes:
        weights: unnormalized vertex masses (positive).
        neighbors: adjacency lists by vertex index.
        balancing: "min" for min(1, t) or "ratio" for t/(1+t); any g
            with g(t) = t g(1/t) keeps detailed balance.
        kernel_matrix: symmetric positive-definite base kernel over
            vertices.
    """

    weights: np.ndarray
    neighbors: list
    balancing: str = "ratio"
    kernel_matrix: np.ndarray = field(default=None)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        n = len(self.weights)
        if np.any(self.weights <= 0):
            raise ContractViolation("vertex weights must be positive")
        if len(self.neighbors) != n:
            raise ContractViolation("one adjacency list per vertex required")
        if self.balancing not in _BALANCING:
            raise ContractViolation(f"unknown balancing function {self.balancing!r}")
        if self.kernel_matrix is None:
            raise ContractViolation("kernel_matrix is required")
        self.kernel_matrix = np.asarray(self.kernel_matrix, dtype=float)
        if self.kernel_matrix.shape != (n, n):
            raise ContractViolation("kernel_matrix must be n x n")
        self._check_strongly_connected()

    @property
    def n_vertices(self) -> int:
        return len(self.weights)

    def g(self, t: float) -> float:
        return _BALANCING[self.balancing](t)

    def _check_strongly_connected(self):
        n = self.n_vertices
        fwd = [list(map(int, nb)) for nb in self.neighbors]
        rev = [[] for _ in range(n)]
        for u, nbs in enumerate(fwd):
            for v in nbs:
                if not 0 <= v < n:
                    raise ContractViolation("neighbor index out of range")
                rev[v].append(u)
        for adj in (fwd, rev):
            seen = {0}
            frontier = [0]
            while frontier:
                u = frontier.pop()
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        frontier.append(v)
            if len(seen) != n:
                raise ContractViolation("graph is not strongly connected")


class ZanellaSteinKernel:
    """Stein kernel on a finite graph from balanced jump rates."""

    variant = "zanella"

    def __init__(self, graph: GraphSpec):
        self.graph = graph

    def pair(self, x: int, y: int) -> float:
        g = self.graph
        n = g.n_vertices
        if not (0 <= x < n and 0 <= y < n):
            raise DomainError(f"vertex pair ({x}, {y}) not in graph")
        k = g.kernel_matrix
        w = g.weights
        total = 0.0
        for xp in g.neighbors[x]:
            gx = g.g(w[xp] / w[x])
            for yp in g.neighbors[y]:
                gy = g.g(w[yp] / w[y])
                total += gx * gy * (k[xp, yp] - k[xp, y] - k[x, yp] + k[x, y])
        return total

    def gram(self, points) -> np.ndarray:
        idx = [int(p) for p in np.asarray(points).ravel()]
        n = len(idx)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = self.pair(idx[i], idx[j])
        return out + np.triu(out, 1).T

    def provenance(self) -> dict:
        return {"variant": self.variant, "balancing": self.graph.balancing}


class SubsampledSteinKernel:
    """Canonical Stein kernel with subsampled scores, one memoized
    gradient subsample per sample index.

    Entry (i, j) evaluates the canonical formula with the score at the
    first argument estimated from subsample S_i and at the second from
    S_j; the diagonal reuses S_i on both sides.  Subsamples are drawn
    once per index from dedicated streams, independent of any sample
    chain, which makes the resulting Gram arrays symmetric, jointly
    exchangeable, and positive-semidefinite up to round-off.
    """

    variant = "subsampled-canonical"

    def __init__(self, base: BaseKernel, model, n_k: int, seed: int = 0, subsamples=None):
        if n_k < 1:
            raise ContractViolation("n_k must be >= 1")
        self.base = base
        self.model = model
        self.n_k = int(n_k)
        self.seed = int(seed)
        self._subsamples: dict[int, np.ndarray] = {}
        if subsamples is not None:
            for i, s in enumerate(subsamples):
                self._subsamples[i] = np.asarray(s, dtype=int)

    def subsample_for(self, i: int) -> np.ndarray:
        if i not in self._subsamples:
            gen = stream(self.seed, "kernel-subsample", int(i))
            self._subsamples[i] = gen.integers(0, self.model.n_data, size=self.n_k)
        return self._subsamples[i]

    def prepare(self, n: int):
        """Draw and memoize subsamples for indices 0..n-1 (single-threaded)."""
        for i in range(n):
            self.subsample_for(i)

    def score_at(self, i: int, x) -> np.ndarray:
        return subsampled_score(self.model, x, self.subsample_for(i))

    def pair_indexed(self, i: int, j: int, x, y) -> float:
        sx = self.score_at(i, x)
        sy = self.score_at(j, y)
        return CanonicalSteinKernel(self.base, self.model).pair(x, y, sx=sx, sy=sy)

    def gram(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        self.prepare(n)
        scores = np.stack([self.score_at(i, points[i]) for i in range(n)])
        return _canonical_gram(self.base, points, scores)

    def provenance(self) -> dict:
        return {
            "variant": self.variant,
            "base": self.base.id(),
            "n_k": self.n_k,
            "subsample_seed": self.seed,
        }
