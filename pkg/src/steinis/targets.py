"""Target distributions: score functions on R^d and pmf ratios on lattices.

Continuous targets expose the gradient of an (unnormalized) log-density;
no normalizing constants are ever computed.  The Bayesian logistic
posterior additionally decomposes into per-observation likelihood
factors, enabling unbiased subsampled score estimates.  Discrete targets
expose a support predicate and the pmf ratio along each axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError


def _softplus(t: np.ndarray) -> np.ndarray:
    # log(1 + exp(t)) via the overflow-safe branch form.
    return np.logaddexp(0.0, t)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # exp(-softplus(-t)); stable in both tails.
    return np.exp(-np.logaddexp(0.0, -t))


@dataclass(frozen=True)
class Dataset:
    """Binary-labelled design matrix.

    Attributes:
        features: (n_data, dim) array, one row per observation.
        labels: (n_data,) array of 0/1 values.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labs = np.asarray(self.labels, dtype=float)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ContractViolation("features must be a non-empty 2-d array")
        if labs.shape != (feats.shape[0],):
            raise ContractViolation("labels must have one entry per feature row")
        if not np.all((labs == 0.0) | (labs == 1.0)):
            raise ContractViolation("labels must be 0 or 1")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n_data(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


class StandardGaussian:
    """Standard normal target on R^d: score(x) = -x."""

    kind = "gaussian-standard"

    def __init__(self, dim: int):
        if dim < 1:
            raise ContractViolation("dim must be positive")
        self.dim = int(dim)

    def log_density(self, x: np.ndarray) -> float:
        x = self._check(x)
        return float(-0.5 * np.dot(x, x))

    def score(self, x: np.ndarray) -> np.ndarray:
        return -self._check(x)

    def score_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise ContractViolation("points must have shape (n, dim)")
        return -xs

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolation(f"point has shape {x.shape}, expected ({self.dim},)")
        return x


class LogisticPosterior:
    """Bayesian logistic regression posterior with a Gaussian prior.

    Unnormalized log-density

        log p(x) = sum_i [b_i a_i.x - log(1 + exp(a_i.x))] - (lam/2) ||x||^2

    with per-observation likelihood factors, so the score decomposes as

        score(x) = sum_i (b_i - sigmoid(a_i.x)) a_i - lam x.

    The prior term is never subsampled; only the likelihood sum is.
    """

    kind = "logistic-posterior"

    def __init__(self, dataset: Dataset, prior_precision: float = 1.0):
        if prior_precision < 0:
            raise ContractViolation("prior_precision must be >= 0")
        self.dataset = dataset
        self.prior_precision = float(prior_precision)
        self.dim = dataset.dim
        self.n_data = dataset.n_data

    def log_density(self, x: np.ndarray) -> float:
        x = self._check(x)
        t = self.dataset.features @ x
        loglik = float(np.sum(self.dataset.labels * t - _softplus(t)))
        return loglik - 0.5 * self.prior_precision * float(np.dot(x, x))

    def score(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x)
        t = self.dataset.features @ x
        resid = self.dataset.labels - _sigmoid(t)
        return self.dataset.features.T @ resid - self.prior_precision * x

    def score_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise ContractViolation("points must have shape (n, dim)")
        t = xs @ self.dataset.features.T  # (n, n_data)
        resid = self.dataset.labels[None, :] - _sigmoid(t)
        return resid @ self.dataset.features - self.prior_precision * xs

    def subsampled_score(self, x: np.ndarray, subsample: np.ndarray) -> np.ndarray:
        x = self._check(x)
        idx = _check_subsample(subsample, self.n_data)
        a = self.dataset.features[idx]
        t = a @ x
        resid = self.dataset.labels[idx] - _sigmoid(t)
        scale = self.n_data / len(idx)
        return scale * (a.T @ resid) - self.prior_precision * x

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolation(f"point has shape {x.shape}, expected ({self.dim},)")
        return x


class CustomScoreModel:
    """User-supplied score (and optionally log-density) on R^d."""

    kind = "custom"

    def __init__(self, dim, score_fn, log_density_fn=None):
        self.dim = int(dim)
        self._score_fn = score_fn
        self._log_density_fn = log_density_fn

    def log_density(self, x: np.ndarray) -> float:
        if self._log_density_fn is None:
            raise ContractViolation("custom model has no log-density")
        return float(self._log_density_fn(np.asarray(x, dtype=float)))

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolation(f"point has shape {x.shape}, expected ({self.dim},)")
        s = np.asarray(self._score_fn(x), dtype=float)
        if s.shape != (self.dim,):
            raise ContractViolation("score function returned wrong shape")
        return s

    def score_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.stack([self.score(x) for x in xs])


def _check_subsample(subsample, n_data: int) -> np.ndarray:
    idx = np.asarray(subsample, dtype=int)
    if idx.ndim != 1 or idx.size == 0:
        raise ContractViolation("subsample must be a non-empty index list")
    if np.any(idx < 0) or np.any(idx >= n_data):
        raise ContractViolation("subsample index out of range")
    return idx


def score(model, x: np.ndarray) -> np.ndarray:
    """Gradient of the model's log-density at x."""
    return model.score(x)


def subsampled_score(model, x: np.ndarray, subsample) -> np.ndarray:
    """Unbiased score estimate from likelihood factors indexed by ``subsample``.

    Indices are 0-based, drawn with replacement by the caller (see
    ``samplers.draw_subsample``).  The prior contribution is always exact;
    the expectation over uniform subsamples equals ``score(model, x)``.
    """
    if not hasattr(model, "subsampled_score"):
        raise ContractViolation(
            f"model kind {getattr(model, 'kind', '?')!r} has no likelihood decomposition"
        )
    return model.subsampled_score(x, subsample)


class PoissonLattice:
    """Product of independent Poisson(rate) marginals on Z_{>=0}^dim."""

    def __init__(self, rate: float, dim: int = 1):
        if rate <= 0:
            raise ContractViolation("rate must be positive")
        self.rate = float(rate)
        self.dim = int(dim)

    def in_support(self, x) -> bool:
        x = np.asarray(x, dtype=int)
        return x.shape == (self.dim,) and bool(np.all(x >= 0))

    def ratio(self, x, axis: int) -> float:
        x = self._check(x)
        xi = int(x[axis])
        if xi < 1:
            return 0.0  # pmf(x - e_i) = 0 off the support
        return xi / self.rate

    def log_pmf(self, x) -> float:
        x = self._check(x)
        xf = x.astype(float)
        return float(
            np.sum(xf * np.log(self.rate) - self.rate - _log_factorial(x))
        )

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=int)
        if not self.in_support(x):
            raise DomainError(f"lattice point {x!r} outside Poisson support")
        return x


def _log_factorial(x: np.ndarray) -> np.ndarray:
    from math import lgamma

    return np.array([lgamma(v + 1.0) for v in np.atleast_1d(x).astype(float)])


class TabulatedLattice:
    """Discrete target with explicitly tabulated (unnormalized) masses.

    Masses are given on an axis-aligned box of Z^dim; everything outside
    the table has zero mass.  Useful for symmetric pmfs and single-point
    targets in tests.
    """

    def __init__(self, masses: np.ndarray, origin=None):
        masses = np.asarray(masses, dtype=float)
        if np.any(masses < 0) or not np.any(masses > 0):
            raise ContractViolation("masses must be nonnegative with positive total")
        self.masses = masses
        self.dim = masses.ndim
        self.origin = np.zeros(self.dim, dtype=int) if origin is None else np.asarray(origin, dtype=int)

    def _offset(self, x) -> np.ndarray | None:
        x = np.asarray(x, dtype=int)
        if x.shape != (self.dim,):
            return None
        off = x - self.origin
        if np.any(off < 0) or np.any(off >= np.array(self.masses.shape)):
            return None
        return off

    def mass(self, x) -> float:
        off = self._offset(x)
        if off is None:
            return 0.0
        return float(self.masses[tuple(off)])

    def in_support(self, x) -> bool:
        return self.mass(x) > 0.0

    def ratio(self, x, axis: int) -> float:
        x = np.asarray(x, dtype=int)
        if not self.in_support(x):
            raise DomainError(f"lattice point {x!r} outside support")
        prev = x.copy()
        prev[axis] -= 1
        return self.mass(prev) / self.mass(x)

    def log_pmf(self, x) -> float:
        m = self.mass(np.asarray(x, dtype=int))
        if m <= 0:
            raise DomainError("zero mass point")
        return float(np.log(m))


def discrete_ratio(target, x, axis: int) -> float:
    """pmf ratio pi(x - e_axis) / pi(x) for a lattice target."""
    x = np.asarray(x, dtype=int)
    if not target.in_support(x):
        raise DomainError(f"lattice point {x!r} outside support")
    return float(target.ratio(x, axis))
