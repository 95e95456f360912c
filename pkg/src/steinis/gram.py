"""Stein Gram matrices, KSD of weighted empirical measures, and an MMD
diagnostic against a standard-normal reference.

Gram assembly computes the upper triangle and mirrors it, so matrices
are exactly symmetric; entries are pure functions of samples, kernel
config, and subsample seeds, making assembly bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalError

NEGATIVE_CLAMP = 1e-10


@dataclass
class GramMatrix:
    """Symmetric matrix of Stein kernel evaluations over samples."""

    entries: np.ndarray
    provenance: dict

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def assemble_gram(samples, kernel) -> GramMatrix:
    """Gram matrix K[i, j] = k_pi^{ij}(X_i, X_j) for the given kernel.

    Raises NumericalError naming the first offending entry if any value
    is non-finite.
    """
    entries = np.asarray(kernel.gram(samples), dtype=float)
    n = entries.shape[0]
    if n < 1:
        raise ContractViolation("need at least one sample")
    entries = np.triu(entries) + np.triu(entries, 1).T
    if not np.all(np.isfinite(entries)):
        bad = np.argwhere(~np.isfinite(np.triu(entries)))
        i, j = (int(bad[0][0]), int(bad[0][1])) if len(bad) else (0, 0)
        raise NumericalError(f"non-finite kernel value at entry ({i}, {j})")
    return GramMatrix(entries=entries, provenance=dict(kernel.provenance(), n=n))


def validate_weights(w, n: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ContractViolation(f"weights have shape {w.shape}, expected ({n},)")
    return w


def ksd_squared(gram: GramMatrix, w) -> float:
    """Quadratic form w^T K w, the squared Stein discrepancy of the
    weighted empirical measure.  Row-major pairwise summation; values
    within NEGATIVE_CLAMP of zero are clamped to 0.
    """
    w = validate_weights(w, gram.n)
    value = float(np.sum(gram.entries * np.outer(w, w)))
    if -NEGATIVE_CLAMP <= value < 0.0:
        return 0.0
    return value


def uniform_ksd_squared(gram: GramMatrix) -> float:
    """KSD^2 of the plain empirical measure (uniform weights)."""
    n = gram.n
    return ksd_squared(gram, np.full(n, 1.0 / n))


def gaussian_ref_mean_embedding(points: np.ndarray, gamma: float) -> np.ndarray:
    """E_Z exp(-gamma ||x - Z||^2) for Z ~ N(0, I_d), at each sample x."""
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    sq = np.einsum("ij,ij->i", points, points)
    return (1.0 + 2.0 * gamma) ** (-d / 2.0) * np.exp(-gamma * sq / (1.0 + 2.0 * gamma))


def gaussian_ref_self_term(d: int, gamma: float) -> float:
    """E exp(-gamma ||Z - Z'||^2) for independent Z, Z' ~ N(0, I_d)."""
    return float((1.0 + 4.0 * gamma) ** (-d / 2.0))


def gaussian_kernel_matrix(points: np.ndarray, gamma: float) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    sq = np.einsum("ij,ij->i", points, points)
    r2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    np.maximum(r2, 0.0, out=r2)
    return np.exp(-gamma * r2)


def mmd_squared_gaussian_ref(points, weights, gamma: float = 1.0) -> float:
    """Squared MMD between the weighted empirical measure and N(0, I_d)
    under the kernel exp(-gamma ||x - y||^2), in closed form.
    """
    if gamma <= 0:
        raise ContractViolation("gamma must be positive")
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ContractViolation("points must have shape (n, d)")
    n, d = points.shape
    w = validate_weights(weights, n)
    pair = gaussian_kernel_matrix(points, gamma)
    embed = gaussian_ref_mean_embedding(points, gamma)
    value = (
        float(np.sum(pair * np.outer(w, w)))
        - 2.0 * float(np.dot(w, embed))
        + gaussian_ref_self_term(d, gamma)
    )
    if -NEGATIVE_CLAMP <= value < 0.0:
        return 0.0
    return value


def export_gram_csv(gram: GramMatrix, path):
    """Row-major CSV dump with provenance in '#' header lines."""
    with open(path, "w") as fh:
        fh.write(f"# n={gram.n}\n")
        for key in sorted(gram.provenance):
            fh.write(f"# {key}={gram.provenance[key]}\n")
        for row in gram.entries:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_gram_csv(path) -> GramMatrix:
    provenance = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                provenance[key.strip()] = val.strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    entries = np.asarray(rows, dtype=float)
    return GramMatrix(entries=entries, provenance=provenance)
