"""Stein importance sampling: Gram assembly, weight QP, weighted estimates.

The correction never resamples; consumers receive the simplex weights
of the corrected empirical measure together with its Stein discrepancy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .gram import GramMatrix, assemble_gram, ksd_squared
from .qp import QpSettings, QpSolution, solve


@dataclass
class CorrectionResult:
    weights: np.ndarray
    ksd: float
    gram_provenance: dict
    qp: QpSolution

    def to_dict(self) -> dict:
        return {
            "weights": [float(v) for v in self.weights],
            "ksd": self.ksd,
            "diagnostics": {
                "objective": self.qp.objective,
                "kkt_residual": self.qp.kkt_residual,
                "iterations": self.qp.iterations,
                "status": self.qp.status,
                "jitter": self.qp.jitter,
            },
            "provenance": self.gram_provenance,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def correct_gram(gram: GramMatrix, settings: QpSettings | None = None) -> CorrectionResult:
    """Solve the weight QP for an already-assembled Gram matrix."""
    sol = solve(gram.entries, settings)
    ksd = float(np.sqrt(max(sol.objective, 0.0)))
    return CorrectionResult(sol.w, ksd, dict(gram.provenance), sol)


def stein_correct(samples, kernel, settings: QpSettings | None = None) -> CorrectionResult:
    """Algorithm: assemble the Stein Gram matrix over the samples and
    minimize the induced discrepancy over simplex weights.
    """
    gram = assemble_gram(samples, kernel)
    return correct_gram(gram, settings)


def weighted_estimate(result: CorrectionResult, phi_values) -> float:
    """sum_i w_i phi(X_i) for caller-evaluated phi values."""
    phi = np.asarray(phi_values, dtype=float)
    if phi.shape != result.weights.shape:
        raise ContractViolation("phi values must match the number of weights")
    return float(np.dot(result.weights, phi))


def classical_is_weights(samples, weight_fn) -> np.ndarray:
    """Self-normalized importance weights w_i proportional to the
    target/proposal density ratio at each sample.
    """
    samples = np.asarray(samples, dtype=float)
    raw = np.asarray([float(weight_fn(x)) for x in samples], dtype=float)
    if np.any(raw < 0) or not np.all(np.isfinite(raw)):
        raise ContractViolation("density ratios must be finite and nonnegative")
    total = raw.sum()
    if total <= 0.0:
        raise ContractViolation("all importance weights are zero")
    return raw / total


def ksd_of_weights(gram: GramMatrix, weights) -> float:
    """Stein discrepancy (not squared) of arbitrary feasible weights."""
    return float(np.sqrt(max(ksd_squared(gram, weights), 0.0)))
