"""Sample chains: iid Gaussian reference and (tamed) unadjusted Langevin.

The tamed update is

    x' = x + (h/2) * s / (1 + gamma ||s||) + sqrt(h) z,   s = score(x),

so the drift increment never exceeds h / (2 gamma) in norm when
gamma > 0; gamma = 0 recovers the plain unadjusted Langevin step.

Every chain is fully determined by (config, seed).  Chain noise and
gradient subsampling use their own named streams, and both are disjoint
from the kernel-subsample streams used elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericalError
from .rng import stream
from .targets import subsampled_score

CHAIN_KINDS = ("iid-gaussian", "ula", "tula", "tula-subsampled")


@dataclass
class ChainConfig:
    kind: str = "tula"
    h: float = 0.1
    gamma: float = 0.05
    n_steps: int = 1
    n_s: int | None = None  # gradient subsample size, tula-subsampled only
    seed: int = 0
    x0: np.ndarray | float | None = None
    burn_in: int = 0

    def __post_init__(self):
        if self.kind not in CHAIN_KINDS:
            raise ContractViolation(f"unknown chain kind {self.kind!r}")
        if self.h <= 0:
            raise ContractViolation("step size h must be positive")
        if self.gamma < 0:
            raise ContractViolation("taming parameter gamma must be >= 0")
        if self.n_steps < 1:
            raise ContractViolation("n_steps must be >= 1")
        if self.kind == "tula-subsampled" and (self.n_s is None or self.n_s < 1):
            raise ContractViolation("tula-subsampled requires n_s >= 1")
        if self.burn_in < 0:
            raise ContractViolation("burn_in must be >= 0")


@dataclass
class Chain:
    points: np.ndarray
    config: ChainConfig
    rng_streams: tuple = field(default_factory=tuple)


def tula_step(x, model, h: float, gamma: float, z, subsample=None) -> np.ndarray:
    """One tamed Langevin update from x using noise vector z."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.shape != x.shape:
        raise ContractViolation("noise vector must match the state dimension")
    if subsample is None:
        s = model.score(x)
    else:
        s = subsampled_score(model, x, subsample)
    if not np.all(np.isfinite(s)):
        raise NumericalError(f"non-finite score at state {x!r}")
    drift = (h / 2.0) * s / (1.0 + gamma * float(np.linalg.norm(s)))
    return x + drift + np.sqrt(h) * z


def draw_subsample(n_data: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` indices uniform on {0..n_data-1}, with replacement."""
    if size < 1:
        raise ContractViolation("subsample size must be >= 1")
    return rng.integers(0, n_data, size=size)


def run_chain(config: ChainConfig, model) -> Chain:
    """Simulate the configured chain against the model; deterministic in seed."""
    dim = model.dim
    n = config.n_steps
    noise_stream = ("chain", config.kind, "noise")
    sub_stream = ("chain", config.kind, "grad-subsample")
    rng = stream(config.seed, *noise_stream)

    if config.kind == "iid-gaussian":
        points = rng.standard_normal((n, dim))
        return Chain(points[config.burn_in:], config, (noise_stream,))

    if config.x0 is None:
        x = np.zeros(dim)
    else:
        x = np.broadcast_to(np.asarray(config.x0, dtype=float), (dim,)).copy()
    gamma = 0.0 if config.kind == "ula" else config.gamma
    rng_sub = stream(config.seed, *sub_stream) if config.kind == "tula-subsampled" else None

    points = np.empty((n, dim))
    for k in range(n):
        z = rng.standard_normal(dim)
        sub = None
        if rng_sub is not None:
            sub = draw_subsample(model.n_data, config.n_s, rng_sub)
        x = tula_step(x, model, config.h, gamma, z, subsample=sub)
        points[k] = x
    used = (noise_stream, sub_stream) if rng_sub is not None else (noise_stream,)
    return Chain(points[config.burn_in:], config, used)
