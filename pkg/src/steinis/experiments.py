"""Experiment harness: configs, dataset ingestion, convergence runs.

Two pipelines are provided.  The Gaussian pipeline samples a standard
normal target in d dimensions with a tamed Langevin chain plus an iid
reference, Stein-corrects prefixes along a sample-size ladder, and
records KSD and MMD per method.  The logistic pipeline runs
subsampled-gradient Langevin against a Bayesian logistic posterior and
compares unadjusted, full-kernel-corrected, and subsampled-kernel
corrected weights, always reporting the full-data KSD.

Results are long-form rows (one per n x kernel x method x seed).  The
CSV output contains only deterministic fields so identical configs
produce byte-identical files; wall times live in the JSON manifest.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError, ContractViolation
from .gram import (
    GramMatrix,
    assemble_gram,
    gaussian_kernel_matrix,
    gaussian_ref_mean_embedding,
    gaussian_ref_self_term,
    ksd_squared,
    uniform_ksd_squared,
)
from .kernels import (
    BaseKernel,
    CanonicalSteinKernel,
    MarginalSteinKernel,
    SubsampledSteinKernel,
)
from .qp import QpSettings
from .rng import stream
from .samplers import ChainConfig, run_chain
from .sis import correct_gram
from .targets import Dataset, LogisticPosterior, StandardGaussian

CSV_COLUMNS = (
    "experiment",
    "kernel",
    "method",
    "seed",
    "n",
    "ksd",
    "mmd",
    "qp_objective",
    "qp_kkt_residual",
    "qp_iterations",
    "qp_status",
    "qp_jitter",
    "config_hash",
)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "imq"
    alpha: float = 1.0
    beta: float = 0.5
    variant: str = "canonical"

    def base(self) -> BaseKernel:
        return BaseKernel(self.family, alpha=self.alpha, beta=self.beta)

    def build(self, model):
        if self.variant == "canonical":
            return CanonicalSteinKernel(self.base(), model)
        if self.variant == "marginal":
            return MarginalSteinKernel(self.base(), model)
        raise ConfigError(f"unsupported kernel variant {self.variant!r} for experiments")

    def id(self) -> str:
        return f"{self.base().id()}|{self.variant}"


@dataclass
class ExperimentConfig:
    experiment: str
    ladder: list
    seeds: list
    kernels: list
    chain_kind: str = "tula"
    h: float = 1.0
    gamma: float = 0.05
    n_s: int | None = None
    x0: float = 0.0
    qp: QpSettings = field(default_factory=QpSettings)
    mmd_gamma: float = 1.0
    dim: int = 20
    dataset: str | None = None
    standardize: bool = True
    prior_precision: float = 1.0
    n_k: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in ("gaussian20d", "logistic"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        ladder = [int(n) for n in self.ladder]
        if len(ladder) < 1 or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("ladder must be non-empty and strictly increasing")
        self.ladder = ladder
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        self.seeds = [int(s) for s in self.seeds]
        if not self.kernels:
            raise ConfigError("at least one kernel is required")
        if self.experiment == "logistic":
            if self.dataset is None:
                raise ConfigError("logistic experiment requires a dataset path")
            if self.n_s is None:
                raise ConfigError("logistic experiment requires chain n_s")
            if self.n_k is None:
                self.n_k = self.n_s  # the two subsample sizes are tied by default

    def to_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "ladder": list(self.ladder),
            "seeds": list(self.seeds),
            "chain": {
                "kind": self.chain_kind,
                "h": self.h,
                "gamma": self.gamma,
                "n_s": self.n_s,
                "x0": self.x0,
            },
            "kernels": [
                {"family": k.family, "alpha": k.alpha, "beta": k.beta, "variant": k.variant}
                for k in self.kernels
            ],
            "qp": {"tol": self.qp.tol, "max_iter": self.qp.max_iter, "jitter": self.qp.jitter},
            "mmd": {"gamma": self.mmd_gamma},
            "dim": self.dim,
            "dataset": self.dataset,
            "standardize": self.standardize,
            "prior_precision": self.prior_precision,
            "n_k": self.n_k,
        }
        return out

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_TOP_KEYS = {
    "experiment", "ladder", "seeds", "chain", "kernels", "qp", "mmd", "dim",
    "dataset", "standardize", "prior_precision", "n_k", "output",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        chain = dict(raw.get("chain", {}))
        kernels = [KernelSpec(**dict(k)) for k in raw.get("kernels", [])]
        qp_raw = dict(raw.get("qp", {}))
        qp = QpSettings(
            tol=float(qp_raw.get("tol", 1e-8)),
            max_iter=qp_raw.get("max_iter"),
            jitter=float(qp_raw.get("jitter", 0.0)),
        )
        mmd = dict(raw.get("mmd", {}))
        return ExperimentConfig(
            experiment=raw.get("experiment", ""),
            ladder=raw.get("ladder", []),
            seeds=raw.get("seeds", []),
            kernels=kernels,
            chain_kind=chain.get("kind", "tula"),
            h=float(chain.get("h", 1.0)),
            gamma=float(chain.get("gamma", 0.05)),
            n_s=chain.get("n_s"),
            x0=float(chain.get("x0", 0.0)),
            qp=qp,
            mmd_gamma=float(mmd.get("gamma", 1.0)),
            dim=int(raw.get("dim", 20)),
            dataset=raw.get("dataset"),
            standardize=bool(raw.get("standardize", True)),
            prior_precision=float(raw.get("prior_precision", 1.0)),
            n_k=raw.get("n_k"),
            output=raw.get("output"),
        )
    except (TypeError, ValueError, ContractViolation) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return config_from_dict(raw or {})


@dataclass
class RunResult:
    rows: list
    manifest: dict


def _looks_numeric(cells) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def load_dataset(path, standardize: bool = True, add_intercept: bool = True) -> Dataset:
    """Read a CSV of feature columns plus a trailing 0/1 label column.

    A non-numeric first row is treated as a header.  Features are
    standardized per column (constant columns are left centered) and an
    intercept column is appended unless disabled.
    """
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            if lineno == 1 and not _looks_numeric(cells):
                continue
            if not _looks_numeric(cells):
                raise ConfigError(f"{path}: malformed row at line {lineno}")
            if width is None:
                width = len(cells)
                if width < 2:
                    raise ConfigError(f"{path}: need at least one feature and a label")
            elif len(cells) != width:
                raise ConfigError(f"{path}: wrong field count at line {lineno}")
            rows.append([float(c) for c in cells])
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    features, labels = data[:, :-1], data[:, -1]
    if not np.all((labels == 0.0) | (labels == 1.0)):
        raise ConfigError(f"{path}: labels must be 0 or 1")
    if standardize:
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std = np.where(std < 1e-12, 1.0, std)
        features = (features - mean) / std
    if add_intercept:
        features = np.hstack([features, np.ones((features.shape[0], 1))])
    return Dataset(features=features, labels=labels)


def make_synthetic_logistic(n_data: int, dim: int, seed: int = 0):
    """Synthetic logistic-regression data: Gaussian features, Bernoulli
    labels from a random coefficient vector.  Returns (features, labels).
    """
    rng = stream(seed, "synthetic-data")
    features = rng.standard_normal((n_data, dim))
    coef = rng.standard_normal(dim)
    prob = 1.0 / (1.0 + np.exp(-(features @ coef)))
    labels = (rng.random(n_data) < prob).astype(float)
    return features, labels


def write_synthetic_csv(path, n_data: int, dim: int, seed: int = 0):
    features, labels = make_synthetic_logistic(n_data, dim, seed)
    with open(path, "w") as fh:
        fh.write(",".join(f"x{i}" for i in range(dim)) + ",label\n")
        for row, lab in zip(features, labels):
            fh.write(",".join(format(v, ".17g") for v in row) + f",{int(lab)}\n")


def fit_rate(ns, values) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < 3:
        raise ContractViolation("need at least 3 (n, value) pairs")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise ContractViolation("rate fit requires positive sizes and values")
    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope)


def _qp_fields(corr) -> dict:
    return {
        "qp_objective": corr.qp.objective,
        "qp_kkt_residual": corr.qp.kkt_residual,
        "qp_iterations": corr.qp.iterations,
        "qp_status": corr.qp.status,
        "qp_jitter": corr.qp.jitter,
    }


_EMPTY_QP = {
    "qp_objective": None,
    "qp_kkt_residual": None,
    "qp_iterations": None,
    "qp_status": None,
    "qp_jitter": None,
}


def run_gaussian_experiment(config: ExperimentConfig) -> RunResult:
    if config.experiment != "gaussian20d":
        raise ConfigError("config is not a gaussian20d experiment")
    chash = config.hash()
    n_max = max(config.ladder)
    model = StandardGaussian(config.dim)
    rows = []
    for seed in config.seeds:
        chains = {
            "tula": run_chain(
                ChainConfig(kind=config.chain_kind, h=config.h, gamma=config.gamma,
                            n_steps=n_max, seed=seed, x0=config.x0),
                model,
            ).points,
            "iid": run_chain(
                ChainConfig(kind="iid-gaussian", h=1.0, n_steps=n_max, seed=seed),
                model,
            ).points,
        }
        mmd_ctx = {
            name: (
                gaussian_kernel_matrix(pts, config.mmd_gamma),
                gaussian_ref_mean_embedding(pts, config.mmd_gamma),
                gaussian_ref_self_term(config.dim, config.mmd_gamma),
            )
            for name, pts in chains.items()
        }
        for kspec in config.kernels:
            kernel = kspec.build(model)
            for name, pts in chains.items():
                gram_full = assemble_gram(pts, kernel)
                pair, embed, const = mmd_ctx[name]
                for n in config.ladder:
                    sub = GramMatrix(np.ascontiguousarray(gram_full.entries[:n, :n]),
                                     dict(gram_full.provenance, n=n))
                    uniform = np.full(n, 1.0 / n)
                    base_row = {
                        "experiment": config.experiment,
                        "kernel": kspec.id(),
                        "seed": seed,
                        "n": n,
                        "config_hash": chash,
                    }
                    rows.append({
                        **base_row,
                        "method": f"{name}-uniform",
                        "ksd": float(np.sqrt(max(uniform_ksd_squared(sub), 0.0))),
                        "mmd": _mmd_from_ctx(pair, embed, const, uniform),
                        "wall_time_s": 0.0,
                        **_EMPTY_QP,
                    })
                    t0 = time.perf_counter()
                    corr = correct_gram(sub, config.qp)
                    wall = time.perf_counter() - t0
                    rows.append({
                        **base_row,
                        "method": f"{name}-corrected",
                        "ksd": corr.ksd,
                        "mmd": _mmd_from_ctx(pair, embed, const, corr.weights),
                        "wall_time_s": wall,
                        **_qp_fields(corr),
                    })
    return _finish(config, rows)


def _mmd_from_ctx(pair, embed, const, w) -> float:
    n = len(w)
    value = (
        float(np.sum(pair[:n, :n] * np.outer(w, w)))
        - 2.0 * float(np.dot(w, embed[:n]))
        + const
    )
    return float(np.sqrt(max(value, 0.0)))


def run_logistic_experiment(config: ExperimentConfig) -> RunResult:
    if config.experiment != "logistic":
        raise ConfigError("config is not a logistic experiment")
    chash = config.hash()
    n_max = max(config.ladder)
    dataset = load_dataset(config.dataset, standardize=config.standardize)
    model = LogisticPosterior(dataset, prior_precision=config.prior_precision)
    rows = []
    for seed in config.seeds:
        pts = run_chain(
            ChainConfig(kind="tula-subsampled", h=config.h, gamma=config.gamma,
                        n_steps=n_max, n_s=config.n_s, seed=seed, x0=config.x0),
            model,
        ).points
        for kspec in config.kernels:
            kern_full = CanonicalSteinKernel(kspec.base(), model)
            kern_sub = SubsampledSteinKernel(kspec.base(), model, config.n_k, seed=seed)
            gram_full = assemble_gram(pts, kern_full)
            gram_sub = assemble_gram(pts, kern_sub)
            for n in config.ladder:
                full_n = GramMatrix(np.ascontiguousarray(gram_full.entries[:n, :n]),
                                    dict(gram_full.provenance, n=n))
                sub_n = GramMatrix(np.ascontiguousarray(gram_sub.entries[:n, :n]),
                                   dict(gram_sub.provenance, n=n))
                base_row = {
                    "experiment": config.experiment,
                    "kernel": kspec.id(),
                    "seed": seed,
                    "n": n,
                    "mmd": None,
                    "config_hash": chash,
                }
                rows.append({
                    **base_row,
                    "method": "unadjusted",
                    "ksd": float(np.sqrt(max(uniform_ksd_squared(full_n), 0.0))),
                    "wall_time_s": 0.0,
                    **_EMPTY_QP,
                })
                t0 = time.perf_counter()
                corr_full = correct_gram(full_n, config.qp)
                wall_full = time.perf_counter() - t0
                rows.append({
                    **base_row,
                    "method": "corrected-full",
                    "ksd": corr_full.ksd,
                    "wall_time_s": wall_full,
                    **_qp_fields(corr_full),
                })
                t0 = time.perf_counter()
                corr_sub = correct_gram(sub_n, config.qp)
                wall_sub = time.perf_counter() - t0
                # weights come from the subsampled kernel; the reported
                # discrepancy is always measured with the full-data kernel
                ksd_sub = float(np.sqrt(max(ksd_squared(full_n, corr_sub.weights), 0.0)))
                rows.append({
                    **base_row,
                    "method": "corrected-subsampled",
                    "ksd": ksd_sub,
                    "wall_time_s": wall_sub,
                    **_qp_fields(corr_sub),
                })
    return _finish(config, rows)


def run_experiment(config: ExperimentConfig) -> RunResult:
    if config.experiment == "gaussian20d":
        return run_gaussian_experiment(config)
    return run_logistic_experiment(config)


def _finish(config: ExperimentConfig, rows: list) -> RunResult:
    rows.sort(key=lambda r: (r["n"], r["kernel"], r["method"], r["seed"]))
    manifest = {
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "chain_strategy": "one chain per seed, ladder points are prefixes",
        "rows": rows,
    }
    return RunResult(rows=rows, manifest=manifest)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_results(result: RunResult, prefix) -> tuple[str, str]:
    """Write `<prefix>.csv` (deterministic columns) and `<prefix>.manifest.json`."""
    csv_path = f"{prefix}.csv"
    manifest_path = f"{prefix}.manifest.json"
    with open(csv_path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in result.rows:
            fh.write(",".join(_format_cell(row.get(col)) for col in CSV_COLUMNS) + "\n")
    with open(manifest_path, "w") as fh:
        json.dump(result.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, manifest_path


def rows_where(rows, **criteria):
    """Rows matching all keyword equality criteria."""
    out = []
    for row in rows:
        if all(row.get(k) == v for k, v in criteria.items()):
            out.append(row)
    return out


def median_curve(rows, ns, **criteria) -> np.ndarray:
    """Median over seeds of a row value (ksd by default) at each ladder point."""
    value_key = criteria.pop("value", "ksd")
    out = []
    for n in ns:
        vals = [r[value_key] for r in rows_where(rows, n=n, **criteria)]
        if not vals:
            raise ContractViolation(f"no rows at n={n} for {criteria}")
        out.append(float(np.median(vals)))
    return np.asarray(out)
