"""Command-line interface.

Subcommands:
    sample      simulate a chain and write it as CSV (one row per step)
    correct     Stein-correct samples: weights + diagnostics as JSON
    ksd         Stein discrepancy of samples under given/uniform weights
    experiment  run a config-driven convergence experiment
    gen-data    write a synthetic logistic-regression CSV

Exit codes: 0 success, 2 config/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, ContractViolation, DomainError, NumericalError
from .gram import assemble_gram, ksd_squared, uniform_ksd_squared
from .kernels import (
    BaseKernel,
    CanonicalSteinKernel,
    MarginalSteinKernel,
    SubsampledSteinKernel,
)
from .qp import QpSettings
from .samplers import ChainConfig, run_chain
from .sis import stein_correct
from .experiments import load_config, load_dataset, run_experiment, write_results, write_synthetic_csv
from .targets import LogisticPosterior, StandardGaussian


def _add_target_args(p: argparse.ArgumentParser):
    p.add_argument("--target", choices=["gaussian", "logistic"], default="gaussian")
    p.add_argument("--dim", type=int, default=2, help="dimension (gaussian target)")
    p.add_argument("--dataset", help="CSV path (logistic target)")
    p.add_argument("--prior-precision", type=float, default=1.0)
    p.add_argument("--no-standardize", action="store_true")


def _build_model(args):
    if args.target == "gaussian":
        return StandardGaussian(args.dim)
    if not args.dataset:
        raise ConfigError("logistic target requires --dataset")
    ds = load_dataset(args.dataset, standardize=not args.no_standardize)
    return LogisticPosterior(ds, prior_precision=args.prior_precision)


def _add_kernel_args(p: argparse.ArgumentParser):
    p.add_argument("--family", choices=["imq", "gaussian", "inverse-log"], default="imq")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--variant", default="canonical",
                   choices=["canonical", "marginal", "subsampled-canonical"])
    p.add_argument("--n-k", type=int, default=None, help="kernel subsample size")
    p.add_argument("--kernel-seed", type=int, default=0)


def _build_kernel(args, model):
    base = BaseKernel(args.family, alpha=args.alpha, beta=args.beta)
    if args.variant == "canonical":
        return CanonicalSteinKernel(base, model)
    if args.variant == "marginal":
        return MarginalSteinKernel(base, model)
    if args.n_k is None:
        raise ConfigError("subsampled-canonical kernel requires --n-k")
    return SubsampledSteinKernel(base, model, args.n_k, seed=args.kernel_seed)


def load_samples_csv(path) -> np.ndarray:
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                cells = line.split(",")
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    if lineno == 1:
                        continue  # header row
                    raise ConfigError(f"{path}: malformed row at line {lineno}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read samples {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no sample rows")
    return np.asarray(rows, dtype=float)


def write_samples_csv(path, points: np.ndarray):
    with open(path, "w") as fh:
        fh.write(",".join(f"x{i}" for i in range(points.shape[1])) + "\n")
        for row in points:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def cmd_sample(args) -> int:
    model = _build_model(args)
    cfg = ChainConfig(kind=args.kind, h=args.h, gamma=args.gamma,
                      n_steps=args.n_steps, n_s=args.n_s, seed=args.seed,
                      x0=args.x0, burn_in=args.burn_in)
    chain = run_chain(cfg, model)
    write_samples_csv(args.out, chain.points)
    print(f"wrote {chain.points.shape[0]} samples to {args.out}")
    return 0


def cmd_correct(args) -> int:
    model = _build_model(args)
    samples = load_samples_csv(args.samples)
    kernel = _build_kernel(args, model)
    settings = QpSettings(tol=args.tol, max_iter=args.max_iter)
    result = stein_correct(samples, kernel, settings)
    payload = result.to_json(indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
        print(f"wrote weights for {len(samples)} samples to {args.out} (ksd={result.ksd:.6g})")
    else:
        print(payload)
    return 0


def cmd_ksd(args) -> int:
    model = _build_model(args)
    samples = load_samples_csv(args.samples)
    kernel = _build_kernel(args, model)
    gram = assemble_gram(samples, kernel)
    if args.weights:
        try:
            with open(args.weights) as fh:
                w = np.asarray(json.load(fh)["weights"], dtype=float)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read weights {args.weights}: {exc}") from exc
        value = ksd_squared(gram, w)
    else:
        value = uniform_ksd_squared(gram)
    print(format(float(np.sqrt(max(value, 0.0))), ".17g"))
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args.config)
    prefix = args.out or config.output
    if not prefix:
        raise ConfigError("no output prefix: pass --out or set 'output' in the config")
    result = run_experiment(config)
    csv_path, manifest_path = write_results(result, prefix)
    print(f"wrote {len(result.rows)} rows to {csv_path} and {manifest_path}")
    return 0


def cmd_gen_data(args) -> int:
    write_synthetic_csv(args.out, args.n_data, args.dim, seed=args.seed)
    print(f"wrote {args.n_data} observations ({args.dim} features) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steinis",
                                     description="Stein importance sampling toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="simulate a chain to CSV")
    _add_target_args(p)
    p.add_argument("--kind", default="tula",
                   choices=["iid-gaussian", "ula", "tula", "tula-subsampled"])
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--n-steps", type=int, required=True)
    p.add_argument("--n-s", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("correct", help="Stein-correct samples (weights JSON)")
    _add_target_args(p)
    _add_kernel_args(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("ksd", help="Stein discrepancy of samples")
    _add_target_args(p)
    _add_kernel_args(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--weights", help="weights JSON from 'correct' (default: uniform)")
    p.set_defaults(func=cmd_ksd)

    p = sub.add_parser("experiment", help="run a config-driven experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output prefix (overrides config)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gen-data", help="synthetic logistic CSV")
    p.add_argument("--n-data", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractViolation, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
