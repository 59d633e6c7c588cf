"""Command-line entry point.

Subcommands: gaussian-bench, discrete-validate, swissroll, sample.  A JSON
config file supplies defaults; explicit flags override file values.  Exit
codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .harness import (DiscreteValidationConfig, GaussianBenchConfig,
                      SampleRunConfig, SwissRollConfig, run_discrete_validation,
                      run_gaussian_benchmark, run_sample, run_swissroll)


class ConfigError(ValueError):
    pass


def _build_config(cls, file_values: dict, overrides: dict):
    values = {}
    known = {f.name for f in dataclasses.fields(cls)}
    for k, v in file_values.items():
        if k == "experiment" or k.startswith("_"):
            continue
        if k not in known:
            raise ConfigError(f"unknown config key {k!r} for {cls.__name__}")
        values[k] = v
    for k, v in overrides.items():
        if v is not None:
            values[k] = v
    for key in ("dims", "lams", "hidden", "hidden_small", "hidden_large"):
        if key in values and isinstance(values[key], list):
            values[key] = tuple(values[key])
    return cls(**values)


def _load_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _parse_dims(text):
    if text is None:
        return None
    return tuple(int(p) for p in text.split(",") if p)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scones",
        description="Regularized optimal transport couplings: dual training, "
                    "conditional Langevin sampling, and oracle validation.")
    parser.add_argument("--config", help="JSON config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gaussian-bench", help="BW-UVP benchmark on random Gaussians")
    p.add_argument("--dim", help="comma-separated dimensions, e.g. 2,16")
    p.add_argument("--trials", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="lam_override", type=float,
                   help="override the default regularization 2d")
    p.add_argument("--train-iters", dest="train_iters", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("discrete-validate", help="oracle and stability-bound checks")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--kind", choices=("kl", "chi2"))
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--instances", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("swissroll", help="swiss-roll SCONES vs BP comparison")
    p.add_argument("--iters-score", dest="iters_score", type=int)
    p.add_argument("--iters-dual", dest="iters_dual", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="sample from saved checkpoints")
    p.add_argument("--checkpoint", required=True, help="dual pair .scns file")
    p.add_argument("--score-checkpoint", required=True, help="score net .scrn file")
    p.add_argument("--source-csv", required=True)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--annealed", action="store_true", default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        file_values = _load_file(args.config)
        if args.command == "gaussian-bench":
            cfg = _build_config(GaussianBenchConfig, file_values, {
                "dims": _parse_dims(args.dim), "trials": args.trials,
                "samples": args.samples, "seed": args.seed,
                "lam_override": args.lam_override,
                "train_iters": args.train_iters})
            art = run_gaussian_benchmark(cfg, args.out)
        elif args.command == "discrete-validate":
            overrides = {"nx": args.nx, "ny": args.ny, "instances": args.instances,
                         "seed": args.seed}
            if args.kind is not None:
                overrides["kind"] = {"chi2": "pearson_chi2"}.get(args.kind, args.kind)
            if args.lam is not None:
                overrides["lams"] = (args.lam,)
            cfg = _build_config(DiscreteValidationConfig, file_values, overrides)
            art = run_discrete_validation(cfg, args.out)
        elif args.command == "swissroll":
            cfg = _build_config(SwissRollConfig, file_values, {
                "iters_score": args.iters_score, "iters_dual": args.iters_dual,
                "seed": args.seed})
            art = run_swissroll(cfg, args.out)
        else:
            cfg = _build_config(SampleRunConfig, file_values, {
                "checkpoint": args.checkpoint,
                "score_checkpoint": args.score_checkpoint,
                "source_csv": args.source_csv, "epsilon": args.epsilon,
                "steps": args.steps, "annealed": args.annealed,
                "seed": args.seed})
            art = run_sample(cfg, args.out)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"run failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    for name, path in art.csvs.items():
        print(f"{name}: {path}")
    if art.metrics:
        print(json.dumps(art.metrics, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
