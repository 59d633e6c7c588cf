"""Experiment orchestration: benchmark pipelines, persistence, CSV emission.

Every run writes a config echo (the fully resolved configuration plus the
kernel backend flag) from which the run can be reproduced byte-for-byte;
result CSVs therefore contain no wall-clock values.  Timings go to a
separate runtime.json that is excluded from reproducibility comparisons.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from ._backend import NUMBA_ENABLED
from ._kernels import pairwise_sqdist
from .baselines import BaryConfig, bary_map_eval, train_barycentric
from .discrete import (DualVectors, EmpiricalMeasure, dual_ascent_generic,
                       dual_objective, make_cost, plan_from_duals, sinkhorn_kl,
                       stability_check)
from .dual import DualPair, TrainConfig, new_dual_pair, train_dual
from .fdiv import make_compat
from .gaussian import bw_uvp, entropic_plan, random_instance, score_oracle
from .linalg import empirical_covariance, sample_gaussian, sqrtm_psd, substream
from .sampler import SamplerConfig, geometric_schedule, sample_scones_batch
from .score_est import SWISS_ROLL_DEFAULT_JITTER, DsmConfig, swiss_roll_data, train_score


@dataclass
class RunArtifacts:
    out_dir: Path
    csvs: dict = field(default_factory=dict)
    checkpoints: dict = field(default_factory=dict)
    config_echo: Path | None = None
    metrics: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _echo_config(out_dir: Path, cfg) -> Path:
    payload = dataclasses.asdict(cfg) if dataclasses.is_dataclass(cfg) else dict(cfg)
    payload["_backend_numba"] = NUMBA_ENABLED
    path = out_dir / "config_echo.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def energy_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Unbiased (U-statistic) squared energy distance between sample sets."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    dab = np.sqrt(np.maximum(pairwise_sqdist(
        np.ascontiguousarray(a), np.ascontiguousarray(b)), 0.0)).mean()
    daa = _offdiag_mean_dist(a)
    dbb = _offdiag_mean_dist(b)
    return 2.0 * dab - daa - dbb


def _offdiag_mean_dist(x: np.ndarray) -> float:
    n = x.shape[0]
    if n < 2:
        return 0.0
    d = np.sqrt(np.maximum(pairwise_sqdist(
        np.ascontiguousarray(x), np.ascontiguousarray(x)), 0.0))
    return float(d.sum() / (n * (n - 1)))


# ---------------------------------------------------------------------------
# gaussian benchmark
# ---------------------------------------------------------------------------

@dataclass
class GaussianBenchConfig:
    dims: tuple[int, ...] = (2, 16)
    trials: int = 3
    samples: int = 10_000
    seed: int = 0
    lam_override: float | None = None
    train_pool: int = 8192
    train_iters: int = 4000
    train_batch: int = 384
    train_lr: float = 1e-3
    hidden_small: tuple[int, ...] = (64, 64)   # potentials for d <= 4
    hidden_large: tuple[int, ...] = (192,)
    epsilon_small: float = 0.03                # Langevin step for d <= 4
    epsilon_large: float = 0.05
    steps_small: int = 1200
    steps_large: int = 2000
    bp_iters: int = 4000
    bp_batch: int = 256
    bp_lr: float = 1e-3

    def hidden(self, d: int) -> tuple[int, ...]:
        return tuple(self.hidden_small if d <= 4 else self.hidden_large)

    def sampler_for(self, d: int, seed: int) -> SamplerConfig:
        if d <= 4:
            return SamplerConfig(self.epsilon_small, self.steps_small, seed=seed)
        return SamplerConfig(self.epsilon_large, self.steps_large, seed=seed)


def _chol_psd(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return sqrtm_psd(cov)


def run_gaussian_benchmark(cfg: GaussianBenchConfig, out_dir) -> RunArtifacts:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "checkpoints").mkdir(exist_ok=True)
    art = RunArtifacts(out_dir)
    art.config_echo = _echo_config(out_dir, cfg)
    t_start = time.perf_counter()

    rows = []
    for d in cfg.dims:
        for trial in range(cfg.trials):
            try:
                rows.extend(_gaussian_trial(cfg, d, trial, out_dir, art))
            except Exception as exc:  # keep the run alive, record the failure
                rows.append([d, trial, "scones", float("nan"),
                             f"failed:{type(exc).__name__}"])
                rows.append([d, trial, "bp", float("nan"),
                             f"failed:{type(exc).__name__}"])
    trials_csv = write_csv(out_dir / "gaussian_bench_trials.csv",
                           ["dim", "trial", "method", "bw_uvp", "status"], rows)
    art.csvs["trials"] = trials_csv

    summary = []
    for d in cfg.dims:
        for method in ("scones", "bp"):
            vals = np.array([r[3] for r in rows
                             if r[0] == d and r[2] == method and r[4] == "ok"])
            if vals.size:
                mean = float(vals.mean())
                sem = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            else:
                mean, sem = float("nan"), float("nan")
            summary.append([d, method, mean, sem, vals.size])
            art.metrics[f"bw_uvp_{method}_d{d}"] = mean
    art.csvs["summary"] = write_csv(out_dir / "gaussian_bench_summary.csv",
                                    ["dim", "method", "bw_uvp_mean",
                                     "bw_uvp_stderr", "n_ok"], summary)
    (out_dir / "runtime.json").write_text(json.dumps(
        {"wall_seconds": time.perf_counter() - t_start}))
    return art


def _gaussian_trial(cfg: GaussianBenchConfig, d: int, trial: int,
                    out_dir: Path, art: RunArtifacts):
    inst_seed = int(substream(cfg.seed, "instance", d, trial).integers(2 ** 31))
    inst = random_instance(d, inst_seed, cfg.lam_override)
    plan = entropic_plan(inst)

    chol1 = _chol_psd(inst.source.cov)
    chol2 = _chol_psd(inst.target.cov)
    rng_pool = substream(cfg.seed, "pool", d, trial)
    pool_x = sample_gaussian(inst.source.mean, chol1, cfg.train_pool, rng_pool)
    pool_y = sample_gaussian(inst.target.mean, chol2, cfg.train_pool, rng_pool)

    pair = new_dual_pair(d, d, make_compat("kl", inst.lam),
                         hidden=cfg.hidden(d),
                         rng=substream(cfg.seed, "init", d, trial))
    tcfg = TrainConfig(iterations=cfg.train_iters, batch_size=cfg.train_batch,
                       lr=cfg.train_lr,
                       seed=int(substream(cfg.seed, "train", d, trial).integers(2 ** 31)))
    pair, _report = train_dual(pair, pool_x, pool_y, tcfg)
    ck = out_dir / "checkpoints" / f"dual_d{d}_t{trial}.scns"
    ckpt.save_dual_pair(ck, pair)
    art.checkpoints[f"dual_d{d}_t{trial}"] = ck

    score = score_oracle(inst.target)
    xs = sample_gaussian(inst.source.mean, chol1, cfg.samples,
                         substream(cfg.seed, "scones-x", d, trial))
    scfg = cfg.sampler_for(d, int(substream(cfg.seed, "chains", d, trial).integers(2 ** 31)))
    ys = sample_scones_batch(pair, score, xs, scfg)
    _, joint_cov = empirical_covariance(np.hstack([xs, ys]))
    uvp_scones = bw_uvp(joint_cov, plan)

    bcfg = BaryConfig(hidden=cfg.hidden(d), iterations=cfg.bp_iters,
                      batch_size=cfg.bp_batch, lr=cfg.bp_lr,
                      seed=int(substream(cfg.seed, "bp", d, trial).integers(2 ** 31)))
    bary = train_barycentric(pair, pool_x, pool_y, bcfg)
    xs_bp = sample_gaussian(inst.source.mean, chol1, cfg.samples,
                            substream(cfg.seed, "bp-x", d, trial))
    ts = bary_map_eval(bary, xs_bp)
    _, joint_bp = empirical_covariance(np.hstack([xs_bp, ts]))
    uvp_bp = bw_uvp(joint_bp, plan)

    return [[d, trial, "scones", uvp_scones, "ok"],
            [d, trial, "bp", uvp_bp, "ok"]]


# ---------------------------------------------------------------------------
# discrete validation
# ---------------------------------------------------------------------------

@dataclass
class DiscreteValidationConfig:
    nx: int = 10
    ny: int = 10
    kind: str = "kl"
    lams: tuple[float, ...] = (0.5, 1.0, 2.0)
    instances: int = 6
    dim: int = 2
    train_iters: int = 5000
    train_lr: float = 3e-3
    width: int = 64
    chi2_softplus_alpha: float = 1000.0
    seed: int = 0


def random_discrete_instance(nx: int, ny: int, dim: int, rng: np.random.Generator,
                             uniform_weights: bool = True):
    atoms_x = rng.standard_normal((nx, dim))
    atoms_y = rng.standard_normal((ny, dim))
    if uniform_weights:
        wx = np.full(nx, 1.0 / nx)
        wy = np.full(ny, 1.0 / ny)
    else:
        wx = rng.dirichlet(np.full(nx, 5.0))
        wy = rng.dirichlet(np.full(ny, 5.0))
        wx = np.maximum(wx, 1e-3); wx /= wx.sum()
        wy = np.maximum(wy, 1e-3); wy /= wy.sum()
    return EmpiricalMeasure(atoms_x, wx), EmpiricalMeasure(atoms_y, wy)


def neural_duals_on_instance(source: EmpiricalMeasure, target: EmpiricalMeasure,
                             compat, width: int, iters: int, lr: float,
                             seed: int) -> tuple[DualPair, DualVectors]:
    """Full-batch Algorithm-1 training on a discrete instance; returns the
    trained pair and its potential values at the atoms."""
    pair = new_dual_pair(source.atoms.shape[1], target.atoms.shape[1], compat,
                         hidden=(width, width),
                         rng=substream(seed, "init"))
    tcfg = TrainConfig(iterations=iters, batch_size=0, lr=lr, full_batch=True,
                       seed=seed)
    pair, _ = train_dual(pair, source.atoms, target.atoms, tcfg,
                         source_weights=source.weights,
                         target_weights=target.weights)
    duals = DualVectors(pair.phi_values(source.atoms), pair.psi_values(target.atoms))
    return pair, duals


def run_discrete_validation(cfg: DiscreteValidationConfig, out_dir) -> RunArtifacts:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    art = RunArtifacts(out_dir)
    art.config_echo = _echo_config(out_dir, cfg)
    t_start = time.perf_counter()

    rows = []
    for idx in range(cfg.instances):
        lam = float(cfg.lams[idx % len(cfg.lams)])
        rng = substream(cfg.seed, "discrete", idx)
        source, target = random_discrete_instance(cfg.nx, cfg.ny, cfg.dim, rng)
        cost = make_cost(source, target, "sqeuclidean")

        if cfg.kind == "kl":
            compat = make_compat("kl", lam)
            plan_star, duals_star = sinkhorn_kl(cost, source.weights, target.weights, lam)
            j_star = dual_objective(cost, source.weights, target.weights, compat,
                                    duals_star.phi, duals_star.psi)
            ascent_duals, j_ascent = dual_ascent_generic(
                cost, source.weights, target.weights, compat, lr=lam, tol=1e-10)
            plan_ascent = plan_from_duals(cost, source.weights, target.weights,
                                          compat, ascent_duals)
            oracle_gap = float(np.abs(plan_ascent - plan_star).sum())
            train_compat = compat
        else:
            compat = make_compat("pearson_chi2", lam)
            ascent_duals, j_star = dual_ascent_generic(
                cost, source.weights, target.weights, compat, lr=lam, tol=1e-10)
            plan_star = plan_from_duals(cost, source.weights, target.weights,
                                        compat, ascent_duals)
            oracle_gap = float("nan")
            train_compat = make_compat("pearson_chi2", lam, cfg.chi2_softplus_alpha)

        seed_i = int(substream(cfg.seed, "nn", idx).integers(2 ** 31))
        _pair, nn_duals = neural_duals_on_instance(
            source, target, train_compat, cfg.width, cfg.train_iters,
            cfg.train_lr, seed_i)
        res = stability_check(cost, source.weights, target.weights, compat,
                              nn_duals, j_star, plan_star)
        rows.append([idx, cfg.kind, lam, j_star, res.eps, res.lhs, res.rhs,
                     res.holds, oracle_gap])
    art.csvs["validation"] = write_csv(
        out_dir / "discrete_validation.csv",
        ["instance", "kind", "lambda", "j_star", "eps", "plan_l1", "bound",
         "holds", "oracle_plan_l1_gap"], rows)
    art.metrics["all_hold"] = bool(all(r[7] for r in rows))
    art.metrics["max_eps"] = float(max(r[4] for r in rows))
    (out_dir / "runtime.json").write_text(json.dumps(
        {"wall_seconds": time.perf_counter() - t_start}))
    return art


# ---------------------------------------------------------------------------
# swiss roll
# ---------------------------------------------------------------------------

@dataclass
class SwissRollConfig:
    seed: int = 0
    lam: float = 2.0
    jitter: float = SWISS_ROLL_DEFAULT_JITTER
    n_target_train: int = 4000
    n_eval: int = 1500
    n_baseline_pool: int = 3000
    baseline_splits: int = 16
    iters_score: int = 12000
    iters_dual: int = 8000
    dual_batch: int = 512
    dual_lr: float = 1e-3
    dual_width: int = 96
    score_width: int = 128
    score_lr: float = 1e-3
    tau_first: float = 1.0
    tau_last: float = 0.05
    n_levels: int = 7
    epsilon: float = 1e-3
    steps_per_level: int = 700
    denoise_final: bool = True
    bp_iters: int = 5000
    bp_batch: int = 256
    bp_lr: float = 1e-3


def run_swissroll(cfg: SwissRollConfig, out_dir) -> RunArtifacts:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "checkpoints").mkdir(exist_ok=True)
    art = RunArtifacts(out_dir)
    art.config_echo = _echo_config(out_dir, cfg)
    t_start = time.perf_counter()

    rng_data = substream(cfg.seed, "data")
    target_train = swiss_roll_data(cfg.n_target_train, cfg.jitter, rng_data)
    target_eval = swiss_roll_data(cfg.n_eval, cfg.jitter, rng_data)
    baseline_pool = swiss_roll_data(2 * cfg.n_baseline_pool, cfg.jitter, rng_data)
    source_pool = substream(cfg.seed, "source").standard_normal((cfg.n_target_train, 2))

    schedule = geometric_schedule(cfg.tau_first, cfg.tau_last, cfg.n_levels)
    dsm = DsmConfig(levels=schedule.levels, iterations=cfg.iters_score,
                    batch_size=256, lr=cfg.score_lr,
                    hidden=(cfg.score_width, cfg.score_width),
                    seed=int(substream(cfg.seed, "score").integers(2 ** 31)))
    score = train_score(target_train, dsm)
    ckpt.save_score_net(out_dir / "checkpoints" / "score.scrn", score)
    art.checkpoints["score"] = out_dir / "checkpoints" / "score.scrn"

    pair = new_dual_pair(2, 2, make_compat("kl", cfg.lam),
                         hidden=(cfg.dual_width, cfg.dual_width),
                         rng=substream(cfg.seed, "dual-init"))
    tcfg = TrainConfig(iterations=cfg.iters_dual, batch_size=cfg.dual_batch,
                       lr=cfg.dual_lr,
                       seed=int(substream(cfg.seed, "dual").integers(2 ** 31)))
    pair, _ = train_dual(pair, source_pool, target_train, tcfg)
    ckpt.save_dual_pair(out_dir / "checkpoints" / "dual.scns", pair)
    art.checkpoints["dual"] = out_dir / "checkpoints" / "dual.scns"

    xs = substream(cfg.seed, "eval-x").standard_normal((cfg.n_eval, 2))
    scfg = SamplerConfig(cfg.epsilon, cfg.steps_per_level, schedule,
                         denoise_final=cfg.denoise_final,
                         seed=int(substream(cfg.seed, "chains").integers(2 ** 31)))
    ys = sample_scones_batch(pair, score, xs, scfg)
    art.csvs["scones"] = write_csv(
        out_dir / "samples_scones.csv", ["x0", "x1", "y0", "y1"],
        np.hstack([xs, ys]).tolist())

    bcfg = BaryConfig(hidden=(cfg.dual_width, cfg.dual_width),
                      iterations=cfg.bp_iters, batch_size=cfg.bp_batch,
                      lr=cfg.bp_lr,
                      seed=int(substream(cfg.seed, "bp").integers(2 ** 31)))
    bary = train_barycentric(pair, source_pool, target_train, bcfg)
    ts = bary_map_eval(bary, xs)
    art.csvs["bp"] = write_csv(
        out_dir / "samples_bp.csv", ["x0", "x1", "y0", "y1"],
        np.hstack([xs, ts]).tolist())

    ed_scones = energy_distance(ys, target_eval)
    ed_bp = energy_distance(ts, target_eval)
    baseline = target_self_distance(baseline_pool, cfg.baseline_splits,
                                    substream(cfg.seed, "baseline"))
    art.metrics = {"energy_scones": ed_scones, "energy_bp": ed_bp,
                   "self_distance_baseline": baseline}
    art.csvs["metrics"] = write_csv(
        out_dir / "swissroll_metrics.csv",
        ["energy_scones", "energy_bp", "self_distance_baseline"],
        [[ed_scones, ed_bp, baseline]])
    (out_dir / "runtime.json").write_text(json.dumps(
        {"wall_seconds": time.perf_counter() - t_start}))
    return art


def target_self_distance(pool: np.ndarray, splits: int,
                         rng: np.random.Generator) -> float:
    """Statistical floor of the energy distance: mean |E^2| over random
    disjoint half-splits of held-out target data."""
    n = pool.shape[0] // 2
    vals = []
    for _ in range(splits):
        perm = rng.permutation(pool.shape[0])
        vals.append(abs(energy_distance(pool[perm[:n]], pool[perm[n:2 * n]])))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# sample-from-checkpoint
# ---------------------------------------------------------------------------

@dataclass
class SampleRunConfig:
    checkpoint: str = ""
    score_checkpoint: str = ""
    source_csv: str = ""
    epsilon: float = 5e-3
    steps: int = 1000
    annealed: bool = False
    denoise_final: bool = False
    seed: int = 0


def run_sample(cfg: SampleRunConfig, out_dir) -> RunArtifacts:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    art = RunArtifacts(out_dir)
    art.config_echo = _echo_config(out_dir, cfg)
    pair = ckpt.load_dual_pair(cfg.checkpoint)
    score = ckpt.load_score_net(cfg.score_checkpoint)
    xs = _read_points_csv(cfg.source_csv)
    schedule = None
    if cfg.annealed:
        levels = np.sort(np.asarray(score.levels))[::-1]
        schedule = geometric_schedule(float(levels[0]), float(levels[-1]),
                                      len(levels)) if len(levels) >= 2 else None
    scfg = SamplerConfig(cfg.epsilon, cfg.steps, schedule,
                         denoise_final=cfg.denoise_final and schedule is not None,
                         seed=cfg.seed)
    ys = sample_scones_batch(pair, score, xs, scfg)
    header = [f"x{i}" for i in range(xs.shape[1])] + [f"y{i}" for i in range(ys.shape[1])]
    art.csvs["samples"] = write_csv(out_dir / "samples.csv", header,
                                    np.hstack([xs, ys]).tolist())
    return art


def _read_points_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                continue  # header line
    if not rows:
        raise ValueError(f"no numeric rows in {path}")
    return np.asarray(rows)
