"""Experiment orchestration: configuration, seeding, sweeps, CSV output.

A sweep is the cartesian product of the power, surface-size, learning-rate
and decay-rate axes; every sweep point is evaluated on ``realizations``
independent channel draws.  Sub-seeds come from a 64-bit mixing function
of the master seed, so every number a run produces is a pure function of
the experiment specification.  Channel draws and per-algorithm noise
streams are keyed only by the axes that change the problem's randomness
(the realization index and the surface size), so sweep points along the
power and learning-rate axes see paired realizations.
"""

from __future__ import annotations

import csv
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .agent import Hyperparams, optimize_for_channels
from .baselines import (
    alternating_optimize,
    brute_force_oracle,
    random_phase_baseline,
)
from .env import SystemConfig, generate_channels
from .metrics import average_reward, sum_rate_cdf

ALGORITHMS = ("drl", "wmmse_alt", "zf_alt", "random", "oracle")

SUMMARY_HEADER = ("algorithm", "pt_db", "M", "N", "K", "seed",
                  "sum_rate", "iterations", "wall_ms")
REWARDS_HEADER = ("step", "instant_reward", "average_reward", "best_reward")
CDF_HEADER = ("value", "cdf")

_M64 = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Mix integers into a 64-bit sub-seed (splitmix-style finalizer)."""
    x = 0x9E3779B97F4A7C15
    for p in parts:
        x = (x + (int(p) & _M64)) & _M64
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & _M64
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & _M64
        x ^= x >> 31
    return x


_CHANNEL_TAG = 0xC7A
_ALGO_TAG = 0xA19


@dataclass
class ExperimentSpec:
    """One experiment: base system, hyper-parameters, sweep axes, and
    output location.  Empty axes default to the base value."""

    cfg: SystemConfig
    hyper: Hyperparams
    pt_db_values: tuple = ()
    n_values: tuple = ()
    mu_values: tuple = ()
    lambda_values: tuple = ()
    realizations: int = 20
    algorithms: tuple = ("drl", "wmmse_alt")
    out_dir: str = "results"
    random_draws: int = 100
    oracle_levels: int = 8
    timings: bool = False

    def __post_init__(self):
        self.pt_db_values = tuple(self.pt_db_values) or (self.cfg.pt_db,)
        self.n_values = tuple(int(n) for n in self.n_values) or (self.cfg.N,)
        self.mu_values = tuple(self.mu_values) or (self.hyper.mu_c,)
        self.lambda_values = tuple(self.lambda_values) or (self.hyper.lambda_c,)
        self.algorithms = tuple(self.algorithms)
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if "oracle" in self.algorithms:
            for n in self.n_values:
                if n * np.log2(self.oracle_levels) > 20.0 + 1e-9:
                    raise ValueError(
                        f"oracle grid {self.oracle_levels}**{n} is over budget")

    @property
    def points(self) -> list:
        """Sweep points as (pt_db, N, mu, lam) tuples, product order."""
        return list(itertools.product(self.pt_db_values, self.n_values,
                                      self.mu_values, self.lambda_values))


def _point_label(index: int) -> str:
    return f"p{index:03d}"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _run_job(spec: ExperimentSpec, point_idx: int, realization: int):
    """Evaluate every selected algorithm at one sweep point on one
    channel realization.  Returns summary rows plus the reward trace of
    the learning run, if any."""
    pt_db, n, mu, lam = spec.points[point_idx]
    master = spec.cfg.seed
    chan_seed = derive_seed(master, _CHANNEL_TAG, n, realization)
    cfg = replace(spec.cfg, pt_db=pt_db, N=n, seed=chan_seed)
    channels = generate_channels(cfg, np.random.default_rng(chan_seed))
    hyper = replace(spec.hyper, mu_c=mu, mu_a=mu, lambda_c=lam, lambda_a=lam)

    rows = []
    reward_rows = None
    for algo in ALGORITHMS:
        if algo not in spec.algorithms:
            continue
        algo_seed = derive_seed(master, _ALGO_TAG, ALGORITHMS.index(algo),
                                n, realization)
        rng = np.random.default_rng(algo_seed)
        t0 = time.perf_counter()
        if algo == "drl":
            summary = optimize_for_channels(replace(cfg, seed=algo_seed),
                                            hyper, channels, rng)
            rate = summary.best_sum_rate
            iterations = int(summary.instant_rewards.size)
            best_running = np.maximum.accumulate(summary.instant_rewards)
            reward_rows = np.column_stack([
                np.arange(iterations),
                summary.instant_rewards,
                summary.average_rewards,
                best_running,
            ])
        elif algo == "wmmse_alt":
            res = alternating_optimize(channels, cfg)
            rate, iterations = res.sum_rate, res.iterations
        elif algo == "zf_alt":
            res = alternating_optimize(channels, cfg, beamformer="zf")
            rate, iterations = res.sum_rate, res.iterations
        elif algo == "random":
            res = random_phase_baseline(channels, cfg, spec.random_draws, rng)
            rate, iterations = res.sum_rate, res.iterations
        else:
            res = brute_force_oracle(channels, cfg, spec.oracle_levels)
            rate, iterations = res.sum_rate, res.iterations
        wall_ms = (time.perf_counter() - t0) * 1e3 if spec.timings else 0.0
        rows.append({
            "algorithm": algo,
            "pt_db": pt_db,
            "M": cfg.M,
            "N": n,
            "K": cfg.K,
            "seed": algo_seed,
            "sum_rate": float(rate),
            "iterations": iterations,
            "wall_ms": wall_ms,
        })
    return point_idx, realization, rows, reward_rows


def _worker_count(n_jobs: int) -> int:
    cap = os.environ.get("RIS_SIM_THREADS", "")
    workers = os.cpu_count() or 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return min(workers, n_jobs)


def _job_star(args):
    return _run_job(*args)


def run_experiment(spec: ExperimentSpec):
    """Run the full sweep and write the result files.

    Files written under ``spec.out_dir``:

    * ``summary.csv`` - one row per algorithm x sweep point x realization;
    * ``rewards_<point>_<real>.csv`` - per-step reward traces of the
      learning runs, with ``<point>`` like ``drl_p000`` and ``<real>``
      like ``r000``;
    * ``cdf_<point>.csv`` - empirical sum-rate CDF over realizations,
      with ``<point>`` like ``wmmse_alt_p000``;
    * ``points.csv`` - manifest mapping point labels to axis values.

    Jobs are independent; ``RIS_SIM_THREADS`` caps the worker processes
    (default: all cores).  Results are merged in index order, so output
    bytes do not depend on scheduling.
    """
    out = str(spec.out_dir)
    os.makedirs(out, exist_ok=True)
    # fail on an unwritable destination before any compute happens
    summary_file = open(os.path.join(out, "summary.csv"), "w", newline="")

    points = spec.points
    jobs = [(spec, pi, ri)
            for pi in range(len(points)) for ri in range(spec.realizations)]
    workers = _worker_count(len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job_star, jobs))
    else:
        results = [_run_job(*job) for job in jobs]
    results.sort(key=lambda item: (item[0], item[1]))

    rows = []
    rates = {}
    with summary_file:
        writer = csv.writer(summary_file)
        writer.writerow(SUMMARY_HEADER)
        for point_idx, realization, job_rows, reward_rows in results:
            label = _point_label(point_idx)
            for row in job_rows:
                writer.writerow([_fmt(row[k]) for k in SUMMARY_HEADER])
                rows.append(row)
                rates.setdefault((row["algorithm"], point_idx), []).append(
                    row["sum_rate"])
            if reward_rows is not None:
                path = os.path.join(out, f"rewards_drl_{label}_r{realization:03d}.csv")
                with open(path, "w", newline="") as f:
                    w = csv.writer(f)
                    w.writerow(REWARDS_HEADER)
                    for step, inst, avg, best in reward_rows:
                        w.writerow([int(step), repr(float(inst)),
                                    repr(float(avg)), repr(float(best))])

    for (algo, point_idx), values in sorted(rates.items()):
        x, f = sum_rate_cdf(values)
        path = os.path.join(out, f"cdf_{algo}_{_point_label(point_idx)}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CDF_HEADER)
            for xi, fi in zip(x, f):
                w.writerow([repr(float(xi)), repr(float(fi))])

    with open(os.path.join(out, "points.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("point", "pt_db", "N", "mu", "lambda"))
        for i, (pt_db, n, mu, lam) in enumerate(points):
            w.writerow([_point_label(i), _fmt(pt_db), n, _fmt(mu), _fmt(lam)])
    return rows


# ----------------------------------------------------------------------
# flat key/value configuration files (JSON object, unknown keys rejected)

_SYSTEM_KEYS = ("M", "N", "K", "pt_db", "noise_power", "seed")
_HYPER_KEYS = {
    "gamma": "gamma",
    "mu_c": "mu_c",
    "mu_a": "mu_a",
    "tau_c": "tau_c",
    "tau_a": "tau_a",
    "lambda_c": "lambda_c",
    "lambda_a": "lambda_a",
    "buffer_capacity": "buffer_capacity",
    "episodes": "episodes",
    "steps": "steps_per_episode",
    "minibatch": "minibatch",
    "sync_every": "sync_every",
    "exploration_std": "exploration_std",
    "exploration_decay": "exploration_decay",
    "warmup_steps": "warmup_steps",
    "hidden_width": "hidden_width",
    "actor_grad_uses_target_critic": "actor_grad_uses_target_critic",
    "early_stop": "early_stop",
}
_SWEEP_KEYS = ("pt_db_values", "n_values", "mu_values", "lambda_values",
               "realizations", "algorithms", "out_dir", "random_draws",
               "oracle_levels", "timings")

DESK_EPISODES = 20
DESK_STEPS = 5000


def load_config(path: str) -> dict:
    """Read and validate a flat JSON configuration file."""
    import json

    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a key/value object")
    allowed = set(_SYSTEM_KEYS) | set(_HYPER_KEYS) | set(_SWEEP_KEYS)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"{path}: unknown config keys: {unknown}")
    return data


def system_from_config(config: dict, **overrides) -> SystemConfig:
    kw = {"M": 4, "N": 4, "K": 4}
    for key in _SYSTEM_KEYS:
        if key in config:
            kw[key] = config[key]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return SystemConfig(**kw)


def hyper_from_config(config: dict, paper_scale: bool = False, **overrides) -> Hyperparams:
    kw = {"episodes": DESK_EPISODES, "steps_per_episode": DESK_STEPS}
    if paper_scale:
        kw = {}
    for key, fieldname in _HYPER_KEYS.items():
        if key in config:
            kw[fieldname] = config[key]
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return Hyperparams(**kw)


def spec_from_config(config: dict, seed=None, out_dir=None,
                     paper_scale: bool = False) -> ExperimentSpec:
    cfg = system_from_config(config, seed=seed)
    hyper = hyper_from_config(config, paper_scale=paper_scale)
    kw = {}
    for key in _SWEEP_KEYS:
        if key in config:
            kw[key] = config[key]
    if out_dir is not None:
        kw["out_dir"] = out_dir
    return ExperimentSpec(cfg=cfg, hyper=hyper, **kw)
