"""Command-line entry points.

Subcommands: ``train`` (one learning run), ``bench`` (baselines on one
instance), ``sweep`` (full experiment), ``oracle`` (exhaustive phase grid
on a tiny instance) and ``check`` (built-in self tests).  Every command
takes ``--config`` (flat JSON), ``--seed`` and ``--out``; outputs are a
pure function of those, so repeated runs produce identical files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import agent as agent_mod
from . import experiments as exp
from .baselines import alternating_optimize, brute_force_oracle, random_phase_baseline
from .env import SystemConfig, decode_action, generate_channels, sum_rate
from .metrics import average_reward
from .nn import DenseNet


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-sim",
        description="Joint beamforming/phase-shift optimization testbed",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--timings", action="store_true",
                       help="record wall-clock times (breaks byte-level "
                            "reproducibility of the output files)")

    p_train = sub.add_parser("train", help="single learning run")
    common(p_train)
    for flag in ("M", "N", "K"):
        p_train.add_argument(f"--{flag}", type=int, default=None)
    p_train.add_argument("--pt-db", type=float, default=None)
    p_train.add_argument("--episodes", type=int, default=None)
    p_train.add_argument("--steps", type=int, default=None)
    p_train.add_argument("--paper-scale", action="store_true",
                         help="restore the full-scale episode budget")

    p_bench = sub.add_parser("bench", help="baselines on one instance")
    common(p_bench)
    for flag in ("M", "N", "K"):
        p_bench.add_argument(f"--{flag}", type=int, default=None)
    p_bench.add_argument("--pt-db", type=float, default=None)
    p_bench.add_argument("--algorithms", default="wmmse_alt,zf_alt,random",
                         help="comma-separated baseline list")

    p_sweep = sub.add_parser("sweep", help="full experiment sweep")
    common(p_sweep)
    p_sweep.add_argument("--paper-scale", action="store_true")

    p_oracle = sub.add_parser("oracle", help="exhaustive phase search")
    common(p_oracle)
    for flag in ("M", "N", "K"):
        p_oracle.add_argument(f"--{flag}", type=int, default=None)
    p_oracle.add_argument("--pt-db", type=float, default=None)
    p_oracle.add_argument("--levels", type=int, default=8,
                          help="phase quantization levels")

    p_check = sub.add_parser("check", help="run built-in self tests")
    common(p_check)
    return parser


def _write_summary(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(exp.SUMMARY_HEADER)
        for row in rows:
            w.writerow([exp._fmt(row[k]) for k in exp.SUMMARY_HEADER])


def _cmd_train(args) -> int:
    config = exp.load_config(args.config) if args.config else {}
    cfg = exp.system_from_config(config, seed=args.seed, M=args.M, N=args.N,
                                 K=args.K, pt_db=args.pt_db)
    hyper = exp.hyper_from_config(config, paper_scale=args.paper_scale,
                                  episodes=args.episodes,
                                  steps_per_episode=args.steps)
    out = args.out or "results"
    os.makedirs(out, exist_ok=True)
    summary = agent_mod.train(cfg, hyper, np.random.default_rng(cfg.seed))

    steps = np.arange(summary.instant_rewards.size)
    best = np.maximum.accumulate(summary.instant_rewards)
    with open(os.path.join(out, "rewards_drl_p000_r000.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(exp.REWARDS_HEADER)
        for i in steps:
            w.writerow([int(i), repr(float(summary.instant_rewards[i])),
                        repr(float(summary.average_rewards[i])),
                        repr(float(best[i]))])
    wall = summary.wall_seconds * 1e3 if args.timings else 0.0
    _write_summary(os.path.join(out, "summary.csv"), [{
        "algorithm": "drl", "pt_db": cfg.pt_db, "M": cfg.M, "N": cfg.N,
        "K": cfg.K, "seed": cfg.seed, "sum_rate": summary.best_sum_rate,
        "iterations": int(summary.instant_rewards.size), "wall_ms": wall,
    }])
    summary.agent.actor_train.save(os.path.join(out, "actor.dnet"))
    summary.agent.critic_train.save(os.path.join(out, "critic.dnet"))
    print(f"best sum rate {summary.best_sum_rate:.6f} bits/s/Hz "
          f"over {summary.instant_rewards.size} steps")
    return 0


def _cmd_bench(args) -> int:
    config = exp.load_config(args.config) if args.config else {}
    cfg = exp.system_from_config(config, seed=args.seed, M=args.M, N=args.N,
                                 K=args.K, pt_db=args.pt_db)
    algos = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    hyper = exp.hyper_from_config(config)
    spec = exp.ExperimentSpec(cfg=cfg, hyper=hyper, realizations=1,
                              algorithms=algos, out_dir=args.out or "results",
                              timings=args.timings)
    rows = exp.run_experiment(spec)
    for row in rows:
        print(f"{row['algorithm']:>10s}  sum rate {row['sum_rate']:.6f}")
    return 0


def _cmd_sweep(args) -> int:
    config = exp.load_config(args.config) if args.config else {}
    spec = exp.spec_from_config(config, seed=args.seed, out_dir=args.out,
                                paper_scale=args.paper_scale)
    spec.timings = args.timings
    rows = exp.run_experiment(spec)
    print(f"wrote {len(rows)} result rows to {spec.out_dir}")
    return 0


def _cmd_oracle(args) -> int:
    config = exp.load_config(args.config) if args.config else {}
    cfg = exp.system_from_config(config, seed=args.seed, M=args.M, N=args.N,
                                 K=args.K, pt_db=args.pt_db)
    channels = generate_channels(cfg, np.random.default_rng(cfg.seed))
    result = brute_force_oracle(channels, cfg, args.levels)
    out = args.out or "results"
    os.makedirs(out, exist_ok=True)
    _write_summary(os.path.join(out, "summary.csv"), [{
        "algorithm": "oracle", "pt_db": cfg.pt_db, "M": cfg.M, "N": cfg.N,
        "K": cfg.K, "seed": cfg.seed, "sum_rate": result.sum_rate,
        "iterations": result.iterations, "wall_ms": 0.0,
    }])
    print(f"oracle sum rate {result.sum_rate:.6f} bits/s/Hz "
          f"({result.iterations} grid points)")
    return 0


# ----------------------------------------------------------------------
def _selftest_gradients() -> str | None:
    rng = np.random.default_rng(7)
    net = DenseNet((5, 12, 12, 3), head="tanh", rng=rng)
    x = rng.standard_normal((4, 5))
    y, cache = net.forward(x, train=True, want_cache=True)
    dy = rng.standard_normal(y.shape)
    grads, _, _ = net.backward(cache, dy)
    params = net.parameters()
    h = 1e-6
    for trial in range(40):
        pi = rng.integers(len(params))
        flat = params[pi].reshape(-1)
        j = rng.integers(flat.size)
        keep = flat[j]
        flat[j] = keep + h
        up = float((net.forward(x, train=True) * dy).sum())
        flat[j] = keep - h
        dn = float((net.forward(x, train=True) * dy).sum())
        flat[j] = keep
        fd = (up - dn) / (2 * h)
        an = grads[pi].reshape(-1)[j]
        if abs(fd - an) > 1e-4 * max(1.0, abs(fd), abs(an)):
            return f"gradient mismatch at parameter {pi}[{j}]: {an} vs {fd}"
    return None


def _selftest_feasibility() -> str | None:
    cfg = SystemConfig(M=3, N=4, K=2, pt_db=10.0)
    rng = np.random.default_rng(11)
    for _ in range(500):
        act = decode_action(rng.standard_normal(cfg.action_dim) * 3.0, cfg)
        power = np.sum(np.abs(act.G) ** 2)
        if abs(power - cfg.p_t) > 1e-9 * cfg.p_t:
            return f"power constraint violated: {power} vs {cfg.p_t}"
        if np.max(np.abs(np.abs(act.phases) - 1.0)) > 1e-12:
            return "unit-modulus constraint violated"
    return None


def _selftest_determinism() -> str | None:
    cfg = SystemConfig(M=2, N=2, K=2, seed=5)
    a = generate_channels(cfg, np.random.default_rng(5))
    b = generate_channels(cfg, np.random.default_rng(5))
    if not (np.array_equal(a.H1, b.H1) and np.array_equal(a.H2, b.H2)):
        return "channel generation is not reproducible"
    return None


def _selftest_metrics() -> str | None:
    series = np.array([0.0, 2.0, 4.0])
    avg = average_reward(series)
    if not np.allclose(avg, [0.0, 1.0, 2.0], atol=0):
        return f"running average wrong: {avg}"
    return None


def _selftest_benchmarks() -> str | None:
    cfg = SystemConfig(M=2, N=2, K=2, pt_db=10.0, seed=3)
    channels = generate_channels(cfg, np.random.default_rng(3))
    alt = alternating_optimize(channels, cfg)
    rnd = random_phase_baseline(channels, cfg, 20, np.random.default_rng(4))
    if rnd.sum_rate > alt.sum_rate + 0.5:
        return "alternating optimization lost badly to random phases"
    check = sum_rate(alt.G, alt.phases, channels, cfg.noise_power)
    if abs(check - alt.sum_rate) > 1e-9:
        return "reported benchmark rate does not recompute"
    return None


_SELFTESTS = (
    ("gradients", _selftest_gradients),
    ("feasibility", _selftest_feasibility),
    ("determinism", _selftest_determinism),
    ("metrics", _selftest_metrics),
    ("benchmarks", _selftest_benchmarks),
)


def _cmd_check(args) -> int:
    failures = 0
    for name, fn in _SELFTESTS:
        problem = fn()
        if problem is None:
            print(f"PASS {name}")
        else:
            print(f"FAIL {name}: {problem}")
            failures += 1
    return 1 if failures else 0


_COMMANDS = {
    "train": _cmd_train,
    "bench": _cmd_bench,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
    "check": _cmd_check,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
