"""Acceptance suite.

Each test prints one PASS line (run with ``-s`` to see them); a failure
shows up as a normal pytest failure.  Criteria with stated runtime
budgets assert the elapsed time too.  Training-based checks run at desk
scale on fixed seeds, so every number here is reproducible.
"""

import json
import os
import time

import numpy as np
import pytest

from ris_sim.agent import Agent, Hyperparams, optimize_for_channels
from ris_sim.baselines import alternating_optimize, brute_force_oracle
from ris_sim.cli import cli_main
from ris_sim.env import (
    SystemConfig,
    decode_action,
    generate_channels,
    sum_rate,
)
from ris_sim.experiments import ExperimentSpec, derive_seed, run_experiment


def loop_sum_rate(G, phases, channels, noise_power):
    """Element-loop evaluation of the composite channel, SINR and rate."""
    K, N = channels.H2.shape
    M = channels.H1.shape[1]
    total = 0.0
    for k in range(K):
        h = np.zeros(M, dtype=complex)
        for m in range(M):
            for n in range(N):
                h[m] += channels.H2[k, n] * phases[n] * channels.H1[n, m]
        amps = [h @ G[:, j] for j in range(K)]
        signal = abs(amps[k]) ** 2
        interference = sum(abs(a) ** 2 for j, a in enumerate(amps) if j != k)
        total += np.log2(1.0 + signal / (interference + noise_power))
    return total


def relative_error(analytic, numeric, floor=1e-4):
    return np.abs(analytic - numeric) / np.maximum.reduce(
        [np.abs(analytic), np.abs(numeric), np.full_like(analytic, floor)])


def finite_diff_max_err(params, closure, grads, h=1e-5):
    """Full central-difference sweep of every parameter entry."""
    worst = 0.0
    for pi, param in enumerate(params):
        flat = param.reshape(-1)
        ana = grads[pi].reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            up = closure()
            flat[j] = keep - h
            down = closure()
            flat[j] = keep
            fd = (up - down) / (2.0 * h)
            err = abs(ana[j] - fd) / max(abs(ana[j]), abs(fd), 1e-4)
            worst = max(worst, err)
    return worst


def test_criterion_01_gradient_oracle():
    """Analytic gradients match finite differences on the agent's nets."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=2, N=2, K=2, pt_db=10.0, seed=1)
    agent = Agent(cfg, Hyperparams(), np.random.default_rng(1))
    rng = np.random.default_rng(2)
    states = rng.standard_normal((4, cfg.state_dim))
    actions = rng.standard_normal((4, cfg.action_dim))

    # actor: weighted-sum loss over the tanh head
    actor = agent.actor_train
    w_out = rng.standard_normal((4, cfg.action_dim))
    y, cache = actor.forward(states, train=True, want_cache=True)
    a_grads, _, _ = actor.backward(cache, w_out)
    closure = lambda: float((actor.forward(states, train=True) * w_out).sum())
    worst_actor = finite_diff_max_err(actor.parameters(), closure, a_grads)

    # critic: sum of the scalar head, including the action-input gradient
    critic = agent.critic_train
    q, cache = critic.forward(states, aux=actions, train=True, want_cache=True)
    c_grads, _, daux = critic.backward(cache, np.ones((4, 1)))
    closure = lambda: float(critic.forward(states, aux=actions, train=True).sum())
    worst_critic = finite_diff_max_err(critic.parameters(), closure, c_grads)
    fd_aux = np.zeros_like(actions)
    h = 1e-5
    flat = actions.reshape(-1)
    for j in range(flat.size):
        keep = flat[j]
        flat[j] = keep + h
        up = closure()
        flat[j] = keep - h
        down = closure()
        flat[j] = keep
        fd_aux.reshape(-1)[j] = (up - down) / (2.0 * h)
    worst_aux = float(relative_error(daux, fd_aux).max())

    elapsed = time.perf_counter() - t0
    worst = max(worst_actor, worst_critic, worst_aux)
    assert worst < 1e-4, f"max relative gradient error {worst}"
    assert elapsed < 30.0, f"gradient oracle took {elapsed:.1f}s"
    print(f"PASS criterion 1: gradient oracle (max rel err {worst:.2e}, "
          f"{elapsed:.1f}s)")


def test_criterion_02_feasibility_suite():
    """Every decoded action satisfies both constraints."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=3, N=4, K=2, pt_db=13.0, seed=2)
    rng = np.random.default_rng(3)
    for _ in range(10_000):
        action = decode_action(rng.standard_normal(cfg.action_dim) * 3.0, cfg)
        power = np.sum(np.abs(action.G) ** 2)
        assert abs(power - cfg.p_t) <= 1e-9 * cfg.p_t
        assert np.max(np.abs(np.abs(action.phases) - 1.0)) <= 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 10.0, f"feasibility suite took {elapsed:.1f}s"
    print(f"PASS criterion 2: feasibility of 10^4 decoded actions "
          f"({elapsed:.1f}s)")


def test_criterion_03_sum_rate_correctness():
    """Vectorized rates match loop evaluation; common-phase invariance."""
    rng = np.random.default_rng(4)
    for _ in range(1000):
        M = int(rng.integers(1, 5))
        K = int(rng.integers(1, M + 1))
        N = int(rng.integers(1, 5))
        cfg = SystemConfig(M=M, N=N, K=K, pt_db=float(rng.uniform(0, 20)))
        channels = generate_channels(cfg, rng)
        action = decode_action(rng.standard_normal(cfg.action_dim), cfg)
        got = sum_rate(action.G, action.phases, channels, cfg.noise_power)
        ref = loop_sum_rate(action.G, action.phases, channels, cfg.noise_power)
        assert abs(got - ref) <= 1e-10
        theta = float(rng.uniform(0, 2 * np.pi))
        rotated = sum_rate(action.G, np.exp(1j * theta) * action.phases,
                           channels, cfg.noise_power)
        assert abs(rotated - got) <= 1e-10
    print("PASS criterion 3: sum rate vs loop oracle and phase invariance")


def test_criterion_04_benchmark_vs_oracle():
    """Alternating optimization reaches 97% of the exhaustive oracle."""
    t0 = time.perf_counter()
    cfg = SystemConfig(M=2, N=2, K=2, pt_db=10.0)
    alt_rates, oracle_rates = [], []
    for i in range(50):
        channels = generate_channels(cfg, np.random.default_rng(
            derive_seed(5440, i)))
        alt_rates.append(alternating_optimize(channels, cfg).sum_rate)
        oracle_rates.append(brute_force_oracle(channels, cfg, 32).sum_rate)
    ratio = np.mean(alt_rates) / np.mean(oracle_rates)
    elapsed = time.perf_counter() - t0
    assert ratio >= 0.97, f"mean ratio {ratio:.4f}"
    assert elapsed < 300.0, f"benchmark-vs-oracle took {elapsed:.0f}s"
    print(f"PASS criterion 4: alternating/oracle mean ratio {ratio:.4f} "
          f"({elapsed:.0f}s)")


def test_criterion_05_learning_progress():
    """Rewards improve from the first to the last tenth of a run."""
    t0 = time.perf_counter()
    wins = 0
    for seed in range(5):
        cfg = SystemConfig(M=4, N=4, K=4, pt_db=5.0,
                           seed=derive_seed(5150, seed))
        channels = generate_channels(cfg, np.random.default_rng(cfg.seed))
        hyper = Hyperparams(episodes=1, steps_per_episode=5000)
        summary = optimize_for_channels(cfg, hyper, channels,
                                        np.random.default_rng(
                                            derive_seed(5151, seed)))
        r = summary.instant_rewards
        wins += r[-500:].mean() > r[:500].mean()
    elapsed = time.perf_counter() - t0
    assert wins >= 4, f"only {wins}/5 seeds improved"
    assert elapsed < 900.0, f"learning-progress check took {elapsed:.0f}s"
    print(f"PASS criterion 5: learning progress in {wins}/5 seeds "
          f"({elapsed:.0f}s)")


def test_criterion_06_comparability_with_alternating():
    """Desk-scale learner reaches 80% of the alternating benchmark."""
    drl, alt = [], []
    for real in range(10):
        cfg = SystemConfig(M=2, N=4, K=2, pt_db=10.0,
                           seed=derive_seed(42, real))
        channels = generate_channels(cfg, np.random.default_rng(cfg.seed))
        hyper = Hyperparams(episodes=1, steps_per_episode=5000)
        summary = optimize_for_channels(cfg, hyper, channels,
                                        np.random.default_rng(cfg.seed + 2))
        drl.append(summary.best_sum_rate)
        alt.append(alternating_optimize(channels, cfg).sum_rate)
    ratio = np.mean(drl) / np.mean(alt)
    assert ratio >= 0.80, f"mean ratio {ratio:.4f}"
    print(f"PASS criterion 6: learner/alternating mean ratio {ratio:.4f}")


def test_criterion_07_power_monotonicity(tmp_path):
    """Mean sum rate is non-decreasing in the power budget."""
    pt_values = [0.0, 5.0, 10.0, 15.0, 20.0]
    spec = ExperimentSpec(
        cfg=SystemConfig(M=4, N=4, K=4, pt_db=10.0, seed=5770),
        hyper=Hyperparams(episodes=1, steps_per_episode=1500),
        pt_db_values=pt_values,
        realizations=10,
        algorithms=("drl", "wmmse_alt"),
        out_dir=str(tmp_path / "power_sweep"),
    )
    rows = run_experiment(spec)
    for algo in ("drl", "wmmse_alt"):
        means = [np.mean([r["sum_rate"] for r in rows
                          if r["algorithm"] == algo and r["pt_db"] == pt])
                 for pt in pt_values]
        assert all(a <= b + 1e-12 for a, b in zip(means, means[1:])), \
            f"{algo} means not monotone: {means}"
    print(f"PASS criterion 7: sum rate non-decreasing in power for both "
          f"algorithms")


def test_criterion_08_surface_size_monotonicity(tmp_path):
    """Mean sum rate strictly increases with the surface size."""
    n_values = [4, 8, 16]
    spec = ExperimentSpec(
        cfg=SystemConfig(M=4, N=4, K=4, pt_db=10.0, seed=5880),
        hyper=Hyperparams(episodes=1, steps_per_episode=10),
        n_values=n_values,
        realizations=20,
        algorithms=("wmmse_alt",),
        out_dir=str(tmp_path / "size_sweep"),
    )
    rows = run_experiment(spec)
    means = [np.mean([r["sum_rate"] for r in rows if r["N"] == n])
             for n in n_values]
    assert means[0] < means[1] < means[2], f"means not increasing: {means}"
    print(f"PASS criterion 8: mean sum rate strictly increasing in N "
          f"({[round(m, 2) for m in means]})")


def test_criterion_09_learning_rate_sensitivity():
    """The default learning rate beats the over-large one.

    A 5000-step horizon is needed for the ordering to emerge: the large
    rate learns faster at first and only loses ground once its updates
    start oscillating.
    """
    finals = {}
    for mu in (0.001, 0.01):
        vals = []
        for seed in range(3):
            cfg = SystemConfig(M=4, N=4, K=4, pt_db=10.0,
                               seed=derive_seed(5990, seed))
            channels = generate_channels(cfg, np.random.default_rng(cfg.seed))
            hyper = Hyperparams(episodes=1, steps_per_episode=5000,
                                mu_c=mu, mu_a=mu)
            summary = optimize_for_channels(cfg, hyper, channels,
                                            np.random.default_rng(
                                                derive_seed(5991, seed)))
            vals.append(summary.average_rewards[-1])
        finals[mu] = float(np.mean(vals))
    assert finals[0.001] >= finals[0.01], f"final averages: {finals}"
    print(f"PASS criterion 9: final average reward {finals[0.001]:.3f} at "
          f"mu=0.001 >= {finals[0.01]:.3f} at mu=0.01")


def test_criterion_10_cli_determinism(tmp_path):
    """Repeated CLI runs with one seed write byte-identical files."""
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "M": 2, "N": 2, "K": 2, "pt_db": 10.0, "episodes": 1, "steps": 50,
        "pt_db_values": [0.0, 10.0], "realizations": 2,
        "algorithms": ["drl", "wmmse_alt", "random"],
    }))

    def tree(root):
        return {name: (root / name).read_bytes()
                for name in sorted(os.listdir(root))}

    trains = []
    for name in ("t1", "t2"):
        out = tmp_path / name
        assert cli_main(["train", "--config", str(config), "--seed", "7",
                         "--out", str(out)]) == 0
        trains.append(tree(out))
    assert trains[0] == trains[1]

    sweeps = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        assert cli_main(["sweep", "--config", str(config), "--seed", "9",
                         "--out", str(out)]) == 0
        sweeps.append(tree(out))
    assert sweeps[0] == sweeps[1]
    print("PASS criterion 10: byte-identical CLI outputs on repeated runs")
