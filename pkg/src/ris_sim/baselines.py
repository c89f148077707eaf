"""Classical baselines and ground-truth oracles.

Sum-rate WMMSE beamforming on the composite channel (block-coordinate
receiver/weight/beamformer updates with a bisected power multiplier),
unit-modulus phase optimization by incumbent-inclusive coordinate ascent,
the alternating loop over the two, a zero-forcing variant, a random-phase
lower bound, and an exhaustive phase-grid oracle for tiny instances.

The WMMSE core is written over a leading batch axis so the oracle can
sweep a whole phase grid in a handful of array operations; the
single-instance entry point is the same code at batch size one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import ChannelSet, SystemConfig, effective_channels, init_action

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class ZFInfeasibleError(ValueError):
    """Raised when the stacked composite channel is rank deficient."""


@dataclass
class BenchResult:
    G: np.ndarray
    phases: np.ndarray
    sum_rate: float
    iterations: int
    trace: np.ndarray = field(default=None, repr=False)


def _batch_rates(amp: np.ndarray, noise_power: float) -> np.ndarray:
    """Sum rates from received amplitudes ``amp[b, k, j] = h_k . g_j``."""
    power = np.abs(amp) ** 2
    signal = np.diagonal(power, axis1=1, axis2=2)
    interference = power.sum(axis=2) - signal
    return np.log2(1.0 + signal / (interference + noise_power)).sum(axis=1)


def _power_given_mu(coef, lam, mu):
    """Total transmit power of the multiplier-regularized beamformer."""
    denom = (lam[:, :, None] + mu[:, None, None]) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(coef > 0.0, coef / denom, 0.0)
    return terms.sum(axis=(1, 2))


def _mrt_init(H, p_t):
    """Matched-filter columns at equal power split (zero channels stay dark)."""
    B, K, M = H.shape
    G = np.conj(np.transpose(H, (0, 2, 1)))
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    return np.where(norms > 0.0, G / np.where(norms > 0.0, norms, 1.0), 0.0) \
        * np.sqrt(p_t / K)


def _wmmse_batch(H, p_t, noise_power, iters=200, tol=1e-6, G_init=None):
    """Block-coordinate WMMSE over a batch of instances.

    Parameters
    ----------
    H : (B, K, M) complex
        Composite row channels, one instance per batch entry.
    G_init : optional (B, M, K) or (M, K)
        Warm start; defaults to matched filtering at equal power.

    Returns
    -------
    G : (B, M, K) beamformers with total power at most ``p_t``.
    trace : (n + 1, B) sum rates, entry 0 at the start and one per
        iteration after it; non-decreasing along axis 0.
    """
    H = np.asarray(H, dtype=complex)
    B, K, M = H.shape
    if G_init is None:
        G = _mrt_init(H, p_t)
    else:
        G = np.asarray(G_init, dtype=complex)
        if G.ndim == 2:
            G = np.broadcast_to(G, (B, M, K)).copy()
    Hc = np.conj(H)
    trace = [_batch_rates(H @ G, noise_power)]
    for _ in range(iters):
        amp = H @ G
        diag = np.diagonal(amp, axis1=1, axis2=2)
        total = (np.abs(amp) ** 2).sum(axis=2) + noise_power
        u = diag / total
        mse = 1.0 - (np.conj(u) * diag).real
        w = 1.0 / mse
        scale = w * np.abs(u) ** 2
        A = np.einsum("bk,bkm,bkn->bmn", scale, Hc, H)
        R = np.einsum("bk,bkm->bmk", w * u, Hc)
        lam, Q = np.linalg.eigh(A)
        lam = np.maximum(lam, 0.0)
        QhR = np.conj(np.transpose(Q, (0, 2, 1))) @ R
        coef = np.abs(QhR) ** 2

        mu = np.zeros(B)
        over = _power_given_mu(coef, lam, mu) > p_t
        if over.any():
            hi = np.ones(B)
            for _ in range(200):
                still = over & (_power_given_mu(coef, lam, hi) > p_t)
                if not still.any():
                    break
                hi = np.where(still, 2.0 * hi, hi)
            lo = np.zeros(B)
            for _ in range(90):
                mid = 0.5 * (lo + hi)
                too_big = _power_given_mu(coef, lam, mid) > p_t
                lo = np.where(too_big, mid, lo)
                hi = np.where(too_big, hi, mid)
            mu = np.where(over, 0.5 * (lo + hi), 0.0)

        shift = lam + mu[:, None]
        scaled = np.where(shift[:, :, None] > 0.0, QhR / np.where(
            shift[:, :, None] > 0.0, shift[:, :, None], 1.0), 0.0)
        G = Q @ scaled
        trace.append(_batch_rates(H @ G, noise_power))
        if np.max(np.abs(trace[-1] - trace[-2])) < tol:
            break
    return G, np.array(trace)


def wmmse_beamforming(h_eff, p_t, noise_power, iters=200, tol=1e-6,
                      g_init=None, return_trace=False):
    """Sum-rate WMMSE beamformer for given composite channels.

    ``h_eff`` stacks the K row channels (K x M).  Iterates scalar MMSE
    receivers, inverse-MSE weights and the multiplier-regularized
    beamformer until the objective moves less than ``tol`` or ``iters``
    is reached.  The achieved sum rate never decreases along the run.
    All-zero channels yield the zero beamformer.
    """
    h_eff = np.asarray(h_eff, dtype=complex)
    if not np.any(h_eff):
        G = np.zeros((h_eff.shape[1], h_eff.shape[0]), dtype=complex)
        return (G, np.zeros(1)) if return_trace else G
    G, trace = _wmmse_batch(h_eff[None], p_t, noise_power, iters=iters,
                            tol=tol, G_init=g_init)
    return (G[0], trace[:, 0]) if return_trace else G[0]


def zf_beamforming(h_eff, p_t):
    """Zero-forcing beamformer: pseudo-inverse directions with the power
    budget split equally across users.  Requires the stacked channel to
    have full row rank."""
    H = np.asarray(h_eff, dtype=complex)
    K = H.shape[0]
    gram = H @ np.conj(H.T)
    if np.linalg.matrix_rank(H) < K:
        raise ZFInfeasibleError("composite channel stack is rank deficient")
    P = np.conj(H.T) @ np.linalg.inv(gram)
    cols = P / np.linalg.norm(P, axis=0, keepdims=True)
    return cols * np.sqrt(p_t / K)


def _grid_rates(base, delta, thetas, noise_power):
    """Rates of ``base + e^{j theta} * delta`` for every candidate angle."""
    amp = base[None, :, :] + np.exp(1j * thetas)[:, None, None] * delta[None, :, :]
    return _batch_rates(amp, noise_power)


def phase_ascent(G, phases, channels: ChannelSet, cfg: SystemConfig,
                 sweeps=1, grid_points=64, refine_iters=40):
    """Coordinate ascent over the unit-modulus phases with ``G`` fixed.

    Each coordinate is optimized by a uniform angular grid followed by
    golden-section refinement around the best grid point; the incumbent
    is always a candidate, so no single-coordinate update can lower the
    sum rate.
    """
    phases = np.array(phases, dtype=complex)
    H1G = channels.H1 @ np.asarray(G)               # (N, K)
    amp = (channels.H2 * phases[None, :]) @ H1G     # (K, K)
    noise = cfg.noise_power
    grid = np.linspace(0.0, 2.0 * np.pi, grid_points, endpoint=False)
    for _ in range(sweeps):
        for n in range(cfg.N):
            delta = np.outer(channels.H2[:, n], H1G[n])
            base = amp - phases[n] * delta
            best_phi = phases[n]
            best_val = _grid_rates(base, delta, np.array([np.angle(best_phi)]),
                                   noise)[0]
            vals = _grid_rates(base, delta, grid, noise)
            gi = int(np.argmax(vals))
            if vals[gi] > best_val:
                best_phi, best_val = np.exp(1j * grid[gi]), vals[gi]
            span = 2.0 * np.pi / grid_points
            lo, hi = grid[gi] - span, grid[gi] + span
            f1 = hi - _GOLDEN * (hi - lo)
            f2 = lo + _GOLDEN * (hi - lo)
            v1 = _grid_rates(base, delta, np.array([f1]), noise)[0]
            v2 = _grid_rates(base, delta, np.array([f2]), noise)[0]
            for _ in range(refine_iters):
                if v1 >= v2:
                    hi, f2, v2 = f2, f1, v1
                    f1 = hi - _GOLDEN * (hi - lo)
                    v1 = _grid_rates(base, delta, np.array([f1]), noise)[0]
                else:
                    lo, f1, v1 = f1, f2, v2
                    f2 = lo + _GOLDEN * (hi - lo)
                    v2 = _grid_rates(base, delta, np.array([f2]), noise)[0]
            t_best, v_best = (f1, v1) if v1 >= v2 else (f2, v2)
            if v_best > best_val:
                best_phi = np.exp(1j * t_best)
            phases[n] = best_phi
            amp = base + best_phi * delta
    return phases


_RESTART_SEED = 0x5EED


def _restart_phases(channels: ChannelSet, cfg: SystemConfig, restarts: int,
                    probes: int) -> list:
    """Trajectory starting points: unit phases plus the best of a batched
    random-phase probe sweep (fixed seed, so runs are reproducible)."""
    starts = [np.ones(cfg.N, dtype=complex)]
    if restarts > 1:
        rng = np.random.default_rng(_RESTART_SEED)
        phis = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(probes, cfg.N)))
        _, trace = _wmmse_batch(_phase_grid_channels(phis, channels),
                                cfg.p_t, cfg.noise_power, iters=60)
        order = np.argsort(-trace[-1], kind="stable")
        starts.extend(phis[j] for j in order[:restarts - 1])
    return starts


def alternating_optimize(channels: ChannelSet, cfg: SystemConfig,
                         outer_iters=20, tol=1e-6, beamformer="wmmse",
                         sweeps=1, restarts=4, probes=32) -> BenchResult:
    """Alternate beamformer and phase updates; return the best trajectory.

    The joint landscape has poor local basins a single trajectory can
    fall into, so ``restarts`` trajectories are run from the starting
    points of :func:`_restart_phases` and the best visited pair wins.
    Within a trajectory the beamformer block warm-starts from the
    incumbent, and with ``beamformer="wmmse"`` both blocks ascend the sum
    rate, so the reported trace (of the winning trajectory) is
    non-decreasing; ``"zf"`` swaps in the fixed zero-forcing beamformer,
    which carries no monotonicity guarantee.  A trajectory stops once an
    outer iteration improves on the incumbent by less than ``tol``.
    ``iterations`` counts outer iterations over all trajectories.
    """
    from .env import sum_rate

    best = None
    best_trace = None
    total_iters = 0
    start_G = init_action(cfg).G
    for phases in _restart_phases(channels, cfg, restarts, probes):
        G = None
        prev = sum_rate(start_G, phases, channels, cfg.noise_power)
        trace = []
        local = None
        for _ in range(outer_iters):
            h_eff = effective_channels(phases, channels)
            if beamformer == "wmmse":
                G = wmmse_beamforming(h_eff, cfg.p_t, cfg.noise_power, g_init=G)
            elif beamformer == "zf":
                G = zf_beamforming(h_eff, cfg.p_t)
            else:
                raise ValueError(f"unknown beamformer {beamformer!r}")
            phases = phase_ascent(G, phases, channels, cfg, sweeps=sweeps)
            rate = sum_rate(G, phases, channels, cfg.noise_power)
            trace.append(rate)
            if local is None or rate > local[2]:
                local = (G, phases, rate)
            if rate - prev < tol:
                break
            prev = rate
        total_iters += len(trace)
        if best is None or local[2] > best[2]:
            best = local
            best_trace = np.array(trace)
    return BenchResult(G=best[0], phases=best[1], sum_rate=best[2],
                       iterations=total_iters, trace=best_trace)


def _phase_grid_channels(phis: np.ndarray, channels: ChannelSet) -> np.ndarray:
    """Composite channels (B, K, M) for a batch of phase vectors (B, N)."""
    return (phis[:, None, :] * channels.H2[None, :, :]) @ channels.H1


def brute_force_oracle(channels: ChannelSet, cfg: SystemConfig, levels: int,
                       wmmse_iters=200, wmmse_tol=1e-6, chunk=2048) -> BenchResult:
    """Exhaustive search over the uniform phase grid.

    Every one of the ``levels**N`` phase combinations is paired with a
    converged WMMSE beamformer and the best pair wins (earliest grid
    index on ties).  Refuses instances with ``N * log2(levels) > 20``.
    """
    if cfg.N * np.log2(levels) > 20.0 + 1e-9:
        raise ValueError(
            f"grid of {levels}**{cfg.N} phase combinations is over budget")
    total = levels ** cfg.N
    weights = levels ** np.arange(cfg.N - 1, -1, -1, dtype=np.int64)
    best_rate = -np.inf
    best = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // weights[None, :]) % levels
        phis = np.exp(2j * np.pi * digits / levels)
        H = _phase_grid_channels(phis, channels)
        G, trace = _wmmse_batch(H, cfg.p_t, cfg.noise_power,
                                iters=wmmse_iters, tol=wmmse_tol)
        rates = trace[-1]
        j = int(np.argmax(rates))
        if rates[j] > best_rate:
            best_rate = float(rates[j])
            best = (G[j], phis[j])
    return BenchResult(G=best[0], phases=best[1], sum_rate=best_rate,
                       iterations=total, trace=np.array([best_rate]))


def random_phase_baseline(channels: ChannelSet, cfg: SystemConfig, draws: int,
                          rng: np.random.Generator, wmmse_iters=200,
                          wmmse_tol=1e-6) -> BenchResult:
    """Best of ``draws`` uniformly random phase vectors, each with a
    WMMSE beamformer.  A cheap lower bound for sanity checks."""
    if draws < 1:
        raise ValueError("need at least one draw")
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(draws, cfg.N))
    phis = np.exp(1j * angles)
    H = _phase_grid_channels(phis, channels)
    G, trace = _wmmse_batch(H, cfg.p_t, cfg.noise_power,
                            iters=wmmse_iters, tol=wmmse_tol)
    rates = trace[-1]
    j = int(np.argmax(rates))
    return BenchResult(G=G[j], phases=phis[j], sum_rate=float(rates[j]),
                       iterations=draws, trace=np.maximum.accumulate(rates))
