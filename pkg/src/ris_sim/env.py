"""System model for a RIS-assisted multiuser MISO downlink.

Channel generation, composite-channel evaluation, SINR and sum-rate
metrics, the two feasibility projections (transmit power, unit-modulus
phases), flat real encodings of states and actions, and the one-step
environment transition consumed by the learning agent and the classical
baselines.

Conventions
-----------
The base station has ``M`` antennas and serves ``K`` single-antenna users
through a reflecting surface with ``N`` elements.  ``H1`` (N x M) is the
BS-to-surface channel, ``H2[k]`` (length N) the surface-to-user-k channel.
The composite row channel seen by user k is ``H2[k]^T diag(phases) H1``
(plain transpose, no conjugation).  The flat action layout is
``[Re(G) column-major, Im(G) column-major, Re(phases), Im(phases)]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, power budget and seed of one downlink instance.

    ``pt_db`` is the transmit power budget in dB relative to the noise
    power; the linear budget is ``noise_power * 10**(pt_db / 10)``.
    """

    M: int
    N: int
    K: int
    pt_db: float = 10.0
    noise_power: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.M >= self.K >= 1):
            raise ValueError(f"need M >= K >= 1, got M={self.M}, K={self.K}")
        if self.N < 1:
            raise ValueError(f"need N >= 1, got N={self.N}")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")

    @property
    def p_t(self) -> float:
        """Transmit power budget in linear scale."""
        return self.noise_power * 10.0 ** (self.pt_db / 10.0)

    @property
    def state_dim(self) -> int:
        M, N, K = self.M, self.N, self.K
        return 2 * K + 2 * K * K + 2 * N + 2 * M * K + 2 * N * M + 2 * K * N

    @property
    def action_dim(self) -> int:
        return 2 * self.M * self.K + 2 * self.N


@dataclass
class ChannelSet:
    """One fading realization: ``H1`` is N x M, ``H2`` stacks the K
    surface-to-user vectors as rows (K x N)."""

    H1: np.ndarray
    H2: np.ndarray

    def __post_init__(self):
        self.H1 = np.asarray(self.H1, dtype=complex)
        self.H2 = np.asarray(self.H2, dtype=complex)
        if self.H1.ndim != 2 or self.H2.ndim != 2:
            raise ValueError("H1 and H2 must be 2-D")
        if self.H2.shape[1] != self.H1.shape[0]:
            raise ValueError(
                f"inconsistent N: H1 is {self.H1.shape}, H2 is {self.H2.shape}"
            )
        if not (np.isfinite(self.H1).all() and np.isfinite(self.H2).all()):
            raise ValueError("channel entries must be finite")


@dataclass
class JointAction:
    """Beamforming matrix ``G`` (M x K) plus the diagonal of the phase
    shift matrix (length-N unit-modulus vector)."""

    G: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=complex)
        self.phases = np.asarray(self.phases, dtype=complex)
        if self.G.ndim != 2 or self.phases.ndim != 1:
            raise ValueError("G must be a matrix and phases a vector")


def generate_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw a Rayleigh-fading realization.

    Every entry is i.i.d. circularly-symmetric complex Gaussian with zero
    mean and unit variance (real and imaginary parts each of variance 1/2).
    ``H1`` is drawn first, then the user channels row by row, so the same
    generator state always yields the same realization.
    """
    shape1 = (cfg.N, cfg.M)
    shape2 = (cfg.K, cfg.N)
    h1 = (rng.standard_normal(shape1) + 1j * rng.standard_normal(shape1)) / np.sqrt(2)
    h2 = (rng.standard_normal(shape2) + 1j * rng.standard_normal(shape2)) / np.sqrt(2)
    return ChannelSet(H1=h1, H2=h2)


def effective_channel(phases: np.ndarray, H1: np.ndarray, h_k2: np.ndarray) -> np.ndarray:
    """Composite row channel ``h_k2^T diag(phases) H1`` for one user.

    Uses the plain transpose of ``h_k2`` (no conjugation).  Returns a
    length-M complex vector.
    """
    phases = np.asarray(phases)
    H1 = np.asarray(H1)
    h_k2 = np.asarray(h_k2)
    if h_k2.shape != (H1.shape[0],) or phases.shape != (H1.shape[0],):
        raise ValueError(
            f"shape mismatch: H1 {H1.shape}, h_k2 {h_k2.shape}, phases {phases.shape}"
        )
    return (h_k2 * phases) @ H1


def effective_channels(phases: np.ndarray, channels: ChannelSet) -> np.ndarray:
    """All K composite row channels stacked into a K x M matrix."""
    return (channels.H2 * phases[None, :]) @ channels.H1


def sinr(G, phases, channels: ChannelSet, k: int, noise_power: float) -> float:
    """Signal-to-interference-plus-noise ratio of user ``k`` (0-based)."""
    h = effective_channel(phases, channels.H1, channels.H2[k])
    amp = h @ np.asarray(G)
    power = np.abs(amp) ** 2
    interference = power.sum() - power[k]
    return float(power[k] / (interference + noise_power))


def sum_rate(G, phases, channels: ChannelSet, noise_power: float) -> float:
    """Downlink sum rate ``sum_k log2(1 + sinr_k)`` in bits/s/Hz."""
    amp = effective_channels(phases, channels) @ np.asarray(G)
    power = np.abs(amp) ** 2
    signal = np.diagonal(power)
    interference = power.sum(axis=1) - signal
    return float(np.log2(1.0 + signal / (interference + noise_power)).sum())


def project_power(G_raw: np.ndarray, p_t: float) -> np.ndarray:
    """Rescale a beamformer so that ``trace(G G^H)`` equals ``p_t``.

    An all-zero input cannot be rescaled; it falls back to the identity
    beamformer of :func:`init_action` at full power.
    """
    G_raw = np.asarray(G_raw, dtype=complex)
    power = float(np.sum(np.abs(G_raw) ** 2))
    if power == 0.0:
        M, K = G_raw.shape
        G_raw = np.eye(M, K, dtype=complex)
        power = float(K)
    return G_raw * np.sqrt(p_t / power)


def project_phases(raw: np.ndarray) -> np.ndarray:
    """Normalize each entry onto the unit circle; zeros map to 1+0j."""
    raw = np.asarray(raw, dtype=complex)
    mod = np.abs(raw)
    safe = np.where(mod == 0.0, 1.0, mod)
    return np.where(mod == 0.0, 1.0 + 0.0j, raw / safe)


def encode_action(G: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Flatten (G, phases) into the length ``2MK + 2N`` real action vector.

    Layout: Re(G) column-major, Im(G) column-major, Re(phases), Im(phases).
    """
    G = np.asarray(G)
    phases = np.asarray(phases)
    return np.concatenate([
        G.real.ravel(order="F"),
        G.imag.ravel(order="F"),
        phases.real,
        phases.imag,
    ])


def decode_action(values: np.ndarray, cfg: SystemConfig) -> JointAction:
    """Rebuild a feasible :class:`JointAction` from a flat real vector.

    Both projections are applied, so the result satisfies the power and
    unit-modulus constraints for any finite input.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (cfg.action_dim,):
        raise ValueError(
            f"action vector must have shape ({cfg.action_dim},), got {values.shape}"
        )
    mk = cfg.M * cfg.K
    g_re = values[:mk].reshape((cfg.M, cfg.K), order="F")
    g_im = values[mk:2 * mk].reshape((cfg.M, cfg.K), order="F")
    ph_re = values[2 * mk:2 * mk + cfg.N]
    ph_im = values[2 * mk + cfg.N:]
    return JointAction(
        G=project_power(g_re + 1j * g_im, cfg.p_t),
        phases=project_phases(ph_re + 1j * ph_im),
    )


def build_state(prev_action: JointAction, channels: ChannelSet, cfg: SystemConfig) -> np.ndarray:
    """Assemble the flat real observation vector.

    Blocks, in order:

    1. per-user transmit power, split into the squared real and squared
       imaginary parts of ``g_k^H g_k`` (Re block then Im block, 2K entries);
    2. squared real and squared imaginary parts of every received
       amplitude ``h_k . g_n`` over the K x K user/stream grid (Re block
       row-major, then Im block, 2K^2 entries);
    3. the encoded previous action (2MK + 2N entries);
    4. real then imaginary parts of H1 (row-major) and of the stacked
       user channels H2 (row-major), 2NM + 2KN entries.

    Total length ``2K + 2K^2 + 2N + 2MK + 2NM + 2KN``.
    """
    G, phases = prev_action.G, prev_action.phases
    amp = effective_channels(phases, channels) @ G
    gram = np.einsum("mk,mk->k", G.conj(), G)
    state = np.concatenate([
        gram.real ** 2,
        gram.imag ** 2,
        (amp.real ** 2).ravel(),
        (amp.imag ** 2).ravel(),
        encode_action(G, phases),
        channels.H1.real.ravel(),
        channels.H1.imag.ravel(),
        channels.H2.real.ravel(),
        channels.H2.imag.ravel(),
    ])
    assert state.shape == (cfg.state_dim,)
    return state


def env_step(action: JointAction, channels: ChannelSet, cfg: SystemConfig):
    """Apply a feasible action: the reward is the sum rate it achieves and
    the next observation is built from it.  Deterministic for fixed
    channels (channels are held constant within an episode)."""
    reward = sum_rate(action.G, action.phases, channels, cfg.noise_power)
    return reward, build_state(action, channels, cfg)


def init_action(cfg: SystemConfig) -> JointAction:
    """Identity starting point: unit phases and the first K columns of the
    M x M identity scaled to the power budget."""
    return JointAction(
        G=project_power(np.eye(cfg.M, cfg.K, dtype=complex), cfg.p_t),
        phases=np.ones(cfg.N, dtype=complex),
    )
