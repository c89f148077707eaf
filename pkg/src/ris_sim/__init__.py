"""Joint transmit beamforming and reflecting-surface phase design.

A numpy testbed for the downlink of a multiuser MISO system assisted by a
reconfigurable reflecting surface: a deterministic policy-gradient
optimizer built on a hand-rolled dense-network core, classical
alternating-optimization baselines (WMMSE / zero forcing plus coordinate
ascent on the phases), a brute-force phase-grid oracle, and a seeded
experiment harness that writes plot-ready CSVs.
"""

from .agent import Agent, EpisodeLog, Hyperparams, ReplayBuffer, optimize_for_channels, train
from .baselines import (
    BenchResult,
    ZFInfeasibleError,
    alternating_optimize,
    brute_force_oracle,
    phase_ascent,
    random_phase_baseline,
    wmmse_beamforming,
    zf_beamforming,
)
from .env import (
    ChannelSet,
    JointAction,
    SystemConfig,
    build_state,
    decode_action,
    effective_channel,
    effective_channels,
    encode_action,
    env_step,
    generate_channels,
    init_action,
    project_phases,
    project_power,
    sinr,
    sum_rate,
)
from .experiments import ExperimentSpec, derive_seed, load_config, run_experiment
from .metrics import RunSummary, average_reward, sum_rate_cdf
from .nn import AdamState, DenseNet, Whitener, adam_step, lr_current

__version__ = "0.1.0"
