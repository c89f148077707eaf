"""Reward-curve and sum-rate aggregation helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def average_reward(instant) -> np.ndarray:
    """Running average of a reward series: entry ``i`` is the mean of the
    first ``i + 1`` instant rewards."""
    instant = np.asarray(instant, dtype=float)
    if instant.ndim != 1 or instant.size == 0:
        raise ValueError("need a non-empty 1-D reward series")
    return np.cumsum(instant) / np.arange(1, instant.size + 1)


def sum_rate_cdf(values, grid=None):
    """Empirical CDF of a sample of sum rates.

    Returns ``(x, F)`` where ``F[i]`` is the fraction of samples less than
    or equal to ``x[i]``.  With ``grid=None`` the CDF is tabulated at the
    sorted sample values; otherwise at the given query points.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one value")
    values = np.sort(values.ravel())
    x = values if grid is None else np.asarray(grid, dtype=float)
    f = np.searchsorted(values, x, side="right") / values.size
    return x, f


@dataclass
class RunSummary:
    """Everything one training run produced."""

    instant_rewards: np.ndarray
    average_rewards: np.ndarray
    best_sum_rate: float
    best_action: object
    wall_seconds: float
    seed: int
    config: dict
    episodes: list = field(default_factory=list, repr=False)
    agent: object = field(default=None, repr=False)
