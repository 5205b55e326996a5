"""Marginal fuel shares estimated from locational marginal prices.

Each fuel gets a Gaussian membership score centred on its mean cost; the
normalized scores are the probability that the fuel sits on the margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .domain import ConfigurationError, MarginalFactorSeries, TimeGrid

MARGINAL_FUELS = ("coal", "oil", "gas")


@dataclass(frozen=True)
class FuelPriceStats:
    fuel: str
    mean_cost: float
    std_cost: float

    def __post_init__(self):
        if not self.std_cost > 0:
            raise ConfigurationError(f"fuel {self.fuel}: price std must be positive")


@dataclass(frozen=True)
class LmpSeries:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("LMP values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def membership(p: float, stats: FuelPriceStats) -> float:
    if not stats.std_cost > 0:
        raise ConfigurationError(f"fuel {stats.fuel}: price std must be positive")
    z = (p - stats.mean_cost) / stats.std_cost
    return math.exp(-0.5 * z * z)


def _log_membership(prices: np.ndarray, stats: Sequence[FuelPriceStats]) -> np.ndarray:
    mu = np.array([s.mean_cost for s in stats])[:, None]
    nu = np.array([s.std_cost for s in stats])[:, None]
    return -0.5 * ((prices[None, :] - mu) / nu) ** 2


def marginal_factors(lmp: LmpSeries | np.ndarray, stats: Sequence[FuelPriceStats]) -> MarginalFactorSeries:
    """lambda_f(t) = M_f(t) / sum_f M_f(t).

    The ratio is evaluated in log space: subtracting the largest exponent
    keeps at least one term equal to 1, so a price far from every fuel mean
    still produces the limiting split instead of 0/0.
    """
    if not stats:
        raise ConfigurationError("at least one fuel is required")
    prices = lmp.values if isinstance(lmp, LmpSeries) else np.asarray(lmp, dtype=float)
    if prices.size == 0:
        raise ValueError("empty LMP series")
    logm = _log_membership(prices, stats)
    m = np.exp(logm - logm.max(axis=0, keepdims=True))
    return MarginalFactorSeries(tuple(s.fuel for s in stats), m / m.sum(axis=0, keepdims=True))


def monthly_marginal_factors(
    lmp,
    months,
    table: Mapping[int, Sequence[FuelPriceStats]],
) -> MarginalFactorSeries:
    """Marginal factors where each sample uses the fuel stats of its month.

    ``months`` gives the month number of every LMP sample; every month's row
    must list the same fuels in the same order.
    """
    prices = np.asarray(lmp.values if isinstance(lmp, LmpSeries) else lmp, dtype=float)
    months = np.asarray(months)
    if months.shape != prices.shape:
        raise ValueError("one month label per LMP sample")
    fuels = None
    weights = np.empty((0, prices.size))
    for month in np.unique(months):
        if int(month) not in table:
            raise ConfigurationError(f"no fuel price statistics for month {month}")
        stats = table[int(month)]
        names = tuple(s.fuel for s in stats)
        if fuels is None:
            fuels = names
            weights = np.empty((len(fuels), prices.size))
        elif names != fuels:
            raise ConfigurationError("fuel list differs between months")
        mask = months == month
        weights[:, mask] = marginal_factors(prices[mask], stats).weights
    return MarginalFactorSeries(fuels, weights)


def expand_to_slots(hourly, grid: TimeGrid, n_slots: int | None = None):
    """Hold each hourly value constant over the slots of that hour (last axis)."""
    if isinstance(hourly, MarginalFactorSeries):
        return MarginalFactorSeries(hourly.fuels, expand_to_slots(hourly.weights, grid, n_slots))
    hourly = np.asarray(hourly, dtype=float)
    per_hour = grid.slots_per_hour
    if n_slots is not None and hourly.shape[-1] * per_hour != n_slots:
        raise ValueError(
            f"{hourly.shape[-1]} hourly values cannot fill {n_slots} slots of {grid.slot_minutes} min"
        )
    return np.repeat(hourly, per_hour, axis=-1)
