"""Core value types shared by every other module.

Units
-----
Loads and transformer capacities are in kW. Storage decisions ``x`` and
state of charge ``s`` are energies in kWh per slot, so a load ``l`` (kW) is
compared against ``x`` after multiplying by the slot length in hours.
Emission costs are in kg/MWh, which is why every emission total divides by
1000 when multiplied by kWh.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

VIOLATION_TOL = 1e-6


class ConfigurationError(ValueError):
    """Raised for inconsistent parameters or unknown names."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    horizon_days: int = 1
    slots_per_day: int = 288
    slot_minutes: int = 5

    def __post_init__(self):
        if self.slots_per_day <= 0 or self.slot_minutes <= 0 or self.horizon_days <= 0:
            raise ConfigurationError("time grid fields must be positive")
        if self.slots_per_day * self.slot_minutes != 1440:
            raise ConfigurationError(
                f"{self.slots_per_day} slots of {self.slot_minutes} min do not cover a day"
            )

    @property
    def slot_hours(self) -> float:
        return self.slot_minutes / 60.0

    @property
    def slots_per_hour(self) -> int:
        return 60 // self.slot_minutes

    @property
    def n_slots(self) -> int:
        return self.slots_per_day * self.horizon_days


@dataclass(frozen=True)
class Transformer:
    id: str
    capacity_kw: float
    overload_margin_kw: float = 0.0

    def __post_init__(self):
        if self.capacity_kw <= 0:
            raise ConfigurationError(f"transformer {self.id}: capacity must be positive")
        if not 0 <= self.overload_margin_kw < self.capacity_kw:
            raise ConfigurationError(
                f"transformer {self.id}: overload margin must lie in [0, capacity)"
            )

    @classmethod
    def with_margin_fraction(cls, id: str, capacity_kw: float, fraction: float = 0.01):
        return cls(id, capacity_kw, fraction * capacity_kw)


@dataclass(frozen=True)
class StorageUnit:
    capacity_kwh: float = 0.0
    rate_limit_kw: float = 0.0
    initial_soc_kwh: float | None = None

    def __post_init__(self):
        if self.capacity_kwh < 0 or self.rate_limit_kw < 0:
            raise ConfigurationError("storage capacity and rate limit must be nonnegative")
        if self.initial_soc_kwh is None:
            object.__setattr__(self, "initial_soc_kwh", self.capacity_kwh / 2)
        if not 0 <= self.initial_soc_kwh <= self.capacity_kwh:
            raise ConfigurationError("initial state of charge outside [0, capacity]")

    def rate_per_slot(self, slot_hours: float) -> float:
        """Largest |x| (kWh) allowed in one slot."""
        return self.rate_limit_kw * slot_hours


@dataclass(frozen=True)
class LoadSeries:
    transformer_id: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.values.ndim != 1:
            raise ValueError("load series must be one-dimensional")
        if np.any(self.values < 0):
            raise ValueError("load values must be nonnegative; use LoadSeries.from_raw")

    @classmethod
    def from_raw(cls, transformer_id: str, values) -> "LoadSeries":
        """Clamp net-metered (negative) samples to zero and log how many."""
        arr = np.asarray(values, dtype=float)
        n_neg = int(np.count_nonzero(arr < 0))
        if n_neg:
            logger.info("transformer %s: clamped %d negative load samples", transformer_id, n_neg)
        return cls(transformer_id, np.maximum(arr, 0.0))

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class FuelType:
    name: str
    emission_factor_kg_per_mwh: float

    def __post_init__(self):
        if self.emission_factor_kg_per_mwh < 0:
            raise ConfigurationError(f"fuel {self.name}: negative emission factor")


# ISO New England emission factors, kg CO2 per MWh.
DEFAULT_FUELS: tuple[FuelType, ...] = (
    FuelType("coal", 962.97),
    FuelType("gas", 395.53),
    FuelType("oil", 933.94),
    FuelType("nuclear", 0.0),
    FuelType("hydro", 0.0),
    FuelType("solar_wind", 0.0),
)


@dataclass(frozen=True)
class MarginalFactorSeries:
    """Per-fuel marginal weights, ``weights[f, t]``."""

    fuels: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(np.atleast_2d(self.weights))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "fuels", tuple(self.fuels))
        if w.shape[0] != len(self.fuels):
            raise ValueError("one weight row per fuel required")
        if np.any(w < 0):
            raise ValueError("marginal factors must be nonnegative")
        if w.shape[1] and np.max(np.abs(w.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("marginal factors must sum to one at every slot")

    @classmethod
    def constant(cls, shares: dict[str, float], n_slots: int) -> "MarginalFactorSeries":
        names = tuple(shares)
        w = np.repeat(np.array([[shares[k]] for k in names], dtype=float), n_slots, axis=1)
        return cls(names, w)

    @property
    def n_slots(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Schedule:
    """Charge (+) / discharge (-) energy per slot for a fleet of storage units.

    ``x`` has shape (n, T); ``soc`` has shape (n, T + 1) with ``soc[:, 0]`` the
    level at the start of the first slot.
    """

    x: np.ndarray
    initial_soc: np.ndarray
    soc: np.ndarray = field(init=False)

    def __post_init__(self):
        x = _frozen(np.atleast_2d(self.x))
        s0 = _frozen(np.atleast_1d(self.initial_soc))
        if s0.shape[0] != x.shape[0]:
            raise ValueError("one initial state of charge per unit")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "initial_soc", s0)
        object.__setattr__(self, "soc", _frozen(state_of_charge(s0, x)))

    @property
    def aggregate(self) -> np.ndarray:
        """x(t) summed over units."""
        return self.x.sum(axis=0)

    @property
    def n_slots(self) -> int:
        return self.x.shape[1]


def state_of_charge(initial_soc, x) -> np.ndarray:
    """Forward accumulation s(t+1) = s(t) + x(t), one row per unit."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s0 = np.atleast_1d(np.asarray(initial_soc, dtype=float))
    # add.accumulate runs strictly left to right, so this is bit-equal to a loop
    return np.add.accumulate(np.concatenate([s0[:, None], x], axis=1), axis=1)


def emission_cost_series(factors: MarginalFactorSeries, fuels: Sequence[FuelType]) -> np.ndarray:
    """Marginal carbon intensity c(t) = sum_f w_f * lambda_f(t), kg/MWh."""
    table = {f.name: f.emission_factor_kg_per_mwh for f in fuels}
    missing = [name for name in factors.fuels if name not in table]
    if missing:
        raise ConfigurationError(f"no emission factor for fuel(s): {', '.join(missing)}")
    w = np.array([table[name] for name in factors.fuels])
    return w @ factors.weights


def schedule_emission_delta(schedule: Schedule | np.ndarray, cost) -> float:
    """Change in grid emissions (kg) caused by a schedule; negative is a reduction."""
    x = schedule.aggregate if isinstance(schedule, Schedule) else np.atleast_2d(schedule).sum(axis=0)
    cost = np.asarray(cost, dtype=float)
    if x.shape != cost.shape:
        raise ValueError(f"schedule has {x.shape[0]} slots, cost has {cost.shape[0]}")
    return float(cost @ x) / 1000.0


def size_storage(load: LoadSeries | np.ndarray, hours: float) -> float:
    """Battery capacity (kWh) that sustains the peak load for ``hours``."""
    values = load.values if isinstance(load, LoadSeries) else np.asarray(load, dtype=float)
    if values.size == 0:
        raise ValueError("cannot size storage from an empty load series")
    if hours < 0:
        raise ValueError("hours must be nonnegative")
    return float(hours * values.max())


@dataclass(frozen=True)
class Violation:
    unit: int
    slot: int
    constraint: str
    amount: float

    def __str__(self):
        return f"unit {self.unit} slot {self.slot}: {self.constraint} violated by {self.amount:.3g}"


def validate_schedule(
    schedule: Schedule,
    loads,
    transformers: Transformer | Sequence[Transformer],
    storages: StorageUnit | Sequence[StorageUnit],
    boundary_soc=None,
    slot_hours: float = 1.0,
    tol: float = VIOLATION_TOL,
) -> list[Violation]:
    """Check a schedule against the physical limits for the given actual loads.

    Constraint labels: ``soc_recursion``, ``soc_upper`` and ``soc_lower``
    (state of charge within [0, B]), ``rate``, ``discharge_load`` (discharge
    no larger than the load), ``charge_headroom`` (charging only up to
    ``C - l - eta`` and never when that headroom is negative) and
    ``boundary`` (first and last SoC equal ``boundary_soc``; skipped when
    ``boundary_soc`` is None).
    """
    if isinstance(transformers, Transformer):
        transformers = [transformers]
    if isinstance(storages, StorageUnit):
        storages = [storages]
    x = schedule.x
    soc = schedule.soc
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    n, T = x.shape
    if loads.shape != (n, T) or len(transformers) != n or len(storages) != n:
        raise ValueError("schedule, loads and fleet disagree on shape")

    cap = np.array([st.capacity_kwh for st in storages])[:, None]
    rate = np.array([st.rate_per_slot(slot_hours) for st in storages])[:, None]
    headroom = np.array([(tr.capacity_kw - tr.overload_margin_kw) for tr in transformers])[:, None]
    load_e = loads * slot_hours
    headroom_e = np.maximum(headroom * slot_hours - load_e, 0.0)

    checks = {
        "soc_recursion": np.abs(state_of_charge(schedule.initial_soc, x) - soc),
        "soc_upper": soc - cap,
        "soc_lower": -soc,
        "rate": np.abs(x) - rate,
        "discharge_load": -x - load_e,
        "charge_headroom": x - headroom_e,
    }
    out: list[Violation] = []
    for name, excess in checks.items():
        for i, t in zip(*np.nonzero(excess > tol)):
            out.append(Violation(int(i), int(t), name, float(excess[i, t])))
    if boundary_soc is not None:
        b = np.broadcast_to(np.asarray(boundary_soc, dtype=float), (n,))
        for i in range(n):
            for slot, level in ((0, soc[i, 0]), (T, soc[i, T])):
                if abs(level - b[i]) > tol:
                    out.append(Violation(i, slot, "boundary", float(abs(level - b[i]))))
    return out
