"""Seeded synthetic stand-in for a utility's transformer-level dataset.

Per transformer the load is a sum over homes of a double-peaked daily
profile (shifted on weekends) plus a temperature-driven heating/cooling
term, multiplied by AR(1) noise, minus optional rooftop solar, clamped at
zero. Hourly LMP follows the aggregate load with occasional price spikes at
high load, so the marginal fuel mix moves with demand.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from datetime import datetime

import numpy as np
from scipy.signal import lfilter

from .carbon import FuelPriceStats
from .dataset import Dataset
from .domain import TimeGrid

STANDARD_KVA = (25.0, 37.5, 50.0, 75.0, 100.0, 167.0, 250.0, 333.0, 500.0, 750.0)


@dataclass(frozen=True)
class SyntheticSpec:
    n_transformers: int = 100
    days: int = 421
    start: str = "2022-11-06"
    homes_range: tuple[int, int] = (5, 85)
    capacities_kva: tuple[float, ...] = STANDARD_KVA
    home_kw: float = 1.0
    diurnal_amplitude: float = 1.0
    weekend_shift_hours: float = 1.5
    weekend_level: float = 1.1
    temperature_coupling: float = 0.04
    seasonal_amplitude_c: float = 11.0
    noise_level: float = 0.15
    noise_persistence: float = 0.9
    solar_fraction: float = 0.2
    solar_kw_per_home: float = 0.8
    overload_range: tuple[float, float] = (0.85, 1.3)
    slot_minutes: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_transformers < 1 or self.days < 1:
            raise ValueError("need at least one transformer and one day")
        lo, hi = self.homes_range
        if not 1 <= lo <= hi:
            raise ValueError("homes range must satisfy 1 <= low <= high")
        if min(self.capacities_kva) < 25 or max(self.capacities_kva) > 750:
            raise ValueError("transformer sizes must lie within 25-750 kVA")
        if not 0 <= self.solar_fraction <= 1 or self.noise_level < 0:
            raise ValueError("solar fraction in [0, 1] and noise level >= 0 required")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        for key in ("homes_range", "capacities_kva", "overload_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _bump(hours, centre, width):
    d = (hours - centre + 12) % 24 - 12
    return np.exp(-0.5 * (d / width) ** 2)


def daily_profile(hours: np.ndarray, weekend: np.ndarray, spec: SyntheticSpec) -> np.ndarray:
    """Per-home load multiplier: overnight base plus morning and evening peaks."""
    shift = np.where(weekend, spec.weekend_shift_hours, 0.0)
    morning = 0.55 * _bump(hours, 7.5 + shift, 1.3)
    evening = 0.9 * _bump(hours, 19.0, 2.0)
    midday = np.where(weekend, 0.25, 0.1) * _bump(hours, 13.0, 3.0)
    level = np.where(weekend, spec.weekend_level, 1.0)
    return level * (0.45 + spec.diurnal_amplitude * (morning + evening + midday))


def _ar1(rng, shape, level, persistence):
    if level == 0:
        return np.zeros(shape)
    innov = rng.standard_normal(shape) * level * np.sqrt(1 - persistence**2)
    return lfilter([1.0], [1.0, -persistence], innov, axis=-1)


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    root = np.random.SeedSequence(spec.seed)
    fleet_rng, weather_rng, noise_rng, price_rng = (np.random.default_rng(s) for s in root.spawn(4))

    grid = TimeGrid(horizon_days=spec.days, slots_per_day=1440 // spec.slot_minutes,
                    slot_minutes=spec.slot_minutes)
    start = datetime.fromisoformat(spec.start)
    S, td, n = grid.n_slots, grid.slots_per_day, spec.n_transformers
    slot = np.arange(S)
    hours = (slot % td) * grid.slot_hours
    day = slot // td
    weekday = (start.weekday() + day) % 7
    weekend = weekday >= 5
    doy = (start.timetuple().tm_yday - 1 + day) % 365

    season = np.cos(2 * np.pi * (doy - 200) / 365)  # +1 in mid July
    temperature = (
        11.0
        + spec.seasonal_amplitude_c * season
        + 4.0 * np.sin(2 * np.pi * (hours - 9.0) / 24)
        + _ar1(weather_rng, S, 3.0 * spec.noise_level / 0.15 if spec.noise_level else 0.0, 0.999)
    )

    homes = fleet_rng.integers(spec.homes_range[0], spec.homes_range[1] + 1, size=n)
    scale = fleet_rng.uniform(0.7, 1.3, size=n)
    phase = fleet_rng.uniform(-0.5, 0.5, size=n)
    has_solar = fleet_rng.random(n) < spec.solar_fraction
    undersize = fleet_rng.uniform(*spec.overload_range, size=n)

    hvac = np.maximum(temperature - 20.0, 0.0) + 0.5 * np.maximum(12.0 - temperature, 0.0)
    loads = np.empty((n, S))
    for i in range(n):
        profile = daily_profile((hours + phase[i]) % 24, weekend, spec)
        loads[i] = homes[i] * spec.home_kw * scale[i] * (profile + spec.temperature_coupling * hvac)
    loads *= 1.0 + _ar1(noise_rng, (n, S), spec.noise_level, spec.noise_persistence)

    if spec.solar_fraction > 0:
        sun = np.clip(np.cos(np.pi * (hours - 12.5) / 13.0), 0.0, None) ** 2 * (0.75 + 0.25 * season)
        cloud = np.clip(1.0 - np.abs(_ar1(noise_rng, S, 2 * spec.noise_level, 0.98)), 0.0, 1.0)
        pv = sun * cloud
        loads -= np.outer(has_solar * homes * spec.solar_kw_per_home, pv)
    loads = np.maximum(loads, 0.0)

    sizes = np.array(sorted(spec.capacities_kva))
    peak = loads.max(axis=1) / undersize
    capacities = sizes[np.minimum(np.searchsorted(sizes, peak), len(sizes) - 1)]

    hourly_load = loads.sum(axis=0).reshape(-1, grid.slots_per_hour).mean(axis=1)
    rel = hourly_load / np.percentile(hourly_load, 99)
    month = np.array([datetime.fromordinal(start.toordinal() + int(d)).month
                      for d in np.arange(spec.days)]).repeat(24)
    gas_level = 1.0 + 0.25 * np.cos(2 * np.pi * (month - 1) / 12)
    lmp = 14.0 + 62.0 * rel**2 * gas_level
    spikes = (price_rng.random(len(lmp)) < 0.03) & (rel > 0.7)
    lmp = lmp + spikes * price_rng.exponential(40.0, len(lmp)) + price_rng.normal(0, 2.0, len(lmp))

    fuel_stats = {
        m: (
            FuelPriceStats("coal", 44.0, 9.0),
            FuelPriceStats("oil", 80.0, 22.0),
            FuelPriceStats("gas", 24.0 * (1.0 + 0.25 * np.cos(2 * np.pi * (m - 1) / 12)), 7.0),
        )
        for m in range(1, 13)
    }
    return Dataset(
        start=start,
        grid=grid,
        transformer_ids=tuple(f"T{i:03d}" for i in range(n)),
        capacities_kw=capacities.astype(float),
        loads=loads,
        lmp=lmp,
        fuel_stats=fuel_stats,
        temperature=temperature,
    )
