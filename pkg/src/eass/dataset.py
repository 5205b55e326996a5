"""In-memory experiment dataset and its CSV representation.

File formats (all with a header row):

* loads: ``timestamp,transformer_id,kw`` sorted by transformer then time,
  one row per slot boundary
* transformers: ``transformer_id,capacity_kw``
* LMP: ``timestamp,lmp_usd_per_mwh``, hourly
* fuel price statistics: ``month,fuel,mu,nu``
* temperature: ``timestamp,temp_c``, one row per slot
* fuel table: ``fuel,emission_factor_kg_per_mwh``
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from datetime import datetime
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .carbon import FuelPriceStats, expand_to_slots, monthly_marginal_factors
from .domain import DEFAULT_FUELS, ConfigurationError, FuelType, TimeGrid, emission_cost_series

logger = logging.getLogger(__name__)

TIME_FORMAT = "%Y-%m-%dT%H:%M:%S"


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True, eq=False)
class Dataset:
    start: datetime
    grid: TimeGrid
    transformer_ids: tuple[str, ...]
    capacities_kw: np.ndarray
    loads: np.ndarray
    lmp: np.ndarray
    fuel_stats: Mapping[int, tuple[FuelPriceStats, ...]]
    temperature: np.ndarray | None = None
    fuels: tuple[FuelType, ...] = DEFAULT_FUELS

    def __post_init__(self):
        n, S = self.loads.shape
        if S != self.grid.n_slots:
            raise DataError(f"loads cover {S} slots, grid has {self.grid.n_slots}")
        if len(self.transformer_ids) != n or len(self.capacities_kw) != n:
            raise DataError("one id and capacity per transformer row")
        if len(self.lmp) * self.grid.slots_per_hour != S:
            raise DataError("LMP must be hourly over the same horizon as the loads")
        if self.temperature is not None and len(self.temperature) != S:
            raise DataError("temperature must have one value per slot")
        if np.any(self.loads < 0):
            raise DataError("loads must be clamped at zero")

    @property
    def n_transformers(self) -> int:
        return self.loads.shape[0]

    @property
    def n_days(self) -> int:
        return self.grid.horizon_days

    @cached_property
    def day_of_week(self) -> np.ndarray:
        return (self.start.weekday() + np.arange(self.n_days)) % 7

    @cached_property
    def hour_months(self) -> np.ndarray:
        hours = pd.date_range(self.start, periods=len(self.lmp), freq="h")
        return hours.month.to_numpy()

    @cached_property
    def cost(self) -> np.ndarray:
        """Marginal carbon intensity per slot, kg/MWh."""
        factors = monthly_marginal_factors(self.lmp, self.hour_months, self.fuel_stats)
        return expand_to_slots(emission_cost_series(factors, self.fuels), self.grid)

    def day_slice(self, day: int) -> slice:
        td = self.grid.slots_per_day
        return slice(day * td, (day + 1) * td)

    def select(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(
            self,
            transformer_ids=tuple(self.transformer_ids[i] for i in rows),
            capacities_kw=self.capacities_kw[rows],
            loads=self.loads[rows],
        )

    def head_days(self, days: int) -> "Dataset":
        td = self.grid.slots_per_day
        return replace(
            self,
            grid=replace(self.grid, horizon_days=days),
            loads=self.loads[:, : days * td],
            lmp=self.lmp[: days * 24],
            temperature=None if self.temperature is None else self.temperature[: days * td],
        )

    # ------------------------------------------------------------------ CSV

    def write_csv(self, directory) -> dict[str, Path]:
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {directory}: {exc}") from exc
        paths = {
            "loads": directory / "loads.csv",
            "transformers": directory / "transformers.csv",
            "lmp": directory / "lmp.csv",
            "fuel_stats": directory / "fuel_stats.csv",
            "temperature": directory / "temperature.csv",
            "fuels": directory / "fuels.csv",
        }
        stamps = _timestamps(self.start, self.grid.n_slots, self.grid.slot_minutes)
        n, S = self.loads.shape
        pd.DataFrame({
            "timestamp": np.tile(stamps, n),
            "transformer_id": np.repeat(np.array(self.transformer_ids, dtype=object), S),
            "kw": self.loads.ravel(),
        }).to_csv(paths["loads"], index=False, float_format="%.6f")
        pd.DataFrame({"transformer_id": list(self.transformer_ids), "capacity_kw": self.capacities_kw}).to_csv(
            paths["transformers"], index=False, float_format="%.6f")
        pd.DataFrame({
            "timestamp": _timestamps(self.start, len(self.lmp), 60),
            "lmp_usd_per_mwh": self.lmp,
        }).to_csv(paths["lmp"], index=False, float_format="%.6f")
        pd.DataFrame(
            [(m, s.fuel, s.mean_cost, s.std_cost) for m in sorted(self.fuel_stats) for s in self.fuel_stats[m]],
            columns=["month", "fuel", "mu", "nu"],
        ).to_csv(paths["fuel_stats"], index=False, float_format="%.6f")
        if self.temperature is not None:
            pd.DataFrame({"timestamp": stamps, "temp_c": self.temperature}).to_csv(
                paths["temperature"], index=False, float_format="%.6f")
        else:
            del paths["temperature"]
        pd.DataFrame(
            [(f.name, f.emission_factor_kg_per_mwh) for f in self.fuels],
            columns=["fuel", "emission_factor_kg_per_mwh"],
        ).to_csv(paths["fuels"], index=False)
        return paths

    @classmethod
    def read_csv(cls, loads, transformers, lmp, fuel_stats, temperature=None, fuels=None,
                 slot_minutes: int = 5) -> "Dataset":
        for p in (loads, transformers, lmp, fuel_stats, temperature, fuels):
            if p is not None and not Path(p).is_file():
                raise FileNotFoundError(f"input file not found: {p}")
        ids, start, grid, values = read_loads(loads, slot_minutes)
        caps = read_transformers(transformers)
        missing = [i for i in ids if i not in caps]
        if missing:
            raise DataError(f"no capacity for transformer(s) {', '.join(missing[:5])}")
        lmp_start, lmp_values = _read_series(lmp, "lmp_usd_per_mwh")
        if lmp_start != start:
            raise DataError("LMP series must start at the first load timestamp")
        temp = None
        if temperature is not None:
            temp_start, temp = _read_series(temperature, "temp_c")
            if temp_start != start:
                raise DataError("temperature series must start at the first load timestamp")
        return cls(
            start=start,
            grid=grid,
            transformer_ids=tuple(ids),
            capacities_kw=np.array([caps[i] for i in ids]),
            loads=values,
            lmp=lmp_values,
            fuel_stats=read_fuel_stats(fuel_stats),
            temperature=temp,
            fuels=read_fuel_table(fuels) if fuels is not None else DEFAULT_FUELS,
        )


def _timestamps(start: datetime, count: int, minutes: int) -> np.ndarray:
    idx = pd.date_range(start, periods=count, freq=f"{minutes}min")
    return idx.strftime(TIME_FORMAT).to_numpy()


def read_loads(path, slot_minutes: int = 5):
    """Return (ids, start, grid, loads[n, S]); negative loads are clamped to 0."""
    df = pd.read_csv(path, dtype={"transformer_id": str})
    if list(df.columns) != ["timestamp", "transformer_id", "kw"]:
        raise DataError(f"{path}: expected header timestamp,transformer_id,kw")
    stamps = pd.to_datetime(df["timestamp"], format="ISO8601")
    codes, uniques = pd.factorize(df["transformer_id"])
    ids = list(uniques)
    if np.any(np.diff(codes) < 0) or ids != sorted(ids):
        raise DataError(f"{path}: rows must be sorted by transformer_id then timestamp")
    counts = df.groupby("transformer_id", sort=False).size()
    if counts.nunique() != 1:
        raise DataError(f"{path}: transformers have different numbers of samples")
    S = int(counts.iloc[0])
    grid = TimeGrid(horizon_days=max(S // (1440 // slot_minutes), 1), slots_per_day=1440 // slot_minutes,
                    slot_minutes=slot_minutes)
    if S != grid.n_slots:
        raise DataError(f"{path}: {S} samples per transformer is not a whole number of days")
    first = stamps.iloc[:S].to_numpy()
    expected = pd.date_range(first[0], periods=S, freq=f"{slot_minutes}min").to_numpy()
    if not np.array_equal(first, expected) or not np.array_equal(stamps.to_numpy(), np.tile(first, len(ids))):
        raise DataError(f"{path}: timestamps must be consecutive slot boundaries, identical per transformer")
    raw = df["kw"].to_numpy(dtype=float).reshape(len(ids), S)
    neg = int(np.count_nonzero(raw < 0))
    if neg:
        logger.info("%s: clamped %d negative (net-metered) load samples to zero", path, neg)
    return ids, pd.Timestamp(first[0]).to_pydatetime(), grid, np.maximum(raw, 0.0)


def read_transformers(path) -> dict[str, float]:
    df = pd.read_csv(path, dtype={"transformer_id": str})
    if list(df.columns) != ["transformer_id", "capacity_kw"]:
        raise DataError(f"{path}: expected header transformer_id,capacity_kw")
    return dict(zip(df["transformer_id"], df["capacity_kw"].astype(float)))


def _read_series(path, column):
    df = pd.read_csv(path)
    if list(df.columns) != ["timestamp", column]:
        raise DataError(f"{path}: expected header timestamp,{column}")
    stamps = pd.to_datetime(df["timestamp"], format="ISO8601")
    return stamps.iloc[0].to_pydatetime(), df[column].to_numpy(dtype=float)


def read_fuel_stats(path) -> dict[int, tuple[FuelPriceStats, ...]]:
    df = pd.read_csv(path)
    if list(df.columns) != ["month", "fuel", "mu", "nu"]:
        raise DataError(f"{path}: expected header month,fuel,mu,nu")
    table: dict[int, list[FuelPriceStats]] = {}
    for row in df.itertuples(index=False):
        table.setdefault(int(row.month), []).append(FuelPriceStats(str(row.fuel), float(row.mu), float(row.nu)))
    return {m: tuple(v) for m, v in table.items()}


def read_fuel_table(path) -> tuple[FuelType, ...]:
    df = pd.read_csv(path)
    if list(df.columns) != ["fuel", "emission_factor_kg_per_mwh"]:
        raise ConfigurationError(f"{path}: expected header fuel,emission_factor_kg_per_mwh")
    return tuple(FuelType(str(r.fuel), float(r.emission_factor_kg_per_mwh)) for r in df.itertuples(index=False))

