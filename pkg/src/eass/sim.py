"""Day-ahead planning / real-time realization loop and savings accounting.

Every policy plans a day with the scheduling program, then the plan is
pushed slot by slot through :func:`project_feasible` against the actual
loads. Realized schedules never violate the physical limits, whatever the
quality of the plan.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .domain import Schedule, StorageUnit, Transformer, size_storage, validate_schedule
from .forecast import (
    ExogenousFeatures,
    InsufficientHistoryError,
    LagSpec,
    estimate_deviation,
    fit,
    mape,
    predict_day,
)
from .optimize import EassInstance, HighsSession, build_eass, build_eass_ro, solve_lp

logger = logging.getLogger(__name__)

ADJUST_TOL = 1e-9


# ---------------------------------------------------------------- policies

@dataclass(frozen=True)
class Policy:
    kind: str
    gamma: float | None = None

    KINDS = ("offline", "online_lp", "preday", "robust_ro")
    LABELS = {"offline": "OfflineOptimal", "online_lp": "OnlineLP", "preday": "PreDay", "robust_ro": "RobustRO"}

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown policy {self.kind!r}")
        if (self.kind == "robust_ro") != (self.gamma is not None):
            raise ValueError("only the robust policy takes a budget of uncertainty")

    @classmethod
    def offline(cls):
        return cls("offline")

    @classmethod
    def online_lp(cls):
        return cls("online_lp")

    @classmethod
    def preday(cls):
        return cls("preday")

    @classmethod
    def robust(cls, gamma: float = 15.0):
        return cls("robust_ro", float(gamma))

    @property
    def label(self) -> str:
        return self.LABELS[self.kind]

    @classmethod
    def parse(cls, text: str, gamma: float = 15.0) -> "Policy":
        key = text.strip()
        for kind, label in cls.LABELS.items():
            if key in (kind, label):
                return cls.robust(gamma) if kind == "robust_ro" else cls(kind)
        raise ValueError(f"unknown policy {text!r}")


def default_policies(gamma: float = 15.0) -> tuple[Policy, ...]:
    return (Policy.offline(), Policy.online_lp(), Policy.preday(), Policy.robust(gamma))


# ------------------------------------------------------------- projection

def project_feasible(x: float, actual_load_kw: float, soc: float, transformer: Transformer,
                     storage: StorageUnit, slot_hours: float = 1.0) -> float:
    """Clamp one planned decision onto what the actual load and SoC allow.

    The admissible interval is ``[max(-rate, -soc, -load), min(rate, B - soc,
    C - load - eta)]`` in slot energy; when the transformer is already past
    its headroom the upper end is 0, i.e. no charging.
    """
    rate = storage.rate_per_slot(slot_hours)
    load = actual_load_kw * slot_hours
    head = max((transformer.capacity_kw - transformer.overload_margin_kw) * slot_hours - load, 0.0)
    lo = max(-rate, -soc, -load)
    hi = min(rate, storage.capacity_kwh - soc, head)
    return min(max(x, lo), hi)


def realize(planned, actual_kw, soc_start, transformers: Sequence[Transformer],
            storages: Sequence[StorageUnit], slot_hours: float):
    """Apply :func:`project_feasible` slot by slot for a whole fleet.

    Returns ``(realized, soc, adjusted)`` where ``soc`` has one more column
    than ``realized`` and ``adjusted`` marks slots where the plan was changed.
    """
    planned = np.atleast_2d(planned)
    actual = np.atleast_2d(actual_kw) * slot_hours
    n, T = planned.shape
    rate = np.array([s.rate_per_slot(slot_hours) for s in storages])
    cap = np.array([s.capacity_kwh for s in storages])
    head = np.array([(t.capacity_kw - t.overload_margin_kw) * slot_hours for t in transformers])
    realized = np.empty((n, T))
    soc = np.empty((n, T + 1))
    soc[:, 0] = soc_start
    for t in range(T):
        s = soc[:, t]
        lo = np.maximum(np.maximum(-rate, -s), -actual[:, t])
        hi = np.minimum(np.minimum(rate, cap - s), np.maximum(head - actual[:, t], 0.0))
        realized[:, t] = np.minimum(np.maximum(planned[:, t], lo), hi)
        soc[:, t + 1] = s + realized[:, t]
    adjusted = np.abs(realized - planned) > ADJUST_TOL
    return realized, soc, adjusted


def daily_savings(realized, cost, soc_start, soc_end) -> float:
    """Emissions avoided in one day, kg.

    ``-sum(c * x) / 1000`` plus the net energy left in (or drawn from) the
    batteries valued at the day's mean marginal intensity, so that a day is
    not credited for discharging energy that was charged on an earlier day.
    """
    x = np.atleast_2d(realized).sum(axis=0)
    cost = np.asarray(cost, dtype=float)
    delta = float(np.sum(soc_end) - np.sum(soc_start))
    return -float(cost @ x) / 1000.0 + delta * float(cost.mean()) / 1000.0


# ----------------------------------------------------------------- a day

@dataclass(frozen=True)
class DayInputs:
    day: int
    forecast: np.ndarray
    sigma: np.ndarray
    actual: np.ndarray
    cost: np.ndarray
    prev_actual: np.ndarray | None = None
    prev_cost: np.ndarray | None = None


@dataclass
class DayResult:
    """One policy lane on one day; the arrays are dropped when a run does not keep schedules."""

    day: int
    policy: str
    planned: np.ndarray | None
    realized: np.ndarray | None
    soc: np.ndarray | None
    emission_delta_kg: float
    soc_correction_kg: float
    savings_kg: float
    baseline_kg: float
    violations: int
    adjustments: int
    relaxed_slots: int = 0
    fallbacks: int = 0
    note: str = ""

    @property
    def savings_pct(self) -> float:
        return 100.0 * self.savings_kg / self.baseline_kg if self.baseline_kg else 0.0


@dataclass(frozen=True)
class Fleet:
    transformers: tuple[Transformer, ...]
    storages: tuple[StorageUnit, ...]
    slot_hours: float = 5 / 60
    boundary_fraction: float = 0.5

    @property
    def boundary_soc(self) -> np.ndarray:
        return self.boundary_fraction * np.array([s.capacity_kwh for s in self.storages])

    @property
    def n(self) -> int:
        return len(self.transformers)


def _plan_unit(policy: Policy, i: int, loads, sigma, cost, fleet: Fleet, soc0: float, cache: dict | None,
               cache_key, session: HighsSession | None = None):
    st = fleet.storages[i]
    T = loads.shape[-1]
    if st.capacity_kwh == 0:
        return np.zeros(T), np.zeros(T, dtype=bool), False
    if cache is not None and cache_key is not None:
        key = (cache_key, i, soc0)
        if key in cache:
            return cache[key]
    robust = policy.kind == "robust_ro"
    inst = EassInstance(
        loads[i:i + 1], cost, fleet.transformers[i:i + 1], fleet.storages[i:i + 1],
        slot_hours=fleet.slot_hours, sigma=sigma[i:i + 1] if robust else None,
        gamma=policy.gamma if robust else 0.0,
        boundary_soc=fleet.boundary_soc[i:i + 1], initial_soc=[soc0],
    )
    build = build_eass_ro if robust else build_eass
    sol = solve_lp(build(inst), session=session)
    fallback = False
    if not sol.optimal:
        # the carried-over SoC cannot reach the boundary level today; hold it instead
        sol = solve_lp(build(inst, terminal_soc=[soc0]), session=session)
        fallback = True
        if not sol.optimal:
            raise RuntimeError(f"unit {i}: no feasible plan even with a held state of charge")
    out = (sol.x[0], sol.relaxed[0], fallback)
    if cache is not None and cache_key is not None:
        cache[(cache_key, i, soc0)] = out
    return out


def run_day(policy: Policy, inputs: DayInputs, fleet: Fleet, soc_start, cache: dict | None = None,
            sessions: dict | None = None) -> DayResult:
    """Plan one day with ``policy``, realize it against actual loads, account savings.

    ``cache`` shares plans between lanes that solve identical programs and
    ``sessions`` keeps one warm-started solver per policy; consecutive
    units of one day share a cost vector, which makes for good restarts.
    """
    n, T = inputs.actual.shape
    soc_start = np.asarray(soc_start, dtype=float)
    if policy.kind == "offline":
        loads, cost, key = inputs.actual, inputs.cost, ("actual", inputs.day)
    elif policy.kind == "preday":
        if inputs.prev_actual is None or inputs.prev_cost is None:
            return _skipped(policy, inputs, soc_start, "no previous-day data")
        loads, cost, key = inputs.prev_actual, inputs.prev_cost, ("actual", inputs.day - 1)
    elif policy.kind == "online_lp":
        loads, cost, key = inputs.forecast, inputs.cost, None
    else:
        loads, cost, key = inputs.forecast, inputs.cost, None
    planned = np.zeros((n, T))
    relaxed = fallbacks = 0
    for i in range(n):
        session = None if sessions is None else sessions.setdefault(policy, HighsSession())
        x, rel, fb = _plan_unit(policy, i, loads, inputs.sigma, cost, fleet, float(soc_start[i]), cache, key,
                                session)
        planned[i] = x
        relaxed += int(rel.sum())
        fallbacks += int(fb)

    realized, soc, adjusted = realize(planned, inputs.actual, soc_start, fleet.transformers, fleet.storages,
                                      fleet.slot_hours)
    return _account(policy, inputs, fleet, planned, realized, soc, int(adjusted.sum()), relaxed, fallbacks)


def _account(policy, inputs, fleet, planned, realized, soc, adjustments, relaxed, fallbacks, note=""):
    sched = Schedule(realized, soc[:, 0])
    violations = validate_schedule(sched, inputs.actual, fleet.transformers, fleet.storages,
                                   slot_hours=fleet.slot_hours)
    delta = float(inputs.cost @ realized.sum(axis=0)) / 1000.0
    savings = daily_savings(realized, inputs.cost, soc[:, 0], soc[:, -1])
    baseline = float(inputs.cost @ inputs.actual.sum(axis=0)) * fleet.slot_hours / 1000.0
    return DayResult(
        day=inputs.day,
        policy=policy.label,
        planned=planned,
        realized=realized,
        soc=soc,
        emission_delta_kg=delta,
        soc_correction_kg=savings + delta,
        savings_kg=savings,
        baseline_kg=baseline,
        violations=len(violations),
        adjustments=adjustments,
        relaxed_slots=relaxed,
        fallbacks=fallbacks,
        note=note,
    )


def _skipped(policy, inputs, soc_start, note):
    n, T = inputs.actual.shape
    zeros = np.zeros((n, T))
    soc = np.repeat(np.asarray(soc_start, dtype=float)[:, None], T + 1, axis=1)
    baseline = 0.0
    return DayResult(inputs.day, policy.label, zeros, zeros, soc, 0.0, 0.0, 0.0, baseline, 0, 0, note=note)


# ------------------------------------------------------------- forecasting

@dataclass(frozen=True)
class ForecastSettings:
    lag_spec: LagSpec = LagSpec()
    ridge: float = 1e-3
    deviation_window: int = 28
    deviation_multiplier: float = 1.5
    train_days: int = 56
    refit_days: int = 7


@dataclass
class ForecastBundle:
    """Day-ahead means and deviations for every evaluation day, (n, days, T)."""

    first_day: int
    mean: np.ndarray
    sigma: np.ndarray
    mape: np.ndarray
    persistence_mape: np.ndarray

    def day(self, d: int):
        k = d - self.first_day
        return self.mean[:, k], self.sigma[:, k]


def forecast_horizon(dataset: Dataset, warmup_days: int, settings: ForecastSettings = ForecastSettings(),
                     last_day: int | None = None) -> ForecastBundle:
    """Rolling day-ahead forecasts for days ``warmup_days .. last_day - 1``.

    The model is refit every ``refit_days`` on the trailing ``train_days``.
    Deviations come from the residuals of the previous ``deviation_window``
    days; before any out-of-sample day exists those residuals are seeded by
    forecasting the last warm-up days with the first model.
    """
    td = dataset.grid.slots_per_day
    last_day = dataset.n_days if last_day is None else last_day
    spec = settings.lag_spec
    lag_days = -(-spec.max_lag(td) // td)
    seed_days = settings.deviation_window
    if warmup_days < settings.train_days or warmup_days - seed_days < lag_days:
        raise InsufficientHistoryError(
            f"warm-up of {warmup_days} days is shorter than the {settings.train_days}-day training window"
        )
    if last_day <= warmup_days:
        raise InsufficientHistoryError("no evaluation days after the warm-up period")
    n = dataset.n_transformers
    days = last_day - warmup_days
    mean = np.zeros((n, days, td))
    sigma = np.zeros((n, days, td))
    mape_model = np.zeros(n)
    mape_persist = np.zeros(n)
    dow = dataset.day_of_week
    temp = dataset.temperature

    def exog(first, last):
        t = None if temp is None else temp[first * td:last * td]
        return ExogenousFeatures(dow[first:last], t)

    for i in range(n):
        y = dataset.loads[i]
        model = None
        residuals: list[np.ndarray] = []
        for d in range(warmup_days, last_day):
            k = d - warmup_days
            if k % settings.refit_days == 0:
                lo = d - settings.train_days
                model = fit(y[lo * td:d * td], exog(lo, d), spec, settings.ridge, td)
                if k == 0:
                    for w in range(d - seed_days, d):
                        pred = predict_day(model, y[:w * td], exog(w, w + 1))
                        residuals.append(y[w * td:(w + 1) * td] - pred)
            sigma[i, k] = estimate_deviation(np.array(residuals[-settings.deviation_window:]),
                                             settings.deviation_window, settings.deviation_multiplier)
            mean[i, k] = predict_day(model, y[:d * td], exog(d, d + 1))
            residuals.append(y[d * td:(d + 1) * td] - mean[i, k])
        actual = y[warmup_days * td:last_day * td]
        mape_model[i] = _safe_mape(actual, mean[i].ravel())
        mape_persist[i] = _safe_mape(actual, y[(warmup_days - 1) * td:(last_day - 1) * td])
    return ForecastBundle(warmup_days, mean, sigma, mape_model, mape_persist)


def _safe_mape(actual, forecast) -> float:
    try:
        return mape(actual, forecast)
    except ValueError:
        return float("nan")


# --------------------------------------------------------------- horizon

@dataclass(frozen=True)
class SimConfig:
    policies: tuple[Policy, ...] = field(default_factory=default_policies)
    battery_hours: float = 1.0
    rate_hours: float | None = None
    penetration: float = 1.0
    eta_fraction: float = 0.01
    boundary_fraction: float = 0.5
    warmup_days: int = 56
    eval_days: int | None = None
    seed: int = 0
    forecast: ForecastSettings = ForecastSettings()
    keep_schedules: bool = True

    def __post_init__(self):
        if not 0 <= self.penetration <= 1:
            raise ValueError("penetration must lie in [0, 1]")
        if not 0 < self.eta_fraction <= 0.1:
            raise ValueError("eta fraction must lie in (0, 0.1]")
        if self.battery_hours < 0 or (self.rate_hours is not None and self.rate_hours < 0):
            raise ValueError("battery and rate hours must be nonnegative")

    @property
    def gamma(self) -> float | None:
        for p in self.policies:
            if p.kind == "robust_ro":
                return p.gamma
        return None


def storage_subset(n: int, penetration: float, seed: int) -> np.ndarray:
    """Boolean mask of transformers that get a battery.

    Subsets are nested in ``penetration`` for a fixed seed: the order comes
    from one seeded permutation and the first ``round(p * n)`` are taken.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E7]))
    order = rng.permutation(n)
    mask = np.zeros(n, dtype=bool)
    mask[order[: int(round(penetration * n))]] = True
    return mask


def build_fleet(dataset: Dataset, config: SimConfig) -> Fleet:
    mask = storage_subset(dataset.n_transformers, config.penetration, config.seed)
    if config.penetration < 1:
        logger.info("storage installed at %s", [dataset.transformer_ids[i] for i in np.nonzero(mask)[0]])
    transformers, storages = [], []
    for i, tid in enumerate(dataset.transformer_ids):
        cap = float(dataset.capacities_kw[i])
        transformers.append(Transformer.with_margin_fraction(tid, cap, config.eta_fraction))
        peak = float(dataset.loads[i].max())
        if not mask[i] or peak == 0:
            storages.append(StorageUnit(0.0, 0.0))
            continue
        b = size_storage(dataset.loads[i], config.battery_hours)
        rate = b / 1.0 if config.rate_hours is None else config.rate_hours * peak
        storages.append(StorageUnit(b, rate))
    return Fleet(tuple(transformers), tuple(storages), dataset.grid.slot_hours, config.boundary_fraction)


@dataclass
class PolicySummary:
    policy: str
    baseline_kg: float
    savings_kg: float
    violations: int
    adjustments: int
    fallbacks: int

    @property
    def savings_pct(self) -> float:
        return 100.0 * self.savings_kg / self.baseline_kg if self.baseline_kg else 0.0


@dataclass
class AnnualReport:
    days: list[DayResult]
    summaries: dict[str, PolicySummary]
    mape_summary: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def by_policy(self, label: str) -> list[DayResult]:
        return [r for r in self.days if r.policy == label]

    def report_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "policy", "savings_kg", "savings_pct", "violations"])
        for r in self.days:
            w.writerow([r.day, r.policy, f"{r.savings_kg:.6f}", f"{r.savings_pct:.6f}", r.violations])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({
            "policies": {
                k: {
                    "baseline_kg": round(s.baseline_kg, 6),
                    "savings_kg": round(s.savings_kg, 6),
                    "savings_pct": round(s.savings_pct, 6),
                    "violations": s.violations,
                    "adjustments": s.adjustments,
                    "fallbacks": s.fallbacks,
                }
                for k, s in self.summaries.items()
            },
            "mape": self.mape_summary,
            "notes": self.notes,
        }, indent=2, sort_keys=True)


def _mape_stats(values: np.ndarray) -> dict:
    v = values[np.isfinite(values)]
    if v.size == 0:
        return {}
    return {
        "mean": round(float(v.mean()), 6),
        "median": round(float(np.median(v)), 6),
        "p10": round(float(np.percentile(v, 10)), 6),
        "p90": round(float(np.percentile(v, 90)), 6),
    }


def run_horizon(config: SimConfig, dataset: Dataset, forecasts: ForecastBundle | None = None) -> AnnualReport:
    """Simulate every configured policy over the evaluation days.

    Days run in order because each lane carries its realized state of
    charge into the next day.
    """
    warm = config.warmup_days
    last = dataset.n_days if config.eval_days is None else warm + config.eval_days
    if last > dataset.n_days:
        raise InsufficientHistoryError(f"dataset has {dataset.n_days} days, need {last}")
    if warm < config.forecast.train_days:
        raise InsufficientHistoryError(
            f"warm-up of {warm} days is shorter than the {config.forecast.train_days}-day training window")
    needs_forecast = any(p.kind in ("online_lp", "robust_ro") for p in config.policies)
    if needs_forecast and forecasts is None:
        forecasts = forecast_horizon(dataset, warm, config.forecast, last)
    fleet = build_fleet(dataset, config)
    td = dataset.grid.slots_per_day
    cost = dataset.cost
    boundary = fleet.boundary_soc
    soc = {p: boundary.copy() for p in config.policies}
    cache: dict = {}
    sessions: dict = {}
    days: list[DayResult] = []
    notes: list[str] = []

    for d in range(warm, last):
        sl = dataset.day_slice(d)
        if forecasts is not None:
            f_mean, f_sigma = forecasts.day(d)
        else:
            f_mean = f_sigma = np.zeros((dataset.n_transformers, td))
        prev = dataset.day_slice(d - 1) if d >= 1 else None
        inputs = DayInputs(
            day=d,
            forecast=f_mean,
            sigma=f_sigma,
            actual=dataset.loads[:, sl],
            cost=cost[sl],
            prev_actual=None if prev is None else dataset.loads[:, prev],
            prev_cost=None if prev is None else cost[prev],
        )
        for p in config.policies:
            r = run_day(p, inputs, fleet, soc[p], cache, sessions)
            if r.note:
                notes.append(f"day {d} {p.label}: {r.note}")
            end = r.soc[:, -1]
            soc[p] = np.where(np.abs(end - boundary) <= 1e-9, boundary, end)
            if not config.keep_schedules:
                r.planned = r.realized = r.soc = None
            days.append(r)
        for key in [k for k in cache if k[0][1] < d - 1]:
            del cache[key]

    summaries = {}
    for p in config.policies:
        rows = [r for r in days if r.policy == p.label]
        summaries[p.label] = PolicySummary(
            policy=p.label,
            baseline_kg=float(np.sum([r.baseline_kg for r in rows])),
            savings_kg=float(np.sum([r.savings_kg for r in rows])),
            violations=sum(r.violations for r in rows),
            adjustments=sum(r.adjustments for r in rows),
            fallbacks=sum(r.fallbacks for r in rows),
        )
    mape_summary = {}
    if forecasts is not None:
        mape_summary = {"model": _mape_stats(forecasts.mape), "persistence": _mape_stats(forecasts.persistence_mape)}
    return AnnualReport(days, summaries, mape_summary, notes)


# ----------------------------------------------------------------- sweeps

SWEEP_AXES = ("battery_hours", "rate_hours", "penetration", "gamma")


@dataclass
class SweepRow:
    axis: str
    value: float
    policy: str
    savings_pct: float
    savings_kg: float
    adjustments: int


def sweep(config: SimConfig, dataset: Dataset, axis: str, values: Sequence[float],
          forecasts: ForecastBundle | None = None) -> list[SweepRow]:
    """One :func:`run_horizon` per value along ``axis``; forecasts are shared."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"invalid sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    needs_forecast = axis == "gamma" or any(p.kind in ("online_lp", "robust_ro") for p in config.policies)
    if forecasts is None and needs_forecast:
        last = dataset.n_days if config.eval_days is None else config.warmup_days + config.eval_days
        forecasts = forecast_horizon(dataset, config.warmup_days, config.forecast, last)
    rows = []
    for v in values:
        if axis == "gamma":
            cfg = replace(config, policies=tuple(
                Policy.robust(v) if p.kind == "robust_ro" else p for p in config.policies))
        else:
            cfg = replace(config, **{axis: float(v)})
        report = run_horizon(cfg, dataset, forecasts)
        for label, s in report.summaries.items():
            rows.append(SweepRow(axis, float(v), label, s.savings_pct, s.savings_kg, s.adjustments))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "value", "policy", "savings_pct"])
    for r in rows:
        w.writerow([r.axis, f"{r.value:g}", r.policy, f"{r.savings_pct:.6f}"])
    return buf.getvalue()
