"""Day-ahead transformer load forecasting.

A ridge-regularized linear autoregression over three lag groups (recent
slots, the same slot on previous days, the same slot on previous weeks),
a one-hot day of week, temperature and an intercept. Day-ahead forecasts
roll forward one slot at a time, feeding predictions back into the recent
lags; daily and weekly lags always read observed history.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, lfiltic

logger = logging.getLogger(__name__)


class InsufficientHistoryError(ValueError):
    pass


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LagSpec:
    recent: int = 12
    daily: int = 3
    weekly: int = 2

    def __post_init__(self):
        if min(self.recent, self.daily, self.weekly) < 0 or self.n_lags < 1:
            raise ValueError("lag counts must be nonnegative with at least one lag")

    @property
    def n_lags(self) -> int:
        return self.recent + self.daily + self.weekly

    @property
    def n_features(self) -> int:
        return self.n_lags + 7 + 2

    def max_lag(self, slots_per_day: int) -> int:
        return max(self.recent, self.daily * slots_per_day, self.weekly * 7 * slots_per_day)

    def offsets(self, slots_per_day: int) -> np.ndarray:
        """Backward offsets of every lag feature, in feature order."""
        return np.concatenate([
            np.arange(1, self.recent + 1),
            slots_per_day * np.arange(1, self.daily + 1),
            7 * slots_per_day * np.arange(1, self.weekly + 1),
        ]).astype(int)


@dataclass(frozen=True)
class ExogenousFeatures:
    """Temperature per slot (may be None) and day of week (0-6) per day."""

    day_of_week: np.ndarray
    temperature: np.ndarray | None = None

    def __post_init__(self):
        dow = np.atleast_1d(np.asarray(self.day_of_week, dtype=int))
        if np.any((dow < 0) | (dow > 6)):
            raise ValueError("day of week must be in 0..6")
        object.__setattr__(self, "day_of_week", dow)
        if self.temperature is not None:
            object.__setattr__(self, "temperature", np.asarray(self.temperature, dtype=float))

    def slice_days(self, first: int, last: int, slots_per_day: int) -> "ExogenousFeatures":
        temp = None if self.temperature is None else self.temperature[first * slots_per_day:last * slots_per_day]
        return ExogenousFeatures(self.day_of_week[first:last], temp)

    def temperature_at(self, slots: np.ndarray) -> np.ndarray:
        if self.temperature is None:
            return np.zeros(len(slots))
        return self.temperature[slots]


@dataclass(frozen=True)
class ForecastModel:
    coefficients: np.ndarray
    lag_spec: LagSpec
    ridge: float
    slots_per_day: int = 288

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=float)
        if coef.shape != (self.lag_spec.n_features,):
            raise ValueError(f"expected {self.lag_spec.n_features} coefficients, got {coef.shape}")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    @property
    def temperature_coefficient(self) -> float:
        return float(self.coefficients[-2])

    def to_json(self) -> str:
        return json.dumps({
            "lag_spec": {"recent": self.lag_spec.recent, "daily": self.lag_spec.daily,
                         "weekly": self.lag_spec.weekly},
            "ridge": self.ridge,
            "slots_per_day": self.slots_per_day,
            "coefficients": [float(c) for c in self.coefficients],
        })

    @classmethod
    def from_json(cls, text: str) -> "ForecastModel":
        d = json.loads(text)
        return cls(np.array(d["coefficients"]), LagSpec(**d["lag_spec"]), d["ridge"], d["slots_per_day"])


@dataclass(frozen=True)
class ForecastResult:
    mean: np.ndarray
    deviation: np.ndarray

    def __post_init__(self):
        if np.any(self.deviation < 0) or np.any(self.mean < 0):
            raise ValueError("forecast mean and deviation must be nonnegative")


def _design(history: np.ndarray, targets: np.ndarray, spec: LagSpec, exog: ExogenousFeatures,
            slots_per_day: int) -> np.ndarray:
    lags = history[targets[:, None] - spec.offsets(slots_per_day)[None, :]]
    onehot = np.zeros((len(targets), 7))
    onehot[np.arange(len(targets)), exog.day_of_week[targets // slots_per_day]] = 1.0
    return np.column_stack([lags, onehot, exog.temperature_at(targets), np.ones(len(targets))])


def build_features(history, target_slot: int, spec: LagSpec, exog: ExogenousFeatures,
                   slots_per_day: int = 288) -> np.ndarray:
    """Feature vector for one target slot.

    Layout: recent lags, daily lags, weekly lags, day-of-week one-hot (7),
    temperature, 1. ``exog`` is indexed on the same slot axis as ``history``.
    """
    history = np.asarray(history.values if hasattr(history, "values") else history, dtype=float)
    if target_slot < spec.max_lag(slots_per_day) or target_slot > len(history):
        raise InsufficientHistoryError(
            f"slot {target_slot} needs {spec.max_lag(slots_per_day)} slots of history"
        )
    return _design(history, np.array([target_slot]), spec, exog, slots_per_day)[0]


def _penalty(spec: LagSpec) -> np.ndarray:
    p = np.ones(spec.n_features)
    p[-1] = 0.0
    return p


def ridge_solve(X, y, ridge: float, penalized=None) -> np.ndarray:
    """argmin ||X w - y||^2 + ridge * sum(penalized * w^2).

    ``penalized`` is a 0/1 mask (default all ones). With ``ridge = 0`` a
    rank-deficient ``X`` raises :class:`SingularDesignError`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if ridge < 0:
        raise ValueError("ridge penalty must be nonnegative")
    if ridge == 0:
        if np.linalg.matrix_rank(X) < X.shape[1]:
            raise SingularDesignError("design matrix is rank deficient; use ridge > 0")
        return np.linalg.lstsq(X, y, rcond=None)[0]
    p = np.ones(X.shape[1]) if penalized is None else np.asarray(penalized, dtype=float)
    aug = np.vstack([X, np.diag(np.sqrt(ridge * p))])
    rhs = np.concatenate([y, np.zeros(X.shape[1])])
    return np.linalg.lstsq(aug, rhs, rcond=None)[0]


def fit(history, exog: ExogenousFeatures, spec: LagSpec = LagSpec(), ridge: float = 1e-3,
        slots_per_day: int = 288) -> ForecastModel:
    """Ridge least squares; the intercept is not penalized.

    Solved as an augmented least-squares problem with an SVD-based solver
    rather than through the normal equations, which keeps the collinear
    intercept / day-of-week block well conditioned. Because the one-hot
    columns sum to the intercept column, ``ridge = 0`` is always singular
    for this layout; use a small positive ridge for a near-exact fit.
    """
    y = np.asarray(history.values if hasattr(history, "values") else history, dtype=float)
    first = spec.max_lag(slots_per_day)
    if spec.weekly >= 1 and len(y) < 8 * 7 * slots_per_day:
        raise InsufficientHistoryError("weekly lags need at least 8 weeks of training history")
    if len(y) <= first:
        raise InsufficientHistoryError(f"need more than {first} slots of history")
    targets = np.arange(first, len(y))
    X = _design(y, targets, spec, exog, slots_per_day)
    coef = ridge_solve(X, y[targets], ridge, _penalty(spec))
    return ForecastModel(coef, spec, ridge, slots_per_day)


def predict_day(model: ForecastModel, history, exog: ExogenousFeatures) -> np.ndarray:
    """Forecast the ``slots_per_day`` slots that follow ``history``.

    ``exog`` describes the target day only: one day-of-week entry and
    ``slots_per_day`` temperatures. The output is clamped at zero; the
    unclamped values are what feed back into the recent lags.
    """
    history = np.asarray(history.values if hasattr(history, "values") else history, dtype=float)
    spec, td = model.lag_spec, model.slots_per_day
    if len(history) < spec.max_lag(td):
        raise InsufficientHistoryError(f"need {spec.max_lag(td)} slots of history")
    if exog.temperature is not None and len(exog.temperature) != td:
        raise ValueError(f"expected {td} temperatures for the target day")
    w = model.coefficients
    start = len(history)
    slots = np.arange(start, start + td)
    seasonal = spec.offsets(td)[spec.recent:]
    driving = np.zeros(td)
    if len(seasonal):
        driving += history[slots[:, None] - seasonal[None, :]] @ w[spec.recent:spec.n_lags]
    driving += w[spec.n_lags + int(exog.day_of_week[0])]
    driving += exog.temperature_at(np.arange(td)) * w[-2] + w[-1]
    if spec.recent:
        a = np.concatenate([[1.0], -w[:spec.recent]])
        zi = lfiltic([1.0], a, history[::-1][:spec.recent])
        out = lfilter([1.0], a, driving, zi=zi)[0]
    else:
        out = driving
    return np.maximum(out, 0.0)


def estimate_deviation(residuals, window_days: int = 28, multiplier: float = 1.5) -> np.ndarray:
    """Per slot-of-day deviation: ``multiplier`` times the population std of the
    residuals at that slot over the trailing ``window_days`` days.

    ``residuals`` has one row per validation day.
    """
    if window_days < 7:
        raise ValueError("deviation window must cover at least 7 days")
    r = np.atleast_2d(np.asarray(residuals, dtype=float))
    if r.shape[0] < 7:
        raise InsufficientHistoryError("need at least 7 validation days of residuals")
    return multiplier * r[-window_days:].std(axis=0)


def mape(actual, forecast) -> float:
    """Mean absolute percentage error over slots with nonzero actual load."""
    actual = np.asarray(actual, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if actual.shape != forecast.shape:
        raise ValueError("actual and forecast differ in length")
    keep = actual != 0
    if not np.any(keep):
        raise ValueError("every slot has zero actual load")
    excluded = actual.size - int(keep.sum())
    if excluded:
        logger.debug("mape: excluded %d zero-load slots", excluded)
    return float(100.0 * np.mean(np.abs(actual[keep] - forecast[keep]) / np.abs(actual[keep])))
