"""Emission-aware storage scheduling as a linear program, nominal and robust.

The program is built over the interior state-of-charge levels
``s_i(1) .. s_i(T-1)``; each slot's decision ``x_i(t) = s_i(t+1) - s_i(t)``
is a two-entry row whose range merges the rate limit, the discharge-below-
load limit and the transformer headroom limit. Fixing ``s_i(0)`` and
``s_i(T)`` as constants enforces the day-boundary state of charge.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from ..domain import StorageUnit, Transformer
from .lp import LinearProgram, Solution, solve_lp


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class EassInstance:
    """One day of scheduling for ``n`` transformers over ``T`` slots.

    ``loads`` are forecast means in kW with shape (n, T); ``sigma`` their
    deviations; ``cost`` the marginal carbon intensity in kg/MWh.
    """

    loads: np.ndarray
    cost: np.ndarray
    transformers: tuple[Transformer, ...]
    storages: tuple[StorageUnit, ...]
    slot_hours: float = 5 / 60
    sigma: np.ndarray | None = None
    gamma: float = 0.0
    boundary_soc: np.ndarray | None = None
    initial_soc: np.ndarray | None = None

    def __post_init__(self):
        loads = np.atleast_2d(np.asarray(self.loads, dtype=float))
        n, T = loads.shape
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "cost", np.asarray(self.cost, dtype=float))
        object.__setattr__(self, "transformers", tuple(self.transformers))
        object.__setattr__(self, "storages", tuple(self.storages))
        sigma = np.zeros((n, T)) if self.sigma is None else np.atleast_2d(np.asarray(self.sigma, dtype=float))
        object.__setattr__(self, "sigma", sigma)
        cap = np.array([s.capacity_kwh for s in self.storages])
        b = cap / 2 if self.boundary_soc is None else np.broadcast_to(
            np.asarray(self.boundary_soc, dtype=float), (n,)).copy()
        object.__setattr__(self, "boundary_soc", b)
        a = b.copy() if self.initial_soc is None else np.broadcast_to(
            np.asarray(self.initial_soc, dtype=float), (n,)).copy()
        object.__setattr__(self, "initial_soc", a)

        if self.cost.shape != (T,) or sigma.shape != (n, T):
            raise ValueError("cost, loads and sigma disagree on the number of slots")
        if len(self.transformers) != n or len(self.storages) != n:
            raise ValueError("one transformer and one storage unit per load row")
        if np.any(sigma < 0):
            raise ValueError("deviations must be nonnegative")
        if not 0 <= self.gamma <= T:
            raise ValueError(f"budget of uncertainty must lie in [0, {T}]")
        for name, level in (("boundary", b), ("initial", a)):
            if np.any(level < -1e-12) or np.any(level > cap + 1e-12):
                raise ValueError(f"{name} state of charge outside [0, capacity]")

    @property
    def n(self) -> int:
        return self.loads.shape[0]

    @property
    def T(self) -> int:
        return self.loads.shape[1]

    def unit(self, i: int) -> "EassInstance":
        """Single-transformer sub-instance."""
        return replace(
            self,
            loads=self.loads[i:i + 1],
            sigma=self.sigma[i:i + 1],
            transformers=self.transformers[i:i + 1],
            storages=self.storages[i:i + 1],
            boundary_soc=self.boundary_soc[i:i + 1],
            initial_soc=self.initial_soc[i:i + 1],
        )


def inner_budget_allocation(sigma, gamma: float) -> np.ndarray:
    """Maximizer of sum(sigma * z) subject to sum(z) <= gamma, 0 <= z <= 1.

    The largest deviations get z = 1, the next one the fractional remainder;
    ties go to the earlier slot.
    """
    sigma = np.asarray(sigma, dtype=float)
    T = sigma.shape[0]
    if not 0 <= gamma <= T:
        raise ValueError(f"budget of uncertainty {gamma} outside [0, {T}]")
    order = np.argsort(-sigma, kind="stable")
    whole = int(np.floor(gamma))
    z = np.zeros(T)
    z[order[:whole]] = 1.0
    if whole < T:
        z[order[whole]] = gamma - whole
    return z


def deviation_margin(instance: EassInstance) -> np.ndarray:
    """beta_i(t) = sigma_i(t) * z*_i(t), with one budget per transformer."""
    return np.vstack([s * inner_budget_allocation(s, instance.gamma) for s in instance.sigma])


def slot_bounds(instance: EassInstance, beta: np.ndarray | None = None):
    """Per-slot energy bounds (lo, hi) on x and the mask of relaxed slots.

    The discharge bound uses the low end of the load interval, the charge
    bound the high end. Where even the high-end load leaves no headroom the
    charge bound is relaxed to 0 (no charging) and the slot is flagged.
    """
    dt = instance.slot_hours
    beta = np.zeros_like(instance.loads) if beta is None else beta
    rate = np.array([s.rate_per_slot(dt) for s in instance.storages])[:, None]
    headroom = np.array([t.capacity_kw - t.overload_margin_kw for t in instance.transformers])[:, None]
    low_load = np.maximum(instance.loads - beta, 0.0) * dt
    head = (headroom - (instance.loads + beta)) * dt
    relaxed = head < 0
    lo = np.maximum(-rate, -low_load)
    hi = np.minimum(rate, np.maximum(head, 0.0))
    return lo, hi, relaxed


@dataclass(frozen=True)
class ScheduleLayout:
    """Maps LP columns back to a schedule."""

    n: int
    T: int
    initial_soc: np.ndarray
    terminal_soc: np.ndarray
    relaxed: np.ndarray = field(repr=False)

    def fill(self, sol: Solution) -> None:
        inner = sol.values.reshape(self.n, self.T - 1) if self.T > 1 else np.zeros((self.n, 0))
        s = np.hstack([self.initial_soc[:, None], inner, self.terminal_soc[:, None]])
        sol.soc = s
        sol.x = np.diff(s, axis=1)
        sol.relaxed = self.relaxed


@functools.lru_cache(maxsize=64)
def _structure(ids: tuple[str, ...], T: int):
    """Constraint matrix and names, shared by every program of one shape."""
    n, k = len(ids), T - 1
    t = np.arange(1, T)  # s_i(t) is column i * k + t - 1
    rows = np.concatenate([np.concatenate([i * T + t - 1, i * T + t]) for i in range(n)]) if k else []
    cols = np.concatenate([np.tile(i * k + t - 1, 2) for i in range(n)]) if k else []
    vals = np.tile(np.concatenate([np.ones(k), -np.ones(k)]), n) if k else []
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n * T, n * k))
    names = tuple(f"s[{ids[i]},{t}]" for i in range(n) for t in range(1, T))
    row_names = tuple(f"x[{ids[i]},{t}]" for i in range(n) for t in range(T))
    return A, names, row_names


def _assemble(instance: EassInstance, lo, hi, relaxed, terminal_soc=None) -> LinearProgram:
    n, T = instance.n, instance.T
    a = instance.initial_soc
    b = instance.boundary_soc if terminal_soc is None else np.asarray(terminal_soc, dtype=float)
    k = T - 1
    c = instance.cost / 1000.0

    const = np.zeros((n, T))
    const[:, 0] -= a
    const[:, T - 1] += b
    A, names, row_names = _structure(tuple(tr.id for tr in instance.transformers), T)
    cap = np.array([s.capacity_kwh for s in instance.storages])
    return LinearProgram(
        c=np.tile(c[:-1] - c[1:], n),
        A=A,
        row_lower=(lo - const).ravel(),
        row_upper=(hi - const).ravel(),
        lb=np.zeros(n * k),
        ub=np.repeat(cap, k),
        names=names,
        row_names=row_names,
        constant=float(np.sum(c[-1] * b - c[0] * a)),
        layout=ScheduleLayout(n, T, a.copy(), b.copy(), relaxed),
    )


def build_eass(instance: EassInstance, terminal_soc=None) -> LinearProgram:
    """Nominal program: the forecast loads are taken as exact."""
    lo, hi, relaxed = slot_bounds(instance)
    return _assemble(instance, lo, hi, relaxed, terminal_soc)


def build_eass_ro(instance: EassInstance, terminal_soc=None) -> LinearProgram:
    """Robust counterpart: loads are tightened by the budgeted deviation margin."""
    beta = deviation_margin(instance)
    lo, hi, relaxed = slot_bounds(instance, beta)
    return _assemble(instance, lo, hi, relaxed, terminal_soc)


def solve_eass(instance: EassInstance, robust: bool = False, method: str = "highs",
               terminal_soc=None) -> Solution:
    build = build_eass_ro if robust else build_eass
    return solve_lp(build(instance, terminal_soc), method=method)


def brute_force_oracle(instance: EassInstance, grid_step: float, robust: bool = False,
                       max_points: int = 5_000_000):
    """Exhaustive search over schedules whose entries are multiples of ``grid_step``.

    Returns ``(x, objective_kg)``, or ``(None, inf)`` when no lattice schedule
    is feasible. Constraints are checked directly from the SoC recursion,
    not from the LP rows.
    """
    n, T = instance.n, instance.T
    if n * T > 8:
        raise InstanceTooLargeError("brute force is limited to n * T <= 8")
    dt = instance.slot_hours
    rates = np.array([s.rate_per_slot(dt) for s in instance.storages])
    caps = np.array([s.capacity_kwh for s in instance.storages])
    for q in np.concatenate([rates, caps]):
        if abs(q / grid_step - round(q / grid_step)) > 1e-9:
            raise ValueError("grid step must divide every rate limit and capacity")
    levels = [np.arange(-round(r / grid_step), round(r / grid_step) + 1) * grid_step for r in rates]
    n_points = int(np.prod([len(lv) ** T for lv in levels], dtype=float))
    if n_points > max_points:
        raise InstanceTooLargeError(f"{n_points} lattice points exceed the limit of {max_points}")

    beta = np.zeros((n, T))
    if robust:
        for i in range(n):
            beta[i] = instance.sigma[i] * inner_budget_allocation(instance.sigma[i], instance.gamma)

    tol = 1e-9
    axes = [lv for lv in levels for _ in range(T)]
    grid = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, n, T)
    ok = np.ones(len(grid), dtype=bool)
    for i in range(n):
        xi = grid[:, i, :]
        s = instance.initial_soc[i] + np.cumsum(xi, axis=1)
        tr = instance.transformers[i]
        low = np.maximum(instance.loads[i] - beta[i], 0.0) * dt
        high = instance.loads[i] + beta[i]
        charge_room = np.maximum((tr.capacity_kw - tr.overload_margin_kw - high) * dt, 0.0)
        ok &= np.all(s >= -tol, axis=1) & np.all(s <= caps[i] + tol, axis=1)
        ok &= np.all(-xi <= low + tol, axis=1)
        ok &= np.all(xi <= charge_room + tol, axis=1)
        ok &= np.abs(s[:, -1] - instance.boundary_soc[i]) <= tol
    if not ok.any():
        return None, float("inf")
    objective = grid[ok].sum(axis=1) @ instance.cost / 1000.0
    best = int(np.argmin(objective))
    return grid[ok][best], float(objective[best])


def solve_per_unit(instance: EassInstance, robust: bool = False, method: str = "highs") -> list[Solution]:
    return [solve_eass(instance.unit(i), robust=robust, method=method) for i in range(instance.n)]

