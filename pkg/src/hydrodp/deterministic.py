"""Backward induction for the deterministic models.

Three recurrences share one cost row: the single reservoir, a single
reservoir feeding a run-of-river cascade, and the exact multi-reservoir
series chain (with a hard demand cap on total hydro or a surplus penalty).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from hydrodp import kernels
from hydrodp._pykernels import stage_cost as _stage_cost_vec
from hydrodp.grid import (
    Grid,
    PolicyTable,
    Solution,
    ValueTable,
    control_lattice,
    lattice_matrix,
)
from hydrodp.scenario import CostParams, Scenario, check_applicable, ensure_valid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StageCostInputs:
    demand: float
    hydro: float
    costs: CostParams
    period: int  # 0-based


def stage_cost(inputs: StageCostInputs) -> float:
    """Thermal plus deficit cost less sale revenue for one period.

    Thermal output is clamped to ``[0, K]``; any hydro above demand is sold at
    the period's sale price.
    """
    c = inputs.costs
    return float(
        _stage_cost_vec(
            inputs.hydro,
            inputs.demand,
            c.thermal_price,
            c.deficit_penalty,
            c.thermal_cap,
            c.sale_prices[inputs.period],
        )
    )


def period_costs(scenario: Scenario, period: int, hydro):
    c = scenario.costs
    return _stage_cost_vec(
        np.asarray(hydro, dtype=float),
        scenario.demands[period],
        c.thermal_price,
        c.deficit_penalty,
        c.thermal_cap,
        c.sale_prices[period],
    )


def terminal_stage(scenario: Scenario, store: float) -> tuple[float, float]:
    """Closed-form last-period decision for the single reservoir: release all demand allows."""
    n = scenario.n_periods
    x = scenario.inflow_matrix()[n - 1, 0]
    release = min(scenario.demands[n - 1], store + x)
    cost = stage_cost(StageCostInputs(scenario.demands[n - 1], release, scenario.costs, n - 1))
    return cost, release


def _sweep_1d(grid, f_next, stores, inflow, uppers, step, hydro_fn, cost_fn):
    """Minimize stage cost plus continuation over a release lattice for every store."""
    U = lattice_matrix(uppers, step)
    mask = np.isnan(U)
    U = np.where(mask, 0.0, U)
    cap = grid.capacities[0]
    succ = np.minimum((stores[:, None] + inflow) - U, cap)
    cont, off = grid.interpolate(f_next, succ.reshape(-1, 1))
    obj = cost_fn(hydro_fn(U)) + cont.reshape(U.shape)
    obj[mask] = np.inf
    vals, idx = kernels.select_min(obj)
    return vals, U[np.arange(len(stores)), idx], off


def _finish(model, grid, values, policies, metrics, t0):
    metrics["wall_ms"] = (time.perf_counter() - t0) * 1e3
    metrics["backend"] = kernels.BACKEND
    return Solution(model, grid, values, policies, metrics)


def solve_single(scenario: Scenario, refine: int = 1) -> Solution:
    """Single reservoir, known inflows; releases capped by demand and available water."""
    ensure_valid(scenario)
    check_applicable(scenario, "single")
    t0 = time.perf_counter()
    n = scenario.n_periods
    grid = Grid.for_reservoirs(scenario.reservoirs)
    stores = grid.axis(0)
    X = scenario.inflow_matrix()[:, 0]
    r = scenario.demands
    step = grid.steps[0] / refine

    u_last = np.minimum(r[-1], stores + X[-1])
    f = period_costs(scenario, n - 1, u_last)
    flagged = int(np.count_nonzero(grid.capacities[0] < u_last))
    if flagged:
        log.info(
            "terminal release exceeds capacity at %d states; the capacity term is not applied",
            flagged,
        )
    values = [ValueTable(n, f)]
    policies = [PolicyTable(n, u_last)]
    offgrid = 0
    for i in range(n - 2, -1, -1):
        uppers = np.minimum(r[i], stores + X[i])
        f, u, off = _sweep_1d(
            grid, f, stores, X[i], uppers, step,
            lambda U: U, lambda h, i=i: period_costs(scenario, i, h),
        )
        offgrid += off
        values.append(ValueTable(i + 1, f))
        policies.append(PolicyTable(i + 1, u))
    metrics = {
        "minimizations_per_stage": grid.size,
        "offgrid_queries": offgrid,
        "terminal_capacity_flags": flagged,
    }
    return _finish("single", grid, values[::-1], policies[::-1], metrics, t0)


def station_flows(release, pass_capacities, laterals) -> np.ndarray:
    """Water processed by each station: ``min(I_j, u + xi_1 + ... + xi_j)``.

    ``release`` may be an array; the station axis is appended last.
    """
    cum = np.cumsum(np.asarray(laterals, dtype=float))
    u = np.asarray(release, dtype=float)[..., None]
    return np.minimum(np.asarray(pass_capacities, dtype=float), u + cum)


def cascade_hydro(release, pass_capacities, laterals):
    return station_flows(release, pass_capacities, laterals).sum(axis=-1)


def cascade_release_cap(upper, pass_capacities, laterals, demand) -> float:
    """Largest release in ``[0, upper]`` whose total station output stays within ``demand``.

    When lateral inflows alone already exceed demand no release is admissible
    and 0 is returned (the surplus is forced through the stations).
    """
    caps = np.asarray(pass_capacities, dtype=float)
    cum = np.cumsum(np.asarray(laterals, dtype=float))

    def g(u):
        return float(np.minimum(caps, u + cum).sum())

    if g(upper) <= demand:
        return float(upper)
    if g(0.0) > demand:
        return 0.0
    knots = sorted({0.0, float(upper), *(b for b in caps - cum if 0.0 < b < upper)})
    for lo, hi in zip(knots, knots[1:]):
        if g(hi) > demand:
            slope = int(np.count_nonzero(lo + cum < caps))
            return lo + (demand - g(lo)) / slope
    return float(upper)  # unreachable: g(upper) > demand handled above


def solve_cascade(scenario: Scenario, refine: int = 1) -> Solution:
    """Reservoir above a chain of run-of-river stations; total station output may not exceed demand."""
    ensure_valid(scenario)
    check_applicable(scenario, "cascade")
    t0 = time.perf_counter()
    n = scenario.n_periods
    grid = Grid.for_reservoirs(scenario.reservoirs)
    stores = grid.axis(0)
    X = scenario.inflow_matrix()[:, 0]
    r = scenario.demands
    I = [st.pass_capacity for st in scenario.cascade_stations]
    xi = np.array([st.lateral_inflows for st in scenario.cascade_stations]).T
    step = grid.steps[0] / refine

    def caps(i):
        return np.array([cascade_release_cap(q + X[i], I, xi[i], r[i]) for q in stores])

    u_last = caps(n - 1)
    f = period_costs(scenario, n - 1, cascade_hydro(u_last, I, xi[n - 1]))
    values = [ValueTable(n, f)]
    policies = [PolicyTable(n, u_last)]
    offgrid = 0
    for i in range(n - 2, -1, -1):
        f, u, off = _sweep_1d(
            grid, f, stores, X[i], caps(i), step,
            lambda U, i=i: cascade_hydro(U, I, xi[i]),
            lambda h, i=i: period_costs(scenario, i, h),
        )
        offgrid += off
        values.append(ValueTable(i + 1, f))
        policies.append(PolicyTable(i + 1, u))
    metrics = {"minimizations_per_stage": grid.size, "offgrid_queries": offgrid}
    return _finish("cascade", grid, values[::-1], policies[::-1], metrics, t0)


def multi_controls(stores, inflows, steps, demand: float, hard: bool) -> np.ndarray:
    """All lattice release vectors for one state of the series chain, in lexicographic order.

    Reservoir ``j`` may release up to its store plus its own inflow plus the
    release arriving from reservoir ``j - 1`` in the same period; in hard mode
    the running total is also capped by demand.
    """
    m = len(stores)
    out: list[list[float]] = []

    def rec(j, prefix, upstream, used):
        if j == m:
            out.append(prefix)
            return
        bound = stores[j] + inflows[j] + upstream
        if hard:
            bound = min(bound, demand - used)
        for u in control_lattice(bound, steps[j]):
            rec(j + 1, prefix + [float(u)], float(u), used + float(u))

    rec(0, [], 0.0, 0.0)
    return np.array(out).reshape(len(out), m)


def multi_successors(stores, inflows, controls, capacities) -> np.ndarray:
    """``min(Qbar_j, Q_j + xi_j + u_{j-1} - u_j)`` for each control row."""
    U = np.atleast_2d(controls)
    upstream = np.zeros_like(U)
    upstream[:, 1:] = U[:, :-1]
    return np.minimum(np.asarray(capacities), (stores + inflows + upstream) - U)


def multi_costs(scenario: Scenario, period: int, controls, hard: bool):
    hydro = np.atleast_2d(controls).sum(axis=1)
    cost = period_costs(scenario, period, hydro)
    if not hard and scenario.costs.sale_prices[period] == 0:
        cost = cost + scenario.costs.demand_penalty * np.maximum(
            hydro - scenario.demands[period], 0.0
        )
    return cost


def solve_multi(
    scenario: Scenario,
    mode: str = "hard",
    refine: int = 1,
    allow_high_dimension: bool = False,
) -> Solution:
    """Exact DP over the product grid of a series chain of reservoirs."""
    if mode not in ("hard", "penalty"):
        raise ValueError(f"mode must be 'hard' or 'penalty', got {mode!r}")
    ensure_valid(scenario)
    model = "multi" if mode == "hard" else "multi-penalty"
    check_applicable(scenario, model, allow_high_dimension)
    hard = mode == "hard"
    t0 = time.perf_counter()
    n = scenario.n_periods
    grid = Grid.for_reservoirs(scenario.reservoirs)
    m = grid.ndim
    states = grid.points()
    X = scenario.inflow_matrix()
    steps = grid.steps / refine
    caps = np.asarray(grid.capacities)

    f = np.zeros(grid.shape)
    values, policies = [], []
    offgrid = 0
    for i in range(n - 1, -1, -1):
        blocks = [
            multi_controls(q, X[i], steps, scenario.demands[i], hard) for q in states
        ]
        width = max(len(b) for b in blocks)
        U = np.zeros((len(states), width, m))
        mask = np.ones((len(states), width), dtype=bool)
        for s, b in enumerate(blocks):
            U[s, : len(b)] = b
            mask[s, : len(b)] = False
        flatU = U.reshape(-1, m)
        succ = multi_successors(np.repeat(states, width, axis=0), X[i], flatU, caps)
        cont, off = grid.interpolate(f, succ)
        offgrid += off
        obj = (multi_costs(scenario, i, flatU, hard) + cont).reshape(len(states), width)
        obj[mask] = np.inf
        vals, idx = kernels.select_min(obj)
        f = vals.reshape(grid.shape)
        best = U[np.arange(len(states)), idx]
        values.append(ValueTable(i + 1, f))
        policies.append(PolicyTable(i + 1, best.reshape(*grid.shape, m)))
    metrics = {"minimizations_per_stage": grid.size, "offgrid_queries": offgrid}
    return _finish(model, grid, values[::-1], policies[::-1], metrics, t0)
