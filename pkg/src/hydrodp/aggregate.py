"""Aggregated single-control heuristic for many reservoirs.

One scalar release per period is split across reservoirs in proportion to
their potential ``Q_j + x_j``.  Each grid state then needs a single
one-dimensional minimization instead of a search over release vectors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from hydrodp import kernels
from hydrodp.errors import DomainError
from hydrodp.grid import Grid, PolicyTable, Solution, ValueTable
from hydrodp.scenario import Scenario, check_applicable, ensure_valid

DEFAULT_REFINE = 4


@dataclass(frozen=True)
class AggregateState:
    stores: tuple[float, ...]
    inflows: tuple[float, ...]

    @property
    def potentials(self) -> np.ndarray:
        return np.asarray(self.stores, dtype=float) + np.asarray(self.inflows, dtype=float)

    @property
    def potential(self) -> float:
        return float(sum(self.potentials))


def allocate(state: AggregateState, release: float, capacities) -> np.ndarray:
    """Successor stores after drawing ``release`` proportionally from every reservoir.

    Each reservoir keeps ``(1 - u/M)`` of its potential, clamped at capacity
    (the excess spills).
    """
    pot = state.potentials
    total = state.potential
    if release < 0 or release > total * (1 + 1e-12):
        raise DomainError(f"release {release!r} outside [0, M = {total!r}]")
    if total <= 0.0:
        return np.zeros_like(pot)
    succ = pot - release * (pot / total)
    return np.minimum(np.asarray(capacities, dtype=float), np.maximum(succ, 0.0))


def solve_aggregate(scenario: Scenario, refine: int = DEFAULT_REFINE) -> Solution:
    """Backward induction with one 1-D release minimization per grid state and stage."""
    ensure_valid(scenario)
    check_applicable(scenario, "aggregate")
    t0 = time.perf_counter()
    n = scenario.n_periods
    grid = Grid.for_reservoirs(scenario.reservoirs)
    states = grid.points()
    X = scenario.inflow_matrix()
    c = scenario.costs
    caps = np.asarray(grid.capacities)
    levels = np.asarray(grid.levels)

    f = np.zeros(grid.shape)
    values, policies, counts = [], [], []
    offgrid = 0
    for i in range(n - 1, -1, -1):
        vals, us, off = kernels.aggregate_stage(
            states, X[i], caps, levels, grid.steps, f,
            scenario.demands[i], c.thermal_price, c.deficit_penalty,
            c.thermal_cap, c.sale_prices[i], refine,
        )
        counts.append(len(vals))
        offgrid += off
        f = vals.reshape(grid.shape)
        values.append(ValueTable(i + 1, f))
        policies.append(PolicyTable(i + 1, us.reshape(grid.shape)))
    metrics = {
        "minimizations_per_stage": counts[0],
        "minimizations_by_stage": counts[::-1],
        "offgrid_queries": offgrid,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
        "backend": kernels.BACKEND,
    }
    return Solution("aggregate", grid, values[::-1], policies[::-1], metrics)
