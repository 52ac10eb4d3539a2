"""Discretized reservoir state spaces, value/policy tables and interpolation."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from hydrodp import kernels
from hydrodp.errors import DomainError

RANGE_TOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """Product grid of evenly spaced store levels ``{0, dq, ..., Qbar}`` per reservoir."""

    levels: tuple[int, ...]
    capacities: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(d) for d in self.levels))
        object.__setattr__(self, "capacities", tuple(float(q) for q in self.capacities))
        if any(d < 2 for d in self.levels):
            raise DomainError("every reservoir needs at least 2 levels")

    @classmethod
    def for_reservoirs(cls, reservoirs) -> "Grid":
        return cls(tuple(r.levels for r in reservoirs), tuple(r.capacity for r in reservoirs))

    @property
    def ndim(self) -> int:
        return len(self.levels)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.levels

    @property
    def size(self) -> int:
        return int(np.prod(self.levels))

    @property
    def steps(self) -> np.ndarray:
        return np.array([q / (d - 1) for q, d in zip(self.capacities, self.levels)])

    def axis(self, j: int) -> np.ndarray:
        return np.linspace(0.0, self.capacities[j], self.levels[j])

    def indices(self) -> np.ndarray:
        """Multi-indices of every state in C order, shape ``(size, ndim)``."""
        return np.array(list(itertools.product(*(range(d) for d in self.levels))), dtype=int)

    def points(self) -> np.ndarray:
        """Store vectors of every state in C order, shape ``(size, ndim)``."""
        axes = [self.axis(j) for j in range(self.ndim)]
        return np.array(list(itertools.product(*axes)), dtype=float).reshape(self.size, self.ndim)

    def check_range(self, points: np.ndarray) -> None:
        pts = np.atleast_2d(points)
        caps = np.asarray(self.capacities)
        tol = RANGE_TOL * np.maximum(caps, 1.0)
        if np.any(pts < -tol) or np.any(pts > caps + tol):
            bad = pts[np.any((pts < -tol) | (pts > caps + tol), axis=1)][0]
            raise DomainError(f"store vector {bad.tolist()} outside grid bounds {list(caps)}")

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, int]:
        """Multilinear interpolation of a table shaped ``self.shape`` at many points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return np.zeros(0), 0
        self.check_range(pts)
        return kernels.multilinear(values, self.levels, self.steps, pts)


@dataclass
class ValueTable:
    """Minimum expected cost-to-go ``f_i`` over the grid for one stage.

    ``values`` has shape ``grid.shape``, with a trailing inflow-bin axis for
    Markov models.
    """

    stage: int
    values: np.ndarray


@dataclass
class PolicyTable:
    """Optimal release(s) for one stage.

    ``controls`` has shape ``grid.shape`` for scalar-control models, a
    trailing reservoir axis for the exact multi-reservoir model, or a
    trailing inflow-bin axis for Markov models.
    """

    stage: int
    controls: np.ndarray


def value_at(table: ValueTable, grid: Grid, store_vector) -> float:
    """Multilinear interpolation of ``table`` at one store vector; exact at nodes."""
    q = np.atleast_1d(np.asarray(store_vector, dtype=float))
    if q.shape != (grid.ndim,):
        raise DomainError(f"store vector has {q.size} components, grid has {grid.ndim}")
    caps = np.asarray(grid.capacities)
    if np.any(q < 0) or np.any(q > caps * (1 + 1e-12)):
        raise DomainError(f"store vector {q.tolist()} outside [0, {caps.tolist()}]")
    out, _ = kernels.multilinear(table.values, grid.levels, grid.steps, q[None, :])
    return float(out[0])


def control_lattice(upper: float, step: float) -> np.ndarray:
    """Release candidates ``{0, step, 2 step, ...} <= upper`` plus ``upper`` itself.

    The endpoint is appended when it is not already a lattice point, so the
    largest admissible release is always a candidate.
    """
    if upper <= 0.0:
        return np.zeros(1)
    n = int(np.floor(upper / step + 1e-9))
    pts = np.minimum(np.arange(n + 1) * step, upper)
    if upper - pts[-1] > 1e-9 * step:
        pts = np.append(pts, upper)
    return pts


def lattice_matrix(uppers, step: float) -> np.ndarray:
    """Stack ``control_lattice`` rows for many upper bounds; pads with NaN."""
    rows = [control_lattice(float(u), step) for u in np.ravel(uppers)]
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), np.nan)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


@dataclass
class Solution:
    """Per-stage value and policy tables produced by a backward sweep.

    ``values[0]`` is ``f_1``.  For Markov models ``initial_distribution`` holds
    the distribution of the inflow bin preceding period 1.
    """

    model: str
    grid: Grid
    values: list[ValueTable]
    policies: list[PolicyTable]
    metrics: dict
    initial_distribution: np.ndarray | None = None

    @property
    def n_stages(self) -> int:
        return len(self.values)

    def value(self, store_vector, stage: int = 1, prev_bin: int | None = None) -> float:
        table = self.values[stage - 1]
        if prev_bin is not None:
            table = ValueTable(table.stage, table.values[..., prev_bin])
        return value_at(table, self.grid, store_vector)

    def initial_value(self, store_vector) -> float:
        """``f_1`` at the initial stores, averaged over the initial inflow bin if Markov."""
        if self.initial_distribution is None:
            return self.value(store_vector)
        return float(
            sum(
                w * self.value(store_vector, prev_bin=b)
                for b, w in enumerate(self.initial_distribution)
                if w > 0
            )
        )
