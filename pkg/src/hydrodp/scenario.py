"""Problem-instance data model shared by every solver.

All solver-facing quantities are energy-equivalent units.  Instances are
immutable; sequences are normalised to tuples on construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from hydrodp.energy import HeadCurve
from hydrodp.errors import ApplicabilityError, ValidationError

PROB_TOL = 1e-9
DEFAULT_CONFIDENCE = 0.95


def _floats(seq) -> tuple[float, ...]:
    return tuple(float(v) for v in seq)


@dataclass(frozen=True)
class CostParams:
    thermal_price: float
    deficit_penalty: float
    thermal_cap: float
    sale_prices: tuple[float, ...]
    demand_penalty: float | None = None

    def __post_init__(self):
        for name in ("thermal_price", "deficit_penalty", "thermal_cap"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "sale_prices", _floats(self.sale_prices))
        if self.demand_penalty is not None:
            object.__setattr__(self, "demand_penalty", float(self.demand_penalty))


@dataclass(frozen=True)
class Reservoir:
    capacity: float
    initial_store: float
    levels: int
    head_curve: HeadCurve | None = None

    def __post_init__(self):
        object.__setattr__(self, "capacity", float(self.capacity))
        object.__setattr__(self, "initial_store", float(self.initial_store))

    @property
    def step(self) -> float:
        return self.capacity / (self.levels - 1)


@dataclass(frozen=True)
class CascadeStation:
    """Run-of-river station below the reservoir."""

    pass_capacity: float
    lateral_inflows: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "pass_capacity", float(self.pass_capacity))
        object.__setattr__(self, "lateral_inflows", _floats(self.lateral_inflows))


@dataclass(frozen=True)
class InflowDistribution:
    support: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "support", _floats(self.support))
        object.__setattr__(self, "weights", _floats(self.weights))

    @classmethod
    def point(cls, value: float) -> "InflowDistribution":
        return cls((value,), (1.0,))

    def mean(self) -> float:
        return float(np.dot(self.support, self.weights))


@dataclass(frozen=True)
class Deterministic:
    """Known inflow series, one per reservoir."""

    inflows: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "inflows", tuple(_floats(s) for s in self.inflows))


@dataclass(frozen=True)
class IndependentDensity:
    """Independent per-period inflow distributions for a single reservoir."""

    periods: tuple[InflowDistribution, ...]
    confidence_level: float = DEFAULT_CONFIDENCE

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(self.periods))


@dataclass(frozen=True)
class MarkovChain:
    """First-order Markov inflows over shared bins.

    ``transitions[i][a][b]`` is the probability of inflow bin ``b`` in period
    ``i`` given bin ``a`` in period ``i - 1``.  ``initial`` is the distribution
    of the inflow bin observed just before the first period.
    """

    bins: tuple[float, ...]
    transitions: tuple[tuple[tuple[float, ...], ...], ...]
    initial: tuple[float, ...]
    confidence_level: float = DEFAULT_CONFIDENCE

    def __post_init__(self):
        object.__setattr__(self, "bins", _floats(self.bins))
        object.__setattr__(
            self,
            "transitions",
            tuple(tuple(_floats(row) for row in mat) for mat in self.transitions),
        )
        object.__setattr__(self, "initial", _floats(self.initial))

    def row(self, period: int, prev_bin: int) -> InflowDistribution:
        return InflowDistribution(self.bins, self.transitions[period][prev_bin])


FlowModel = Union[Deterministic, IndependentDensity, MarkovChain]


@dataclass(frozen=True)
class Scenario:
    n_periods: int
    demands: tuple[float, ...]
    costs: CostParams
    reservoirs: tuple[Reservoir, ...]
    flow: FlowModel
    cascade_stations: tuple[CascadeStation, ...] = field(default=())
    tau_days: int = 1

    def __post_init__(self):
        object.__setattr__(self, "demands", _floats(self.demands))
        object.__setattr__(self, "reservoirs", tuple(self.reservoirs))
        object.__setattr__(self, "cascade_stations", tuple(self.cascade_stations))

    @property
    def capacities(self) -> np.ndarray:
        return np.array([r.capacity for r in self.reservoirs])

    @property
    def initial_stores(self) -> np.ndarray:
        return np.array([r.initial_store for r in self.reservoirs])

    def inflow_matrix(self) -> np.ndarray:
        """Deterministic inflows as an ``(n_periods, n_reservoirs)`` array."""
        if not isinstance(self.flow, Deterministic):
            raise ApplicabilityError("scenario flow model is not deterministic")
        return np.array(self.flow.inflows, dtype=float).T.reshape(
            self.n_periods, len(self.reservoirs)
        )


def _check_distribution(prefix: str, support, weights) -> list[str]:
    out = []
    if len(support) == 0:
        return [f"{prefix}: empty support"]
    if len(support) != len(weights):
        out.append(f"{prefix}: support has {len(support)} values but weights has {len(weights)}")
        return out
    if any(not math.isfinite(w) or w < 0 for w in weights):
        out.append(f"{prefix}.weights: weights must be finite and non-negative")
    if abs(math.fsum(weights) - 1.0) > PROB_TOL:
        out.append(f"{prefix}.weights: sums to {math.fsum(weights):.12g}, expected 1")
    if any(not math.isfinite(v) or v < 0 for v in support):
        out.append(f"{prefix}.support: inflow values must be finite and non-negative")
    if any(b <= a for a, b in zip(support, support[1:])):
        out.append(f"{prefix}.support: values must be strictly ascending")
    return out


def _check_confidence(prefix: str, level: float) -> list[str]:
    if not 0.0 < level < 1.0:
        return [f"{prefix}.confidence_level: must lie in (0, 1), got {level:g}"]
    return []


def validate(scenario: Scenario) -> list[str]:
    """Return every invariant violation in ``scenario``; empty when valid."""
    v: list[str] = []
    n = scenario.n_periods
    if not isinstance(n, int) or n < 1:
        v.append(f"n_periods: must be a positive integer, got {n!r}")
        return v
    if len(scenario.demands) != n:
        v.append(f"demands: length {len(scenario.demands)} != n_periods {n}")
    if any(not math.isfinite(r) or r < 0 for r in scenario.demands):
        v.append("demands: every demand must be finite and non-negative")
    if not isinstance(scenario.tau_days, int) or scenario.tau_days < 1:
        v.append(f"tau_days: must be a positive integer, got {scenario.tau_days!r}")

    c = scenario.costs
    if c.thermal_price < 0:
        v.append(f"costs.thermal_price: must be >= 0, got {c.thermal_price:g}")
    if not c.deficit_penalty > c.thermal_price:
        v.append(
            f"costs.deficit_penalty: must exceed thermal_price "
            f"(p={c.deficit_penalty:g}, c={c.thermal_price:g})"
        )
    if c.thermal_cap < 0:
        v.append(f"costs.thermal_cap: must be >= 0, got {c.thermal_cap:g}")
    if len(c.sale_prices) != n:
        v.append(f"costs.sale_prices: length {len(c.sale_prices)} != n_periods {n}")
    for i, a in enumerate(c.sale_prices):
        if not 0.0 <= a < c.deficit_penalty:
            v.append(f"costs.sale_prices[{i}]: must satisfy 0 <= a < p, got {a:g}")
    if c.demand_penalty is not None and not c.demand_penalty > 0:
        v.append(f"costs.demand_penalty: must be > 0, got {c.demand_penalty:g}")

    if not scenario.reservoirs:
        v.append("reservoirs: at least one reservoir is required")
    for j, res in enumerate(scenario.reservoirs):
        p = f"reservoirs[{j}]"
        if not res.capacity > 0:
            v.append(f"{p}.capacity: must be > 0, got {res.capacity:g}")
        if not 0 <= res.initial_store <= res.capacity:
            v.append(
                f"{p}.initial_store: must lie in [0, {res.capacity:g}], got {res.initial_store:g}"
            )
        if not isinstance(res.levels, int) or res.levels < 2:
            v.append(f"{p}.levels: must be an integer >= 2, got {res.levels!r}")
        if res.head_curve is not None:
            v.extend(res.head_curve.violations(f"{p}.head_curve"))

    for j, st in enumerate(scenario.cascade_stations):
        p = f"cascade_stations[{j}]"
        if not st.pass_capacity > 0:
            v.append(f"{p}.pass_capacity: must be > 0, got {st.pass_capacity:g}")
        if len(st.lateral_inflows) != n:
            v.append(f"{p}.lateral_inflows: length {len(st.lateral_inflows)} != n_periods {n}")
        if any(x < 0 for x in st.lateral_inflows):
            v.append(f"{p}.lateral_inflows: inflows must be non-negative")

    flow = scenario.flow
    if isinstance(flow, Deterministic):
        if len(flow.inflows) != len(scenario.reservoirs):
            v.append(
                f"flow.inflows: {len(flow.inflows)} series for "
                f"{len(scenario.reservoirs)} reservoirs"
            )
        for j, series in enumerate(flow.inflows):
            if len(series) != n:
                v.append(f"flow.inflows[{j}]: length {len(series)} != n_periods {n}")
            if any(not math.isfinite(x) or x < 0 for x in series):
                v.append(f"flow.inflows[{j}]: inflows must be finite and non-negative")
    elif isinstance(flow, IndependentDensity):
        if len(flow.periods) != n:
            v.append(f"flow.periods: {len(flow.periods)} distributions for {n} periods")
        for i, dist in enumerate(flow.periods):
            v.extend(_check_distribution(f"flow.periods[{i}]", dist.support, dist.weights))
        v.extend(_check_confidence("flow", flow.confidence_level))
    elif isinstance(flow, MarkovChain):
        nb = len(flow.bins)
        v.extend(_check_distribution("flow.initial", flow.bins, flow.initial))
        if len(flow.transitions) != n:
            v.append(f"flow.transitions: {len(flow.transitions)} matrices for {n} periods")
        for i, mat in enumerate(flow.transitions):
            if len(mat) != nb or any(len(row) != nb for row in mat):
                v.append(f"flow.transitions[{i}]: matrix must be {nb}x{nb}")
                continue
            for a, row in enumerate(mat):
                if any(not math.isfinite(w) or w < 0 for w in row):
                    v.append(f"flow.transitions[{i}][{a}]: entries must be non-negative")
                s = math.fsum(row)
                if abs(s - 1.0) > PROB_TOL:
                    v.append(f"flow.transitions[{i}][{a}]: row sums to {s:.12g}, expected 1")
        v.extend(_check_confidence("flow", flow.confidence_level))
    else:
        v.append(f"flow: unknown flow model {type(flow).__name__}")
    return v


def ensure_valid(scenario: Scenario) -> None:
    violations = validate(scenario)
    if violations:
        raise ValidationError(violations)


MAX_EXACT_RESERVOIRS = 3

MODELS = ("single", "cascade", "multi", "multi-penalty", "aggregate", "independent", "markov")


def check_applicable(scenario: Scenario, model: str, allow_high_dimension: bool = False) -> None:
    """Raise ``ApplicabilityError`` unless ``model`` can solve ``scenario``."""
    m = len(scenario.reservoirs)
    ns = len(scenario.cascade_stations)
    flow = scenario.flow
    if model not in MODELS:
        raise ApplicabilityError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    if model in ("single", "independent", "markov") and (m != 1 or ns != 0):
        raise ApplicabilityError(
            f"model {model} requires exactly 1 reservoir and no cascade stations "
            f"(got {m} reservoirs, {ns} stations)"
        )
    if model == "cascade" and (m != 1 or ns < 1):
        raise ApplicabilityError(
            f"model cascade requires exactly 1 reservoir and at least 1 cascade station "
            f"(got {m} reservoirs, {ns} stations)"
        )
    if model in ("multi", "multi-penalty", "aggregate") and ns != 0:
        raise ApplicabilityError(
            f"model {model} gives every station its own reservoir; "
            f"cascade_stations must be empty (got {ns})"
        )
    if model in ("single", "cascade", "multi", "multi-penalty", "aggregate"):
        if not isinstance(flow, Deterministic):
            raise ApplicabilityError(f"model {model} requires deterministic inflows")
    if model == "independent" and not isinstance(flow, IndependentDensity):
        raise ApplicabilityError("model independent requires an independent inflow distribution")
    if model == "markov" and not isinstance(flow, MarkovChain):
        raise ApplicabilityError("model markov requires a Markov-chain inflow model")
    if model in ("multi", "multi-penalty") and m > MAX_EXACT_RESERVOIRS and not allow_high_dimension:
        raise ApplicabilityError(
            f"exact multi-reservoir DP over {m} reservoirs is refused: the product grid "
            f"grows as d^{m} (curse of dimensionality); use the aggregate model or pass "
            f"allow_high_dimension"
        )
    if model == "multi-penalty":
        c = scenario.costs
        if c.demand_penalty is None and any(a == 0 for a in c.sale_prices):
            raise ApplicabilityError(
                "penalty mode needs costs.demand_penalty for periods without a sale price"
            )
