"""Dynamic-programming scheduling of hydro-thermal power systems."""

from hydrodp.aggregate import allocate, solve_aggregate
from hydrodp.deterministic import (
    solve_cascade,
    solve_multi,
    solve_single,
    stage_cost,
    terminal_stage,
)
from hydrodp.energy import HeadCurve, energy_of_release, head_at
from hydrodp.errors import ApplicabilityError, BudgetExceeded, DomainError, ValidationError
from hydrodp.grid import Grid, PolicyTable, Solution, ValueTable, value_at
from hydrodp.kernels import BACKEND
from hydrodp.oracle import (
    RolloutTrace,
    brute_force_optimum,
    brute_force_stochastic,
    rollout,
)
from hydrodp.scenario import (
    MODELS,
    CascadeStation,
    CostParams,
    Deterministic,
    IndependentDensity,
    InflowDistribution,
    MarkovChain,
    Reservoir,
    Scenario,
    check_applicable,
    validate,
)
from hydrodp.stochastic import fidelity_bound, solve_independent, solve_markov

__version__ = "0.1.0"


def solve(scenario: Scenario, model: str, refine: int | None = None, **kwargs) -> Solution:
    """Dispatch to the solver for ``model`` (one of ``MODELS``)."""
    check_applicable(scenario, model, kwargs.get("allow_high_dimension", False))
    extra = {} if refine is None else {"refine": refine}
    if model == "single":
        return solve_single(scenario, **extra)
    if model == "cascade":
        return solve_cascade(scenario, **extra)
    if model in ("multi", "multi-penalty"):
        mode = "hard" if model == "multi" else "penalty"
        return solve_multi(scenario, mode, **extra, **kwargs)
    if model == "aggregate":
        return solve_aggregate(scenario, **extra)
    if model == "independent":
        return solve_independent(scenario, **extra)
    return solve_markov(scenario, **extra)


__all__ = [
    "ApplicabilityError",
    "BACKEND",
    "BudgetExceeded",
    "CascadeStation",
    "CostParams",
    "Deterministic",
    "DomainError",
    "Grid",
    "HeadCurve",
    "IndependentDensity",
    "InflowDistribution",
    "MODELS",
    "MarkovChain",
    "PolicyTable",
    "Reservoir",
    "RolloutTrace",
    "Scenario",
    "Solution",
    "ValidationError",
    "ValueTable",
    "allocate",
    "brute_force_optimum",
    "brute_force_stochastic",
    "check_applicable",
    "energy_of_release",
    "fidelity_bound",
    "head_at",
    "rollout",
    "solve",
    "solve_aggregate",
    "solve_cascade",
    "solve_independent",
    "solve_markov",
    "solve_multi",
    "solve_single",
    "stage_cost",
    "terminal_stage",
    "validate",
    "value_at",
]
