import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hydrodp
from hydrodp.deterministic import terminal_stage
from hydrodp.errors import BudgetExceeded, DomainError
from hydrodp.grid import PolicyTable, Solution
from hydrodp.oracle import (
    brute_force_optimum,
    brute_force_stochastic,
    enumeration_size,
    rollout,
    sample_inflows,
)
from hydrodp.scenario import (
    CostParams,
    Deterministic,
    IndependentDensity,
    InflowDistribution,
    MarkovChain,
    Reservoir,
    Scenario,
)

import instances


def example():
    return Scenario(2, (2, 2), CostParams(1, 10, 1, (0, 0)), (Reservoir(2, 1, 3),), Deterministic(((1, 1),)))


def test_hand_enumerated_example():
    total, seq = brute_force_optimum(example(), "single")
    assert total == 1.0
    assert seq[0] == 1.0
    # every one of the 3 x 3 sequences, by hand: only u1 = 0 is expensive
    assert seq == [1.0, 2.0]


def test_one_period_equals_terminal(rng):
    for _ in range(20):
        s = instances.deterministic(rng, n=1)
        assert brute_force_optimum(s, "single")[0] == terminal_stage(s, s.initial_stores[0])[0]


def test_aggregate_single_reservoir_equals_single(rng):
    for _ in range(20):
        s = instances.deterministic(rng)
        assert brute_force_optimum(s, "aggregate")[0] == brute_force_optimum(s, "single")[0]


def test_budget_refusal_reports_size():
    s = instances.deterministic(np.random.default_rng(1), n=4, m=2, dmax=6)
    size = enumeration_size(s, "multi")
    with pytest.raises(BudgetExceeded) as exc:
        brute_force_optimum(s, "multi", budget=size - 1)
    assert exc.value.size == size


def test_deterministic_oracle_rejects_random_flows(rng):
    with pytest.raises(DomainError):
        brute_force_optimum(instances.independent(rng), "single")


def test_point_mass_tree_equals_sequence_search(rng):
    for _ in range(15):
        s = instances.deterministic(rng)
        pts = tuple(InflowDistribution.point(x) for x in s.flow.inflows[0])
        sto = Scenario(s.n_periods, s.demands, s.costs, s.reservoirs, IndependentDensity(pts, 0.6))
        assert brute_force_stochastic(sto) == pytest.approx(brute_force_optimum(s, "single")[0], abs=1e-12)


def test_one_period_two_atoms():
    # u is fixed before x lands: with store 0 and atoms {0, 2}, bound 2 -> u in {0, 1, 2}
    s = Scenario(
        1, (2,), CostParams(1, 10, 1, (0,)), (Reservoir(2, 0, 3),),
        IndependentDensity((InflowDistribution((0, 2), (0.5, 0.5)),), 0.9),
    )
    c, p, K = 1, 10, 1

    def planned(u):
        gap = 2 - u
        return c * min(max(gap, 0), K) + p * max(gap - K, 0)

    expected = min(
        0.5 * (planned(u) + p * max(u - 0, 0)) + 0.5 * (planned(u) + p * max(u - 2, 0))
        for u in (0, 1, 2)
    )
    assert brute_force_stochastic(s) == pytest.approx(expected)
    assert hydrodp.solve_independent(s).value([0.0]) == pytest.approx(expected)


def test_iid_markov_tree_equals_independent_tree():
    dist = InflowDistribution((0, 1, 3), (0.2, 0.5, 0.3))
    row = dist.weights
    ind = Scenario(
        3, (2, 1, 3), CostParams(1, 6, 1, (0,) * 3), (Reservoir(3, 1, 4),),
        IndependentDensity((dist,) * 3, 0.8),
    )
    mk = Scenario(
        3, ind.demands, ind.costs, ind.reservoirs,
        MarkovChain(dist.support, ((row,) * 3,) * 3, (0.1, 0.6, 0.3), 0.8),
    )
    assert brute_force_stochastic(mk) == pytest.approx(brute_force_stochastic(ind), abs=1e-12)


# -- rollout ---------------------------------------------------------------

MODELS = {
    "single": lambda rng: instances.deterministic(rng),
    "cascade": lambda rng: instances.cascade(rng),
    "multi": lambda rng: instances.deterministic(rng, m=2, dmax=4),
    "multi-penalty": lambda rng: instances.deterministic(rng, m=2, dmax=4, sale=True, gamma=2.0),
    # one reservoir keeps aggregate successors on the grid; with more the
    # table is interpolated and a rollout only approximates it
    "aggregate": lambda rng: instances.deterministic(rng, dmax=6),
}


def _check_balance(s, tr):
    caps = s.capacities
    raw = tr.store_before + tr.inflow - tr.release
    np.testing.assert_allclose(tr.store_after, np.minimum(caps, raw), atol=1e-12)
    np.testing.assert_allclose(tr.spill, np.maximum(0.0, raw - caps), atol=1e-12)
    assert tr.total_cost == pytest.approx(math.fsum(tr.stage_cost), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(sorted(MODELS)))
def test_rollout_reproduces_value(seed, model):
    s = MODELS[model](np.random.default_rng(seed))
    sol = hydrodp.solve(s, model)
    tr = rollout(s, sol, s.inflow_matrix())
    assert abs(tr.total_cost - sol.initial_value(s.initial_stores)) <= 1e-9
    _check_balance(s, tr)


def test_aggregate_rollout_balances_off_grid(rng):
    for _ in range(20):
        s = instances.deterministic(rng, m=int(rng.integers(2, 4)), dmax=4)
        _check_balance(s, rollout(s, hydrodp.solve_aggregate(s), s.inflow_matrix()))


def test_zero_release_policy():
    s = Scenario(
        3, (2, 1, 2), CostParams(1, 10, 1, (0,) * 3), (Reservoir(3, 2, 4),), Deterministic(((1, 2, 0),)),
    )
    sol = hydrodp.solve_single(s)
    idle = Solution(
        sol.model, sol.grid, sol.values,
        [PolicyTable(p.stage, np.zeros_like(p.controls)) for p in sol.policies], {},
    )
    tr = rollout(s, idle, s.inflow_matrix())
    assert np.all(tr.release == 0) and np.all(tr.hydro == 0)
    assert tr.spill[:, 0].tolist() == [0.0, 2.0, 0.0]
    assert tr.stage_cost.tolist() == [11.0, 1.0, 11.0]
    _check_balance(s, tr)


def test_rollout_dimension_mismatch():
    s = example()
    sol = hydrodp.solve_single(s)
    with pytest.raises(DomainError):
        rollout(s, sol, np.ones(3))


def test_markov_rollout_needs_initial_bin(rng):
    s = instances.markov(rng)
    with pytest.raises(DomainError):
        rollout(s, hydrodp.solve_markov(s), np.zeros(s.n_periods))


@pytest.mark.parametrize("kind", ["independent", "markov"])
def test_monte_carlo_mean_approaches_value(kind):
    # instance seeds picked so that path costs actually vary
    if kind == "markov":
        s = instances.markov(np.random.default_rng(3), n=3, nbins=3)
    else:
        s = instances.independent(np.random.default_rng(4), n=3)
    sol = hydrodp.solve(s, kind)
    paths = sample_inflows(s, 10_000, np.random.default_rng(7))
    costs = np.array([rollout(s, sol, x, b).total_cost for x, b in paths])
    f1 = sol.initial_value(s.initial_stores)
    lo, hi = costs.min(), costs.max()
    assert lo - 1e-9 <= f1 <= hi + 1e-9
    se = costs.std(ddof=1) / math.sqrt(len(costs))
    assert se > 0
    assert abs(costs.mean() - f1) <= 3 * se + 1e-12


def test_stochastic_rollout_water_balance(rng):
    for _ in range(10):
        s = instances.markov(rng)
        sol = hydrodp.solve_markov(s)
        for x, b in sample_inflows(s, 20, rng):
            _check_balance(s, rollout(s, sol, x, b))
