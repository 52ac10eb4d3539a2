import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hydrodp import fidelity_bound, solve_independent, solve_markov, solve_single
from hydrodp.oracle import brute_force_stochastic
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


def test_fidelity_bound_examples():
    assert fidelity_bound(InflowDistribution.point(3.5), 0.7) == 3.5
    two = InflowDistribution((0, 10), (0.5, 0.5))
    assert fidelity_bound(two, 0.5) == 0
    assert fidelity_bound(two, 0.95) == 10


def test_fidelity_bound_rejects_level():
    with pytest.raises(ValueError):
        fidelity_bound(InflowDistribution.point(1), 1.0)


def _tables_equal(a, b, tol=1e-12):
    for va, vb in zip(a.values, b.values):
        assert np.max(np.abs(va.values - vb.values)) <= tol


def _with_flow(s, flow):
    return Scenario(s.n_periods, s.demands, s.costs, s.reservoirs, flow)


def test_point_masses_equal_deterministic(rng):
    for _ in range(20):
        s = instances.deterministic(rng)
        pts = tuple(InflowDistribution.point(x) for x in s.flow.inflows[0])
        _tables_equal(solve_single(s), solve_independent(_with_flow(s, IndependentDensity(pts, 0.9))))


def test_two_atom_two_period_matches_tree():
    dist = InflowDistribution((0, 2), (0.25, 0.75))
    s = Scenario(
        2, (2, 3), CostParams(1, 10, 1, (0, 0)), (Reservoir(3, 1, 4),),
        IndependentDensity((dist, dist), 0.95),
    )
    assert solve_independent(s).value([1.0]) == pytest.approx(brute_force_stochastic(s), abs=1e-12)


def test_no_demand_costs_nothing(rng):
    for _ in range(5):
        s = instances.independent(rng)
        s = Scenario(s.n_periods, (0,) * s.n_periods, s.costs, s.reservoirs, s.flow)
        sol = solve_independent(s)
        assert all(np.all(v.values == 0) for v in sol.values)


def test_identical_rows_equal_independent(rng):
    for _ in range(20):
        s = instances.independent(rng, max_atoms=3)
        chains, dists = [], []
        support = sorted({x for d in s.flow.periods for x in d.support})
        for d in s.flow.periods:
            w = [dict(zip(d.support, d.weights)).get(x, 0.0) for x in support]
            dists.append(InflowDistribution(tuple(support), tuple(w)))
            chains.append(tuple(tuple(w) for _ in support))
        level = s.flow.confidence_level
        indep = _with_flow(s, IndependentDensity(tuple(dists), level))
        init = (1.0 / len(support),) * len(support)
        mk = _with_flow(s, MarkovChain(tuple(support), tuple(chains), init, level))
        a, b = solve_independent(indep), solve_markov(mk)
        for va, vb in zip(a.values, b.values):
            for k in range(len(support)):
                assert np.max(np.abs(va.values - vb.values[:, k])) <= 1e-12


def test_frozen_chain_equals_constant_inflow(rng):
    for _ in range(10):
        s = instances.deterministic(rng)
        n = s.n_periods
        bins = (0.0, 1.0, 2.0)
        b = int(rng.integers(0, 3))
        eye = tuple(tuple(float(i == j) for j in range(3)) for i in range(3))
        init = tuple(float(i == b) for i in range(3))
        mk = _with_flow(s, MarkovChain(bins, (eye,) * n, init, 0.9))
        det = _with_flow(s, Deterministic(((bins[b],) * n,)))
        a, m = solve_single(det), solve_markov(mk)
        for va, vm in zip(a.values, m.values):
            assert np.max(np.abs(va.values - vm.values[:, b])) <= 1e-12
        assert m.initial_value(s.initial_stores) == a.value(s.initial_stores)


def test_markov_two_bin_matches_tree():
    s = Scenario(
        2, (2, 2), CostParams(1, 10, 1, (0, 0)), (Reservoir(2, 1, 3),),
        MarkovChain((0, 2), (((0.7, 0.3), (0.2, 0.8)),) * 2, (0.4, 0.6), 0.5),
    )
    sol = solve_markov(s)
    assert sol.metrics["minimizations_per_stage"] == 6
    assert sol.initial_value([1.0]) == pytest.approx(brute_force_stochastic(s), abs=1e-12)


def test_mean_inflow_is_optimistic():
    def build(dist):
        return Scenario(
            2, (2, 2), CostParams(1, 10, 1, (0, 0)), (Reservoir(8, 1, 9),),
            IndependentDensity((dist, dist), 0.95),
        )

    risky = build(InflowDistribution((0, 2), (0.5, 0.5)))
    certain = build(InflowDistribution.point(1.0))
    v_risky = solve_independent(risky).value([1.0])
    v_certain = solve_independent(certain).value([1.0])
    assert v_risky == pytest.approx(brute_force_stochastic(risky), abs=1e-12)
    assert v_certain == pytest.approx(brute_force_stochastic(certain), abs=1e-12)
    assert v_certain <= v_risky


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_monotone_in_store(seed, use_markov):
    rng = np.random.default_rng(seed)
    s = instances.markov(rng) if use_markov else instances.independent(rng)
    sol = solve_markov(s) if use_markov else solve_independent(s)
    for v in sol.values:
        assert np.all(np.diff(v.values, axis=0) <= 1e-9)
