import copy
import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

import hydrodp
from hydrodp.errors import ApplicabilityError, ValidationError
from hydrodp.scenario import (
    CostParams,
    Deterministic,
    MarkovChain,
    Reservoir,
    Scenario,
    check_applicable,
    ensure_valid,
    validate,
)

from instances import deterministic


def base(**kw):
    args = dict(
        n_periods=2,
        demands=(2, 2),
        costs=CostParams(1, 10, 1, (0, 0)),
        reservoirs=(Reservoir(2, 1, 3),),
        flow=Deterministic(((1, 1),)),
    )
    args.update(kw)
    return Scenario(**args)


def test_consistent_scenario_is_valid():
    assert validate(base()) == []


def test_penalty_equal_to_thermal_price():
    v = validate(base(costs=CostParams(1, 1, 1, (0, 0))))
    assert len(v) == 1 and "deficit_penalty" in v[0]


def test_markov_row_not_stochastic():
    flow = MarkovChain((0, 1), (((0.5, 0.3), (0.5, 0.5)), ((0.5, 0.5), (0.5, 0.5))), (0.5, 0.5))
    v = validate(base(flow=flow))
    assert len(v) == 1
    assert v[0].startswith("flow.transitions[0][0]")
    assert "0.8" in v[0]


def test_collects_every_violation():
    s = base(
        demands=(2, -1, 3),
        reservoirs=(Reservoir(-2, 5, 1),),
        flow=Deterministic(((1,),)),
    )
    v = validate(s)
    fields = {m.split(":")[0] for m in v}
    assert {"demands", "reservoirs[0].capacity", "reservoirs[0].levels", "flow.inflows[0]"} <= fields


def test_validate_is_pure():
    s = base()
    before = copy.deepcopy(s)
    validate(s)
    validate(base(costs=CostParams(1, 0.5, 1, (0, 0))))
    assert s == before


def test_ensure_valid_raises_with_list():
    with pytest.raises(ValidationError) as exc:
        ensure_valid(base(costs=CostParams(1, 0.5, -1, (0, 0))))
    assert len(exc.value.violations) == 2


def test_applicability_rules():
    s = base()
    check_applicable(s, "single")
    with pytest.raises(ApplicabilityError, match="cascade station"):
        check_applicable(s, "cascade")
    with pytest.raises(ApplicabilityError, match="independent"):
        check_applicable(s, "independent")
    with pytest.raises(ApplicabilityError, match="demand_penalty"):
        check_applicable(s, "multi-penalty")
    four = base(reservoirs=(Reservoir(2, 1, 3),) * 4, flow=Deterministic(((1, 1),) * 4))
    with pytest.raises(ApplicabilityError, match="dimensionality"):
        check_applicable(four, "multi")
    check_applicable(four, "aggregate")
    check_applicable(four, "multi", allow_high_dimension=True)


def test_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        base().n_periods = 3


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1), st.sampled_from(["single", "aggregate"]))
def test_valid_scenarios_always_solve(seed, model):
    s = deterministic(np.random.default_rng(seed), sale=True)
    assert validate(s) == []
    sol = hydrodp.solve(s, model)
    assert np.isfinite(sol.initial_value(s.initial_stores))
