import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hydrodp
from hydrodp.energy import HeadCurve
from hydrodp.files import (
    ScenarioParseError,
    discretize,
    dump_scenario,
    fmt,
    parse_scenario,
    read_inflows,
    read_solution,
    sha256,
    write_solution,
)
from hydrodp.scenario import Reservoir, Scenario

import instances

EXAMPLE = """{
  "n_periods": 2,
  "demands": [2, 2],
  "costs": {"c": 1, "p": 10, "K": 1, "a": [0, 0]},
  "reservoirs": [{"capacity": 2, "initial": 1, "levels": 3}],
  "flow": {"kind": "deterministic", "inflows": [[1, 1]]}
}"""


def test_parse_example():
    s = parse_scenario(EXAMPLE)
    assert s.n_periods == 2 and s.reservoirs[0].levels == 3
    assert hydrodp.validate(s) == []


def test_sale_prices_default_to_zero():
    doc = json.loads(EXAMPLE)
    del doc["costs"]["a"]
    assert parse_scenario(json.dumps(doc)).costs.sale_prices == (0.0, 0.0)


def test_unknown_key_is_rejected_with_line():
    text = EXAMPLE.replace('"levels"', '"level"')
    with pytest.raises(ScenarioParseError, match=r"line 5: reservoirs\[0\]\.level: unknown key"):
        parse_scenario(text)


def test_missing_key():
    doc = json.loads(EXAMPLE)
    del doc["demands"]
    with pytest.raises(ScenarioParseError, match="missing required key 'demands'"):
        parse_scenario(json.dumps(doc))


def test_wrong_type():
    with pytest.raises(ScenarioParseError, match="costs.c: expected a number"):
        parse_scenario(EXAMPLE.replace('"c": 1', '"c": "one"'))


def test_malformed_json_reports_offset():
    with pytest.raises(ScenarioParseError, match=r"line 2 column 3 \(byte offset 4\)"):
        parse_scenario('{\n  n_periods: 2}')


def test_unknown_flow_kind():
    with pytest.raises(ScenarioParseError, match="unknown kind"):
        parse_scenario(EXAMPLE.replace('"deterministic"', '"chaotic"'))


def with_curve(s):
    curve = HeadCurve(((0, 1), (1, 2.5), (3, 4)), 0.9, 5)
    res = tuple(Reservoir(r.capacity, r.initial_store, r.levels, curve) for r in s.reservoirs)
    return Scenario(s.n_periods, s.demands, s.costs, res, s.flow, s.cascade_stations, 2)


GENERATORS = [
    lambda rng: with_curve(instances.deterministic(rng, m=2, sale=True, gamma=1.5)),
    lambda rng: instances.cascade(rng),
    lambda rng: instances.independent(rng),
    lambda rng: instances.markov(rng),
]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, len(GENERATORS) - 1))
def test_round_trip(seed, which):
    s = GENERATORS[which](np.random.default_rng(seed))
    again = parse_scenario(dump_scenario(s))
    assert again == s
    assert dump_scenario(again) == dump_scenario(s)


def test_discretizer_keeps_mean():
    d = discretize("gamma", {"a": 2.0, "scale": 1.5}, 8)
    assert len(d.support) == 8
    assert sum(d.weights) == pytest.approx(1.0)
    assert d.mean() == pytest.approx(3.0, rel=1e-6)
    assert list(d.support) == sorted(d.support)


def test_parametric_period_in_file():
    doc = json.loads(EXAMPLE)
    doc["flow"] = {
        "kind": "independent",
        "periods": [{"density": "uniform", "params": {"loc": 0, "scale": 2}, "bins": 4}] * 2,
    }
    s = parse_scenario(json.dumps(doc))
    assert s.flow.periods[0].support == pytest.approx((0.25, 0.75, 1.25, 1.75))
    with pytest.raises(ScenarioParseError, match="unknown density"):
        doc["flow"]["periods"][0]["density"] = "nope"
        parse_scenario(json.dumps(doc))


def test_twelve_significant_digits():
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(-0.0) == "0"
    assert fmt(60) == "60"


@pytest.mark.parametrize("model, make", [
    ("single", lambda rng: instances.deterministic(rng)),
    ("multi", lambda rng: instances.deterministic(rng, m=2, dmax=4)),
    ("aggregate", lambda rng: instances.deterministic(rng, m=3, dmax=4)),
    ("markov", lambda rng: instances.markov(rng)),
])
def test_bundle_round_trip(tmp_path, rng, model, make):
    s = make(rng)
    sol = hydrodp.solve(s, model)
    manifest = write_solution(sol, s, tmp_path)
    for name, digest in manifest["files"].items():
        assert sha256(tmp_path / name) == digest
    back = read_solution(tmp_path)
    assert back.model == model and back.grid == sol.grid
    for a, b in zip(sol.values, back.values):
        np.testing.assert_allclose(a.values, b.values, rtol=1e-11, atol=1e-11)
    for a, b in zip(sol.policies, back.policies):
        np.testing.assert_allclose(a.controls, b.controls, rtol=1e-11, atol=1e-11)
    assert back.initial_value(s.initial_stores) == pytest.approx(sol.initial_value(s.initial_stores), abs=1e-10)


def test_tampered_bundle(tmp_path, rng):
    s = instances.deterministic(rng)
    write_solution(hydrodp.solve_single(s), s, tmp_path)
    with open(tmp_path / "value_001.csv", "a") as fh:
        fh.write("\n")
    with pytest.raises(ValueError, match="checksum"):
        read_solution(tmp_path)


def test_read_inflows(tmp_path):
    p = tmp_path / "in.csv"
    p.write_text("path,period,inflow_1\na,0,2\na,1,1\na,2,0\nb,2,3\nb,1,4\n")
    paths = read_inflows(p, 2, 1)
    assert paths[0][0].tolist() == [[1.0], [0.0]] and paths[0][1] == 2.0
    assert paths[1][0].tolist() == [[4.0], [3.0]] and paths[1][1] is None
    with pytest.raises(ValueError, match="lacks periods"):
        read_inflows(p, 3, 1)
    with pytest.raises(ValueError, match="expected header"):
        read_inflows(p, 2, 2)
