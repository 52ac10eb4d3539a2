"""Scenario JSON ingestion and CSV result bundles."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np

from hydrodp.energy import HeadCurve
from hydrodp.grid import Grid, PolicyTable, Solution, ValueTable
from hydrodp.scenario import (
    DEFAULT_CONFIDENCE,
    CascadeStation,
    CostParams,
    Deterministic,
    IndependentDensity,
    InflowDistribution,
    MarkovChain,
    Reservoir,
    Scenario,
)

SIG = ".12g"


class ScenarioParseError(ValueError):
    """The scenario document is not well-formed or does not match the schema."""


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x) + 0.0, SIG)  # + 0.0 drops the sign of negative zero


# -- schema helpers -----------------------------------------------------------

class _Reader:
    def __init__(self, text: str):
        self.text = text

    def line_of(self, key: str) -> str:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        if not m:
            return ""
        line = self.text.count("\n", 0, m.start()) + 1
        return f"line {line}: "

    def fail(self, path: str, msg: str, key: str | None = None):
        anchor = self.line_of(key or path.rsplit(".", 1)[-1].split("[", 1)[0])
        raise ScenarioParseError(f"{anchor}{path}: {msg}")

    def obj(self, node, path, required, optional=()):
        if not isinstance(node, dict):
            self.fail(path, f"expected an object, got {type(node).__name__}")
        allowed = set(required) | set(optional)
        for k in node:
            if k not in allowed:
                self.fail(f"{path}.{k}", f"unknown key (allowed: {', '.join(sorted(allowed))})", k)
        for k in required:
            if k not in node:
                self.fail(path, f"missing required key {k!r}")
        return node

    def num(self, node, path) -> float:
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            self.fail(path, f"expected a number, got {json.dumps(node)}")
        return float(node)

    def int_(self, node, path) -> int:
        if isinstance(node, bool) or not isinstance(node, (int, float)) or node != int(node):
            self.fail(path, f"expected an integer, got {json.dumps(node)}")
        return int(node)

    def nums(self, node, path) -> tuple[float, ...]:
        if not isinstance(node, list):
            self.fail(path, "expected a list of numbers")
        return tuple(self.num(v, f"{path}[{i}]") for i, v in enumerate(node))


def discretize(density: str, params: dict, bins: int) -> InflowDistribution:
    """Equal-probability binning of a named ``scipy.stats`` density.

    Each bin is represented by its conditional mean, so the discrete
    distribution keeps the density's mean (after clipping at zero).
    """
    from scipy import stats

    dist_cls = getattr(stats, density, None)
    if dist_cls is None or not hasattr(dist_cls, "ppf"):
        raise ScenarioParseError(f"unknown density {density!r}")
    dist = dist_cls(**params)
    edges = dist.ppf(np.linspace(0.0, 1.0, bins + 1))
    atoms = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mean = dist.expect(lambda v: v, lb=lo, ub=hi, conditional=True)
        atoms.append(max(float(mean), 0.0))
    support, counts = np.unique(np.round(atoms, 12), return_counts=True)
    return InflowDistribution(tuple(support), tuple(counts / counts.sum()))


def _head_curve(rd: _Reader, node, path) -> HeadCurve:
    rd.obj(node, path, ("eta", "H_max", "points"))
    pts = node["points"]
    if not isinstance(pts, list) or any(not isinstance(p, list) or len(p) != 2 for p in pts):
        rd.fail(f"{path}.points", "expected a list of [store, head] pairs")
    points = tuple(
        (rd.num(q, f"{path}.points[{i}][0]"), rd.num(h, f"{path}.points[{i}][1]"))
        for i, (q, h) in enumerate(pts)
    )
    return HeadCurve(points, rd.num(node["eta"], f"{path}.eta"), rd.num(node["H_max"], f"{path}.H_max"))


def _flow(rd: _Reader, node, n):
    if not isinstance(node, dict) or "kind" not in node:
        rd.fail("flow", "expected an object with a 'kind' key")
    kind = node["kind"]
    if kind == "deterministic":
        rd.obj(node, "flow", ("kind", "inflows"))
        if not isinstance(node["inflows"], list):
            rd.fail("flow.inflows", "expected one inflow list per reservoir")
        return Deterministic(
            tuple(rd.nums(s, f"flow.inflows[{j}]") for j, s in enumerate(node["inflows"]))
        )
    if kind == "independent":
        rd.obj(node, "flow", ("kind", "periods"), ("confidence_level",))
        if not isinstance(node["periods"], list):
            rd.fail("flow.periods", "expected a list of per-period distributions")
        dists = []
        for i, p in enumerate(node["periods"]):
            path = f"flow.periods[{i}]"
            if isinstance(p, dict) and "density" in p:
                rd.obj(p, path, ("density", "bins"), ("params",))
                params = p.get("params", {})
                if not isinstance(params, dict):
                    rd.fail(f"{path}.params", "expected an object")
                try:
                    dists.append(discretize(str(p["density"]), params, rd.int_(p["bins"], f"{path}.bins")))
                except TypeError as exc:
                    rd.fail(f"{path}.params", str(exc), "params")
            else:
                rd.obj(p, path, ("support", "weights"))
                dists.append(
                    InflowDistribution(
                        rd.nums(p["support"], f"{path}.support"),
                        rd.nums(p["weights"], f"{path}.weights"),
                    )
                )
        level = rd.num(node.get("confidence_level", DEFAULT_CONFIDENCE), "flow.confidence_level")
        return IndependentDensity(tuple(dists), level)
    if kind == "markov":
        rd.obj(node, "flow", ("kind", "bins", "transitions", "initial"), ("confidence_level",))
        mats = node["transitions"]
        if not isinstance(mats, list) or any(not isinstance(m, list) for m in mats):
            rd.fail("flow.transitions", "expected a list of matrices")
        transitions = tuple(
            tuple(rd.nums(row, f"flow.transitions[{i}][{a}]") for a, row in enumerate(mat))
            for i, mat in enumerate(mats)
        )
        level = rd.num(node.get("confidence_level", DEFAULT_CONFIDENCE), "flow.confidence_level")
        return MarkovChain(
            rd.nums(node["bins"], "flow.bins"),
            transitions,
            rd.nums(node["initial"], "flow.initial"),
            level,
        )
    rd.fail("flow.kind", f"unknown kind {kind!r} (expected deterministic, independent or markov)", "kind")


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario document; raises ``ScenarioParseError`` with a line anchor."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(
            f"line {exc.lineno} column {exc.colno} (byte offset {exc.pos}): {exc.msg}"
        ) from None
    rd = _Reader(text)
    rd.obj(
        doc, "scenario",
        ("n_periods", "demands", "costs", "reservoirs", "flow"),
        ("tau_days", "cascade_stations"),
    )
    n = rd.int_(doc["n_periods"], "n_periods")
    c = rd.obj(doc["costs"], "costs", ("c", "p", "K"), ("a", "gamma"))
    gamma = c.get("gamma")
    costs = CostParams(
        rd.num(c["c"], "costs.c"),
        rd.num(c["p"], "costs.p"),
        rd.num(c["K"], "costs.K"),
        rd.nums(c["a"], "costs.a") if "a" in c else (0.0,) * n,
        None if gamma is None else rd.num(gamma, "costs.gamma"),
    )
    if not isinstance(doc["reservoirs"], list):
        rd.fail("reservoirs", "expected a list")
    reservoirs = []
    for j, r in enumerate(doc["reservoirs"]):
        path = f"reservoirs[{j}]"
        rd.obj(r, path, ("capacity", "initial", "levels"), ("head_curve",))
        reservoirs.append(
            Reservoir(
                rd.num(r["capacity"], f"{path}.capacity"),
                rd.num(r["initial"], f"{path}.initial"),
                rd.int_(r["levels"], f"{path}.levels"),
                _head_curve(rd, r["head_curve"], f"{path}.head_curve") if "head_curve" in r else None,
            )
        )
    stations = []
    raw_st = doc.get("cascade_stations", [])
    if not isinstance(raw_st, list):
        rd.fail("cascade_stations", "expected a list")
    for j, s in enumerate(raw_st):
        path = f"cascade_stations[{j}]"
        rd.obj(s, path, ("pass_capacity", "lateral_inflows"))
        stations.append(
            CascadeStation(
                rd.num(s["pass_capacity"], f"{path}.pass_capacity"),
                rd.nums(s["lateral_inflows"], f"{path}.lateral_inflows"),
            )
        )
    return Scenario(
        n_periods=n,
        demands=rd.nums(doc["demands"], "demands"),
        costs=costs,
        reservoirs=tuple(reservoirs),
        flow=_flow(rd, doc["flow"], n),
        cascade_stations=tuple(stations),
        tau_days=rd.int_(doc.get("tau_days", 1), "tau_days"),
    )


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())


def scenario_to_dict(scenario: Scenario) -> dict:
    c = scenario.costs
    costs = {"c": c.thermal_price, "p": c.deficit_penalty, "K": c.thermal_cap, "a": list(c.sale_prices)}
    if c.demand_penalty is not None:
        costs["gamma"] = c.demand_penalty
    reservoirs = []
    for r in scenario.reservoirs:
        d = {"capacity": r.capacity, "initial": r.initial_store, "levels": r.levels}
        if r.head_curve is not None:
            hc = r.head_curve
            d["head_curve"] = {
                "eta": hc.efficiency,
                "H_max": hc.max_head,
                "points": [list(p) for p in hc.points],
            }
        reservoirs.append(d)
    flow = scenario.flow
    if isinstance(flow, Deterministic):
        fd = {"kind": "deterministic", "inflows": [list(s) for s in flow.inflows]}
    elif isinstance(flow, IndependentDensity):
        fd = {
            "kind": "independent",
            "confidence_level": flow.confidence_level,
            "periods": [{"support": list(d.support), "weights": list(d.weights)} for d in flow.periods],
        }
    else:
        fd = {
            "kind": "markov",
            "confidence_level": flow.confidence_level,
            "bins": list(flow.bins),
            "transitions": [[list(row) for row in mat] for mat in flow.transitions],
            "initial": list(flow.initial),
        }
    out = {
        "n_periods": scenario.n_periods,
        "demands": list(scenario.demands),
        "tau_days": scenario.tau_days,
        "costs": costs,
        "reservoirs": reservoirs,
        "flow": fd,
    }
    if scenario.cascade_stations:
        out["cascade_stations"] = [
            {"pass_capacity": s.pass_capacity, "lateral_inflows": list(s.lateral_inflows)}
            for s in scenario.cascade_stations
        ]
    return out


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2)


# -- CSV bundles --------------------------------------------------------------

def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])


def _state_columns(grid: Grid):
    m = grid.ndim
    return [f"k_{j + 1}" for j in range(m)] + [f"store_{j + 1}" for j in range(m)]


def _state_rows(solution: Solution, table: np.ndarray, bins):
    grid = solution.grid
    idx = grid.indices()
    pts = grid.points()
    flat = table.reshape(grid.size, -1) if bins is not None or table.ndim > grid.ndim else table.reshape(grid.size, 1)
    for s in range(grid.size):
        head = list(idx[s]) + list(pts[s])
        if bins is not None:
            for b, xb in enumerate(bins):
                yield head + [b, xb, flat[s, b]]
        else:
            yield head + list(flat[s])


def write_solution(solution: Solution, scenario: Scenario, out_dir, refine=None, extra_metrics=None) -> dict:
    """Write value/policy CSVs per stage, ``metrics.csv`` and ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = solution.grid
    bins = scenario.flow.bins if solution.model == "markov" else None
    cols = _state_columns(grid) + (["bin", "prev_inflow"] if bins is not None else [])
    if solution.model in ("multi", "multi-penalty"):
        pcols = [f"release_{j + 1}" for j in range(grid.ndim)]
    else:
        pcols = ["release"]
    files = []
    for vt, pt in zip(solution.values, solution.policies):
        vname = f"value_{vt.stage:03d}.csv"
        pname = f"policy_{pt.stage:03d}.csv"
        _write_csv(out / vname, cols + ["value"], _state_rows(solution, vt.values, bins))
        _write_csv(out / pname, cols + pcols, _state_rows(solution, pt.controls, bins))
        files += [vname, pname]
    f1 = solution.initial_value(scenario.initial_stores)
    metrics = {"model": solution.model, "f_1": f1, **solution.metrics, **(extra_metrics or {})}
    metric_rows = [
        (k, v if isinstance(v, str) else (fmt(v) if np.isscalar(v) else " ".join(map(fmt, v))))
        for k, v in metrics.items()
    ]
    _write_csv(out / "metrics.csv", ["metric", "value"], metric_rows)
    files.append("metrics.csv")
    manifest = {
        "model": solution.model,
        "refine": refine,
        "n_stages": solution.n_stages,
        "levels": list(grid.levels),
        "capacities": list(grid.capacities),
        "bins": list(bins) if bins is not None else None,
        "initial_distribution": (
            list(solution.initial_distribution) if solution.initial_distribution is not None else None
        ),
        "f_1": f1,
        "files": {name: sha256(out / name) for name in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def read_solution(policy_dir) -> Solution:
    """Rebuild a ``Solution`` from a bundle written by ``write_solution``."""
    d = Path(policy_dir)
    manifest = json.loads((d / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        if sha256(d / name) != digest:
            raise ValueError(f"{name}: checksum mismatch with manifest")
    grid = Grid(tuple(manifest["levels"]), tuple(manifest["capacities"]))
    model = manifest["model"]
    bins = manifest.get("bins")
    m = grid.ndim

    def table(name, ncols):
        header, rows = _read_csv(d / name)
        data = np.array([[float(v) for v in row[-ncols:]] for row in rows])
        if bins is not None:
            return data.reshape(*grid.shape, len(bins))
        if ncols == 1:
            return data.reshape(grid.shape)
        return data.reshape(*grid.shape, ncols)

    values, policies = [], []
    pcols = m if model in ("multi", "multi-penalty") else 1
    for i in range(1, manifest["n_stages"] + 1):
        values.append(ValueTable(i, table(f"value_{i:03d}.csv", 1)))
        policies.append(PolicyTable(i, table(f"policy_{i:03d}.csv", pcols)))
    init = manifest.get("initial_distribution")
    return Solution(
        model, grid, values, policies, {}, None if init is None else np.asarray(init)
    )


TRACE_SCALARS = ("hydro", "thermal", "deficit", "surplus", "penalty", "stage_cost")
TRACE_VECTORS = ("store_before", "inflow", "release", "spill", "store_after")


def trace_header(m: int):
    cols = ["period"]
    for name in TRACE_VECTORS:
        cols += [f"{name}_{j + 1}" for j in range(m)]
    return cols + list(TRACE_SCALARS)


def write_trace(trace, path) -> None:
    m = trace.store_before.shape[1]
    rows = []
    for i in range(trace.n_periods):
        row = [i + 1]
        for name in TRACE_VECTORS:
            row += list(getattr(trace, name)[i])
        row += [getattr(trace, name)[i] for name in TRACE_SCALARS]
        rows.append(row)
    _write_csv(Path(path), trace_header(m), rows)


SUMMARY_HEADER = ["paths", "mean_cost", "std_error", "min_cost", "max_cost", "total_spill", "total_deficit"]


def write_summary(traces, path) -> None:
    rows = []
    if traces:
        costs = np.array([t.total_cost for t in traces])
        se = costs.std(ddof=1) / math.sqrt(len(costs)) if len(costs) > 1 else 0.0
        rows.append([
            len(traces),
            float(math.fsum(costs) / len(costs)),
            se,
            costs.min(),
            costs.max(),
            float(sum(t.spill.sum() for t in traces)),
            float(sum(t.deficit.sum() for t in traces)),
        ])
    _write_csv(Path(path), SUMMARY_HEADER, rows)


def read_inflows(path, n_periods: int, n_reservoirs: int):
    """Read ``path,period,inflow_1..inflow_m`` rows into ``[(inflows, prev_inflow), ...]``.

    A row with period 0 gives the inflow preceding period 1 (needed for
    Markov policies).
    """
    header, rows = _read_csv(Path(path))
    want = ["path", "period"] + [f"inflow_{j + 1}" for j in range(n_reservoirs)]
    if header != want:
        raise ValueError(f"{path}: expected header {','.join(want)}, got {','.join(header)}")
    paths: dict[str, dict[int, list[float]]] = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(want):
            raise ValueError(f"{path}: line {lineno}: expected {len(want)} fields")
        paths.setdefault(row[0], {})[int(row[1])] = [float(v) for v in row[2:]]
    out = []
    for key, periods in paths.items():
        missing = [i for i in range(1, n_periods + 1) if i not in periods]
        if missing:
            raise ValueError(f"{path}: path {key} lacks periods {missing}")
        if any(i > n_periods for i in periods):
            raise ValueError(f"{path}: path {key} has more than {n_periods} periods")
        series = np.array([periods[i] for i in range(1, n_periods + 1)])
        prev = periods.get(0, [None])[0]
        out.append((series, prev))
    return out
