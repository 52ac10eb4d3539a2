"""Command-line entry point: ``hydrodp solve|simulate|compare|oracle``.

Exit codes: 0 success, 1 validation failure, 2 parse failure,
3 budget exceeded, model not applicable or dimension mismatch,
4 oracle disagreement.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from hydrodp import solve
from hydrodp.errors import ApplicabilityError, BudgetExceeded, DomainError, ValidationError
from hydrodp.files import (
    ScenarioParseError,
    fmt,
    load_scenario,
    read_inflows,
    read_solution,
    write_solution,
    write_summary,
    write_trace,
)
from hydrodp.oracle import (
    DEFAULT_BUDGET,
    brute_force_optimum,
    brute_force_stochastic,
    nearest_bin,
    rollout,
    sample_inflows,
)
from hydrodp.scenario import MAX_EXACT_RESERVOIRS, MODELS, check_applicable, ensure_valid

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_BUDGET, EXIT_MISMATCH = 0, 1, 2, 3, 4
ORACLE_TOL = 1e-9


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load(path):
    try:
        scenario = load_scenario(path)
    except OSError as exc:
        raise _Exit(EXIT_PARSE, f"{path}: {exc.strerror}") from None
    except ScenarioParseError as exc:
        raise _Exit(EXIT_PARSE, f"{path}: {exc}") from None
    except ValueError as exc:
        raise _Exit(EXIT_INVALID, f"{path}: {exc}") from None
    try:
        ensure_valid(scenario)
    except ValidationError as exc:
        raise _Exit(EXIT_INVALID, f"{path}: invalid scenario:\n  " + "\n  ".join(exc.violations)) from None
    return scenario


def _solve(scenario, model, refine):
    try:
        check_applicable(scenario, model)
        return solve(scenario, model, refine)
    except ApplicabilityError as exc:
        raise _Exit(EXIT_BUDGET, f"model not applicable: {exc}") from None


def cmd_solve(args) -> int:
    scenario = _load(args.scenario)
    sol = _solve(scenario, args.model, args.refine)
    refine = args.refine or (4 if args.model == "aggregate" else 1)
    write_solution(sol, scenario, args.out, refine)
    print(sol.initial_value(scenario.initial_stores))
    return EXIT_OK


def _initial_bin(scenario, sol, prev, label):
    if sol.model != "markov":
        return None
    if prev is None:
        raise _Exit(EXIT_BUDGET, f"{label}: markov policy needs a period 0 row with the preceding inflow")
    return nearest_bin(scenario.flow.bins, prev)


def cmd_simulate(args) -> int:
    scenario = _load(args.scenario)
    try:
        sol = read_solution(args.policy_dir)
    except (OSError, ValueError, KeyError) as exc:
        raise _Exit(EXIT_PARSE, f"{args.policy_dir}: {exc}") from None
    m = len(scenario.reservoirs)
    if args.inflows is not None:
        try:
            raw = read_inflows(args.inflows, scenario.n_periods, m)
        except (OSError, ValueError) as exc:
            raise _Exit(EXIT_BUDGET, str(exc)) from None
        paths = [(x, _initial_bin(scenario, sol, prev, args.inflows)) for x, prev in raw]
    else:
        if args.sample < 0:
            raise _Exit(EXIT_INVALID, "--sample must be nonnegative")
        paths = sample_inflows(scenario, args.sample, np.random.default_rng(args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    traces = []
    for k, (x, b0) in enumerate(paths, start=1):
        try:
            t = rollout(scenario, sol, x, b0)
        except DomainError as exc:
            raise _Exit(EXIT_BUDGET, f"dimension mismatch: {exc}") from None
        write_trace(t, out / f"trace_{k:05d}.csv")
        traces.append(t)
    write_summary(traces, out / "summary.csv")
    if traces:
        print(fmt(float(np.mean([t.total_cost for t in traces]))))
    return EXIT_OK


def exact_model(scenario) -> str:
    """Penalty mode when every period can price a surplus, hard mode otherwise."""
    c = scenario.costs
    if c.demand_penalty is not None or all(a > 0 for a in c.sale_prices):
        return "multi-penalty"
    return "multi"


def relative_gap(approx: float, exact: float) -> float:
    if exact == 0.0:
        return 0.0 if approx == 0.0 else float("inf") * np.sign(approx)
    return (approx - exact) / abs(exact)


def compare_rows(scenario):
    """Rows of the exact-vs-aggregate report (strings for CSV)."""
    stores = scenario.initial_stores
    agg = _solve(scenario, "aggregate", None)
    f_agg = agg.initial_value(stores)
    rows = []
    exact = exact_model(scenario)
    if len(scenario.reservoirs) > MAX_EXACT_RESERVOIRS:
        rows.append([exact, "skipped: dimensionality", "", "", ""])
        gap = ""
    else:
        sol = _solve(scenario, exact, None)
        f_ex = sol.initial_value(stores)
        rows.append([exact, fmt(f_ex), fmt(sol.metrics["minimizations_per_stage"]),
                     fmt(sol.metrics["wall_ms"]), fmt(0.0)])
        gap = fmt(relative_gap(f_agg, f_ex))
    rows.append(["aggregate", fmt(f_agg), fmt(agg.metrics["minimizations_per_stage"]),
                 fmt(agg.metrics["wall_ms"]), gap])
    return rows


def cmd_compare(args) -> int:
    scenario = _load(args.scenario)
    rows = compare_rows(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "f_1", "minimizations_per_stage", "wall_ms", "relative_gap"])
        w.writerows(rows)
    for row in rows:
        print(",".join(row))
    return EXIT_OK


def cmd_oracle(args) -> int:
    scenario = _load(args.scenario)
    sol = _solve(scenario, args.model, args.refine)
    dp = sol.initial_value(scenario.initial_stores)
    try:
        if args.model in ("independent", "markov"):
            ref = brute_force_stochastic(scenario, args.refine or 1, args.budget)
        else:
            ref, _ = brute_force_optimum(scenario, args.model, args.refine, args.budget)
    except BudgetExceeded as exc:
        raise _Exit(EXIT_BUDGET, f"enumeration size {exc.size} exceeds budget {exc.budget}") from None
    diff = abs(dp - ref)
    print(f"dp={dp!r} oracle={ref!r} difference={diff!r}")
    return EXIT_OK if diff <= ORACLE_TOL else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hydrodp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a scenario and write value/policy tables")
    s.add_argument("scenario")
    s.add_argument("--model", required=True, choices=MODELS)
    s.add_argument("--out", required=True)
    s.add_argument("--refine", type=int, default=None, help="control lattice refinement")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("simulate", help="roll a stored policy forward")
    s.add_argument("scenario")
    s.add_argument("--policy-dir", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--inflows", help="CSV with columns path,period,inflow_1..inflow_m")
    src.add_argument("--sample", type=int, help="number of sampled inflow paths")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="exact multi-reservoir DP against the aggregate heuristic")
    s.add_argument("scenario")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("oracle", help="check the DP optimum against exhaustive enumeration")
    s.add_argument("scenario")
    s.add_argument("--model", required=True, choices=MODELS)
    s.add_argument("--refine", type=int, default=None)
    s.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if getattr(args, "refine", None) is not None and args.refine < 1:
        print("hydrodp: --refine must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except _Exit as exc:
        print(f"hydrodp: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
