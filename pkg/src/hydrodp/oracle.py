"""Exhaustive enumeration and forward policy simulation.

The enumeration here is written independently of the vectorized solvers:
plain scalar Python, no memoization, no shared cost or transition code.  It
restates the same rules so that agreement between the two is evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from hydrodp.errors import BudgetExceeded, DomainError
from hydrodp.scenario import (
    Deterministic,
    IndependentDensity,
    MarkovChain,
    Scenario,
    ensure_valid,
)

DEFAULT_BUDGET = 10**7
TIE = 1e-12


# -- scalar restatements -----------------------------------------------------

def _cost(hydro, demand, costs, period, surplus_penalty=0.0):
    gap = demand - hydro
    thermal = min(max(gap, 0.0), costs.thermal_cap)
    deficit = max(gap - costs.thermal_cap, 0.0)
    surplus = max(hydro - demand, 0.0)
    return (
        costs.thermal_price * thermal
        + costs.deficit_penalty * deficit
        - costs.sale_prices[period] * surplus
        + surplus_penalty * surplus
    )


def _lattice(upper, step):
    if upper <= 0.0:
        return [0.0]
    out = []
    k = 0
    while k * step <= upper + 1e-9 * step:
        out.append(min(k * step, upper))
        k += 1
    if upper - out[-1] > 1e-9 * step:
        out.append(upper)
    return out


def _cascade_output(u, stations, period):
    total = 0.0
    arriving = u
    for st in stations:
        arriving += st.lateral_inflows[period]
        total += min(st.pass_capacity, arriving)
    return total


def _cascade_cap(upper, stations, period, demand):
    """Largest u in [0, upper] with total station output <= demand (0 if none)."""
    if _cascade_output(upper, stations, period) <= demand:
        return upper
    if _cascade_output(0.0, stations, period) > demand:
        return 0.0
    # Output is piecewise linear in u; walk the saturation points in order.
    points = [0.0, upper]
    arriving = 0.0
    for st in stations:
        arriving += st.lateral_inflows[period]
        b = st.pass_capacity - arriving
        if 0.0 < b < upper:
            points.append(b)
    points.sort()
    for lo, hi in zip(points, points[1:]):
        if _cascade_output(hi, stations, period) > demand:
            active = 0
            arriving = 0.0
            for st in stations:
                arriving += st.lateral_inflows[period]
                if lo + arriving < st.pass_capacity:
                    active += 1
            return lo + (demand - _cascade_output(lo, stations, period)) / active
    return upper


def _aggregate_releases(stores, inflows, scenario, period, refine):
    pots = [q + x for q, x in zip(stores, inflows)]
    total = 0.0
    for v in pots:
        total += v
    if total <= 0.0:
        return [0.0], pots, total
    maxd = max(r.levels for r in scenario.reservoirs)
    nsweep = refine * (maxd - 1)
    cands = [k * total / nsweep for k in range(nsweep)] + [total]
    for res, pj in zip(scenario.reservoirs, pots):
        if pj <= 0.0:
            continue
        ratio = total / pj
        for lev in np.linspace(0.0, res.capacity, res.levels):
            if lev > pj:
                break
            u = total - lev * ratio
            if 0.0 <= u <= total:
                cands.append(u)
    r = scenario.demands[period]
    for kink in (r - scenario.costs.thermal_cap, r):
        if 0.0 < kink < total:
            cands.append(kink)
    cands.sort()
    tol = 1e-12 * max(1.0, total)
    out = [cands[0]]
    for u in cands[1:]:
        if u - out[-1] > tol:
            out.append(u)
    return out, pots, total


def _quantile(support, weights, level):
    acc = 0.0
    for x, w in zip(support, weights):
        acc += w
        if acc >= level - 1e-12:
            return x
    return support[-1]


# -- deterministic moves -----------------------------------------------------

def _moves(scenario, model, period, state, refine):
    """Yield ``(control, stage_cost, next_state)`` for every admissible lattice control."""
    res = scenario.reservoirs
    r = scenario.demands[period]
    costs = scenario.costs
    inflows = [series[period] for series in scenario.flow.inflows]
    if model == "single":
        q = state[0]
        cap = res[0].capacity
        for u in _lattice(min(r, q + inflows[0]), res[0].step / refine):
            yield u, _cost(u, r, costs, period), (min(q + inflows[0] - u, cap),)
    elif model == "cascade":
        q = state[0]
        cap = res[0].capacity
        stations = scenario.cascade_stations
        top = _cascade_cap(q + inflows[0], stations, period, r)
        for u in _lattice(top, res[0].step / refine):
            h = _cascade_output(u, stations, period)
            yield u, _cost(h, r, costs, period), (min(q + inflows[0] - u, cap),)
    elif model in ("multi", "multi-penalty"):
        hard = model == "multi"
        gamma = 0.0
        if not hard and costs.sale_prices[period] == 0:
            gamma = costs.demand_penalty
        for vec in _vectors(state, inflows, res, r, hard, refine):
            nxt = []
            upstream = 0.0
            for j, u in enumerate(vec):
                nxt.append(min(res[j].capacity, state[j] + inflows[j] + upstream - u))
                upstream = u
            h = sum(vec)
            yield tuple(vec), _cost(h, r, costs, period, gamma), tuple(nxt)
    elif model == "aggregate":
        releases, pots, total = _aggregate_releases(state, inflows, scenario, period, refine)
        for u in releases:
            nxt = []
            for j, pj in enumerate(pots):
                s = pj - u * (pj / total) if total > 0.0 else 0.0
                nxt.append(min(res[j].capacity, max(s, 0.0)))
            yield u, _cost(u, r, costs, period), tuple(nxt)
    else:
        raise ValueError(f"unknown deterministic model {model!r}")


def _vectors(state, inflows, res, demand, hard, refine, j=0, upstream=0.0, used=0.0):
    if j == len(res):
        yield []
        return
    bound = state[j] + inflows[j] + upstream
    if hard:
        bound = min(bound, demand - used)
    for u in _lattice(bound, res[j].step / refine):
        for rest in _vectors(state, inflows, res, demand, hard, refine, j + 1, u, used + u):
            yield [u] + rest


def enumeration_size(scenario: Scenario, model: str, refine: int = 1) -> int:
    """Upper bound on the number of control sequences the oracle would visit."""
    res = scenario.reservoirs
    size = 1
    for i in range(scenario.n_periods):
        r = scenario.demands[i]
        if isinstance(scenario.flow, Deterministic):
            xs = [s[i] for s in scenario.flow.inflows]
        elif isinstance(scenario.flow, IndependentDensity):
            xs = [max(scenario.flow.periods[i].support)]
        else:
            xs = [max(scenario.flow.bins)]
        if model in ("single", "independent", "markov"):
            count = len(_lattice(min(r, res[0].capacity + xs[0]), res[0].step / refine))
            if model == "independent":
                count *= len(scenario.flow.periods[i].support)
            elif model == "markov":
                count *= len(scenario.flow.bins)
        elif model == "cascade":
            count = len(_lattice(res[0].capacity + xs[0], res[0].step / refine))
        elif model in ("multi", "multi-penalty"):
            count = 1
            upstream = 0.0
            for rj, xj in zip(res, xs):
                bound = rj.capacity + xj + upstream
                count *= len(_lattice(bound, rj.step / refine))
                upstream = bound
        elif model == "aggregate":
            maxd = max(rj.levels for rj in res)
            count = refine * (maxd - 1) + 1 + sum(rj.levels for rj in res) + 2
        else:
            raise ValueError(f"unknown model {model!r}")
        size *= count
        if size > 10**18:
            break
    if model == "markov":
        size *= len(scenario.flow.bins)
    return size


def brute_force_optimum(
    scenario: Scenario,
    model: str,
    refine: int | None = None,
    budget: int = DEFAULT_BUDGET,
) -> tuple[float, list]:
    """Minimum total cost over every lattice control sequence, and the
    lexicographically smallest sequence attaining it."""
    ensure_valid(scenario)
    if not isinstance(scenario.flow, Deterministic):
        raise DomainError("brute_force_optimum needs deterministic inflows")
    if refine is None:
        refine = 4 if model == "aggregate" else 1
    size = enumeration_size(scenario, model, refine)
    if size > budget:
        raise BudgetExceeded(size, budget)
    n = scenario.n_periods
    best = [math.inf, None]

    def dfs(i, state, acc, seq):
        if i == n:
            if acc < best[0] - TIE * (1.0 + abs(best[0])) or best[1] is None:
                best[0] = acc
                best[1] = list(seq)
            return
        for u, cost, nxt in _moves(scenario, model, i, state, refine):
            seq.append(u)
            dfs(i + 1, nxt, acc + cost, seq)
            seq.pop()

    dfs(0, tuple(r.initial_store for r in scenario.reservoirs), 0.0, [])
    return best[0], best[1]


def brute_force_stochastic(
    scenario: Scenario, refine: int = 1, budget: int = DEFAULT_BUDGET
) -> float:
    """Optimal expected cost over nonanticipative policies on the inflow scenario tree.

    Every node of the tree (a history of realized inflows) gets its own
    release, chosen before that period's inflow is revealed.
    """
    ensure_valid(scenario)
    flow = scenario.flow
    if isinstance(flow, IndependentDensity):
        model = "independent"
    elif isinstance(flow, MarkovChain):
        model = "markov"
    else:
        raise DomainError("brute_force_stochastic needs a random inflow model")
    size = enumeration_size(scenario, model, refine)
    if size > budget:
        raise BudgetExceeded(size, budget)
    res = scenario.reservoirs[0]
    costs = scenario.costs
    step = res.step / refine
    n = scenario.n_periods

    def node(i, q, prev):
        if i == n:
            return 0.0
        if model == "independent":
            support = flow.periods[i].support
            weights = flow.periods[i].weights
        else:
            support = flow.bins
            weights = flow.transitions[i][prev]
        r = scenario.demands[i]
        top = min(r, q + _quantile(support, weights, flow.confidence_level))
        best = math.inf
        for u in _lattice(top, step):
            planned = _cost(u, r, costs, i)
            total = 0.0
            for k, (x, w) in enumerate(zip(support, weights)):
                if w == 0.0:
                    continue
                avail = q + x
                delivered = min(u, avail)
                short = u - delivered
                nxt = min(res.capacity, avail - delivered)
                total += w * (planned + costs.deficit_penalty * short + node(i + 1, nxt, k))
            best = min(best, total)
        return best

    if model == "independent":
        return node(0, res.initial_store, None)
    return sum(
        w * node(0, res.initial_store, b) for b, w in enumerate(flow.initial) if w > 0.0
    )


# -- rollout -----------------------------------------------------------------

@dataclass
class RolloutTrace:
    """Per-period record of one simulated policy execution.

    Reservoir quantities have shape ``(n_periods, n_reservoirs)``; ``inflow``
    includes water arriving from the reservoir upstream.  Energy and cost
    columns have shape ``(n_periods,)``.
    """

    store_before: np.ndarray
    inflow: np.ndarray
    release: np.ndarray
    spill: np.ndarray
    store_after: np.ndarray
    hydro: np.ndarray
    thermal: np.ndarray
    deficit: np.ndarray
    surplus: np.ndarray
    penalty: np.ndarray
    stage_cost: np.ndarray
    inflow_bins: list = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return float(math.fsum(self.stage_cost))

    @property
    def n_periods(self) -> int:
        return len(self.stage_cost)


def _lookup(solution, stage, store_vec, prev_bin=None):
    """Interpolate the stage policy at an arbitrary store vector."""
    ctrl = solution.policies[stage].controls
    grid = solution.grid
    pts = np.clip(np.asarray(store_vec, dtype=float), 0.0, grid.capacities)[None, :]
    if solution.model == "markov":
        ctrl = ctrl[..., prev_bin]
    if solution.model in ("multi", "multi-penalty"):
        return np.array(
            [grid.interpolate(ctrl[..., j], pts)[0][0] for j in range(grid.ndim)]
        )
    return float(grid.interpolate(ctrl, pts)[0][0])


def nearest_bin(bins, x) -> int:
    return int(np.argmin(np.abs(np.asarray(bins) - x)))


def rollout(scenario: Scenario, solution, inflows, initial_bin: int | None = None) -> RolloutTrace:
    """Run ``solution``'s policy forward against realized ``inflows``.

    ``inflows`` has shape ``(n_periods, n_reservoirs)`` (a 1-D series is
    accepted for one reservoir).  Markov policies also need the bin of the
    inflow preceding period 1.
    """
    from hydrodp.stochastic import fidelity_bound

    n = scenario.n_periods
    res = scenario.reservoirs
    m = len(res)
    x = np.asarray(inflows, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape != (n, m):
        raise DomainError(f"inflows have shape {x.shape}, expected {(n, m)}")
    if len(solution.policies) != n:
        raise DomainError(
            f"policy has {len(solution.policies)} stages, scenario has {n} periods"
        )
    if solution.grid.levels != tuple(r.levels for r in res):
        raise DomainError("policy grid does not match the scenario's reservoirs")
    model = solution.model
    if model == "markov" and initial_bin is None:
        raise DomainError("markov rollout needs the initial inflow bin")

    costs = scenario.costs
    caps = np.array([r.capacity for r in res])
    cols = {k: np.zeros((n, m)) for k in ("store_before", "inflow", "release", "spill", "store_after")}
    rows = {k: np.zeros(n) for k in ("hydro", "thermal", "deficit", "surplus", "penalty", "stage_cost")}
    q = np.array([r.initial_store for r in res])
    prev = initial_bin
    bins_seen = []
    for i in range(n):
        r = scenario.demands[i]
        cols["store_before"][i] = q
        arriving = x[i].copy()
        gamma = 0.0
        if model in ("single", "independent", "markov"):
            if model == "single":
                top = min(r, q[0] + x[i, 0])
            else:
                dist = (
                    scenario.flow.periods[i] if model == "independent"
                    else scenario.flow.row(i, prev)
                )
                top = min(r, q[0] + fidelity_bound(dist, scenario.flow.confidence_level))
            planned = min(max(_lookup(solution, i, q, prev), 0.0), top)
            release = np.array([min(planned, q[0] + x[i, 0])])
            water = (q + x[i]) - release
            scheduled = planned
            hydro = release[0]
        elif model == "cascade":
            top = _cascade_cap(q[0] + x[i, 0], scenario.cascade_stations, i, r)
            release = np.array([min(max(_lookup(solution, i, q), 0.0), top)])
            water = (q + x[i]) - release
            hydro = scheduled = _cascade_output(release[0], scenario.cascade_stations, i)
        elif model in ("multi", "multi-penalty"):
            want = _lookup(solution, i, q)
            release = np.zeros(m)
            upstream = 0.0
            used = 0.0
            for j in range(m):
                bound = q[j] + x[i, j] + upstream
                if model == "multi":
                    bound = min(bound, r - used)
                release[j] = min(max(want[j], 0.0), max(bound, 0.0))
                arriving[j] = x[i, j] + upstream
                upstream = release[j]
                used += release[j]
            water = np.array(
                [(q[j] + x[i, j] + (release[j - 1] if j else 0.0)) - release[j] for j in range(m)]
            )
            hydro = scheduled = float(release.sum())
            if model == "multi-penalty" and costs.sale_prices[i] == 0:
                gamma = costs.demand_penalty
        elif model == "aggregate":
            pots = q + x[i]
            total = float(pots.sum())
            u = min(max(_lookup(solution, i, q), 0.0), total)
            release = u * (pots / total) if total > 0.0 else np.zeros(m)
            water = pots - release
            hydro = scheduled = u
        else:
            raise DomainError(f"cannot roll out model {model!r}")

        water = np.maximum(water, 0.0)
        after = np.minimum(water, caps)
        cols["inflow"][i] = arriving
        cols["release"][i] = release
        cols["spill"][i] = water - after
        cols["store_after"][i] = after
        gap = r - scheduled
        thermal = min(max(gap, 0.0), costs.thermal_cap)
        deficit = max(gap - costs.thermal_cap, 0.0) + (scheduled - hydro if model in ("independent", "markov") else 0.0)
        surplus = max(-gap, 0.0)
        penalty = gamma * surplus
        rows["hydro"][i] = hydro
        rows["thermal"][i] = thermal
        rows["deficit"][i] = deficit
        rows["surplus"][i] = surplus
        rows["penalty"][i] = penalty
        rows["stage_cost"][i] = (
            costs.thermal_price * thermal
            + costs.deficit_penalty * deficit
            - costs.sale_prices[i] * surplus
            + penalty
        )
        q = after
        if model == "markov":
            prev = nearest_bin(scenario.flow.bins, x[i, 0])
            bins_seen.append(prev)
    return RolloutTrace(**cols, **rows, inflow_bins=bins_seen)


def sample_inflows(scenario: Scenario, n_paths: int, rng: np.random.Generator):
    """Draw ``n_paths`` inflow paths; returns ``[(inflows, initial_bin), ...]``."""
    flow = scenario.flow
    n = scenario.n_periods
    out = []
    if isinstance(flow, Deterministic):
        series = scenario.inflow_matrix()
        return [(series.copy(), None) for _ in range(n_paths)]
    if isinstance(flow, IndependentDensity):
        for _ in range(n_paths):
            xs = [rng.choice(d.support, p=np.asarray(d.weights) / sum(d.weights)) for d in flow.periods]
            out.append((np.array(xs, dtype=float)[:, None], None))
        return out
    bins = np.asarray(flow.bins)
    init = np.asarray(flow.initial) / sum(flow.initial)
    for _ in range(n_paths):
        b0 = int(rng.choice(len(bins), p=init))
        b = b0
        xs = []
        for i in range(n):
            row = np.asarray(flow.transitions[i][b])
            b = int(rng.choice(len(bins), p=row / row.sum()))
            xs.append(bins[b])
        out.append((np.array(xs, dtype=float)[:, None], b0))
    return out
