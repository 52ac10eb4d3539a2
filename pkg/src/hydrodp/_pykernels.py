"""Pure-numpy kernels; reference twin of ``_ckernels.pyx``.

Both modules must perform the same floating-point operations in the same
order so the two backends agree to rounding.
"""

import numpy as np

SNAP = 1e-9
TIE_TOL = 1e-12
DEDUP_TOL = 1e-12


def multilinear(values, shape, steps, points):
    """Interpolate C-ordered ``values`` on a uniform grid at ``points``.

    Returns ``(out, offgrid)`` where ``offgrid`` counts points that fell
    strictly between nodes along at least one axis.
    """
    values = np.ascontiguousarray(values, dtype=float).ravel()
    points = np.atleast_2d(np.asarray(points, dtype=float))
    npts, m = points.shape
    shape = np.asarray(shape, dtype=np.intp)
    strides = np.ones(m, dtype=np.intp)
    for j in range(m - 2, -1, -1):
        strides[j] = strides[j + 1] * shape[j + 1]

    base = np.zeros((npts, m), dtype=np.intp)
    frac = np.zeros((npts, m))
    for j in range(m):
        pos = points[:, j] / steps[j]
        k = np.floor(pos)
        t = pos - k
        up = t > 1.0 - SNAP
        k = np.where(up, k + 1.0, k)
        t = np.where(up | (t < SNAP), 0.0, t)
        k = k.astype(np.intp)
        low = k < 0
        k[low] = 0
        t[low] = 0.0
        top = k >= shape[j] - 1
        k[top] = shape[j] - 2
        t[top] = 1.0
        base[:, j] = k
        frac[:, j] = t
    offgrid = int(np.count_nonzero(np.any((frac > 0.0) & (frac < 1.0), axis=1)))

    out = np.zeros(npts)
    for corner in range(1 << m):
        w = np.ones(npts)
        idx = np.zeros(npts, dtype=np.intp)
        for j in range(m):
            if (corner >> j) & 1:
                w = w * frac[:, j]
                idx += (base[:, j] + 1) * strides[j]
            else:
                w = w * (1.0 - frac[:, j])
                idx += base[:, j] * strides[j]
        live = w != 0.0
        out[live] = out[live] + w[live] * values[idx[live]]
    return out, offgrid


def select_min(obj):
    """Row-wise minimum with ties broken toward the lowest column.

    Entries that are ``inf`` are infeasible.  A column counts as tied when it
    is within ``TIE_TOL * (1 + |min|)`` of the row minimum; the first such
    column wins and its own objective is returned.
    """
    obj = np.atleast_2d(np.asarray(obj, dtype=float))
    best = obj.min(axis=1)
    thresh = best + TIE_TOL * (1.0 + np.abs(best))
    hit = obj <= thresh[:, None]
    idx = np.argmax(hit, axis=1)
    idx[~np.isfinite(best)] = -1
    vals = np.where(idx >= 0, obj[np.arange(obj.shape[0]), np.maximum(idx, 0)], np.inf)
    return vals, idx


def stage_cost(h, demand, c, p, cap, a):
    short = demand - h
    thermal = np.minimum(np.maximum(short, 0.0), cap)
    deficit = np.maximum(short - cap, 0.0)
    surplus = np.maximum(-short, 0.0)
    return c * thermal + p * deficit - a * surplus


def aggregate_candidates(potentials, capacities, levels, store_levels, refine, maxd, demand, cap):
    """Release candidates for one aggregate-model state, ascending and deduplicated.

    A uniform sweep of ``refine * (maxd - 1)`` steps over ``[0, M]`` plus every
    release at which some reservoir's successor lands on a grid level, plus
    the stage-cost kinks ``r - K`` and ``r``.
    """
    total = 0.0
    for pj in potentials:
        total += pj
    if total <= 0.0:
        return np.zeros(1), total
    nsweep = refine * (maxd - 1)
    cands = [k * total / nsweep for k in range(nsweep)]
    cands.append(total)
    for j, pj in enumerate(potentials):
        if pj <= 0.0:
            continue
        ratio = total / pj
        for k in range(levels[j]):
            lev = store_levels[j][k]
            if lev > pj:
                break
            u = total - lev * ratio
            if 0.0 <= u <= total:
                cands.append(u)
    for kink in (demand - cap, demand):
        if 0.0 < kink < total:
            cands.append(kink)
    cands.sort()
    tol = DEDUP_TOL * max(1.0, total)
    out = [cands[0]]
    for u in cands[1:]:
        if u - out[-1] > tol:
            out.append(u)
    return np.array(out), total


def aggregate_successors(potentials, capacities, total, u):
    """Proportional drawdown with capacity clamp; ``u`` is a 1-D candidate array."""
    m = len(potentials)
    succ = np.empty((len(u), m))
    for j in range(m):
        if total > 0.0:
            s = potentials[j] - u * (potentials[j] / total)
        else:
            s = np.zeros(len(u))
        succ[:, j] = np.minimum(capacities[j], np.maximum(s, 0.0))
    return succ


def aggregate_stage(
    stores,
    inflows,
    capacities,
    levels,
    steps,
    next_values,
    demand,
    c,
    p,
    cap,
    a,
    refine,
    num_threads=1,
):
    """One backward step of the aggregate model over every grid state.

    Returns ``(values, releases, offgrid)``.
    """
    del num_threads
    stores = np.asarray(stores, dtype=float)
    nstates, m = stores.shape
    levels = np.asarray(levels, dtype=np.intp)
    maxd = int(levels.max())
    store_levels = [np.linspace(0.0, capacities[j], levels[j]) for j in range(m)]
    vals = np.empty(nstates)
    us = np.empty(nstates)
    offgrid = 0
    for s in range(nstates):
        pot = stores[s] + inflows
        u, total = aggregate_candidates(
            pot, capacities, levels, store_levels, refine, maxd, demand, cap
        )
        succ = aggregate_successors(pot, capacities, total, u)
        cont, off = multilinear(next_values, levels, steps, succ)
        offgrid += off
        obj = stage_cost(u, demand, c, p, cap, a) + cont
        v, idx = select_min(obj[None, :])
        vals[s] = v[0]
        us[s] = u[idx[0]]
    return vals, us, offgrid
