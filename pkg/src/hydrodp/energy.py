"""Water-to-energy conversion through a tabulated head curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hydrodp.errors import DomainError

GRAVITY = 9.8


@dataclass(frozen=True)
class HeadCurve:
    """Tabulated head H(Q) of a reservoir.

    ``points`` is a sequence of ``(store, head)`` pairs with strictly increasing
    stores starting at 0.  Heads beyond the last tabulated store are clamped.
    """

    points: tuple[tuple[float, float], ...]
    efficiency: float
    max_head: float

    def __post_init__(self):
        object.__setattr__(
            self, "points", tuple((float(q), float(h)) for q, h in self.points)
        )
        object.__setattr__(self, "efficiency", float(self.efficiency))
        object.__setattr__(self, "max_head", float(self.max_head))

    @property
    def stores(self) -> np.ndarray:
        return np.array([q for q, _ in self.points])

    @property
    def heads(self) -> np.ndarray:
        return np.array([h for _, h in self.points])

    def violations(self, prefix: str = "head_curve") -> list[str]:
        out = []
        if len(self.points) < 2:
            out.append(f"{prefix}.points: need at least 2 points, got {len(self.points)}")
            return out
        q, h = self.stores, self.heads
        if q[0] != 0.0:
            out.append(f"{prefix}.points: first store must be 0, got {q[0]:g}")
        if np.any(np.diff(q) <= 0):
            out.append(f"{prefix}.points: stores must be strictly increasing")
        if np.any(np.diff(h) < 0):
            out.append(f"{prefix}.points: heads must be non-decreasing")
        if np.any(h > self.max_head):
            out.append(f"{prefix}.points: head exceeds max_head {self.max_head:g}")
        if np.any(h < 0):
            out.append(f"{prefix}.points: heads must be non-negative")
        if not 0.0 < self.efficiency <= 1.0:
            out.append(f"{prefix}.efficiency: must lie in (0, 1], got {self.efficiency:g}")
        return out


def head_at(curve: HeadCurve, store: float) -> float:
    """Piecewise-linear head at ``store``, clamped beyond the table."""
    if store < 0:
        raise DomainError(f"store must be non-negative, got {store!r}")
    return float(np.interp(store, curve.stores, curve.heads))


def energy_of_release(
    curve: HeadCurve,
    store_start: float,
    inflow: float,
    release: float,
    capacity: float,
    tau_days: int,
) -> float:
    """Energy produced by releasing ``release`` over a period of ``tau_days`` days.

    The store moves linearly through the period; on day t the head is read at
    ``min(store_start + t * (inflow - release) / tau, capacity)`` and the day
    contributes ``9.8 * eta * head * release / tau``.
    """
    if tau_days < 1:
        raise DomainError(f"tau_days must be >= 1, got {tau_days!r}")
    if release < 0 or release > store_start + inflow:
        raise DomainError(
            f"release {release!r} outside [0, store_start + inflow = {store_start + inflow!r}]"
        )
    if release == 0:
        return 0.0
    per_day = release / tau_days
    drift = (inflow - release) / tau_days
    total = 0.0
    for t in range(1, tau_days + 1):
        # Guard the last day against rounding just below zero.
        level = max(min(store_start + t * drift, capacity), 0.0)
        total += head_at(curve, level) * per_day
    return GRAVITY * curve.efficiency * total
