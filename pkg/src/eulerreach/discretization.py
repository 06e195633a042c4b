"""Non-uniform space-time discretizations and the subdivision operator.

A discretization is the triple (h, t, rho): per-interval time steps h of
length n, the time nodes t = cumulative sums of h (length n+1), and
per-node spatial resolutions rho (length n+1).  Subdividing interval j
halves h_j, inserts the midpoint node and quarters rho_j (for j = 0 only
rho_0 is quartered, the time grid is untouched).

Discretizations produced by :func:`initial_discretization` and refined via
:func:`subdivide` stay dyadic: every h_j is T * 2**-level for an integer
level, which makes the structural invariants exactly checkable in floating
point (all involved values are dyadic rationals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .systems import CONSTANT_FLOOR


@dataclass(frozen=True)
class Discretization:
    horizon: float
    h: tuple[float, ...]
    t: tuple[float, ...]
    rho: tuple[float, ...]
    # dyadic exponents: h[j] == horizon * 2**-levels[j]; None for
    # discretizations not built by halving (e.g. uniform T/n grids)
    levels: tuple[int, ...] | None = None

    def __post_init__(self):
        n = len(self.h)
        if n < 1:
            raise ValueError("need at least one time interval")
        if len(self.t) != n + 1 or len(self.rho) != n + 1:
            raise ValueError("t and rho must have length n + 1")
        if self.t[0] != 0.0:
            raise ValueError("t must start at 0")
        if any(x <= 0.0 for x in self.h) or any(r <= 0.0 for r in self.rho):
            raise ValueError("h and rho must be strictly positive")
        if self.levels is not None and len(self.levels) != n:
            raise ValueError("levels must have length n")
        if abs(self.t[-1] - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError("time nodes do not span [0, T]")

    @property
    def n(self) -> int:
        return len(self.h)


def initial_discretization(T: float, L: float, P: float) -> Discretization:
    """Single-interval starting discretization with rho = 2*L*P*T^2 at both nodes."""
    if T <= 0:
        raise ValueError("T must be positive")
    L = max(L, CONSTANT_FLOOR)
    P = max(P, CONSTANT_FLOOR)
    rho0 = 2.0 * L * P * T * T
    return Discretization(T, (T,), (0.0, T), (rho0, rho0), levels=(0,))


def uniform_discretization(T: float, n: int) -> Discretization:
    """Uniform grid h = T/n with rho = (T/n)^2 at every node."""
    if n < 1:
        raise ValueError("n must be >= 1")
    h = T / n
    rho = T * T / (n * n)
    t = tuple(T if k == n else k * h for k in range(n + 1))
    return Discretization(T, (h,) * n, t, (rho,) * (n + 1))


def subdivide(disc: Discretization, j: int) -> Discretization:
    """Apply the subdivision operator at index j in [0, n].

    j = 0 quarters rho_0 and leaves the time grid alone; j >= 1 splits the
    j-th interval at its midpoint and replaces rho_j by two copies of
    rho_j / 4.  Midpoints are inserted as t_j - h_j/2, which is exact for
    dyadic grids, so the node sums never drift.
    """
    n = disc.n
    if not 0 <= j <= n:
        raise ValueError(f"subdivision index {j} out of range [0, {n}]")
    if j == 0:
        rho = (disc.rho[0] / 4.0,) + disc.rho[1:]
        return Discretization(disc.horizon, disc.h, disc.t, rho, disc.levels)
    half = disc.h[j - 1] / 2.0
    h = disc.h[: j - 1] + (half, half) + disc.h[j:]
    t = disc.t[:j] + (disc.t[j] - half,) + disc.t[j:]
    quarter = disc.rho[j] / 4.0
    rho = disc.rho[:j] + (quarter, quarter) + disc.rho[j + 1 :]
    levels = None
    if disc.levels is not None:
        lv = disc.levels[j - 1] + 1
        levels = disc.levels[: j - 1] + (lv, lv) + disc.levels[j:]
    return Discretization(disc.horizon, h, t, rho, levels)


def coupling_satisfied(disc: Discretization, L: float, P: float) -> bool:
    """Check rho_j = 2*L*P*h_j^2 for j in [1, n].

    Exact (bitwise) along dyadic refinement paths, where rho_j is
    2*L*P*T^2 scaled by a power of four; otherwise a relative check.
    """
    base = 2.0 * L * P * disc.horizon * disc.horizon
    if disc.levels is not None:
        return all(
            disc.rho[j + 1] == base * 0.25 ** disc.levels[j] for j in range(disc.n)
        )
    return all(
        abs(disc.rho[j + 1] - 2.0 * L * P * disc.h[j] ** 2) <= 1e-9 * disc.rho[j + 1]
        for j in range(disc.n)
    )


def dyadic_invariants_ok(disc: Discretization) -> bool:
    """Structural invariants of refinement paths.

    Every h_j is a dyadic fraction of T, every t_j is an integer multiple
    of the adjacent h_j, and the nodes equal the cumulative sums of h up
    to n units in the last place.
    """
    if disc.levels is None:
        return False
    T = disc.horizon
    n = disc.n
    for j in range(n):
        if disc.h[j] != T * 2.0 ** -disc.levels[j]:
            return False
    # t_j multiple of h_j for the interval ending at t_j (and starting at t_{j-1})
    for j in range(1, n + 1):
        hj = disc.h[j - 1]
        for node in (disc.t[j], disc.t[j - 1]):
            i = round(node / hj)
            if i * hj != node:
                return False
    acc = 0.0
    for j in range(n):
        acc += disc.h[j]
        drift = abs(acc - disc.t[j + 1])
        if drift > n * math.ulp(max(acc, 1.0)):
            return False
    return True
