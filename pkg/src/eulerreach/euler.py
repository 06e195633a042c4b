"""Fully discrete set-valued Euler recursion over a discretization.

Step k maps every source point x of the current lattice set through the
inflated image box x + h * F(x) and projects onto the next lattice; the
union over all sources is the next reachable set.  The exact per-step
cost counts projected points per source point (before dedup), which is
exactly the work the recursion performs.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .discretization import Discretization
from .errors import ResourceCapError
from .lattice import (
    DEFAULT_CAP,
    LatticeSet,
    dedupe_points,
    enumerate_ranges,
    lattice_range,
    project_box,
)
from .systems import SystemSpec

# target number of materialized points per work chunk
CHUNK_POINTS = 1 << 22


@dataclass(frozen=True)
class RunRecord:
    """Everything one Euler run produces.

    cost_exact[j] is the number of grid points computed when stepping
    from node j to node j+1 (n entries).  vhat_R / vhat_F are the
    surrogate volumes of the reachable sets and the rhs images (n+1
    entries each, with the last image volume copied from its neighbor).
    """

    disc: Discretization
    sets: tuple[LatticeSet, ...]
    cost_exact: tuple[int, ...]
    vhat_R: tuple[float, ...]
    vhat_F: tuple[float, ...]
    error_bound: float
    wall_time: float
    lipschitz: float
    bound: float
    d_R: int
    d_F: int

    @property
    def cost_total(self) -> int:
        return sum(self.cost_exact)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(s.cardinality for s in self.sets)


def euler_run(
    system: SystemSpec,
    disc: Discretization,
    cap: int = DEFAULT_CAP,
    workers: int = 1,
) -> RunRecord:
    """Run the Euler recursion; deterministic for any worker count."""
    from .refine import error_total

    if abs(disc.horizon - system.horizon) > 1e-9 * system.horizon:
        raise ValueError("discretization horizon does not match the system")
    t0 = time.perf_counter()
    rho = disc.rho
    sets = [project_box(system.initial_set, rho[0], cap=cap)]
    cost_exact: list[int] = []
    vhat_R = [sets[0].cardinality * rho[0] ** system.d_R]
    vhat_F: list[float] = []

    for k in range(disc.n):
        h = disc.h[k]
        src = sets[k]
        nxt, cost = _step(system, src, h, rho[k + 1], cap, workers, step=k + 1)
        sets.append(nxt)
        cost_exact.append(cost)
        vhat_R.append(nxt.cardinality * rho[k + 1] ** system.d_R)
        vhat_F.append((cost / src.cardinality) * (rho[k + 1] / h) ** system.d_F)
    vhat_F.append(vhat_F[-1])

    bound = error_total(disc, system.lipschitz, system.bound)
    return RunRecord(
        disc=disc,
        sets=tuple(sets),
        cost_exact=tuple(cost_exact),
        vhat_R=tuple(vhat_R),
        vhat_F=tuple(vhat_F),
        error_bound=bound,
        wall_time=time.perf_counter() - t0,
        lipschitz=system.lipschitz,
        bound=system.bound,
        d_R=system.d_R,
        d_F=system.d_F,
    )


def _step(
    system: SystemSpec,
    src: LatticeSet,
    h: float,
    rho_next: float,
    cap: int,
    workers: int,
    step: int,
) -> tuple[LatticeSet, int]:
    x = src.state_points()
    f_lo, f_hi = system.rhs_batch(x)
    lo_idx, hi_idx = lattice_range(x + h * f_lo, x + h * f_hi, rho_next)
    counts = np.prod(hi_idx - lo_idx + 1, axis=1)

    # guard in float first: counts can overflow int64 in infeasible cells
    projected = float(np.sum(counts.astype(float)))
    if projected > cap:
        raise ResourceCapError(step=step, projected=projected, cap=cap)
    cost = int(counts.sum())

    chunks = _chunk_bounds(counts, CHUNK_POINTS)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    lambda se: dedupe_points(
                        enumerate_ranges(lo_idx[se[0] : se[1]], hi_idx[se[0] : se[1]])
                    ),
                    chunks,
                )
            )
    else:
        parts = [
            dedupe_points(enumerate_ranges(lo_idx[a:b], hi_idx[a:b]))
            for a, b in chunks
        ]
    # per-chunk results are sets; the merged set is order-independent
    pts = parts[0] if len(parts) == 1 else dedupe_points(np.concatenate(parts))
    if pts.shape[0] > cap:
        raise ResourceCapError(step=step, projected=float(pts.shape[0]), cap=cap)
    return LatticeSet(rho_next, pts), cost


def _chunk_bounds(counts: np.ndarray, target: int) -> list[tuple[int, int]]:
    bounds = []
    start = 0
    acc = 0
    for i, c in enumerate(counts):
        acc += int(c)
        if acc >= target:
            bounds.append((start, i + 1))
            start = i + 1
            acc = 0
    if start < counts.shape[0]:
        bounds.append((start, counts.shape[0]))
    return bounds
