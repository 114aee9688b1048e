"""Reflection-point search: recover where a two-leg ray path bent.

Given one measurement row (transmitter, receiver, launch angles, total travel
time ``t_k``), the search shoots the transmitter ray forward on the fixed time
grid ``h = t_k / n_r`` and asks, for every candidate node ``P_s``: does some
receiver-side ray, launched on a discrete angle grid, pass within ``eps1`` of
``P_s`` while the two leg times add up to ``t_k`` within ``eps2``? The first
candidate satisfying both tests, scanned in (candidate, angle cell, receiver
step) order, is the reported reflection point.

Two interchangeable variants implement the same decision sequence:

* :func:`reconstruct_point_bruteforce` re-propagates the whole receiver
  angle grid for every candidate. Work grows with the square of the time
  resolution (times the angle count).
* :func:`reconstruct_point_cached` propagates each receiver angle once,
  stores every visited node in a spatial hash keyed by ``eps1``-sized cells,
  and resolves candidates by 27-cell neighborhood queries. Work grows
  linearly in the time resolution.

Both variants drive the identical batch stepping kernel, so for the same
grids they agree not only on solvability but on the exact solution floats.
Guard behavior follows the measurement model: a transmitter ray that leaves
the domain before any match invalidates its row (``left_domain``); receiver
rays that leave are skipped silently.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .geometry import TWO_PI, DomainBound
from .raytrace import Integrator, _step_batch
from .scene import DataPoint
from .speedfield import max_speed

_NEIGHBOR_OFFSETS = np.array(
    [[dx, dy, dz] for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)],
    dtype=np.int64,
)

_CAUSE_COMPLETED = 0
_CAUSE_LEFT_DOMAIN = 1
_CAUSE_SINGULAR = 2


class NoSolutionReason(str, enum.Enum):
    TIME_BUDGET_EXHAUSTED = "time_budget_exhausted"
    LEFT_DOMAIN = "left_domain"
    ANGLE_SPACE_EXHAUSTED = "angle_space_exhausted"


@dataclass(frozen=True)
class NoSolution:
    """Search outcome when no candidate satisfied both tolerance tests."""

    reason: NoSolutionReason


@dataclass(frozen=True)
class ReflectionSolution:
    """Accepted reflection point and the receiver angles that matched it.

    ``tau`` is the transmitter-leg time of the accepted candidate;
    ``residual_distance``/``residual_time`` are the values of the two accept
    tests. The grid indices of the match are kept for diagnostics: candidate
    node ``s_index``, row-major receiver angle cell ``angle_index``, receiver
    node ``p_index``.
    """

    px: float
    py: float
    pz: float
    tau: float
    receiver_phi: float
    receiver_theta: float
    residual_distance: float
    residual_time: float
    s_index: int
    angle_index: int
    p_index: int

    @property
    def point(self):
        return np.array([self.px, self.py, self.pz])

    @property
    def receiver_angles(self):
        return self.receiver_phi, self.receiver_theta


@dataclass
class SearchParams:
    """Discretization and tolerances for the reflection-point search.

    ``eps1`` (match distance) defaults to ``2 * c_max * h_k`` and ``eps2``
    (total-time tolerance) to ``2 * h_k``, resolved per data point from its
    step ``h_k = t_k / n_r``.
    """

    n_r: int = 500
    phi_steps: int = 64
    theta_steps: int = 128
    eps1: float | None = None
    eps2: float | None = None
    integrator: Integrator = Integrator.RK4

    def validate(self):
        if self.n_r < 1:
            raise ValueError("n_r must be >= 1")
        if self.phi_steps < 1 or self.theta_steps < 1:
            raise ValueError("angle grid must have at least one cell per axis")
        if self.eps1 is not None and not self.eps1 > 0.0:
            raise ValueError("eps1 must be positive")
        if self.eps2 is not None and not self.eps2 > 0.0:
            raise ValueError("eps2 must be positive")

    def resolve(self, field, domain, t_k):
        """Return ``(h_k, eps1, eps2)`` for a measurement with total time ``t_k``."""
        self.validate()
        h = t_k / self.n_r
        eps1 = self.eps1 if self.eps1 is not None else 2.0 * max_speed(field, domain) * h
        eps2 = self.eps2 if self.eps2 is not None else 2.0 * h
        return h, eps1, eps2


@dataclass
class SearchStats:
    """Instrumentation counters; one unit is one ray step or one pair test."""

    integration_steps: int = 0
    pair_tests: int = 0
    cache_points: int = 0
    queries: int = 0

    @property
    def work(self):
        return self.integration_steps + self.pair_tests

    def merge(self, other):
        self.integration_steps += other.integration_steps
        self.pair_tests += other.pair_tests
        self.cache_points += other.cache_points
        self.queries += other.queries


def angle_grid(phi_steps, theta_steps):
    """Row-major (phi, theta) receiver launch grid, shape ``(A, 2)``.

    Polar angles are the centers of a uniform partition of ``(0, pi)`` into
    ``phi_steps`` cells (so the poles are never sampled); azimuths divide
    ``[0, 2*pi)`` uniformly. Cell ``a`` maps to
    ``(phi[a // theta_steps], theta[a % theta_steps])``.
    """
    if phi_steps < 1 or theta_steps < 1:
        raise ValueError("angle grid must have at least one cell per axis")
    phi = (np.arange(phi_steps) + 0.5) * (np.pi / phi_steps)
    theta = np.arange(theta_steps) * (TWO_PI / theta_steps)
    pairs = np.empty((phi_steps * theta_steps, 2))
    pairs[:, 0] = np.repeat(phi, theta_steps)
    pairs[:, 1] = np.tile(theta, phi_steps)
    return pairs


def _advance(field, S, alive, h, integrator, domain):
    """One lockstep batch step; dead rows stay frozen at their last state.

    Returns ``(S_next, alive_next, singular_flags)``. A row dies when its
    step was singular, sampled a non-positive speed, or landed outside the
    domain; the frozen row keeps its pre-step state so repeated calls are
    idempotent for dead rays.
    """
    S_new, sing, nonpos = _step_batch(field, S, h, integrator)
    inside = domain.contains(S_new[:, :3])
    ok = alive & ~sing & ~nonpos & inside
    S_out = np.where(ok[:, None], S_new, S)
    return S_out, ok, sing


def _trace_record(field, domain, S0, h, n_steps, integrator):
    """Lockstep-trace a batch, recording every node.

    Returns ``(pos, alive, times, cause)`` with ``pos`` of shape
    ``(m, n_steps + 1, 3)``, ``alive`` the per-node validity mask,
    ``times`` the shared time grid, and ``cause`` the per-ray death reason
    (0 completed, 1 left domain, 2 singular).
    """
    m = S0.shape[0]
    pos = np.empty((m, n_steps + 1, 3))
    alive_hist = np.zeros((m, n_steps + 1), dtype=bool)
    times = np.empty(n_steps + 1)
    cause = np.zeros(m, dtype=np.int8)

    S = S0.copy()
    alive = np.asarray(domain.contains(S[:, :3]), dtype=bool)
    cause[~alive] = _CAUSE_LEFT_DOMAIN
    pos[:, 0] = S[:, :3]
    alive_hist[:, 0] = alive
    times[0] = 0.0
    t = 0.0
    for p in range(1, n_steps + 1):
        was_alive = alive
        S, alive, sing = _advance(field, S, was_alive, h, integrator, domain)
        died = was_alive & ~alive
        cause[died & sing] = _CAUSE_SINGULAR
        cause[died & ~sing] = _CAUSE_LEFT_DOMAIN
        t = t + h
        times[p] = t
        pos[:, p] = S[:, :3]
        alive_hist[:, p] = alive
    return pos, alive_hist, times, cause


def _validate_datapoint(dp: DataPoint, domain: DomainBound):
    if not dp.t > 0.0:
        raise ValueError("data point travel time must be positive")
    if not dp.xi > 0.0:
        raise ValueError("data point carrier frequency must be positive")
    if not 0.0 < dp.phi < np.pi:
        raise ValueError("launch phi must lie in (0, pi)")
    if not 0.0 <= dp.theta < TWO_PI:
        raise ValueError("launch theta must lie in [0, 2*pi)")
    if not bool(domain.contains(dp.transmitter)) or not bool(domain.contains(dp.receiver)):
        raise ValueError("transmitter and receiver must lie inside the domain")


def _prepare(dp, field, domain, params, stats):
    """Resolve tolerances and trace the shared transmitter path."""
    _validate_datapoint(dp, domain)
    h, eps1, eps2 = params.resolve(field, domain, dp.t)
    S0 = np.array([[dp.xl, dp.yl, dp.zl, dp.phi, dp.theta]])
    tpos, talive, times, tcause = _trace_record(
        field, domain, S0, h, params.n_r, params.integrator)
    if stats is not None:
        stats.integration_steps += int(talive[0, :params.n_r].sum())
    valid_nodes = int(talive[0].sum())  # contiguous prefix; rays never revive
    pairs = angle_grid(params.phi_steps, params.theta_steps)
    R0 = np.empty((pairs.shape[0], 5))
    R0[:, 0] = dp.xr
    R0[:, 1] = dp.yr
    R0[:, 2] = dp.zr
    R0[:, 3:] = pairs
    return {
        "h": h, "eps1": eps1, "eps2": eps2, "t_k": dp.t,
        "tpos": tpos[0], "times": times, "tcause": int(tcause[0]),
        "valid_nodes": valid_nodes, "pairs": pairs, "R0": R0,
    }


def _failure(ctx, usable_cells):
    if ctx["tcause"] == _CAUSE_LEFT_DOMAIN:
        return NoSolution(NoSolutionReason.LEFT_DOMAIN)
    if usable_cells == 0:
        return NoSolution(NoSolutionReason.ANGLE_SPACE_EXHAUSTED)
    return NoSolution(NoSolutionReason.TIME_BUDGET_EXHAUSTED)


def _solution(ctx, s, angle_index, p_index, dist, rtime):
    cand = ctx["tpos"][s]
    phi, theta = ctx["pairs"][angle_index]
    return ReflectionSolution(
        float(cand[0]), float(cand[1]), float(cand[2]),
        tau=float(ctx["times"][s]),
        receiver_phi=float(phi), receiver_theta=float(theta),
        residual_distance=float(dist), residual_time=float(rtime),
        s_index=int(s), angle_index=int(angle_index), p_index=int(p_index),
    )


def reconstruct_point_bruteforce(dp, field, domain, params=None, stats=None):
    """Reflection-point search by exhaustive re-propagation.

    For every transmitter candidate node the full receiver angle grid is
    re-propagated step by step, testing each receiver node against the
    candidate, in (candidate, angle cell, receiver step) scan order. The
    receiver sweep for one angle stops at domain exit or once the two-leg
    time exceeds the budget ``t_k + eps2``.

    Returns
    -------
    ReflectionSolution or NoSolution
    """
    params = params or SearchParams()
    ctx = _prepare(dp, field, domain, params, stats)
    t_k, eps1, eps2, h = ctx["t_k"], ctx["eps1"], ctx["eps2"], ctx["h"]
    integ = params.integrator
    A = ctx["R0"].shape[0]
    # cells that survive their first step; identical for every candidate
    usable_cells = int(_first_step_alive(field, domain, ctx["R0"], h, integ).sum())

    for s in range(1, ctx["valid_nodes"]):
        cand = ctx["tpos"][s]
        T_s = ctx["times"][s]

        S = ctx["R0"].copy()
        alive = np.asarray(domain.contains(S[:, :3]), dtype=bool)
        first_p = np.full(A, -1, dtype=np.int64)
        first_dist = np.zeros(A)
        first_rt = np.zeros(A)
        aT = 0.0
        for p in range(1, params.n_r + 1):
            if stats is not None:
                stats.integration_steps += int(alive.sum())
            S, alive, _ = _advance(field, S, alive, h, integ, domain)
            aT = aT + h
            if not alive.any():
                break
            rt = (T_s + aT) - t_k
            d = np.sqrt(((S[:, :3] - cand) ** 2).sum(axis=1))
            if stats is not None:
                stats.pair_tests += int(alive.sum())
            match = alive & (d < eps1) & (abs(rt) < eps2)
            newly = match & (first_p < 0)
            if newly.any():
                first_p[newly] = p
                first_dist[newly] = d[newly]
                first_rt[newly] = rt
            if rt > eps2:
                break
        hit_cells = np.flatnonzero(first_p >= 0)
        if hit_cells.size:
            a_star = int(hit_cells[0])
            return _solution(ctx, s, a_star, first_p[a_star],
                             first_dist[a_star], first_rt[a_star])
    return _failure(ctx, usable_cells)


def _first_step_alive(field, domain, R0, h, integrator):
    alive0 = np.asarray(domain.contains(R0[:, :3]), dtype=bool)
    _, alive1, _ = _advance(field, R0.copy(), alive0, h, integrator, domain)
    return alive1


def _cell_keys(ijk):
    # classic 3-prime spatial hash; collisions are harmless, the exact
    # distance filter runs on every gathered point anyway
    return (ijk[:, 0] * 73856093) ^ (ijk[:, 1] * 19349663) ^ (ijk[:, 2] * 83492791)


@dataclass
class ReceiverRayCache:
    """Every receiver-ray node of one angle grid, indexed by a spatial hash.

    Nodes are binned into cubic cells of side ``eps1``; a lookup inspects the
    27-cell neighborhood of the query point and distance-filters exactly, so
    hash collisions only cost extra filtered comparisons. Contents are fully
    determined by the inputs (construction is single-pass and ordered), and
    the arrays are sorted by hash key with a stable sort, keeping equal-key
    runs in (angle cell, step) order.
    """

    positions: np.ndarray
    atimes: np.ndarray
    cell_index: np.ndarray
    p_index: np.ndarray
    keys_sorted: np.ndarray
    eps1: float
    h: float
    n_r: int
    pairs: np.ndarray
    singular_cells: np.ndarray
    usable_cells: int
    build_steps: int

    def __len__(self):
        return self.positions.shape[0]

    def _neighbor_ranges(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        base = np.floor(pts / self.eps1).astype(np.int64)
        cells = base[:, None, :] + _NEIGHBOR_OFFSETS[None, :, :]
        keys = _cell_keys(cells.reshape(-1, 3))
        lo = np.searchsorted(self.keys_sorted, keys, side="left")
        hi = np.searchsorted(self.keys_sorted, keys, side="right")
        return lo, hi

    def lookup(self, point):
        """Indices of all stored nodes strictly within ``eps1`` of ``point``."""
        point = np.asarray(point, dtype=float).reshape(3)
        lo, hi = self._neighbor_ranges(point[None, :])
        sizes = hi - lo
        idx = _concat_ranges(lo, hi, sizes)
        d = np.sqrt(((self.positions[idx] - point) ** 2).sum(axis=1))
        return idx[d < self.eps1]


def _concat_ranges(lo, hi, sizes):
    """Concatenate ``arange(lo_i, hi_i)`` spans without a Python loop."""
    total = int(sizes.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(lo, sizes)
    offs = np.arange(total, dtype=np.int64) - np.repeat(
        np.cumsum(sizes) - sizes, sizes)
    return starts + offs


def build_receiver_cache(field, domain, receiver, t_k, params=None, stats=None):
    """Propagate the whole receiver angle grid once and index every node.

    The time grid (``h = t_k / n_r``) and the cell size (``eps1``) come from
    ``params`` resolved against the measurement's total time, so a cache is
    specific to one measurement geometry. Angle cells whose propagation hit
    the polar singularity are truncated there and recorded in
    ``singular_cells``; their earlier nodes stay usable.
    """
    params = params or SearchParams()
    h, eps1, _ = params.resolve(field, domain, t_k)
    pairs = angle_grid(params.phi_steps, params.theta_steps)
    A = pairs.shape[0]
    R0 = np.empty((A, 5))
    R0[:, :3] = np.asarray(receiver, dtype=float)
    R0[:, 3:] = pairs
    pos, alive, times, cause = _trace_record(
        field, domain, R0, h, params.n_r, params.integrator)
    build_steps = int(alive[:, :params.n_r].sum())
    if stats is not None:
        stats.integration_steps += build_steps

    mask = alive.ravel()
    n1 = params.n_r + 1
    flat_pos = pos.reshape(A * n1, 3)[mask]
    flat_at = np.tile(times, A)[mask]
    flat_cell = np.repeat(np.arange(A, dtype=np.int64), n1)[mask]
    flat_p = np.tile(np.arange(n1, dtype=np.int64), A)[mask]

    keys = _cell_keys(np.floor(flat_pos / eps1).astype(np.int64))
    order = np.argsort(keys, kind="stable")
    cache = ReceiverRayCache(
        positions=flat_pos[order],
        atimes=flat_at[order],
        cell_index=flat_cell[order],
        p_index=flat_p[order],
        keys_sorted=keys[order],
        eps1=eps1,
        h=h,
        n_r=params.n_r,
        pairs=pairs,
        singular_cells=np.flatnonzero(cause == _CAUSE_SINGULAR),
        usable_cells=int(alive[:, 1].sum()) if params.n_r >= 1 else 0,
        build_steps=build_steps,
    )
    if stats is not None:
        stats.cache_points += len(cache)
    return cache


def reconstruct_point_cached(dp, field, domain, params=None, stats=None, cache=None):
    """Reflection-point search against a receiver-ray cache.

    Decision-equivalent to :func:`reconstruct_point_bruteforce` on the same
    grids: the accept tests run on bitwise-identical floats and the winner is
    the lexicographic minimum over (candidate, angle cell, receiver step),
    which reproduces the brute-force scan order. Receiver rays are
    propagated once (cache construction) instead of once per candidate.

    Returns
    -------
    ReflectionSolution or NoSolution
    """
    params = params or SearchParams()
    ctx = _prepare(dp, field, domain, params, stats)
    t_k, eps1, eps2 = ctx["t_k"], ctx["eps1"], ctx["eps2"]
    if cache is None:
        cache = build_receiver_cache(field, domain, dp.receiver, dp.t, params, stats)

    n_cand = ctx["valid_nodes"] - 1
    if n_cand < 1:
        return _failure(ctx, cache.usable_cells)
    cands = ctx["tpos"][1:ctx["valid_nodes"]]
    T = ctx["times"][1:ctx["valid_nodes"]]

    lo, hi = cache._neighbor_ranges(cands)
    sizes = hi - lo
    idx = _concat_ranges(lo, hi, sizes)
    owner = np.repeat(np.arange(n_cand * 27) // 27, sizes).astype(np.int64)
    if stats is not None:
        stats.pair_tests += int(idx.size)
        stats.queries += n_cand

    if idx.size:
        d = np.sqrt(((cache.positions[idx] - cands[owner]) ** 2).sum(axis=1))
        rt = (T[owner] + cache.atimes[idx]) - t_k
        ok = (d < eps1) & (np.abs(rt) < eps2) & (cache.p_index[idx] >= 1)
    else:
        ok = np.zeros(0, dtype=bool)
    if not ok.any():
        return _failure(ctx, cache.usable_cells)

    sel = np.flatnonzero(ok)
    win = sel[np.lexsort((cache.p_index[idx[sel]],
                          cache.cell_index[idx[sel]],
                          owner[sel]))[0]]
    j = idx[win]
    s = int(owner[win]) + 1
    return _solution(ctx, s, int(cache.cell_index[j]), int(cache.p_index[j]),
                     d[win], rt[win])


def reconstruct_point(dp, field, domain, params=None, stats=None, variant="cached"):
    """Dispatch to one search variant by name ('brute' or 'cached')."""
    if variant == "brute":
        return reconstruct_point_bruteforce(dp, field, domain, params, stats)
    if variant == "cached":
        return reconstruct_point_cached(dp, field, domain, params, stats)
    raise ValueError(f"unknown variant: {variant!r}")


def reconstruct_interval(datapoints, field, domain, params=None, *,
                         variant="cached", threads=1, stats=None):
    """Reconstruct a batch of measurement rows, preserving input order.

    Rows are independent tasks; with ``threads > 1`` they run in a thread
    pool (``threads=0`` means one worker per CPU). Results are assembled by
    input index and each task keeps private counters merged afterwards, so
    output and statistics are identical for every thread count. Failed rows
    are reported in place as :class:`NoSolution`, never dropped.
    """
    params = params or SearchParams()
    dps = list(datapoints)
    if threads == 0:
        import os

        threads = os.cpu_count() or 1
    if threads < 0:
        raise ValueError("threads must be >= 0")

    def run(dp):
        local = SearchStats()
        result = reconstruct_point(dp, field, domain, params, local, variant)
        return result, local

    if threads == 1 or len(dps) <= 1:
        outcomes = [run(dp) for dp in dps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, dps))
    results = []
    for result, local in outcomes:
        if stats is not None:
            stats.merge(local)
        results.append(result)
    return results


def verify_solution(dp, sol: ReflectionSolution, field, domain, params=None):
    """Independent validity check: re-trace both legs and measure the misses.

    Traces the transmitter ray for ``tau`` and a receiver ray at the
    solution's angles for ``t_k - tau``, each on its own fixed grid matching
    the search step, and returns ``(transmitter_miss, receiver_miss)``
    distances to the reported reflection point.
    """
    from .raytrace import RayState, trace

    params = params or SearchParams()
    h = dp.t / params.n_r
    p = sol.point

    n1 = max(1, sol.s_index)
    path1 = trace(field, RayState(dp.xl, dp.yl, dp.zl, dp.phi, dp.theta),
                  sol.tau, n1, params.integrator, domain)
    d1 = float(np.sqrt(((path1.positions[-1] - p) ** 2).sum()))

    t2 = dp.t - sol.tau
    n2 = max(1, int(round(t2 / h)))
    path2 = trace(field, RayState(dp.xr, dp.yr, dp.zr,
                                  sol.receiver_phi, sol.receiver_theta),
                  t2, n2, params.integrator, domain)
    d2 = float(np.sqrt(((path2.positions[-1] - p) ** 2).sum()))
    return d1, d2
