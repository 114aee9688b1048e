"""Forward simulation: spherical obstacle, reflection, and synthetic data.

The simulated experiment sends rays from a transmitter into the medium. A ray
that hits the moving spherical obstacle reflects specularly and continues;
whenever the reflected leg passes close to a configured receiver, one
measurement row (:class:`DataPoint`) is emitted together with the matching
:class:`GroundTruth` used by round-trip tests. The obstacle is frozen at the
midpoint of the sampled interval, so each interval yields an independent
static scene.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainBound, angles_from_direction, flip_angles
from .raytrace import Integrator, RayState, _raise_flags, _step_batch, trace
from .speedfield import max_speed


class GrazingIncidenceError(RuntimeError):
    """Incidence too close to tangential for a stable reflection."""


GRAZING_DOT_MIN = 1e-9


@dataclass(frozen=True)
class ObstacleTrajectory:
    """Moving sphere: fixed radius, piecewise-linear center path.

    ``waypoints`` is a sequence of ``(t, x, y, z)`` rows with strictly
    increasing times. ``intervals`` lists the sampled windows ``(t0, t1)``;
    within each window the center is frozen at the window midpoint.
    """

    radius: float
    waypoints: tuple
    intervals: tuple

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[1] != 4 or wp.shape[0] < 1:
            raise ValueError("waypoints must be rows of (t, x, y, z)")
        if np.any(np.diff(wp[:, 0]) <= 0.0):
            raise ValueError("waypoint times must be strictly increasing")
        iv = tuple((float(a), float(b)) for a, b in self.intervals)
        for a, b in iv:
            if not b > a:
                raise ValueError("interval end must exceed its start")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "waypoints", tuple(map(tuple, wp.tolist())))
        object.__setattr__(self, "intervals", iv)
        if not self.radius > 0.0:
            raise ValueError("obstacle radius must be positive")

    def center_at(self, t):
        """Piecewise-linear center position, clamped outside the waypoint span."""
        wp = np.asarray(self.waypoints)
        ts, xyz = wp[:, 0], wp[:, 1:]
        out = np.empty(3)
        for k in range(3):
            out[k] = np.interp(t, ts, xyz[:, k])
        return out

    def frozen_center(self, interval_index):
        """Center used for the whole of interval ``interval_index`` (midpoint rule)."""
        a, b = self.intervals[interval_index]
        return self.center_at(0.5 * (a + b))


@dataclass(frozen=True)
class DataPoint:
    """One broken-ray measurement row.

    Transmitter position ``(xl, yl, zl)``, receiver position ``(xr, yr, zr)``,
    launch angles ``(phi, theta)``, total two-leg travel time ``t``, carrier
    frequency ``xi``, and the sampling interval index the row belongs to.
    """

    xl: float
    yl: float
    zl: float
    xr: float
    yr: float
    zr: float
    phi: float
    theta: float
    t: float
    xi: float
    interval: int

    @property
    def transmitter(self):
        return np.array([self.xl, self.yl, self.zl])

    @property
    def receiver(self):
        return np.array([self.xr, self.yr, self.zr])


@dataclass(frozen=True)
class GroundTruth:
    """Simulation-side truth for one emitted :class:`DataPoint`.

    ``(px, py, pz)`` is the reflection point, ``tau`` the first-leg time, and
    ``(r_phi, r_theta)`` the reversed arrival direction at the receiver, i.e.
    the angles a receiver-side search ray should be launched at.
    """

    k: int
    px: float
    py: float
    pz: float
    tau: float
    r_phi: float
    r_theta: float
    interval: int

    @property
    def point(self):
        return np.array([self.px, self.py, self.pz])


def specular_reflect(d, n):
    """Mirror reflection ``r = d - 2 (d . n) n`` of a unit direction.

    Parameters
    ----------
    d : array-like, shape (3,)
        Incoming unit direction, must point into the surface (``d . n < 0``).
    n : array-like, shape (3,)
        Outward unit surface normal.

    Raises
    ------
    GrazingIncidenceError
        If ``|d . n| < 1e-9`` (tangential incidence).
    ValueError
        If either vector is not unit length or ``d . n > 0``.
    """
    d = np.asarray(d, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(float((d * d).sum()) - 1.0) > 1e-9 or abs(float((n * n).sum()) - 1.0) > 1e-9:
        raise ValueError("direction and normal must be unit vectors")
    dn = float((d * n).sum())
    if abs(dn) < GRAZING_DOT_MIN:
        raise GrazingIncidenceError("incidence is tangential within tolerance")
    if dn > 0.0:
        raise ValueError("direction must point into the surface (d . n < 0)")
    return d - 2.0 * dn * n


def first_hit(field, initial: RayState, center, radius, max_time, n_steps,
              integrator=Integrator.RK4, domain: DomainBound | None = None):
    """March a ray until it first enters a sphere; refine the crossing by bisection.

    The ray is stepped on the fixed grid ``h = max_time / n_steps``; the first
    step whose endpoint is inside the sphere brackets the crossing, which is
    then bisected down to ``|dist - radius| <= 1e-9 * radius``. A crossing
    that happens entirely between two grid nodes (tangential clip) is not
    detected; that resolution limit is part of the contract.

    Returns
    -------
    (RayState, float) or None
        Surface state (position and incoming angles) and hit time, or None
        if the ray exhausts ``max_time`` or leaves the domain first.
    """
    center = np.asarray(center, dtype=float)
    if not radius > 0.0:
        raise ValueError("sphere radius must be positive")
    h = max_time / n_steps

    def dist_of(row):
        return float(np.sqrt(((row[:3] - center) ** 2).sum()))

    s = initial.as_array()[None, :]
    if dist_of(s[0]) <= radius:
        raise ValueError("ray must start outside the sphere")
    t = 0.0
    for _ in range(n_steps):
        s_new, sing, nonpos = _step_batch(field, s, h, integrator)
        _raise_flags(bool(sing[0]), bool(nonpos[0]))
        if domain is not None and not bool(domain.contains(s_new[0, :3])):
            return None
        if dist_of(s_new[0]) <= radius:
            # crossing bracketed in (t, t + h]; bisect the sub-step size
            lo, hi = 0.0, h
            row, delta = s_new[0], h
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                cand, _, _ = _step_batch(field, s, mid, integrator)
                f = dist_of(cand[0]) - radius
                row, delta = cand[0], mid
                if abs(f) <= 1e-9 * radius:
                    break
                if f > 0.0:
                    lo = mid
                else:
                    hi = mid
            x, y, z, phi, theta = row
            return RayState(x, y, z, phi, theta, t=t + delta), t + delta
        s = s_new
        t = t + h
    return None


def _capture_index(dists, within):
    """Index of the closest approach inside the first contiguous in-radius run."""
    idx = np.flatnonzero(within)
    if idx.size == 0:
        return None
    start = idx[0]
    stop = start
    while stop + 1 < dists.size and within[stop + 1]:
        stop += 1
    return start + int(np.argmin(dists[start:stop + 1]))


def simulate_broken_rays(field, domain, obstacle: ObstacleTrajectory, interval_index,
                         transmitter, receivers, launch_angles, max_time, n_steps,
                         integrator=Integrator.RK4, capture_radius=None, xi=40000.0,
                         k_offset=0):
    """Simulate single-reflection broken rays for one sampling interval.

    For every launch angle pair the transmitter ray is traced until it hits
    the frozen obstacle, reflects specularly, and the reflected leg is traced
    until domain exit, obstacle re-entry, or the time budget. A
    (:class:`DataPoint`, :class:`GroundTruth`) pair is emitted for each
    receiver the reflected leg passes within ``capture_radius`` of (first
    pass per receiver; total time is first-leg time plus the time of closest
    approach).

    Parameters
    ----------
    launch_angles : array-like, shape (m, 2)
        Launch ``(phi, theta)`` pairs.
    capture_radius : float, optional
        Defaults to ``2 * c_max * h`` with ``h = max_time / n_steps``.
    k_offset : int
        Starting row index for the emitted ground-truth ``k`` fields.

    Returns
    -------
    (list[DataPoint], list[GroundTruth])
    """
    transmitter = np.asarray(transmitter, dtype=float)
    receivers = np.asarray(receivers, dtype=float).reshape(-1, 3)
    launch_angles = np.asarray(launch_angles, dtype=float).reshape(-1, 2)
    center = obstacle.frozen_center(interval_index)
    h = max_time / n_steps
    if capture_radius is None:
        capture_radius = 2.0 * max_speed(field, domain) * h

    datapoints = []
    truths = []
    k = k_offset
    for phi0, theta0 in launch_angles:
        start = RayState(*transmitter, phi=float(phi0), theta=float(theta0))
        hit = first_hit(field, start, center, obstacle.radius, max_time, n_steps,
                        integrator=integrator, domain=domain)
        if hit is None:
            continue
        hit_state, tau = hit
        p_hit = hit_state.position
        normal = p_hit - center
        normal = normal / np.sqrt((normal * normal).sum())
        try:
            r_dir = specular_reflect(hit_state.direction, normal)
        except GrazingIncidenceError:
            continue
        r_phi, r_theta = angles_from_direction(r_dir)
        remaining = max_time - tau
        n2 = int(remaining / h)
        if n2 < 1:
            continue
        leg = trace(field, RayState(*p_hit, phi=float(r_phi), theta=float(r_theta)),
                    n2 * h, n2, integrator=integrator, domain=domain)

        pos = leg.positions
        # single-reflection scope: cut the leg where it would re-enter the obstacle
        d_obs = np.sqrt(((pos - center) ** 2).sum(axis=1))
        reenter = np.flatnonzero(d_obs[1:] < obstacle.radius)
        if reenter.size:
            pos = pos[:reenter[0] + 1]
        for recv in receivers:
            dr = np.sqrt(((pos - recv) ** 2).sum(axis=1))
            ci = _capture_index(dr, dr < capture_radius)
            if ci is None:
                continue
            t_k = tau + float(leg.times[ci])
            st = leg.states[ci]
            g_phi, g_theta = flip_angles(st[3], st[4])
            datapoints.append(DataPoint(
                float(transmitter[0]), float(transmitter[1]), float(transmitter[2]),
                float(recv[0]), float(recv[1]), float(recv[2]),
                float(phi0), float(theta0), t_k, float(xi), int(interval_index)))
            truths.append(GroundTruth(
                k, float(p_hit[0]), float(p_hit[1]), float(p_hit[2]), float(tau),
                float(g_phi), float(g_theta), int(interval_index)))
            k += 1
    return datapoints, truths


def aimed_launch_angles(origin, target_center, target_radius,
                        fraction=0.8, rings=3, spokes=8):
    """Launch angles covering the cone a sphere subtends from ``origin``.

    Returns the central ray plus ``rings`` concentric rings of ``spokes``
    directions each, filling ``fraction`` of the subtended half-angle. With a
    straight-ray medium every returned direction intersects the sphere; in a
    refracting medium the margin left by ``fraction < 1`` absorbs bending.

    Parameters
    ----------
    origin : array_like, shape (3,)
        Launch point.
    target_center : array_like, shape (3,)
        Sphere center to aim at.
    target_radius : float
        Sphere radius, must be positive and smaller than the distance
        to ``origin``.
    fraction : float, optional
        Portion of the subtended half-angle to fill, in (0, 1].
    rings, spokes : int, optional
        Angular resolution of the cone filling.

    Returns
    -------
    ndarray, shape (1 + rings * spokes, 2)
        Rows of (phi, theta) launch angles.
    """
    origin = np.asarray(origin, dtype=float)
    center = np.asarray(target_center, dtype=float)
    axis = center - origin
    dist = float(np.sqrt((axis * axis).sum()))
    if not target_radius > 0.0:
        raise ValueError("target_radius must be positive")
    if dist <= target_radius:
        raise ValueError("origin lies inside the target sphere")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    if rings < 0 or (rings > 0 and spokes < 1):
        raise ValueError("rings must be >= 0 and spokes >= 1")
    u = axis / dist
    helper = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(u, helper)
    e1 = e1 / np.sqrt((e1 * e1).sum())
    e2 = np.cross(u, e1)
    alpha_max = fraction * np.arcsin(target_radius / dist)
    dirs = [u]
    for r in range(1, rings + 1):
        rho = alpha_max * r / rings
        for s in range(spokes):
            psi = 2.0 * np.pi * s / spokes
            dirs.append(np.cos(rho) * u
                        + np.sin(rho) * (np.cos(psi) * e1 + np.sin(psi) * e2))
    pairs = np.empty((len(dirs), 2))
    for i, d in enumerate(dirs):
        pairs[i] = angles_from_direction(d)
    # vertical aims land on the polar singularity; nudge inside the valid band
    pairs[:, 0] = np.clip(pairs[:, 0], 1e-6, np.pi - 1e-6)
    return pairs
