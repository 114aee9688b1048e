"""Obstacle tracking and one-hop reflective routing built on solved rows.

Each accepted reflection solution doubles as a routing fact: launching a ray
from the receiver at the solution's receiver angles reaches the reflection
point, so those two angles are a complete one-hop address for the obstacle.
This module aggregates solutions into per-interval trajectory estimates,
turns solutions into addresses, widens an address into a bundle of nearby
parallel rays for redundancy, and derives how often a tracked address needs
refreshing from the involved speeds.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, angles_from_direction, direction_from_angles
from .reconstruct import NoSolution, ReflectionSolution


class InvalidSolutionError(ValueError):
    """A routing operation was asked to use a failed or malformed solution."""


@dataclass(frozen=True)
class IhopAddress:
    """One-hop reflective address: receiver-side launch angles ``(phi, theta)``."""

    phi: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi))
        object.__setattr__(self, "theta", float(self.theta))
        if not 0.0 < self.phi < np.pi:
            raise InvalidSolutionError("address phi must lie in (0, pi)")
        if not 0.0 <= self.theta < TWO_PI:
            raise InvalidSolutionError("address theta must lie in [0, 2*pi)")


@dataclass(frozen=True)
class IntervalEstimate:
    """Aggregate of the reflection points reconstructed in one interval.

    ``gap`` intervals contributed no solutions; their centroid is None.
    ``radius`` is the largest centroid-to-point distance (0 for one point).
    """

    interval: int
    count: int
    centroid: tuple | None
    radius: float

    @property
    def gap(self):
        return self.count == 0


@dataclass(frozen=True)
class TrajectoryEstimate:
    """Per-interval obstacle position estimates, ordered by interval index."""

    intervals: tuple

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def centroids(self):
        """Array of shape (n, 3) with NaN rows for gap intervals."""
        out = np.full((len(self.intervals), 3), np.nan)
        for i, est in enumerate(self.intervals):
            if est.centroid is not None:
                out[i] = est.centroid
        return out

    def drifts(self, interval_midtimes):
        """Finite-difference velocities between consecutive non-gap intervals.

        Returns a list of ``(i, j, velocity)`` for neighbor pairs where both
        intervals have a centroid.
        """
        mids = np.asarray(interval_midtimes, dtype=float)
        if mids.shape[0] != len(self.intervals):
            raise ValueError("one midpoint time per interval is required")
        cents = self.centroids()
        out = []
        for i in range(len(self.intervals) - 1):
            j = i + 1
            if np.isnan(cents[i]).any() or np.isnan(cents[j]).any():
                continue
            dt = mids[j] - mids[i]
            if not dt > 0.0:
                raise ValueError("interval midpoint times must increase")
            out.append((i, j, (cents[j] - cents[i]) / dt))
        return out


def build_trajectory(solutions_by_interval, n_intervals=None):
    """Aggregate solved reflection points into a trajectory estimate.

    Parameters
    ----------
    solutions_by_interval : mapping int -> iterable of ReflectionSolution
        Failed rows must be filtered out by the caller (``NoSolution``
        entries raise). Interval indices must be non-negative.
    n_intervals : int, optional
        Total interval count; defaults to ``max(keys) + 1``. Intervals with
        no solutions are flagged as gaps, never dropped.

    Within an interval the result is independent of solution order: points
    are canonically sorted before any accumulation.
    """
    grouped = {}
    for interval, sols in solutions_by_interval.items():
        interval = int(interval)
        if interval < 0:
            raise ValueError("interval indices must be non-negative")
        pts = []
        for sol in sols:
            if isinstance(sol, NoSolution):
                raise InvalidSolutionError("trajectory input must be solved rows only")
            try:
                pts.append((float(sol.px), float(sol.py), float(sol.pz)))
            except (AttributeError, TypeError):
                raise InvalidSolutionError(
                    "trajectory input must expose px, py, pz") from None
        grouped[interval] = pts
    if n_intervals is None:
        n_intervals = (max(grouped) + 1) if grouped else 0

    estimates = []
    for i in range(n_intervals):
        pts = grouped.get(i, [])
        if not pts:
            estimates.append(IntervalEstimate(i, 0, None, 0.0))
            continue
        arr = np.array(pts, dtype=float)
        # canonical order makes the float sums permutation-invariant
        order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0]))
        arr = arr[order]
        centroid = arr.mean(axis=0)
        radius = float(np.sqrt(((arr - centroid) ** 2).sum(axis=1)).max())
        estimates.append(IntervalEstimate(
            i, arr.shape[0], tuple(float(c) for c in centroid), radius))
    return TrajectoryEstimate(tuple(estimates))


def reverse_address(solution):
    """The one-hop address of a solved row: its receiver angles, verbatim.

    Raises
    ------
    InvalidSolutionError
        If given a failed row (:class:`NoSolution`) or anything else that is
        not a :class:`ReflectionSolution` with in-range angles.
    """
    if isinstance(solution, NoSolution):
        raise InvalidSolutionError(
            f"cannot address a failed row ({solution.reason.value})")
    if not isinstance(solution, ReflectionSolution):
        raise InvalidSolutionError("reverse_address requires a ReflectionSolution")
    if not np.isfinite([solution.receiver_phi, solution.receiver_theta]).all():
        raise InvalidSolutionError("solution angles must be finite")
    return IhopAddress(solution.receiver_phi, solution.receiver_theta)


def parallel_ray_bundle(address: IhopAddress, count, spread):
    """A bundle of ``count`` near-parallel addresses around ``address``.

    The first member is the address itself; the remaining ``count - 1`` sit
    on a ring of angular radius ``min(spread, 0.9*phi, 0.9*(pi - phi))``
    around its direction (the clamp keeps every member's polar angle inside
    ``(0, pi)``). Pairwise angular separations never exceed ``2 * spread``.
    """
    count = int(count)
    if count < 1:
        raise ValueError("bundle count must be >= 1")
    if not spread > 0.0:
        raise ValueError("spread must be positive")
    members = [address]
    if count == 1:
        return members

    rho = min(float(spread), 0.9 * address.phi, 0.9 * (np.pi - address.phi))
    u = direction_from_angles(address.phi, address.theta)
    e1 = np.array([
        np.cos(address.phi) * np.cos(address.theta),
        np.cos(address.phi) * np.sin(address.theta),
        -np.sin(address.phi),
    ])
    e2 = np.array([-np.sin(address.theta), np.cos(address.theta), 0.0])
    for i in range(count - 1):
        psi = TWO_PI * i / (count - 1)
        v = np.cos(rho) * u + np.sin(rho) * (np.cos(psi) * e1 + np.sin(psi) * e2)
        phi, theta = angles_from_direction(v)
        members.append(IhopAddress(float(phi), float(theta)))
    return members


def select_optimal(datapoints, results):
    """Index of the fastest usable path: minimal total time among solved rows.

    ``datapoints`` and ``results`` are parallel sequences; returns None when
    nothing solved. Ties keep the earliest row.
    """
    best = None
    best_t = None
    for i, (dp, res) in enumerate(zip(datapoints, results)):
        if not isinstance(res, ReflectionSolution):
            continue
        if best_t is None or dp.t < best_t:
            best, best_t = i, dp.t
    return best


def control_message_interval(host_speed, obstacle_speed, tolerance, *,
                             max_interval=3600.0):
    """Refresh period for a tracked address, from a worst-case drift model.

    The address stays valid while relative motion stays within ``tolerance``
    of where it was resolved; both endpoints can contribute speed, so the
    period is ``tolerance / (host_speed + obstacle_speed)``, with a small
    velocity floor for the all-static case and a cap at ``max_interval``.
    """
    if host_speed < 0.0 or obstacle_speed < 0.0:
        raise ValueError("speeds must be non-negative")
    if not tolerance > 0.0:
        raise ValueError("tolerance must be positive")
    if not max_interval > 0.0:
        raise ValueError("max_interval must be positive")
    return min(tolerance / (host_speed + obstacle_speed + 1e-12), max_interval)
