"""Fixed-step ray tracing through a variable speed-of-sound medium.

A ray is evolved in the 5-dimensional state ``(x, y, z, phi, theta)`` by the
coupled system

    dx/dt     = c * sin(phi) * cos(theta)
    dy/dt     = c * sin(phi) * sin(theta)
    dz/dt     = c * cos(phi)
    dphi/dt   = -cos(phi) * (c_x * cos(theta) + c_y * sin(theta)) + c_z * sin(phi)
    dtheta/dt = (c_x * sin(theta) - c_y * cos(theta)) / sin(phi)

where ``c`` is the local speed and ``(c_x, c_y, c_z)`` its gradient. The
parameter is travel time, so the spatial velocity always has magnitude ``c``.

Integration uses a fixed step on purpose: the reconstruction search matches
points of different rays by their step index, which requires every ray of a
scenario to live on the same time grid. Two steppers are provided, first
order (euler) and classic fourth order (rk4).

The azimuth is renormalized into ``[0, 2*pi)`` after every full step. The
polar parameterization degenerates near ``sin(phi) = 0``; states within
``SIN_PHI_MIN`` of a pole are rejected rather than reparameterized, and
batch callers skip the affected rays.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import TWO_PI, DomainBound, direction_from_angles
from .speedfield import NonPositiveSpeedError

SIN_PHI_MIN = 1e-9


class PolarSingularityError(RuntimeError):
    """State too close to a pole for the (phi, theta) parameterization."""


class Integrator(str, enum.Enum):
    """Fixed-step integration scheme: first order or classic fourth order."""

    EULER = "euler"
    RK4 = "rk4"


class ExitStatus(enum.Enum):
    COMPLETED = "completed"
    LEFT_DOMAIN = "left_domain"
    SINGULAR = "singular"


@dataclass(frozen=True)
class RayState:
    """Ray sample: position, direction angles, and elapsed travel time."""

    x: float
    y: float
    z: float
    phi: float
    theta: float
    t: float = 0.0

    @property
    def position(self):
        return np.array([self.x, self.y, self.z])

    @property
    def direction(self):
        return direction_from_angles(self.phi, self.theta)

    def as_array(self):
        """State vector ``[x, y, z, phi, theta]`` (time is carried separately)."""
        return np.array([self.x, self.y, self.z, self.phi, self.theta])


@dataclass
class RayPath:
    """Traced ray: one state row per time-grid node actually reached.

    ``states`` has shape ``(m, 5)`` with columns ``x, y, z, phi, theta`` and
    ``times`` the matching elapsed times (``times[0] = 0``). A path is
    truncated without error when it leaves the domain; ``status`` records
    why stepping ended.
    """

    states: np.ndarray
    times: np.ndarray
    step: float
    status: ExitStatus

    @property
    def positions(self):
        return self.states[:, :3]

    @property
    def left_domain(self):
        return self.status is ExitStatus.LEFT_DOMAIN

    def state(self, i):
        x, y, z, phi, theta = self.states[i]
        return RayState(x, y, z, phi, theta, t=float(self.times[i]))

    def __len__(self):
        return self.states.shape[0]


def _derivatives_batch(field, states):
    """Right-hand side for a batch of states, shape ``(m, 5)``.

    Returns ``(deriv, singular, nonpos)``. Rows flagged singular (pole
    proximity) or nonpos (speed <= 0, only reachable outside a validated
    domain) carry unusable derivatives and must be discarded by the caller.
    """
    pos = states[:, :3]
    phi = states[:, 3]
    theta = states[:, 4]
    sp = np.sin(phi)
    cp = np.cos(phi)
    st = np.sin(theta)
    ct = np.cos(theta)

    singular = np.abs(sp) < SIN_PHI_MIN
    c = field._c(pos)
    nonpos = ~(c > 0.0)

    g = field.gradient(pos)
    safe_sp = np.where(singular, 1.0, sp)

    csp = c * sp
    gx_ct = g[:, 0] * ct
    gy_st = g[:, 1] * st
    out = np.empty_like(states)
    out[:, 0] = csp * ct
    out[:, 1] = csp * st
    out[:, 2] = c * cp
    out[:, 3] = -cp * (gx_ct + gy_st) + g[:, 2] * sp
    out[:, 4] = (g[:, 0] * st - g[:, 1] * ct) / safe_sp
    return out, singular, nonpos


def _step_batch(field, states, h, integrator):
    """Advance a batch one step of size ``h``; no freezing, no time handling.

    Returns ``(new_states, singular, nonpos)`` where the flags are the union
    over all stage evaluations. Azimuths of the result are renormalized.
    """
    if integrator is Integrator.EULER:
        k1, sing, nonpos = _derivatives_batch(field, states)
        new = states + h * k1
    elif integrator is Integrator.RK4:
        k1, s1, n1 = _derivatives_batch(field, states)
        k2, s2, n2 = _derivatives_batch(field, states + (0.5 * h) * k1)
        k3, s3, n3 = _derivatives_batch(field, states + (0.5 * h) * k2)
        k4, s4, n4 = _derivatives_batch(field, states + h * k3)
        new = states + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        sing = s1 | s2 | s3 | s4
        nonpos = n1 | n2 | n3 | n4
    else:
        raise ValueError(f"unknown integrator: {integrator!r}")
    new[:, 4] = np.mod(new[:, 4], TWO_PI)
    return new, sing, nonpos


def _raise_flags(singular, nonpos):
    if singular:
        raise PolarSingularityError(
            f"|sin(phi)| < {SIN_PHI_MIN:g}: state too close to a pole"
        )
    if nonpos:
        raise NonPositiveSpeedError("speed is not strictly positive at a queried point")


def derivative(field, state: RayState):
    """Time derivative of a single state.

    Returns
    -------
    ndarray, shape (5,)
        ``(dx, dy, dz, dphi, dtheta) / dt``.

    Raises
    ------
    PolarSingularityError
        If ``|sin(phi)| < SIN_PHI_MIN``.
    NonPositiveSpeedError
        If the field is non-positive at the state's position.
    """
    out, singular, nonpos = _derivatives_batch(field, state.as_array()[None, :])
    _raise_flags(bool(singular[0]), bool(nonpos[0]))
    return out[0]


def step(field, state: RayState, h, integrator=Integrator.RK4, substeps=1):
    """Advance one state by total time ``h`` using ``substeps`` equal pieces."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    hs = h / substeps
    s = state.as_array()[None, :]
    for _ in range(substeps):
        s, sing, nonpos = _step_batch(field, s, hs, integrator)
        _raise_flags(bool(sing[0]), bool(nonpos[0]))
    x, y, z, phi, theta = s[0]
    return RayState(x, y, z, phi, theta, t=state.t + h)


def trace(field, initial: RayState, total_time, n_steps,
          integrator=Integrator.RK4, domain: DomainBound | None = None):
    """Trace a ray for ``total_time`` in ``n_steps`` fixed steps.

    Parameters
    ----------
    field : SpeedField
        Medium to trace through.
    initial : RayState
        Launch state; its ``t`` is ignored, path times start at zero.
    total_time : float
        Requested travel time; the step is ``total_time / n_steps``.
    n_steps : int
        Number of fixed steps, must be >= 1.
    integrator : Integrator
        Stepping scheme.
    domain : DomainBound, optional
        If given, the path is truncated at the last state inside the domain
        and marked ``left_domain``; the first outside state is discarded.

    Returns
    -------
    RayPath

    Raises
    ------
    PolarSingularityError
        If any step carries the state too close to a pole.
    NonPositiveSpeedError
        If the field is evaluated non-positive (possible only outside a
        positivity-validated domain).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if not total_time > 0.0:
        raise ValueError("total_time must be positive")
    h = total_time / n_steps

    s = initial.as_array()[None, :]
    rows = [s[0].copy()]
    times = [0.0]
    t = 0.0
    status = ExitStatus.COMPLETED
    for _ in range(n_steps):
        s_new, sing, nonpos = _step_batch(field, s, h, integrator)
        _raise_flags(bool(sing[0]), bool(nonpos[0]))
        t = t + h
        if domain is not None and not bool(domain.contains(s_new[0, :3])):
            status = ExitStatus.LEFT_DOMAIN
            break
        s = s_new
        rows.append(s[0].copy())
        times.append(t)
    return RayPath(np.array(rows), np.array(times), h, status)


def travel_time_integral(field, path: RayPath):
    """Travel time recovered from the geometry: sum of |segment| / c(midpoint).

    Converges to the elapsed time of the path as the step shrinks; the
    mismatch is a useful integration-quality diagnostic.
    """
    p = path.positions
    if p.shape[0] < 2:
        return 0.0
    seg = p[1:] - p[:-1]
    lengths = np.sqrt((seg * seg).sum(axis=1))
    mid = 0.5 * (p[1:] + p[:-1])
    return float((lengths / field.speed(mid)).sum())
