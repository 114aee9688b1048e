"""Speed-of-sound fields ``c(x, y, z)`` and their spatial gradients.

Three closed-form field families are provided. Each exposes ``speed`` and
``gradient``, both vectorized over the leading axes of the input points,
so a single call can evaluate an entire ray path or a batch of rays.

Speeds must be strictly positive wherever a ray is traced. ``speed`` raises
:class:`NonPositiveSpeedError` if any queried point violates that; use
:func:`speed_extrema` to validate a field against a whole domain up front.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .geometry import DomainBound


class NonPositiveSpeedError(RuntimeError):
    """Raised when a field evaluates to a non-positive speed."""


_ZERO3 = np.zeros(3)
_ZERO3.flags.writeable = False


def _check_positive(c):
    bad = ~(np.asarray(c) > 0.0)
    if np.any(bad):
        raise NonPositiveSpeedError("speed is not strictly positive at a queried point")


@dataclass(frozen=True)
class ConstantField:
    """Uniform medium: ``c(p) = c0``.

    Parameters
    ----------
    c0 : float
        Speed everywhere, must be positive.
    """

    c0: float

    def __post_init__(self):
        object.__setattr__(self, "c0", float(self.c0))
        if not self.c0 > 0.0:
            raise NonPositiveSpeedError("constant speed must be positive")

    def _c(self, points):
        p = np.asarray(points, dtype=float)
        return np.full(p.shape[:-1], self.c0)

    def speed(self, points):
        """Speed at ``points`` with shape ``(..., 3)``; returns shape ``(...)``."""
        return self._c(points)

    def gradient(self, points):
        """Spatial gradient of the speed; zero everywhere for this field."""
        p = np.asarray(points, dtype=float)
        return np.broadcast_to(_ZERO3, p.shape)


@dataclass(frozen=True)
class LinearAffineField:
    """Affine medium: ``c(p) = ax*x + ay*y + az*z + c0``.

    The gradient ``(ax, ay, az)`` is constant, which makes this family the
    standard analytic benchmark: along a straight characteristic the speed
    grows linearly and closed-form path solutions exist.
    """

    ax: float
    ay: float
    az: float
    c0: float

    def __post_init__(self):
        for name in ("ax", "ay", "az", "c0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        g = np.array([self.ax, self.ay, self.az])
        g.flags.writeable = False
        object.__setattr__(self, "_grad", g)

    def _c(self, points):
        p = np.asarray(points, dtype=float)
        return p[..., 0] * self.ax + p[..., 1] * self.ay + p[..., 2] * self.az + self.c0

    def speed(self, points):
        """Speed at ``points``; raises :class:`NonPositiveSpeedError` if any c <= 0."""
        c = self._c(points)
        _check_positive(c)
        return c

    def gradient(self, points):
        """Constant gradient broadcast to the shape of ``points``."""
        p = np.asarray(points, dtype=float)
        return np.broadcast_to(self._grad, p.shape)


@dataclass(frozen=True)
class RadialQuadraticField:
    """Radially quadratic medium: ``c(p) = base + coeff * |p - center|**2``."""

    center: tuple
    base: float
    coeff: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "base", float(self.base))
        object.__setattr__(self, "coeff", float(self.coeff))
        carr = np.array(center)
        carr.flags.writeable = False
        object.__setattr__(self, "_center", carr)
        if not self.base > 0.0:
            raise NonPositiveSpeedError("base speed must be positive")

    def _c(self, points):
        p = np.asarray(points, dtype=float)
        d2 = ((p - self._center) ** 2).sum(axis=-1)
        return self.base + self.coeff * d2

    def speed(self, points):
        """Speed at ``points``; raises :class:`NonPositiveSpeedError` if any c <= 0."""
        c = self._c(points)
        _check_positive(c)
        return c

    def gradient(self, points):
        """Gradient ``2 * coeff * (p - center)``."""
        p = np.asarray(points, dtype=float)
        return (2.0 * self.coeff) * (p - self._center)


SpeedField = Union[ConstantField, LinearAffineField, RadialQuadraticField]


def slowness(field, points):
    """Reciprocal speed ``1 / c`` at ``points``; same shape rules as ``speed``."""
    return 1.0 / field.speed(points)


def speed_extrema(field, domain: DomainBound):
    """Exact ``(min, max)`` of the speed over a ball domain.

    Closed form per field family; used to validate positivity over a whole
    domain and to derive speed-scaled tolerances.
    """
    if isinstance(field, ConstantField):
        return field.c0, field.c0
    if isinstance(field, LinearAffineField):
        g = np.array([field.ax, field.ay, field.az])
        gn = float(np.sqrt((g * g).sum()))
        cc = float(field._c(domain.center_array))
        return cc - gn * domain.radius, cc + gn * domain.radius
    if isinstance(field, RadialQuadraticField):
        dist = float(np.sqrt(((domain.center_array - np.array(field.center)) ** 2).sum()))
        dmin = max(0.0, dist - domain.radius)
        dmax = dist + domain.radius
        lo = field.base + field.coeff * dmin * dmin
        hi = field.base + field.coeff * dmax * dmax
        return (min(lo, hi), max(lo, hi))
    raise TypeError(f"unknown speed field type: {type(field)!r}")


def max_speed(field, domain: DomainBound):
    """Largest speed attained anywhere in ``domain``."""
    return speed_extrema(field, domain)[1]
