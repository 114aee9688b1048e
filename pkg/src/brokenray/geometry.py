"""Shared geometric primitives: spherical angle conventions and the domain ball.

A unit direction is parameterized by a polar angle ``phi`` measured from the
+z axis (``phi`` in ``(0, pi)``) and an azimuth ``theta`` measured in the xy
plane from +x toward +y (``theta`` in ``[0, 2*pi)``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def direction_from_angles(phi, theta):
    """Unit direction(s) for polar angle ``phi`` and azimuth ``theta``.

    Accepts scalars or broadcastable arrays; returns shape ``(..., 3)``.
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sp = np.sin(phi)
    return np.stack(
        [sp * np.cos(theta), sp * np.sin(theta), np.cos(phi) * np.ones_like(theta)],
        axis=-1,
    )


def angles_from_direction(v):
    """Inverse of :func:`direction_from_angles` for nonzero vector(s) ``v``.

    Returns ``(phi, theta)`` with ``phi`` in ``[0, pi]`` and ``theta`` in
    ``[0, 2*pi)``. For vectors parallel to the z axis theta is 0 by
    convention.
    """
    v = np.asarray(v, dtype=float)
    n = np.sqrt((v * v).sum(axis=-1))
    if np.any(n == 0.0):
        raise ValueError("zero direction vector has no angles")
    phi = np.arccos(np.clip(v[..., 2] / n, -1.0, 1.0))
    theta = np.mod(np.arctan2(v[..., 1], v[..., 0]), TWO_PI)
    return phi, theta


def flip_angles(phi, theta):
    """Angles of the reversed direction: ``(pi - phi, theta + pi mod 2*pi)``."""
    return np.pi - phi, np.mod(theta + np.pi, TWO_PI)


@dataclass(frozen=True)
class DomainBound:
    """Closed ball that bounds the medium.

    Rays are traced only while they remain inside; every transmitter and
    receiver must lie inside as well.
    """

    center: tuple
    radius: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise ValueError("domain radius must be positive")

    @property
    def center_array(self):
        return np.array(self.center, dtype=float)

    def contains(self, points):
        """Boolean containment test, vectorized over leading axes of ``points``."""
        p = np.asarray(points, dtype=float)
        d2 = ((p - self.center_array) ** 2).sum(axis=-1)
        return d2 <= self.radius * self.radius
