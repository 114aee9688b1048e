"""TOML scenario files: one file describes a complete experiment.

A scenario bundles the domain ball, the speed field, the obstacle trajectory
with its sampling intervals, instrument positions, the launch-angle plan, the
forward-simulation settings, and the search parameters. The same file drives
``simulate``, ``reconstruct``, and ``track``, so every stage of the pipeline
agrees on the medium and geometry.

Sections::

    [domain]      center = [x, y, z], radius
    [field]       kind = "constant" | "linear_affine" | "radial_quadratic", ...
    [obstacle]    radius, waypoints = [[t, x, y, z], ...], intervals = [[t0, t1], ...]
    [instruments] transmitter = [x, y, z], receivers = [[x, y, z], ...],
                  capture_radius (optional, 0 = auto)
    [launch]      kind = "pairs" | "grid" | "aimed", plus kind-specific keys
    [simulation]  max_time, n_steps, integrator, xi
    [search]      n_r, phi_steps, theta_steps, eps1, eps2, integrator
                  (all optional, 0 = default)
    [output]      optional default file names per pipeline stage

Validation failures raise :class:`ScenarioError` with the failing section,
key, and (best effort) source line.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .geometry import DomainBound
from .raytrace import Integrator
from .reconstruct import SearchParams, angle_grid
from .scene import ObstacleTrajectory, aimed_launch_angles
from .speedfield import (ConstantField, LinearAffineField, RadialQuadraticField,
                         speed_extrema)


class ScenarioError(ValueError):
    """A scenario file is structurally or physically invalid."""


_FIELD_KEYS = {
    "constant": {"c0"},
    "linear_affine": {"ax", "ay", "az", "c0"},
    "radial_quadratic": {"center", "base", "coeff"},
}
_LAUNCH_KEYS = {
    "pairs": {"pairs"},
    "grid": {"phi_steps", "theta_steps"},
    "aimed": {"rings", "spokes", "fraction"},
}
_OUTPUT_KEYS = {"datapoints", "groundtruth", "solutions", "trajectory"}


def _line_of(text, section, key=None):
    in_section = False
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if s.startswith("["):
            if key is None and s == f"[{section}]":
                return i
            in_section = s == f"[{section}]"
        elif key is not None and in_section and "=" in s:
            if s.split("=", 1)[0].strip() == key:
                return i
    if key is not None:
        return _line_of(text, section)
    return None


@dataclass(frozen=True)
class LaunchSpec:
    """Launch-angle plan; ``kind`` selects which fields are meaningful."""

    kind: str
    pairs: tuple = ()
    phi_steps: int = 0
    theta_steps: int = 0
    rings: int = 3
    spokes: int = 8
    fraction: float = 0.8


@dataclass(frozen=True)
class Scenario:
    """Validated experiment description loaded from a TOML file."""

    path: str
    domain: DomainBound
    field: object
    obstacle: ObstacleTrajectory
    transmitter: tuple
    receivers: tuple
    capture_radius: float | None
    launch: LaunchSpec
    max_time: float
    n_steps: int
    integrator: Integrator
    xi: float
    search: SearchParams
    outputs: dict

    @property
    def n_intervals(self):
        return len(self.obstacle.intervals)

    def launch_angles(self, interval_index):
        """Launch (phi, theta) pairs for one sampled interval, shape (m, 2)."""
        lp = self.launch
        if lp.kind == "pairs":
            return np.array(lp.pairs, dtype=float).reshape(-1, 2)
        if lp.kind == "grid":
            return angle_grid(lp.phi_steps, lp.theta_steps)
        center = self.obstacle.frozen_center(interval_index)
        return aimed_launch_angles(self.transmitter, center, self.obstacle.radius,
                                   fraction=lp.fraction, rings=lp.rings,
                                   spokes=lp.spokes)


class _Reader:
    """Typed accessors over one parsed TOML table with line-anchored errors."""

    def __init__(self, path, text, data):
        self.path = path
        self.text = text
        self.data = data

    def fail(self, section, key, msg):
        line = _line_of(self.text, section, key)
        where = f" (line {line})" if line else ""
        label = f"[{section}] {key}" if key else f"[{section}]"
        raise ScenarioError(f"{self.path}: {label}: {msg}{where}")

    def section(self, name, required=True):
        tbl = self.data.get(name)
        if tbl is None:
            if required:
                raise ScenarioError(f"{self.path}: missing required section [{name}]")
            return {}
        if not isinstance(tbl, dict):
            self.fail(name, None, "must be a table")
        return tbl

    def check_keys(self, section, tbl, allowed):
        for key in tbl:
            if key not in allowed:
                self.fail(section, key, "unknown key")

    def number(self, section, tbl, key, default=None, positive=False,
               nonnegative=False):
        if key not in tbl:
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        v = tbl[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(section, key, "must be a number")
        v = float(v)
        if not np.isfinite(v):
            self.fail(section, key, "must be finite")
        if positive and not v > 0.0:
            self.fail(section, key, "must be positive")
        if nonnegative and v < 0.0:
            self.fail(section, key, "must be >= 0")
        return v

    def integer(self, section, tbl, key, default=None, minimum=None):
        if key not in tbl:
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        v = tbl[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(section, key, "must be an integer")
        if minimum is not None and v < minimum:
            self.fail(section, key, f"must be >= {minimum}")
        return int(v)

    def string(self, section, tbl, key, choices=None, default=None):
        if key not in tbl:
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        v = tbl[key]
        if not isinstance(v, str):
            self.fail(section, key, "must be a string")
        if choices is not None and v not in choices:
            self.fail(section, key, f"must be one of {sorted(choices)}")
        return v

    def vec3(self, section, tbl, key, default=None):
        if key not in tbl:
            if default is None:
                self.fail(section, key, "missing required key")
            return default
        v = tbl[key]
        if (not isinstance(v, list) or len(v) != 3
                or any(isinstance(x, bool) or not isinstance(x, (int, float))
                       for x in v)):
            self.fail(section, key, "must be a list of 3 numbers")
        return tuple(float(x) for x in v)

    def matrix(self, section, tbl, key, width, allow_empty=False):
        if key not in tbl:
            self.fail(section, key, "missing required key")
        v = tbl[key]
        ok = isinstance(v, list) and (allow_empty or len(v) > 0) and all(
            isinstance(row, list) and len(row) == width
            and all(not isinstance(x, bool) and isinstance(x, (int, float))
                    for x in row)
            for row in v)
        if not ok:
            kind = "list" if allow_empty else "non-empty list"
            self.fail(section, key, f"must be a {kind} of "
                                    f"{width}-number rows")
        return [[float(x) for x in row] for row in v]


def _parse_field(r: _Reader):
    tbl = r.section("field")
    kind = r.string("field", tbl, "kind", choices=set(_FIELD_KEYS))
    r.check_keys("field", tbl, _FIELD_KEYS[kind] | {"kind"})
    if kind == "constant":
        return ConstantField(r.number("field", tbl, "c0", positive=True))
    if kind == "linear_affine":
        return LinearAffineField(r.number("field", tbl, "ax", default=0.0),
                                 r.number("field", tbl, "ay", default=0.0),
                                 r.number("field", tbl, "az", default=0.0),
                                 r.number("field", tbl, "c0"))
    return RadialQuadraticField(r.vec3("field", tbl, "center"),
                                r.number("field", tbl, "base", positive=True),
                                r.number("field", tbl, "coeff"))


def _parse_obstacle(r: _Reader, domain: DomainBound):
    tbl = r.section("obstacle")
    r.check_keys("obstacle", tbl, {"radius", "waypoints", "intervals"})
    radius = r.number("obstacle", tbl, "radius", positive=True)
    waypoints = r.matrix("obstacle", tbl, "waypoints", 4)
    intervals = r.matrix("obstacle", tbl, "intervals", 2)
    try:
        obstacle = ObstacleTrajectory(radius, tuple(map(tuple, waypoints)),
                                      tuple(map(tuple, intervals)))
    except ValueError as e:
        r.fail("obstacle", "waypoints", str(e))
    dc = domain.center_array
    for i in range(len(obstacle.intervals)):
        fc = obstacle.frozen_center(i)
        gap = domain.radius - float(np.sqrt(((fc - dc) ** 2).sum())) - radius
        if gap < 0.0:
            r.fail("obstacle", "intervals",
                   f"obstacle leaves the domain in interval {i}")
    return obstacle


def _parse_launch(r: _Reader):
    tbl = r.section("launch")
    kind = r.string("launch", tbl, "kind", choices=set(_LAUNCH_KEYS))
    r.check_keys("launch", tbl, _LAUNCH_KEYS[kind] | {"kind"})
    if kind == "pairs":
        # an empty fan is legal: simulation then emits no measurements
        rows = r.matrix("launch", tbl, "pairs", 2, allow_empty=True)
        for phi, theta in rows:
            if not 0.0 < phi < np.pi:
                r.fail("launch", "pairs", "phi must lie in (0, pi)")
            if not 0.0 <= theta < 2.0 * np.pi:
                r.fail("launch", "pairs", "theta must lie in [0, 2*pi)")
        return LaunchSpec("pairs", pairs=tuple(map(tuple, rows)))
    if kind == "grid":
        return LaunchSpec("grid",
                          phi_steps=r.integer("launch", tbl, "phi_steps",
                                              minimum=1),
                          theta_steps=r.integer("launch", tbl, "theta_steps",
                                                minimum=1))
    fraction = r.number("launch", tbl, "fraction", default=0.8, positive=True)
    if fraction > 1.0:
        r.fail("launch", "fraction", "must lie in (0, 1]")
    return LaunchSpec("aimed",
                      rings=r.integer("launch", tbl, "rings", default=3,
                                      minimum=1),
                      spokes=r.integer("launch", tbl, "spokes", default=8,
                                       minimum=1),
                      fraction=fraction)


def load_scenario(path):
    """Load, validate, and return a :class:`Scenario`.

    Raises
    ------
    ScenarioError
        On malformed TOML, missing or unknown keys, out-of-range values, or
        physically inconsistent configurations (non-positive speed over the
        domain, instruments or obstacle outside the domain).
    """
    path = str(path)
    try:
        with open(path, "rb") as f:
            raw = f.read()
        data = tomllib.loads(raw.decode("utf-8"))
    except OSError as e:
        raise ScenarioError(f"{path}: cannot read scenario: {e}") from None
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"{path}: invalid TOML: {e}") from None
    text = raw.decode("utf-8")
    r = _Reader(path, text, data)
    known = {"domain", "field", "obstacle", "instruments", "launch",
             "simulation", "search", "output"}
    for name in data:
        if name not in known:
            raise ScenarioError(f"{path}: unknown section [{name}]")

    dom_tbl = r.section("domain")
    r.check_keys("domain", dom_tbl, {"center", "radius"})
    domain = DomainBound(r.vec3("domain", dom_tbl, "center"),
                         r.number("domain", dom_tbl, "radius", positive=True))

    field = _parse_field(r)
    c_min, _ = speed_extrema(field, DomainBound(domain.center,
                                                domain.radius * 1.000001))
    if not c_min > 0.0:
        r.fail("field", "kind",
               f"speed is not positive over the domain (min c = {c_min:.6g})")

    obstacle = _parse_obstacle(r, domain)

    ins_tbl = r.section("instruments")
    r.check_keys("instruments", ins_tbl,
                 {"transmitter", "receivers", "capture_radius"})
    transmitter = r.vec3("instruments", ins_tbl, "transmitter")
    recv_rows = r.matrix("instruments", ins_tbl, "receivers", 3)
    receivers = tuple(map(tuple, recv_rows))
    if not bool(domain.contains(np.array(transmitter))):
        r.fail("instruments", "transmitter", "lies outside the domain")
    for i, rc in enumerate(receivers):
        if not bool(domain.contains(np.array(rc))):
            r.fail("instruments", "receivers",
                   f"receiver {i} lies outside the domain")
    capture = r.number("instruments", ins_tbl, "capture_radius", default=0.0,
                       nonnegative=True)
    capture_radius = capture if capture > 0.0 else None

    launch = _parse_launch(r)
    if launch.kind == "aimed":
        tx = np.array(transmitter)
        for i in range(len(obstacle.intervals)):
            fc = obstacle.frozen_center(i)
            if float(np.sqrt(((fc - tx) ** 2).sum())) <= obstacle.radius:
                r.fail("launch", "kind",
                       f"transmitter inside the obstacle in interval {i}; "
                       f"aimed launches are undefined")

    sim_tbl = r.section("simulation")
    r.check_keys("simulation", sim_tbl,
                 {"max_time", "n_steps", "integrator", "xi"})
    max_time = r.number("simulation", sim_tbl, "max_time", positive=True)
    n_steps = r.integer("simulation", sim_tbl, "n_steps", minimum=1)
    integrator = Integrator(r.string("simulation", sim_tbl, "integrator",
                                     choices={"euler", "rk4"}, default="rk4"))
    xi = r.number("simulation", sim_tbl, "xi", default=40000.0, positive=True)

    search_tbl = r.section("search", required=False)
    r.check_keys("search", search_tbl,
                 {"n_r", "phi_steps", "theta_steps", "eps1", "eps2",
                  "integrator"})
    eps1 = r.number("search", search_tbl, "eps1", default=0.0, nonnegative=True)
    eps2 = r.number("search", search_tbl, "eps2", default=0.0, nonnegative=True)
    search = SearchParams(
        n_r=r.integer("search", search_tbl, "n_r", default=500, minimum=1),
        phi_steps=r.integer("search", search_tbl, "phi_steps", default=64,
                            minimum=1),
        theta_steps=r.integer("search", search_tbl, "theta_steps", default=128,
                              minimum=1),
        eps1=eps1 if eps1 > 0.0 else None,
        eps2=eps2 if eps2 > 0.0 else None,
        integrator=Integrator(r.string("search", search_tbl, "integrator",
                                       choices={"euler", "rk4"},
                                       default="rk4")))

    out_tbl = r.section("output", required=False)
    r.check_keys("output", out_tbl, _OUTPUT_KEYS)
    outputs = {}
    for key in _OUTPUT_KEYS:
        if key in out_tbl:
            outputs[key] = r.string("output", out_tbl, key)

    return Scenario(path=path, domain=domain, field=field, obstacle=obstacle,
                    transmitter=transmitter, receivers=receivers,
                    capture_radius=capture_radius, launch=launch,
                    max_time=max_time, n_steps=n_steps, integrator=integrator,
                    xi=xi, search=search, outputs=outputs)
