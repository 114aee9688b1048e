"""Command line pipeline.

Four subcommands cover the full workflow::

    brokenray simulate SCENARIO      measurement rows + ground truth
    brokenray reconstruct SCENARIO   reflection points from measurements
    brokenray track SCENARIO         per-interval trajectory estimate
    brokenray table1                 diagonal-field benchmark table

Progress and summaries go to stderr; the CSV files (and the benchmark table
on stdout) are the product and are byte-identical for identical inputs,
independent of ``--threads``. Shared flags can also be set through
``BROKENRAY_<NAME>`` environment variables (e.g. ``BROKENRAY_THREADS=4``);
explicit flags win over the environment, which wins over the scenario file.

Exit codes: 0 success, 1 runtime failure (numerical or I/O during
processing), 2 invalid input (scenario, CSV, or flag validation).
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from . import fileio
from .fileio import FormatError
from .geometry import DomainBound
from .raytrace import Integrator
from .reconstruct import (NoSolution, ReflectionSolution, SearchParams,
                          SearchStats, reconstruct_point_cached,
                          reconstruct_interval)
from .routing import build_trajectory
from .scenario import ScenarioError, load_scenario
from .scene import DataPoint, simulate_broken_rays
from .speedfield import LinearAffineField

_ENV_PREFIX = "BROKENRAY_"


def _env_value(name, cast):
    raw = os.environ.get(_ENV_PREFIX + name)
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError:
        raise ValueError(f"invalid {_ENV_PREFIX}{name}={raw!r}") from None


def _cast_variant(raw):
    if raw not in ("brute", "cached"):
        raise ValueError(raw)
    return raw


def _cast_integrator(raw):
    if raw not in ("euler", "rk4"):
        raise ValueError(raw)
    return raw


_ENV_CASTS = {
    "variant": ("VARIANT", _cast_variant),
    "threads": ("THREADS", int),
    "n_r": ("NR", int),
    "phi_steps": ("PHI_STEPS", int),
    "theta_steps": ("THETA_STEPS", int),
    "eps1": ("EPS1", float),
    "eps2": ("EPS2", float),
    "integrator": ("INTEGRATOR", _cast_integrator),
    "seed": ("SEED", int),
}


def _apply_env(args):
    for attr, (name, cast) in _ENV_CASTS.items():
        if getattr(args, attr, None) is None:
            value = _env_value(name, cast)
            if value is not None:
                setattr(args, attr, value)


def _add_common(p):
    p.add_argument("--variant", choices=("brute", "cached"), default=None,
                   help="search variant (default: cached)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads, 0 or default = one per CPU")
    p.add_argument("--nr", dest="n_r", type=int, default=None,
                   help="time discretization steps per measurement")
    p.add_argument("--phi-steps", type=int, default=None,
                   help="polar cells of the receiver angle grid")
    p.add_argument("--theta-steps", type=int, default=None,
                   help="azimuthal cells of the receiver angle grid")
    p.add_argument("--eps1", type=float, default=None,
                   help="match distance tolerance (default: 2*c_max*h)")
    p.add_argument("--eps2", type=float, default=None,
                   help="total-time tolerance (default: 2*h)")
    p.add_argument("--integrator", choices=("euler", "rk4"), default=None,
                   help="integration scheme override")
    p.add_argument("--seed", type=int, default=None,
                   help="seed for randomized helpers (pipeline commands are "
                        "deterministic; accepted everywhere for uniformity)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brokenray",
        description="Broken-ray simulation, reconstruction, and tracking.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate measurement rows from a "
                                        "scenario")
    p.add_argument("scenario", help="scenario TOML file")
    p.add_argument("--out-datapoints", default=None, metavar="FILE")
    p.add_argument("--out-groundtruth", default=None, metavar="FILE")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="recover reflection points from "
                                           "measurement rows")
    p.add_argument("scenario", help="scenario TOML file")
    p.add_argument("--datapoints", default=None, metavar="FILE")
    p.add_argument("--out", default=None, metavar="FILE",
                   help="solutions CSV to write")
    _add_common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("track", help="aggregate solutions into a trajectory "
                                     "estimate")
    p.add_argument("scenario", help="scenario TOML file")
    p.add_argument("--datapoints", default=None, metavar="FILE")
    p.add_argument("--solutions", default=None, metavar="FILE")
    p.add_argument("--out", default=None, metavar="FILE",
                   help="trajectory CSV to write")
    _add_common(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("table1", help="diagonal-field benchmark: recovered "
                                      "x against the analytic value")
    _add_common(p)
    p.set_defaults(func=cmd_table1)

    return parser


def _out_path(flag_value, scenario, key, fallback):
    if flag_value is not None:
        return flag_value
    return scenario.outputs.get(key, fallback)


def _search_overrides(scenario, args):
    params = scenario.search
    updates = {}
    if args.n_r is not None:
        updates["n_r"] = args.n_r
    if args.phi_steps is not None:
        updates["phi_steps"] = args.phi_steps
    if args.theta_steps is not None:
        updates["theta_steps"] = args.theta_steps
    if args.eps1 is not None:
        updates["eps1"] = args.eps1
    if args.eps2 is not None:
        updates["eps2"] = args.eps2
    if args.integrator is not None:
        updates["integrator"] = Integrator(args.integrator)
    if updates:
        params = dataclasses.replace(params, **updates)
    params.validate()
    return params


def _threads(args):
    threads = args.threads if args.threads is not None else 0
    if threads < 0:
        raise ValueError("--threads must be >= 0")
    return threads if threads > 0 else (os.cpu_count() or 1)


def cmd_simulate(args):
    sc = load_scenario(args.scenario)
    integrator = (Integrator(args.integrator) if args.integrator is not None
                  else sc.integrator)
    receivers = np.array(sc.receivers, dtype=float)
    datapoints = []
    truths = []
    t0 = time.perf_counter()
    for i in range(sc.n_intervals):
        dps, gts = simulate_broken_rays(
            sc.field, sc.domain, sc.obstacle, i, sc.transmitter, receivers,
            sc.launch_angles(i), sc.max_time, sc.n_steps,
            integrator=integrator, capture_radius=sc.capture_radius, xi=sc.xi,
            k_offset=len(datapoints))
        datapoints.extend(dps)
        truths.extend(gts)
    dp_path = _out_path(args.out_datapoints, sc, "datapoints", "datapoints.csv")
    gt_path = _out_path(args.out_groundtruth, sc, "groundtruth",
                        "groundtruth.csv")
    fileio.write_datapoints(dp_path, datapoints)
    fileio.write_groundtruth(gt_path, truths)
    print(f"simulate: {len(datapoints)} measurements over {sc.n_intervals} "
          f"intervals in {time.perf_counter() - t0:.2f} s -> {dp_path}, "
          f"{gt_path}", file=sys.stderr)
    return 0


def cmd_reconstruct(args):
    sc = load_scenario(args.scenario)
    params = _search_overrides(sc, args)
    variant = args.variant if args.variant is not None else "cached"
    threads = _threads(args)
    dp_path = _out_path(args.datapoints, sc, "datapoints", "datapoints.csv")
    datapoints = fileio.read_datapoints(dp_path)
    stats = SearchStats()
    t0 = time.perf_counter()
    results = reconstruct_interval(datapoints, sc.field, sc.domain, params,
                                   variant=variant, threads=threads,
                                   stats=stats)
    out = _out_path(args.out, sc, "solutions", "solutions.csv")
    fileio.write_solutions(out, results)
    solved = sum(isinstance(r, ReflectionSolution) for r in results)
    print(f"reconstruct: {solved}/{len(results)} rows solved "
          f"(variant={variant}, threads={threads}, work={stats.work}) in "
          f"{time.perf_counter() - t0:.2f} s -> {out}", file=sys.stderr)
    return 0


def cmd_track(args):
    sc = load_scenario(args.scenario)
    dp_path = _out_path(args.datapoints, sc, "datapoints", "datapoints.csv")
    sol_path = _out_path(args.solutions, sc, "solutions", "solutions.csv")
    datapoints = fileio.read_datapoints(dp_path)
    rows = fileio.read_solutions(sol_path)
    if not rows:
        raise FormatError(f"{sol_path}: no solution rows to track")
    if len(rows) != len(datapoints):
        raise FormatError(f"{sol_path}: {len(rows)} rows do not match "
                          f"{len(datapoints)} measurement rows in {dp_path}")
    grouped = {i: [] for i in range(sc.n_intervals)}
    for k, (dp, row) in enumerate(zip(datapoints, rows)):
        if row.k != k:
            raise FormatError(f"{sol_path} line {k + 2}: row index k={row.k}, "
                              f"expected {k}")
        if dp.interval >= sc.n_intervals:
            raise FormatError(f"{dp_path}: interval {dp.interval} outside the "
                              f"scenario's {sc.n_intervals} intervals")
        if row.solved:
            grouped[dp.interval].append(row)
    estimate = build_trajectory(grouped, n_intervals=sc.n_intervals)
    out = _out_path(args.out, sc, "trajectory", "trajectory.csv")
    fileio.write_trajectory(out, estimate)
    solved = sum(len(v) for v in grouped.values())
    gaps = sum(1 for e in estimate.intervals if e.gap)
    print(f"track: {solved} solved rows over {sc.n_intervals} intervals "
          f"({gaps} gaps) -> {out}", file=sys.stderr)
    return 0


_TABLE1_TIMES = (2.0, 4.0, 8.0)
_TABLE1_REFERENCE = (1.55, 7.89, 138.15)
_SQRT2 = float(np.sqrt(2.0))


def run_table1(n_r=10000, integrators=(Integrator.EULER, Integrator.RK4)):
    """Diagonal-field benchmark behind the ``table1`` subcommand.

    A monostatic instrument at the origin fires along the diagonal of the
    field ``c = x + y + 1``; each recovered reflection point lies at ray time
    ``tau = t/2`` where the analytic diagonal coordinate is
    ``x(tau) = (exp(sqrt(2) tau) - 1) / 2``. Returns one dict per total time
    with the recovered ``x`` (and ``<scheme>_y``) per integrator, the
    benchmark's reference value, and the analytic value.
    """
    field = LinearAffineField(1.0, 1.0, 0.0, 1.0)
    domain = DomainBound((0.0, 0.0, 0.0), 300.0)
    rows = []
    for t_total, reference in zip(_TABLE1_TIMES, _TABLE1_REFERENCE):
        h = t_total / n_r
        dp = DataPoint(0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                       np.pi / 2.0, np.pi / 4.0, t_total, 40000.0, 0)
        row = {"t": t_total, "tau": t_total / 2.0, "reference": reference,
               "analytic": (np.exp(_SQRT2 * t_total / 2.0) - 1.0) / 2.0}
        for integ in integrators:
            params = SearchParams(n_r=n_r, phi_steps=1, theta_steps=8,
                                  eps1=0.4 * h, eps2=0.5 * h, integrator=integ)
            sol = reconstruct_point_cached(dp, field, domain, params)
            if not isinstance(sol, ReflectionSolution):
                raise RuntimeError(f"benchmark row t={t_total} failed: "
                                   f"{sol.reason.value}")
            row[integ.value] = sol.px
            row[integ.value + "_y"] = sol.py
        rows.append(row)
    return rows


def cmd_table1(args):
    n_r = args.n_r if args.n_r is not None else 10000
    if n_r < 2:
        raise ValueError("--nr must be >= 2 for the benchmark")
    if args.integrator is not None:
        integrators = (Integrator(args.integrator),)
    else:
        integrators = (Integrator.EULER, Integrator.RK4)
    t0 = time.perf_counter()
    rows = run_table1(n_r=n_r, integrators=integrators)
    print(f"{'t_total':>7s} {'tau':>4s} {'scheme':>6s} {'xp':>14s} "
          f"{'yp':>14s} {'reference':>9s} {'analytic':>14s} {'rel_err':>8s}")
    for row in rows:
        for integ in integrators:
            name = integ.value
            rel = abs(row[name] - row["analytic"]) / row["analytic"]
            print(f"{row['t']:7.3g} {row['tau']:4.3g} {name:>6s} "
                  f"{row[name]:>14.9g} {row[name + '_y']:>14.9g} "
                  f"{row['reference']:>9g} {row['analytic']:>14.9g} "
                  f"{100 * rel:7.3f}%")
    print(f"table1: n_r={n_r}, {len(rows) * len(integrators)} "
          f"reconstructions in {time.perf_counter() - t0:.2f} s",
          file=sys.stderr)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_env(args)
        return args.func(args)
    except (ScenarioError, FormatError) as e:
        print(f"brokenray: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"brokenray: invalid input: {e}", file=sys.stderr)
        return 2
    except (RuntimeError, ArithmeticError, OSError) as e:
        print(f"brokenray: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
