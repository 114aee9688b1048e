"""Broken-ray simulation, reflection-point reconstruction, and tracking.

The package models rays in a medium with a smooth positive speed field
``c(x, y, z)``. Rays bend according to the gradient of ``c``; a ray that
reflects specularly off a moving spherical obstacle forms a broken ray whose
total travel time is measured between a transmitter and a receiver. From
many such measurements the reflection points, and from them the obstacle
trajectory, are recovered by a discretized two-leg search.

Quick example, one synthetic measurement and its reconstruction::

    import numpy as np
    import brokenray as br

    field = br.ConstantField(1.0)
    domain = br.DomainBound((0.0, 0.0, 0.0), 10.0)
    dp = br.DataPoint(0.0, 0.0, 0.0, 2.0, 0.0, 0.0,
                      np.pi / 2, np.pi / 4, 2.0 * np.sqrt(2.0), 4e4, 0)
    sol = br.reconstruct_point(dp, field, domain,
                               br.SearchParams(n_r=200, theta_steps=64))
    print(sol.point, sol.tau)

The :mod:`brokenray.cli` module exposes the same pipeline as the
``brokenray`` command with ``simulate``, ``reconstruct``, ``track``, and
``table1`` subcommands.
"""
from .geometry import (DomainBound, angles_from_direction,
                       direction_from_angles, flip_angles)
from .speedfield import (ConstantField, LinearAffineField,
                         NonPositiveSpeedError, RadialQuadraticField,
                         max_speed, slowness, speed_extrema)
from .raytrace import (ExitStatus, Integrator, PolarSingularityError, RayPath,
                       RayState, derivative, step, trace,
                       travel_time_integral)
from .scene import (DataPoint, GrazingIncidenceError, GroundTruth,
                    ObstacleTrajectory, aimed_launch_angles, first_hit,
                    simulate_broken_rays, specular_reflect)
from .reconstruct import (NoSolution, NoSolutionReason, ReceiverRayCache,
                          ReflectionSolution, SearchParams, SearchStats,
                          angle_grid, build_receiver_cache,
                          reconstruct_interval, reconstruct_point,
                          reconstruct_point_bruteforce,
                          reconstruct_point_cached, verify_solution)
from .routing import (IhopAddress, IntervalEstimate, InvalidSolutionError,
                      TrajectoryEstimate, build_trajectory,
                      control_message_interval, parallel_ray_bundle,
                      reverse_address, select_optimal)
from .scenario import LaunchSpec, Scenario, ScenarioError, load_scenario
from .fileio import (FormatError, SolutionRow, read_datapoints,
                     read_groundtruth, read_solutions, read_trajectory,
                     write_datapoints, write_groundtruth, write_solutions,
                     write_trajectory)

__version__ = "0.1.0"

__all__ = [
    "DomainBound", "angles_from_direction", "direction_from_angles",
    "flip_angles",
    "ConstantField", "LinearAffineField", "RadialQuadraticField",
    "NonPositiveSpeedError", "max_speed", "slowness", "speed_extrema",
    "ExitStatus", "Integrator", "PolarSingularityError", "RayPath",
    "RayState", "derivative", "step", "trace", "travel_time_integral",
    "DataPoint", "GrazingIncidenceError", "GroundTruth", "ObstacleTrajectory",
    "aimed_launch_angles", "first_hit", "simulate_broken_rays",
    "specular_reflect",
    "NoSolution", "NoSolutionReason", "ReceiverRayCache", "ReflectionSolution",
    "SearchParams", "SearchStats", "angle_grid", "build_receiver_cache",
    "reconstruct_interval", "reconstruct_point",
    "reconstruct_point_bruteforce", "reconstruct_point_cached",
    "verify_solution",
    "IhopAddress", "IntervalEstimate", "InvalidSolutionError",
    "TrajectoryEstimate", "build_trajectory", "control_message_interval",
    "parallel_ray_bundle", "reverse_address", "select_optimal",
    "LaunchSpec", "Scenario", "ScenarioError", "load_scenario",
    "FormatError", "SolutionRow", "read_datapoints", "read_groundtruth",
    "read_solutions", "read_trajectory", "write_datapoints",
    "write_groundtruth", "write_solutions", "write_trajectory",
    "__version__",
]
