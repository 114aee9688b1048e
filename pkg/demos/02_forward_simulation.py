"""
Simulating broken rays off a moving obstacle
============================================

A transmitter fans rays at a spherical obstacle; each ray reflects once and
whichever receivers it then sweeps past record a measurement. The obstacle
drifts between sampling intervals, so the same launch fan produces different
reflection points over time.
"""

import numpy as np

from brokenray import (ConstantField, DomainBound, ObstacleTrajectory,
                       aimed_launch_angles, simulate_broken_rays)

field = ConstantField(1.0)
domain = DomainBound((0.0, 0.0, 0.0), 12.0)

# the obstacle slides from (3, 1, 0.3) toward (2.2, 2.2, -0.2) over 5 s;
# within each sampling interval it is frozen at its midpoint position
obstacle = ObstacleTrajectory(
    radius=0.6,
    waypoints=((0.0, 3.0, 1.0, 0.3), (5.0, 2.2, 2.2, -0.2)),
    intervals=((0.0, 2.5), (2.5, 5.0)))

transmitter = (0.0, 0.0, 0.0)
receivers = np.array([
    [0.0, 0.0, 0.0],
    [1.5, 0.0, 0.5],
    [0.0, 2.0, -0.5],
    [-1.0, 1.0, 0.0],
])

for interval in range(2):
    center = obstacle.frozen_center(interval)
    # a cone of launch directions covering ~70% of the obstacle's disc
    pairs = aimed_launch_angles(transmitter, center, obstacle.radius,
                                fraction=0.7, rings=3, spokes=8)
    datapoints, truths = simulate_broken_rays(
        field, domain, obstacle, interval, transmitter, receivers, pairs,
        max_time=12.0, n_steps=1500, capture_radius=0.15)
    print(f"interval {interval}: obstacle at {np.round(center, 3)}, "
          f"{len(pairs)} launches -> {len(datapoints)} measurements")
    for dp, gt in zip(datapoints[:3], truths[:3]):
        print(f"  t = {dp.t:6.3f} s  reflection at "
              f"({gt.px:6.3f}, {gt.py:6.3f}, {gt.pz:6.3f})  "
              f"first leg {gt.tau:5.3f} s")

# each measurement row is (transmitter, receiver, launch angles, total time,
# frequency, interval); the reflection point itself is NOT in the row: that
# is what reconstruction recovers
dp = datapoints[0]
print("\none raw measurement row:")
print(f"  launch ({dp.phi:.3f}, {dp.theta:.3f}) rad, "
      f"receiver ({dp.xr:.2f}, {dp.yr:.2f}, {dp.zr:.2f}), "
      f"time of flight {dp.t:.4f} s, carrier {dp.xi:.0f} Hz")
