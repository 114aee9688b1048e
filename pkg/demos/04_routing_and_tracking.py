"""
Reflective routing and obstacle tracking
========================================

A solved reflection point doubles as a communication relay: its receiver
angles are the one-hop address for sending a message back along the broken
ray. Aggregating solved points per sampling interval tracks the obstacle
itself.
"""

import numpy as np

from brokenray import (ConstantField, DataPoint, DomainBound, SearchParams,
                       build_trajectory, control_message_interval,
                       parallel_ray_bundle, reconstruct_interval,
                       reverse_address)

field = ConstantField(1.0)
domain = DomainBound((0.0, 0.0, 0.0), 10.0)
params = SearchParams(n_r=150, phi_steps=5, theta_steps=8)

# monostatic soundings of an obstacle sitting on the diagonal; the obstacle
# recedes a little in the second interval
diag = np.pi / 4
rows = [
    DataPoint(0, 0, 0, 0, 0, 0, np.pi / 2, diag, 2 * (np.sqrt(8) - 0.5),
              4e4, 0),
    DataPoint(0, 0, 0, 0, 0, 0, np.pi / 2, diag, 2 * (np.sqrt(12.5) - 0.5),
              4e4, 1),
]
results = reconstruct_interval(rows, field, domain, params, threads=2)

for dp, sol in zip(rows, results):
    print(f"interval {dp.interval}: reflection at {np.round(sol.point, 3)}")

# the reverse address is the receiver-side launch direction of the solution
addr = reverse_address(results[0])
print(f"\nreverse address: phi = {addr.phi:.4f}, theta = {addr.theta:.4f}")

# widen a single address into a near-parallel bundle to tolerate drift
bundle = parallel_ray_bundle(addr, count=7, spread=0.02)
print("bundle of 7 addresses within 0.02 rad:")
for member in bundle:
    print(f"  ({member.phi:.4f}, {member.theta:.4f})")

# how often must the address be refreshed? worst-case relative drift says:
period = control_message_interval(host_speed=0.3, obstacle_speed=0.5,
                                  tolerance=0.1)
print(f"\nrefresh period at 0.3 + 0.5 m/s drift, 0.1 m tolerance: "
      f"{period:.3f} s")

# per-interval centroids of the solved points estimate the trajectory
grouped = {dp.interval: [sol] for dp, sol in zip(rows, results)}
estimate = build_trajectory(grouped, n_intervals=3)
for iv in estimate:
    where = "gap" if iv.gap else np.round(iv.centroid, 3)
    print(f"interval {iv.interval}: {where}")
drift = estimate.drifts([1.0, 3.0, 5.0])
for i, j, v in drift:
    print(f"drift {i} -> {j}: {np.round(v, 4)} per second")
