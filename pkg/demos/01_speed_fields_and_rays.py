"""
Speed fields and ray tracing
============================

Rays bend toward regions of higher propagation speed. This script traces a
ray through a linearly growing field, checks the endpoint against the known
closed form, and shows how the two integrators converge as the step shrinks.
"""

import numpy as np

from brokenray import (ConstantField, Integrator, LinearAffineField, RayState,
                       max_speed, trace, travel_time_integral)
from brokenray.geometry import DomainBound

# the ramp field c = x + y + 1, launched along the diagonal from the origin,
# has the exact solution x(t) = y(t) = (e^{sqrt(2) t} - 1) / 2
field = LinearAffineField(1.0, 1.0, 0.0, 1.0)
start = RayState(0.0, 0.0, 0.0, phi=np.pi / 2, theta=np.pi / 4)


def exact_x(t):
    return (np.exp(np.sqrt(2.0) * t) - 1.0) / 2.0


path = trace(field, start, total_time=2.0, n_steps=4000)
print("endpoint      ", path.positions[-1])
print("closed form   ", np.array([exact_x(2.0), exact_x(2.0), 0.0]))

# convergence: halving the step should cut the RK4 error by ~16x and the
# Euler error by ~2x
print("\n steps     euler error        rk4 error")
for n in (50, 100, 200, 400, 800):
    errs = []
    for integ in (Integrator.EULER, Integrator.RK4):
        p = trace(field, start, 1.0, n, integrator=integ)
        errs.append(abs(p.positions[-1, 0] - exact_x(1.0)))
    print(f"{n:6d}   {errs[0]:12.3e}     {errs[1]:12.3e}")

# the travel-time integral recomputes elapsed time from geometry alone;
# agreement is a quick self-test of any traced path
t_hat = travel_time_integral(field, path)
print(f"\nclock check: traced {path.times[-1]:.6f} s, "
      f"geometric {t_hat:.6f} s")

# a domain bound truncates rays instead of letting them run forever
domain = DomainBound((0.0, 0.0, 0.0), 3.0)
clipped = trace(field, start, 2.0, 4000, domain=domain)
print(f"domain exit after {clipped.times[-1]:.4f} s at "
      f"|p| = {np.linalg.norm(clipped.positions[-1]):.4f} "
      f"(status: {clipped.status.name})")

# speed extrema over a region give the step and tolerance scales used
# everywhere else in the package
print(f"max speed over the ball: {max_speed(field, domain):.3f}")
print(f"constant field sanity:   {max_speed(ConstantField(2.5), domain):.3f}")
