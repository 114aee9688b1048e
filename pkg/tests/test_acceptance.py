"""End-to-end capability checks, one per advertised guarantee.

Each test prints a single PASS/FAIL line so a full run reads as a checklist:
the benchmark table, the round-trip recovery rate, search-variant agreement,
integrator convergence orders, physical invariants, thread determinism, and
reverse-address validity.
"""

import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import brokenray as br
from brokenray import cli
from brokenray.geometry import angles_from_direction
from brokenray.raytrace import Integrator, RayState, trace
from brokenray.scene import first_hit, specular_reflect


def announce(num, label, ok, detail=""):
    line = f"[check {num}/7] {label}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()


def diag_x(t):
    """Closed-form x (= y) coordinate on the diagonal of the ramp field."""
    return (np.exp(np.sqrt(2.0) * t) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# shared round-trip suite: simulate broken rays off a moving obstacle in
# three speed fields, then reconstruct every row at production resolution

N_R = 500
PHI_STEPS, THETA_STEPS = 64, 128
CELL = max(np.pi / PHI_STEPS, 2 * np.pi / THETA_STEPS)
EPS1_FACTOR = 0.3
SUITE_INTERVALS = ((0.0, 2.5), (2.5, 5.0))


def suite_cases():
    return [
        dict(name="constant", field=br.ConstantField(1.0),
             domain=br.DomainBound((0, 0, 0), 12.0),
             obstacle=br.ObstacleTrajectory(
                 0.6, ((0.0, 3.0, 1.0, 0.3), (5.0, 2.2, 2.2, -0.2)),
                 SUITE_INTERVALS)),
        dict(name="affine", field=br.LinearAffineField(0.05, 0.03, 0.0, 1.0),
             domain=br.DomainBound((0, 0, 0), 10.0),
             obstacle=br.ObstacleTrajectory(
                 0.55, ((0.0, 2.8, -1.2, 0.2), (5.0, 3.2, 0.8, -0.4)),
                 SUITE_INTERVALS)),
        dict(name="radial",
             field=br.RadialQuadraticField((1.0, -1.0, 0.0), 1.0, 0.004),
             domain=br.DomainBound((0, 0, 0), 10.0),
             obstacle=br.ObstacleTrajectory(
                 0.5, ((0.0, -2.5, 2.0, -0.3), (5.0, -1.8, 3.0, 0.5)),
                 SUITE_INTERVALS)),
    ]


def harvest_receivers(field, domain, obstacle, tx, max_time, n_steps):
    """Receiver positions sampled along reflected probe legs."""
    receivers = []
    h = max_time / n_steps
    for i in range(len(obstacle.intervals)):
        center = obstacle.frozen_center(i)
        pairs = br.aimed_launch_angles(tx, center, obstacle.radius,
                                       fraction=0.6, rings=2, spokes=5)
        for phi, theta in pairs:
            st = RayState(*tx, phi=float(phi), theta=float(theta))
            hit = first_hit(field, st, center, obstacle.radius, max_time,
                            n_steps, Integrator.RK4, domain=domain)
            if hit is None:
                continue
            hs, tau = hit
            n = hs.position - center
            n /= np.linalg.norm(n)
            try:
                rdir = specular_reflect(hs.direction, n)
            except br.GrazingIncidenceError:
                continue
            rphi, rtheta = angles_from_direction(rdir)
            n2 = int((max_time - tau) / h)
            if n2 < 10:
                continue
            leg = trace(field, RayState(*hs.position, phi=float(rphi),
                                        theta=float(rtheta)),
                        n2 * h, n2, integrator=Integrator.RK4, domain=domain)
            pick = min(int(0.55 * n2), len(leg.times) - 1)
            if pick >= 5:
                receivers.append(tuple(leg.positions[pick]))
    return receivers


def certify_resolvable(dp, gt, field, domain, grid, eps1):
    """Does the angle grid resolve this row's true receiver direction?

    Snap the true reverse angles to their grid cell, trace transmitter and
    receiver rays, and check that some time-consistent node pair meets within
    eps1. Rows failing this are outside the advertised recovery scope.
    """
    i_cell = int(np.clip(round(gt.r_phi / (np.pi / PHI_STEPS) - 0.5),
                         0, PHI_STEPS - 1))
    j_cell = int(round(gt.r_theta / (2 * np.pi / THETA_STEPS))) % THETA_STEPS
    cphi, ctheta = grid[i_cell * THETA_STEPS + j_cell]
    tpath = trace(field, RayState(dp.xl, dp.yl, dp.zl, phi=dp.phi,
                                  theta=dp.theta), dp.t, N_R, domain=domain)
    rpath = trace(field, RayState(dp.xr, dp.yr, dp.zr, phi=float(cphi),
                                  theta=float(ctheta)), dp.t, N_R,
                  domain=domain)
    tp, rp = tpath.positions, rpath.positions
    smax = min(len(tp) - 1, N_R - 1)
    s = np.arange(1, smax + 1)
    p = N_R - s
    keep = p < len(rp)
    s, p = s[keep], p[keep]
    if s.size == 0:
        return False
    return bool(np.linalg.norm(tp[s] - rp[p], axis=1).min() < eps1)


@pytest.fixture(scope="session")
def round_trip_suite():
    t0 = time.perf_counter()
    tx = (0.0, 0.0, 0.0)
    max_time, n_steps = 12.0, 1500
    grid = br.angle_grid(PHI_STEPS, THETA_STEPS)
    rows = []
    for case in suite_cases():
        field, dom, obs = case["field"], case["domain"], case["obstacle"]
        c_max = br.max_speed(field, dom)
        recv = harvest_receivers(field, dom, obs, tx, max_time, n_steps)
        for i in range(len(obs.intervals)):
            center = obs.frozen_center(i)
            pairs = br.aimed_launch_angles(tx, center, obs.radius,
                                           fraction=0.6, rings=2, spokes=5)
            dps, gts = br.simulate_broken_rays(
                field, dom, obs, i, tx, np.array(recv), pairs, max_time,
                n_steps, k_offset=0)
            for dp, gt in zip(dps, gts):
                rows.append(dict(name=case["name"], field=field, domain=dom,
                                 c_max=c_max, dp=dp, gt=gt))

    def solve(row):
        dp = row["dp"]
        h = dp.t / N_R
        eps1 = max(2 * row["c_max"] * h,
                   EPS1_FACTOR * CELL * row["c_max"] * dp.t)
        params = br.SearchParams(n_r=N_R, phi_steps=PHI_STEPS,
                                 theta_steps=THETA_STEPS,
                                 eps1=eps1, eps2=0.5 * h)
        row.update(h=h, eps1=eps1, params=params,
                   certified=certify_resolvable(dp, row["gt"], row["field"],
                                                row["domain"], grid, eps1),
                   sol=br.reconstruct_point_cached(dp, row["field"],
                                                   row["domain"], params))
        return row

    with ThreadPoolExecutor(max_workers=2) as ex:
        rows = list(ex.map(solve, rows))
    return dict(rows=rows, elapsed=time.perf_counter() - t0)


# ---------------------------------------------------------------------------


def test_check_1_benchmark_table():
    t0 = time.perf_counter()
    rows = cli.run_table1(n_r=10000, integrators=(Integrator.RK4,))
    elapsed = time.perf_counter() - t0
    reference = {2.0: (1.55, 0.005), 4.0: (7.89, 0.01), 8.0: (138.15, 0.035)}
    worst_analytic = 0.0
    worst_ref = 0.0
    for row in rows:
        analytic = diag_x(row["tau"])
        assert analytic == pytest.approx(row["analytic"], rel=1e-12)
        worst_analytic = max(worst_analytic,
                             abs(row["rk4"] - analytic) / analytic)
        ref, tol = reference[row["t"]]
        rel = abs(row["rk4"] - ref) / ref
        worst_ref = max(worst_ref, rel / tol)
    ok = worst_analytic < 0.005 and worst_ref < 1.0 and elapsed < 10.0
    announce(1, "benchmark table",
             ok, f"max rel err vs closed form {worst_analytic:.2e}, "
                 f"worst reference margin {worst_ref:.2f} of budget, "
                 f"{elapsed:.1f} s")
    assert worst_analytic < 0.005
    assert worst_ref < 1.0
    assert elapsed < 10.0


def test_check_2_round_trip_recovery(round_trip_suite):
    rows = round_trip_suite["rows"]
    elapsed = round_trip_suite["elapsed"]
    names = {r["name"] for r in rows}
    certified = [r for r in rows if r["certified"]]
    within = 0
    for r in certified:
        sol = r["sol"]
        if not isinstance(sol, br.ReflectionSolution):
            continue
        err = float(np.linalg.norm(sol.point - r["gt"].point))
        bound = max(2 * r["eps1"], 2 * r["c_max"] * r["h"])
        within += err <= bound
    rate = within / max(len(certified), 1)
    ok = (len(rows) >= 50 and names == {"constant", "affine", "radial"}
          and rate >= 0.95 and elapsed < 300.0)
    announce(2, "round-trip recovery",
             ok, f"{len(rows)} rays, {len(certified)} resolvable, "
                 f"{within} within bound ({100 * rate:.1f}%), "
                 f"{elapsed:.0f} s")
    assert len(rows) >= 50
    assert names == {"constant", "affine", "radial"}
    assert rate >= 0.95
    assert elapsed < 300.0


def test_check_3_variant_equivalence_and_scaling():
    rng = np.random.default_rng(20260819)
    n_r, phi, theta = 60, 5, 8
    grid = br.angle_grid(phi, theta)
    params = br.SearchParams(n_r=n_r, phi_steps=phi, theta_steps=theta)

    scenarios = []
    for i in range(25):
        kind = i % 3
        if kind == 0:
            field = br.ConstantField(0.8 + 0.1 * (i % 5))
        elif kind == 1:
            field = br.LinearAffineField(0.04, -0.03, 0.02, 1.0)
        else:
            field = br.RadialQuadraticField((0.5, 0, 0), 1.0, 0.003)
        dom = br.DomainBound((0, 0, 0), 15.0)
        a_phi, a_theta = grid[rng.integers(0, len(grid))]
        t_k = float(rng.uniform(2.0, 5.0))
        tx = tuple(rng.uniform(-0.5, 0.5, 3))
        scenarios.append((field, dom, br.DataPoint(*tx, *tx, float(a_phi),
                                                   float(a_theta), t_k,
                                                   4e4, 0)))
    for i in range(25):
        field = (br.ConstantField(1.0) if i % 2
                 else br.LinearAffineField(0.03, 0.05, 0.0, 1.2))
        dom = br.DomainBound((0, 0, 0), 8.0)
        scenarios.append((field, dom, br.DataPoint(
            *rng.uniform(-3, 3, 3), *rng.uniform(-3, 3, 3),
            float(rng.uniform(0.3, np.pi - 0.3)),
            float(rng.uniform(0, 2 * np.pi)),
            float(rng.uniform(0.5, 6.0)), 4e4, 0)))

    n_solved = 0
    agree = True
    for field, dom, dp in scenarios:
        a = br.reconstruct_point(dp, field, dom, params, variant="brute")
        b = br.reconstruct_point(dp, field, dom, params, variant="cached")
        agree &= type(a) is type(b)
        if isinstance(a, br.ReflectionSolution):
            n_solved += 1
            agree &= a == b
            agree &= abs(a.px - b.px) < 1e-12
        else:
            agree &= a.reason == b.reason

    # work-counter scaling on a never-matching scenario
    field = br.LinearAffineField(0.03, 0.05, 0.0, 1.2)
    dom = br.DomainBound((0, 0, 0), 8.0)
    dp = br.DataPoint(-2.0, 1.0, 0.5, 2.5, -1.5, 0.3, 1.2, 2.1, 5.0, 4e4, 0)
    ratios = []
    for n in (60, 120, 240):
        p = br.SearchParams(n_r=n, phi_steps=phi, theta_steps=theta)
        sb, sc = br.SearchStats(), br.SearchStats()
        br.reconstruct_point(dp, field, dom, p, stats=sb, variant="brute")
        br.reconstruct_point(dp, field, dom, p, stats=sc, variant="cached")
        ratios.append(sb.work / sc.work)
    growth = [ratios[i + 1] / ratios[i] for i in range(len(ratios) - 1)]

    ok = agree and n_solved >= 20 and all(g >= 1.5 for g in growth)
    announce(3, "variant equivalence",
             ok, f"50 scenarios agree ({n_solved} solved), work ratio "
                 f"{ratios[0]:.0f} -> {ratios[1]:.0f} -> {ratios[2]:.0f} "
                 f"as the time grid doubles")
    assert agree
    assert n_solved >= 20
    assert all(g >= 1.5 for g in growth)


def test_check_4_integrator_convergence_orders():
    field = br.LinearAffineField(1.0, 1.0, 0.0, 1.0)
    t_total = 1.0
    target = np.array([diag_x(1.0), diag_x(1.0), 0.0])
    steps = np.array([16, 32, 64, 128, 256])
    slopes = {}
    for integ in (Integrator.EULER, Integrator.RK4):
        errs = []
        for n in steps:
            path = trace(field, RayState(0, 0, 0, phi=np.pi / 2,
                                         theta=np.pi / 4),
                         t_total, int(n), integrator=integ)
            errs.append(float(np.linalg.norm(path.positions[-1] - target)))
        slopes[integ] = float(np.polyfit(np.log(t_total / steps),
                                         np.log(errs), 1)[0])
    ok = (abs(slopes[Integrator.EULER] - 1.0) <= 0.3
          and abs(slopes[Integrator.RK4] - 4.0) <= 0.3)
    announce(4, "integrator convergence",
             ok, f"euler slope {slopes[Integrator.EULER]:.3f}, "
                 f"rk4 slope {slopes[Integrator.RK4]:.3f}")
    assert abs(slopes[Integrator.EULER] - 1.0) <= 0.3
    assert abs(slopes[Integrator.RK4] - 4.0) <= 0.3


def test_check_5_physical_invariants():
    # straightness and arc length in a uniform medium
    field = br.ConstantField(2.0)
    path = trace(field, RayState(0.5, -0.25, 1.0, phi=1.1, theta=2.3),
                 3.0, 1000)
    p0, p1 = path.positions[0], path.positions[-1]
    chord = p1 - p0
    length = float(np.linalg.norm(chord))
    rel_len_err = abs(length - 2.0 * 3.0) / (2.0 * 3.0)
    offsets = np.linalg.norm(
        np.cross(path.positions - p0, chord / length), axis=1)
    collinearity = float(offsets.max()) / length

    # clock consistency: integrating 1/c along the path returns elapsed time
    worst_clock = 0.0
    for f in (br.ConstantField(1.3),
              br.LinearAffineField(0.05, 0.03, 0.0, 1.0),
              br.RadialQuadraticField((0.5, 0, 0), 1.0, 0.003)):
        p = trace(f, RayState(0, 0, 0, phi=1.2, theta=0.7), 4.0, 1000)
        t_hat = br.travel_time_integral(f, p)
        worst_clock = max(worst_clock, abs(t_hat - p.times[-1]) / p.times[-1])

    # mirror law: unit speed preserved, incidence angle equals reflection
    rng = np.random.default_rng(7)
    worst_norm = 0.0
    worst_angle = 0.0
    for _ in range(200):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        if np.dot(d, n) > -1e-3:
            d = -d if np.dot(d, n) > 0 else d
            if np.dot(d, n) > -1e-3:
                continue
        r = specular_reflect(d, n)
        worst_norm = max(worst_norm, abs(np.linalg.norm(r) - 1.0))
        worst_angle = max(worst_angle, abs(np.dot(d, n) + np.dot(r, n)))

    ok = (collinearity < 1e-9 and rel_len_err < 1e-6
          and worst_clock < 0.01 and worst_norm < 1e-12
          and worst_angle < 1e-12)
    announce(5, "physical invariants",
             ok, f"collinearity {collinearity:.1e}, length err "
                 f"{rel_len_err:.1e}, clock err {100 * worst_clock:.2f}%, "
                 f"mirror norm {worst_norm:.1e} angle {worst_angle:.1e}")
    assert collinearity < 1e-9
    assert rel_len_err < 1e-6
    assert worst_clock < 0.01
    assert worst_norm < 1e-12
    assert worst_angle < 1e-12


# the exact diagonal launch retroreflects off the sphere and sweeps back
# over every receiver posted along the diagonal, one capture each
PIPELINE_SCENARIO = """
[domain]
center = [0.0, 0.0, 0.0]
radius = 10.0

[field]
kind = "constant"
c0 = 1.0

[obstacle]
radius = 0.5
waypoints = [[0.0, 2.0, 2.0, 0.0], [4.0, 2.0, 2.0, 0.0]]
intervals = [[0.0, 2.0], [2.0, 4.0]]

[instruments]
transmitter = [0.0, 0.0, 0.0]
receivers = [[0.0, 0.0, 0.0], [0.4, 0.4, 0.0], [0.8, 0.8, 0.0], [1.2, 1.2, 0.0]]

[launch]
kind = "pairs"
pairs = [[1.5707963267948966, 0.7853981633974483], [1.45, 0.785398163]]

[simulation]
max_time = 8.0
n_steps = 1600

[search]
n_r = 200
phi_steps = 33
theta_steps = 64
"""


def test_check_6_thread_determinism(tmp_path, monkeypatch):
    for name in ("VARIANT", "THREADS", "NR", "PHI_STEPS", "THETA_STEPS",
                 "EPS1", "EPS2", "INTEGRATOR", "SEED"):
        monkeypatch.delenv("BROKENRAY_" + name, raising=False)
    scene = tmp_path / "scene.toml"
    scene.write_text(PIPELINE_SCENARIO)
    outputs = {}
    for threads in (1, 4, 0):
        d = tmp_path / f"threads{threads}"
        d.mkdir()
        dp, gt = d / "dp.csv", d / "gt.csv"
        sol, traj = d / "sol.csv", d / "traj.csv"
        assert cli.main(["simulate", str(scene),
                         "--out-datapoints", str(dp),
                         "--out-groundtruth", str(gt)]) == 0
        assert cli.main(["reconstruct", str(scene), "--datapoints", str(dp),
                         "--out", str(sol),
                         "--threads", str(threads)]) == 0
        assert cli.main(["track", str(scene), "--datapoints", str(dp),
                         "--solutions", str(sol), "--out", str(traj),
                         "--threads", str(threads)]) == 0
        outputs[threads] = tuple(p.read_bytes() for p in (dp, gt, sol, traj))
    n_rows = outputs[1][2].count(b"\n") - 1
    ok = outputs[1] == outputs[4] == outputs[0] and n_rows > 0
    announce(6, "thread determinism",
             ok, f"4 pipeline files byte-identical across threads 1/4/max, "
                 f"{n_rows} solution rows")
    assert n_rows > 0
    assert outputs[1] == outputs[4]
    assert outputs[1] == outputs[0]


def test_check_7_reverse_address_validity(round_trip_suite):
    rows = round_trip_suite["rows"]
    checked = 0
    valid = 0
    worst = 0.0
    for r in rows:
        sol = r["sol"]
        if not isinstance(sol, br.ReflectionSolution):
            continue
        checked += 1
        m1, m2 = br.verify_solution(r["dp"], sol, r["field"], r["domain"],
                                    r["params"])
        worst = max(worst, m1 / r["eps1"], m2 / r["eps1"])
        valid += (m1 < r["eps1"]) and (m2 < r["eps1"])
    ok = checked >= 50 and valid == checked
    announce(7, "reverse-address validity",
             ok, f"{valid}/{checked} accepted solutions re-trace onto the "
                 f"reflection point, worst miss {100 * worst:.1f}% of "
                 f"tolerance")
    assert checked >= 50
    assert valid == checked
