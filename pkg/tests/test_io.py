import numpy as np
import pytest

from brokenray.fileio import (FormatError, SolutionRow, read_datapoints,
                              read_groundtruth, read_solutions,
                              read_trajectory, write_datapoints,
                              write_groundtruth, write_solutions,
                              write_trajectory)
from brokenray.reconstruct import (NoSolution, NoSolutionReason,
                                   ReflectionSolution)
from brokenray.routing import build_trajectory
from brokenray.scene import DataPoint, GroundTruth

# literals kept to nine significant digits so parsed rows compare equal
DP = DataPoint(0.1, -0.2, 0.3, 2.0, 0.0, -1.0,
               1.57079633, 0.785398163, 2.82842712, 4e4, 0)
GT = GroundTruth(0, 0.99, 0.99, 0.0, 1.40007143, 1.57079633, 2.35619449, 0)
SOL = ReflectionSolution(px=0.99, py=0.99, pz=0.0, tau=1.40007143,
                         s_index=99, p_index=100, angle_index=19,
                         receiver_phi=1.57079633, receiver_theta=2.35619449,
                         residual_distance=0.0141421356, residual_time=-0.0141)
FAILED = NoSolution(reason=NoSolutionReason.LEFT_DOMAIN)


class TestDatapoints:
    def test_round_trip_bytes(self, tmp_path):
        p = tmp_path / "dp.csv"
        rows = [DP, DataPoint(1, 2, 3, 4, 5, 6, 1.0, 6.0, 9.5, 1e5, 3)]
        write_datapoints(p, rows)
        got = read_datapoints(p)
        assert got == rows
        q = tmp_path / "dp2.csv"
        write_datapoints(q, got)
        assert q.read_bytes() == p.read_bytes()

    def test_header_and_formatting(self, tmp_path):
        p = tmp_path / "dp.csv"
        write_datapoints(p, [DP])
        lines = p.read_text().splitlines()
        assert lines[0] == "xl,yl,zl,xr,yr,zr,phi,theta,t,xi,interval"
        # nine significant digits, no exponent padding
        assert lines[1].split(",")[8] == "2.82842712"
        assert lines[1].split(",")[9] == "40000"
        assert p.read_text().count("\r") == 0

    def test_empty_file_round_trips(self, tmp_path):
        p = tmp_path / "dp.csv"
        write_datapoints(p, [])
        assert read_datapoints(p) == []

    @pytest.mark.parametrize("mutate,match", [
        (lambda r: r.replace("2.82842712", "0"), "t must be positive"),
        (lambda r: r.replace("2.82842712", "-1"), "t must be positive"),
        (lambda r: r.replace("40000", "0"), "xi must be positive"),
        (lambda r: r.replace("1.57079633", "0"), r"phi must lie in \(0, pi\)"),
        (lambda r: r.replace("0.785398163", "6.3"),
         r"theta must lie in \[0, 2\*pi\)"),
        (lambda r: r.replace(",0\n", ",-1\n"), "interval must be >= 0"),
    ])
    def test_semantic_validation(self, tmp_path, mutate, match):
        p = tmp_path / "dp.csv"
        write_datapoints(p, [DP])
        p.write_text(mutate(p.read_text()))
        with pytest.raises(FormatError, match=match):
            read_datapoints(p)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "dp.csv"
        p.write_text("a,b,c\n")
        with pytest.raises(FormatError, match="header"):
            read_datapoints(p)

    def test_wrong_cell_count(self, tmp_path):
        p = tmp_path / "dp.csv"
        write_datapoints(p, [DP])
        p.write_text(p.read_text().rstrip("\n") + ",9\n")
        with pytest.raises(FormatError, match="line 2"):
            read_datapoints(p)

    def test_non_numeric_cell(self, tmp_path):
        p = tmp_path / "dp.csv"
        write_datapoints(p, [DP])
        p.write_text(p.read_text().replace("40000", "fast"))
        with pytest.raises(FormatError, match="xi"):
            read_datapoints(p)


class TestGroundtruth:
    def test_round_trip_bytes(self, tmp_path):
        p = tmp_path / "gt.csv"
        rows = [GT, GroundTruth(1, -3.0, 0.25, 1.5, 2.0, 0.3, 5.9, 2)]
        write_groundtruth(p, rows)
        got = read_groundtruth(p)
        assert got == rows
        q = tmp_path / "gt2.csv"
        write_groundtruth(q, got)
        assert q.read_bytes() == p.read_bytes()

    def test_header(self, tmp_path):
        p = tmp_path / "gt.csv"
        write_groundtruth(p, [GT])
        assert p.read_text().splitlines()[0] == \
            "k,px,py,pz,tau,r_phi,r_theta,interval"

    def test_bad_k(self, tmp_path):
        p = tmp_path / "gt.csv"
        write_groundtruth(p, [GT])
        p.write_text(p.read_text().replace("\n0,", "\nzero,"))
        with pytest.raises(FormatError, match="k"):
            read_groundtruth(p)


class TestSolutions:
    def test_mixed_rows_round_trip(self, tmp_path):
        p = tmp_path / "sol.csv"
        write_solutions(p, [SOL, FAILED, SOL])
        rows = read_solutions(p)
        assert [r.k for r in rows] == [0, 1, 2]
        assert rows[0].solved and not rows[1].solved
        assert rows[1].status == "left_domain"
        assert rows[1].px is None and rows[1].residual_t is None
        assert np.allclose(rows[0].point, [0.99, 0.99, 0.0])
        # a second write from parsed rows is byte-identical only for the
        # header/status layout; numeric cells come back through SolutionRow
        lines = p.read_text().splitlines()
        assert lines[0] == \
            "k,px,py,pz,tau,a_phi,a_theta,residual_d,residual_t,status"
        assert lines[2] == "1,,,,,,,,,left_domain"

    def test_all_failure_reasons_are_readable(self, tmp_path):
        p = tmp_path / "sol.csv"
        write_solutions(p, [NoSolution(reason=r) for r in NoSolutionReason])
        rows = read_solutions(p)
        assert [r.status for r in rows] == [r.value for r in NoSolutionReason]

    def test_unknown_status_rejected(self, tmp_path):
        p = tmp_path / "sol.csv"
        write_solutions(p, [FAILED])
        p.write_text(p.read_text().replace("left_domain", "gave_up"))
        with pytest.raises(FormatError, match="unknown status"):
            read_solutions(p)

    def test_failed_rows_must_be_empty(self, tmp_path):
        p = tmp_path / "sol.csv"
        p.write_text("k,px,py,pz,tau,a_phi,a_theta,residual_d,residual_t,status\n"
                     "0,1.0,,,,,,,,left_domain\n")
        with pytest.raises(FormatError, match="empty"):
            read_solutions(p)

    def test_unserializable_input(self, tmp_path):
        with pytest.raises(FormatError, match="cannot serialize"):
            write_solutions(tmp_path / "sol.csv", [object()])

    def test_solution_row_point(self):
        row = SolutionRow(0, 1.0, 2.0, 3.0, 0.5, 1.0, 1.0, 0.0, 0.0, "ok")
        assert np.array_equal(row.point, [1.0, 2.0, 3.0])


class TestTrajectory:
    def estimate(self):
        sol2 = ReflectionSolution(px=1.5, py=0.5, pz=0.0, tau=1.0, s_index=5,
                                  p_index=5, angle_index=0,
                                  receiver_phi=1.0, receiver_theta=1.0,
                                  residual_distance=0.0, residual_time=0.0)
        return build_trajectory({0: [SOL, sol2], 2: [SOL]})

    def test_round_trip_bytes(self, tmp_path):
        p = tmp_path / "traj.csv"
        est = self.estimate()
        write_trajectory(p, est)
        got = read_trajectory(p)
        assert len(got) == len(est)
        for a, b in zip(got, est):
            assert (a.interval, a.count, a.gap) == (b.interval, b.count, b.gap)
            if not b.gap:
                assert a.centroid == pytest.approx(b.centroid)
                assert a.radius == pytest.approx(b.radius)
        q = tmp_path / "traj2.csv"
        write_trajectory(q, got)
        assert q.read_bytes() == p.read_bytes()

    def test_gap_row_layout(self, tmp_path):
        p = tmp_path / "traj.csv"
        write_trajectory(p, self.estimate())
        lines = p.read_text().splitlines()
        assert lines[0] == "interval,cx,cy,cz,count,radius"
        assert lines[2] == "1,,,,0,"
        assert lines[3].startswith("2,0.99,0.99,0,1,")

    def test_count_zero_requires_no_numbers(self, tmp_path):
        p = tmp_path / "traj.csv"
        p.write_text("interval,cx,cy,cz,count,radius\n0,,,,0,\n")
        est = read_trajectory(p)
        assert est.intervals[0].gap

    def test_bad_count(self, tmp_path):
        p = tmp_path / "traj.csv"
        p.write_text("interval,cx,cy,cz,count,radius\n0,,,,two,\n")
        with pytest.raises(FormatError, match="count"):
            read_trajectory(p)
