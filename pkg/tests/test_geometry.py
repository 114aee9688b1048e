import numpy as np
import pytest
from hypothesis import given, strategies as st

from brokenray.geometry import (DomainBound, angles_from_direction,
                                direction_from_angles, flip_angles)


@pytest.mark.parametrize("phi,theta,expected", [
    (np.pi / 2, 0.0, (1, 0, 0)),
    (np.pi / 2, np.pi / 2, (0, 1, 0)),
    (np.pi / 2, np.pi / 4, (np.sqrt(0.5), np.sqrt(0.5), 0)),
    (1e-8, 0.0, (1e-8, 0, 1)),
])
def test_direction_from_angles_axis_cases(phi, theta, expected):
    d = direction_from_angles(phi, theta)
    assert np.allclose(d, expected, atol=1e-12)


def test_direction_is_unit_and_batch_shapes():
    phi = np.array([0.3, 1.2, 2.9])
    theta = np.array([0.0, 4.0, 5.5])
    d = direction_from_angles(phi, theta)
    assert d.shape == (3, 3)
    assert np.allclose(np.linalg.norm(d, axis=-1), 1.0)


@given(st.floats(0.01, np.pi - 0.01), st.floats(0.0, 2 * np.pi, exclude_max=True))
def test_angle_direction_round_trip(phi, theta):
    d = direction_from_angles(phi, theta)
    p2, t2 = angles_from_direction(d)
    assert abs(p2 - phi) < 1e-9
    # azimuth is degenerate at the poles, compare directions instead
    d2 = direction_from_angles(p2, t2)
    assert np.allclose(d, d2, atol=1e-9)


def test_angles_from_direction_normalizes_length():
    p, t = angles_from_direction(np.array([0.0, 3.0, 0.0]))
    assert abs(p - np.pi / 2) < 1e-12
    assert abs(t - np.pi / 2) < 1e-12


def test_angles_from_zero_vector_raises():
    with pytest.raises(ValueError):
        angles_from_direction(np.zeros(3))


@given(st.floats(0.05, np.pi - 0.05), st.floats(0.0, 2 * np.pi, exclude_max=True))
def test_flip_angles_reverses_direction(phi, theta):
    fp, ft = flip_angles(phi, theta)
    assert 0.0 <= ft < 2 * np.pi
    d = direction_from_angles(phi, theta)
    fd = direction_from_angles(fp, ft)
    assert np.allclose(fd, -d, atol=1e-9)


def test_flip_twice_is_identity():
    phi, theta = 0.7, 5.1
    p2, t2 = flip_angles(*flip_angles(phi, theta))
    assert abs(p2 - phi) < 1e-12
    assert abs(t2 - theta) < 1e-12


class TestDomainBound:
    def test_contains_vectorized(self):
        dom = DomainBound((1.0, 0.0, 0.0), 2.0)
        pts = np.array([[1, 0, 0], [3, 0, 0], [3.1, 0, 0], [1, 2, 0.1]])
        assert list(dom.contains(pts)) == [True, True, False, False]

    def test_boundary_is_inside(self):
        dom = DomainBound((0, 0, 0), 1.0)
        assert bool(dom.contains(np.array([1.0, 0.0, 0.0])))

    def test_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            DomainBound((0, 0, 0), 0.0)

    def test_center_array(self):
        dom = DomainBound((1, 2, 3), 1.0)
        assert dom.center == (1.0, 2.0, 3.0)
        assert np.array_equal(dom.center_array, [1.0, 2.0, 3.0])
