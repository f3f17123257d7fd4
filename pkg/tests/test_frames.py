import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from similab.frames import (
    FrameRangeError,
    MovingFrame,
    PhysicalField,
    SimilarityField,
    from_similarity,
    gaussian_release,
    to_similarity,
    to_similarity_moving,
)
from similab.hermite import gaussian


def test_gaussian_release_is_a_fixed_point():
    x = np.linspace(-100, 100, 80001)
    xi = np.linspace(-10, 10, 401)
    a = 2.5
    target = a * gaussian(xi)
    for t in np.geomspace(1.0, 10.0, 7):
        sim = to_similarity(PhysicalField(t, x, gaussian_release(x, t, a)), xi)
        assert sim.tau == pytest.approx(math.log(t))
        np.testing.assert_allclose(sim.values, target, atol=1e-8)


def test_unit_time_is_identity():
    x = np.linspace(-5, 5, 101)
    vals = np.exp(-x**2)
    sim = to_similarity(PhysicalField(1.0, x, vals))
    assert sim.tau == 0.0
    np.testing.assert_array_equal(sim.xi, x)
    np.testing.assert_array_equal(sim.values, vals)


def test_round_trip():
    x = np.linspace(-30, 30, 24001)
    phys = PhysicalField(3.0, x, gaussian_release(x, 2.0, 1.0, 0.5))
    xi = np.linspace(-12, 12, 19201)
    back = from_similarity(to_similarity(phys, xi), 3.0, x)
    np.testing.assert_allclose(back.values, phys.values, atol=1e-8)
    # inverse first
    sim = SimilarityField(0.3, xi, gaussian(xi))
    again = to_similarity(from_similarity(sim, 4.0, np.linspace(-40, 40, 32001)), xi)
    np.testing.assert_allclose(again.values, sim.values, atol=1e-8)


def test_domain_errors():
    x = np.linspace(-1, 1, 11)
    with pytest.raises(ValueError):
        to_similarity(PhysicalField(0.0, x, x))
    with pytest.raises(ValueError):
        from_similarity(SimilarityField(0.0, x, x), -1.0)
    with pytest.raises(ValueError):
        PhysicalField(1.0, np.array([0.0, 1.0, 3.0]), np.zeros(3))


@given(st.floats(0.1, 50), st.floats(-1, 1), st.floats(0.5, 3))
def test_mass_covariance(t, c, w):
    x = np.linspace(-200, 200, 8001)
    vals = np.exp(-((x - c) ** 2) / (w * t)) * (1 + 0.3 * np.sin(x))
    phys = PhysicalField(t, x, vals)
    assert to_similarity(phys).mass == pytest.approx(phys.mass, rel=1e-12)


def test_static_moving_frame_reduces_to_static_transform():
    x = np.linspace(-30, 30, 601)
    phys = PhysicalField(2.0, x, gaussian_release(x, 2.0))
    frame = MovingFrame.static(np.linspace(0.5, 5.0, 10))
    sim, rev = to_similarity_moving(phys, frame)
    ref = to_similarity(phys)
    assert not rev
    np.testing.assert_array_equal(sim.xi, ref.xi)
    np.testing.assert_array_equal(sim.values, ref.values)


def test_shifted_gaussian_centres_in_moving_frame():
    x = np.linspace(-40, 40, 4001)
    T = np.linspace(1.0, 6.0, 51)
    X = 0.3 * T
    frame = MovingFrame(T, X, T.copy())
    Tq = 3.0
    phys = PhysicalField(Tq, x, gaussian_release(x, Tq, 1.2, center=0.9))
    xi = np.linspace(-10, 10, 201)
    sim, _ = to_similarity_moving(phys, frame, xi)
    assert sim.origin == pytest.approx(0.9)
    np.testing.assert_allclose(sim.values, 1.2 * gaussian(xi), atol=1e-8)


def test_constant_shift_offsets_grid():
    x = np.linspace(-5, 5, 101)
    T = np.linspace(1, 10, 10)
    frame = MovingFrame(T, np.ones_like(T), T.copy())
    t = 4.0
    sim, _ = to_similarity_moving(PhysicalField(t, x, np.zeros_like(x)), frame)
    np.testing.assert_allclose(sim.xi, (x - 1.0) / 2.0)


def test_last_passage_and_reversal_flag():
    T = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    t = np.array([1.0, 2.0, 1.5, 2.5, 3.5])
    frame = MovingFrame(T, np.zeros_like(T), t)
    assert frame.reversals == 1
    Tq, _, rev = frame.locate(1.75)
    assert Tq == pytest.approx(2.25)
    assert rev
    Tq, _, rev = frame.locate(3.0)
    assert Tq == pytest.approx(3.5)
    assert not rev
    with pytest.raises(FrameRangeError):
        frame.locate(10.0)
