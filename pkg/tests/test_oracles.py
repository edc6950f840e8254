"""The frozen reference values agree with their independent oracles."""

import math

import mpmath as mp
import pytest

from . import oracles

TWO_PI = 6.283185307179586
GAP_045 = 1.444453920149063


def test_radius_oracle_matches_square_root():
    for t in (0.0, 0.1, 0.25, 0.4):
        assert float(oracles.circle_radius(1, t)) == pytest.approx(math.sqrt(1 - 2 * t), rel=1e-12)


def test_brakke_equality_is_two_pi():
    assert float(oracles.brakke_mass_plus_dissipation(0.125)) == pytest.approx(TWO_PI, rel=1e-14)


def test_disc_area_rate():
    assert float(oracles.disc_area_rate(0.2)) == pytest.approx(-TWO_PI, rel=1e-10)


def test_position_field_both_sides():
    lhs, rhs = oracles.position_field_sides(mp.mpf("0.7"))
    assert float(lhs) == pytest.approx(TWO_PI * 0.7, rel=1e-14)
    assert float(rhs) == pytest.approx(float(lhs), rel=1e-14)


def test_velocity_L2_is_pi():
    assert float(oracles.velocity_L2(0.375)) == pytest.approx(math.pi, rel=1e-14)


def test_concentric_gap_increasing():
    ts = [0.05 * k for k in range(10)]
    d = [float(oracles.concentric_gap(t)) for t in ts]
    assert d[0] == pytest.approx(1.0)
    assert all(b > a for a, b in zip(d, d[1:]))
    assert float(oracles.concentric_gap(0.45)) == pytest.approx(GAP_045, rel=1e-14)


def test_sphere_jump_half_pi():
    assert float(oracles.sphere_jump(2.5)) == pytest.approx(math.pi / 2, rel=1e-12)


def test_disc_modulus_linear():
    for lag in (0.01, 0.02, 0.08):
        assert float(oracles.disc_l1_modulus(lag)) == pytest.approx(2 * math.pi * lag, rel=1e-10)
