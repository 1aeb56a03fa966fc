import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critbbm import elliptic
from critbbm.elliptic import (
    elliptic_integral_inverse,
    lattice_from_period,
    make_aeh_lattice,
    solve_period_for_target,
    wp_eval,
    wp_inverse_increasing,
)
from critbbm.errors import DomainError, PoleError

from . import oracles

G3_REF = -0.023786


def test_reference_lattice_against_gamma_closed_form():
    # Omega = 1 lattice has g3 = -Omega_unit^6
    assert elliptic.reference_g3() == pytest.approx(-oracles.omega_unit() ** 6, rel=1e-12)
    assert elliptic.reference_invariants()[0] == pytest.approx(0.0, abs=1e-9)


def test_make_lattice_reference_value():
    lat = make_aeh_lattice(G3_REF)
    assert lat.omega_real == pytest.approx(9.88285, abs=1e-4)
    assert lat.omega_real == pytest.approx(oracles.period_for_g3(G3_REF), rel=1e-12)


def test_make_lattice_scaling():
    a = make_aeh_lattice(G3_REF)
    b = make_aeh_lattice(G3_REF / 2**6)
    assert b.omega_real / a.omega_real == pytest.approx(2.0, rel=1e-14)


@given(st.floats(0.01, 100.0))
def test_period_round_trip(omega):
    lat = lattice_from_period(omega)
    assert make_aeh_lattice(lat.g3).omega_real == pytest.approx(omega, rel=1e-10)


@pytest.mark.parametrize("g3", [0.0, 1.0])
def test_make_lattice_rejects_nonnegative(g3):
    with pytest.raises(DomainError):
        make_aeh_lattice(g3)


def test_zeros_on_real_axis():
    lat = make_aeh_lattice(G3_REF)
    p, _ = wp_eval(lat, np.array(lat.zeros))
    assert np.all(np.abs(p) < 1e-12)


def test_ode_residual_example():
    lat = make_aeh_lattice(G3_REF)
    p, dp = wp_eval(lat, 0.41 * lat.omega_real)
    assert abs(dp**2 - 4.0 * p**3 + lat.g3) <= 1e-9


def test_periodicity_example():
    lat = make_aeh_lattice(G3_REF)
    z = 0.37 * lat.omega_real + 0.2j * lat.omega_real
    assert abs(wp_eval(lat, z + lat.omega_real)[0] - wp_eval(lat, z)[0]) <= 1e-10


def test_pole_error():
    lat = make_aeh_lattice(G3_REF)
    with pytest.raises(PoleError):
        wp_eval(lat, lat.omega_real)
    with pytest.raises(PoleError):
        wp_eval(lat, lat.generators[0] * (1.0 + 1e-14))


def test_real_root_is_half_period_value():
    lat = make_aeh_lattice(G3_REF)
    p, dp = wp_eval(lat, lat.omega_real / 2.0)
    assert p.real == pytest.approx(lat.real_root, rel=1e-12)
    assert abs(dp) < 1e-10


@given(st.floats(-10.0, -1e-3), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ode_and_reality_random(g3, a, b):
    lat = make_aeh_lattice(g3)
    e1, e2 = lat.generators
    z = a * e1 + b * e2
    lattice_pts = np.array([0.0, e1, e2, e1 + e2])
    if np.min(np.abs(z - lattice_pts)) < 1e-3 * lat.omega_real:
        return
    p, dp = wp_eval(lat, z)
    assert abs(dp**2 - 4.0 * p**3 + g3) <= 1e-9 * max(1.0, abs(4.0 * p**3))
    xr = a * lat.omega_real
    if 1e-3 < a < 1.0 - 1e-3:
        pr, dpr = wp_eval(lat, xr)
        assert abs(pr.imag) <= 1e-12 * max(1.0, abs(pr))
        assert abs(dpr.imag) <= 1e-12 * max(1.0, abs(dpr))


@given(st.floats(0.2, 5.0), st.floats(0.05, 0.95), st.floats(-0.3, 0.3))
def test_scaling_law_random(beta, a, b):
    base = make_aeh_lattice(G3_REF)
    big = lattice_from_period(beta * base.omega_real)
    z = (a + 1j * b) * base.omega_real
    if abs(z) < 1e-2 or abs(z - base.omega_real) < 1e-2:
        return
    p, _ = wp_eval(base, z)
    q, _ = wp_eval(big, beta * z)
    assert abs(q - p / beta**2) <= 1e-9 * max(1.0, abs(p))


def test_increasing_branch():
    lat = make_aeh_lattice(G3_REF)
    om = lat.omega_real
    grid = np.linspace(2.0 * om / 3.0, om, 400)[1:-1]
    p, dp = wp_eval(lat, grid)
    assert np.all(dp.real > 0.0)
    assert np.all(np.diff(p.real) > 0.0)


def test_elliptic_integral_tail():
    assert elliptic_integral_inverse(1e6, G3_REF) < 2.1e-3


def test_elliptic_integral_period_equation():
    assert elliptic_integral_inverse(0.0, G3_REF) - elliptic_integral_inverse(1.0 / 6.0, G3_REF) == pytest.approx(
        1.0, abs=1e-4
    )


@given(st.floats(-0.99, 50.0), st.floats(-20.0, -1e-3))
def test_elliptic_integral_matches_carlson(v, g3):
    w = v * (-g3 / 4.0) ** (1.0 / 3.0)
    assert elliptic_integral_inverse(w, g3) == pytest.approx(oracles.carlson_tail(w, g3), rel=1e-11)


def test_elliptic_integral_domain():
    with pytest.raises(DomainError):
        elliptic_integral_inverse(-1.0, G3_REF)
    with pytest.raises(DomainError):
        elliptic_integral_inverse(1.0, 0.5)


@pytest.mark.parametrize("w", [0.2, 1.0, 5.0])
def test_wp_of_inverse(w):
    lat = make_aeh_lattice(G3_REF)
    z = elliptic_integral_inverse(w, lat.g3)
    assert wp_eval(lat, z)[0].real == pytest.approx(w, abs=1e-8)
    zi = wp_inverse_increasing(lat, w)
    assert wp_eval(lat, zi)[0].real == pytest.approx(w, abs=1e-8)


@given(st.floats(0.67, 0.99))
def test_inverse_of_wp(frac):
    lat = make_aeh_lattice(G3_REF)
    z = frac * lat.omega_real
    w = wp_eval(lat, z)[0].real
    assert wp_inverse_increasing(lat, w) == pytest.approx(z, abs=1e-8)


def test_period_solution_x1():
    sol = solve_period_for_target(1.0)
    assert sol.omega_x == pytest.approx(9.88285, abs=1e-4)
    assert sol.g3_x == pytest.approx(G3_REF, abs=1e-5)
    assert sol.g3_x == pytest.approx(oracles.g3_for_target_mp(1.0), rel=1e-11)
    assert sol.lambda_x == 1.0
    assert sol.alpha_x == pytest.approx(2.0 * sol.omega_x / 3.0)


@pytest.mark.parametrize("x", [0.1, 0.5, 2.0, 7.0, 30.0, 200.0])
def test_period_solution_boundary_identity(x):
    sol = solve_period_for_target(x)
    p, _ = wp_eval(sol.lattice, x + sol.alpha_x)
    assert abs(6.0 * p.real - 1.0) <= 1e-9
    assert sol.lambda_x == solve_period_for_target(1.0).omega_x / sol.omega_x


@pytest.mark.parametrize("x", [5.0, 10.0, 50.0, 200.0])
def test_period_asymptotics(x):
    # from the pole expansion at the right end: omega_x = 3x + 3 sqrt(6) + o(1), approached from below
    gap = solve_period_for_target(x).omega_x - 3.0 * x
    assert 0.0 < gap < 3.0 * math.sqrt(6.0)


def test_period_sharper_approximation_x200():
    gap = solve_period_for_target(200.0).omega_x - 600.0
    assert gap == pytest.approx(3.0 * math.sqrt(6.0), abs=0.05)


def test_lambda_x_limit():
    # lambda_x x -> c1 with relative correction sqrt(6)/x
    x = 200.0
    sol = solve_period_for_target(x)
    c1 = solve_period_for_target(1.0).omega_x / 3.0
    assert sol.lambda_x * x / c1 == pytest.approx(1.0 / (1.0 + math.sqrt(6.0) / x), rel=1e-3)
    assert abs(sol.lambda_x * x / c1 - 1.0) < 0.015


def test_period_solution_domain():
    with pytest.raises(DomainError):
        solve_period_for_target(0.0)
