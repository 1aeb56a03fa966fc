import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critbbm import hitting
from critbbm.errors import DomainError, RegionError, ShootingBracketError
from critbbm.hitting import (
    general_hit_prob,
    general_hit_profile,
    moranian_asymptotic_constants,
    moranian_hit_prob,
    moranian_hit_profile,
    no_kill_reach_prob,
    pinch_bounds,
    shooting_slope,
)
from critbbm.offspring import MORANIAN, kappa2, make_offspring

from . import oracles
from .strategies import critical_laws

HALF = make_offspring([0.25, 0.5, 0.25])
SKEW = make_offspring([0.4, 0.3, 0.2, 0.1])


def test_moranian_boundaries():
    for x in (0.5, 3.0, 40.0):
        assert moranian_hit_prob(x, 0.0) == 0.0
        assert moranian_hit_prob(x, x) == pytest.approx(1.0, abs=1e-9)


def test_moranian_clamps_and_rejects():
    assert moranian_hit_prob(2.0, -1e-13) == 0.0
    assert moranian_hit_prob(2.0, 2.0 + 1e-13) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(DomainError):
        moranian_hit_prob(2.0, 2.1)
    with pytest.raises(DomainError):
        moranian_hit_prob(2.0, -0.1)


@pytest.mark.parametrize("x", [0.7, 3.0, 12.0])
def test_moranian_matches_quadrature_oracle(x):
    ys = np.linspace(0.0, x, 9)
    s0, ref = oracles.quadrature_hit_prob(lambda v: 2.0 * v**3 / 3.0, x, ys)
    assert np.allclose(moranian_hit_prob(x, ys), ref, atol=1e-9)
    assert hitting.moranian_slope(x) == pytest.approx(s0, rel=1e-8)


def test_moranian_large_x_scaling():
    # x^3 u_x(1) -> C1; the leading correction is (1 + sqrt(6)/x)^-3
    c1 = moranian_asymptotic_constants().C1
    for x in (200.0, 1000.0):
        ratio = x**3 * moranian_hit_prob(x, 1.0) / c1
        assert ratio == pytest.approx((1.0 + math.sqrt(6.0) / x) ** -3, rel=2e-3)


@pytest.mark.parametrize("x", [1.0, 5.0, 10.0])
def test_moranian_ode_residual(x):
    ys = np.linspace(0.05 * x, 0.95 * x, 60)
    # step truncation ~ u'''' h^2 / 12 ~ 1e-8 and rounding ~ 4e-16 / h^2 ~ 1e-8
    step = 2e-4
    u = moranian_hit_prob(x, ys)
    upp = (moranian_hit_prob(x, ys + step) - 2.0 * u + moranian_hit_prob(x, ys - step)) / step**2
    assert np.all(np.abs(upp - u**2) <= 1e-6)


def test_asymptotic_constants_values():
    c = moranian_asymptotic_constants([0.01, 0.5])
    assert c.c1 == pytest.approx(3.29428, abs=1e-4)
    assert c.C1 == pytest.approx(33.0822, abs=1e-3)
    assert c.C1 == pytest.approx(2.0 / 9.0 * oracles.omega_unit() ** 3, rel=1e-12)
    assert 0.95 <= c.C2_of_s[0.01] / (c.C1 * 0.01) <= 1.05


def test_asymptotic_constants_general_relations():
    c = hitting.asymptotic_constants(HALF, [0.3])
    assert c.C3 * HALF.sigma2 == pytest.approx(c.C1)
    assert c.C4_of_s[0.3] * HALF.sigma2 == pytest.approx(c.C2_of_s[0.3])
    with pytest.raises(DomainError):
        hitting.asymptotic_constants(HALF, [1.0])


def test_c2_is_limit_profile():
    # x^2 u_x(s x) -> C2(s)
    c = moranian_asymptotic_constants([0.5])
    x = 2000.0
    assert x**2 * moranian_hit_prob(x, 0.5 * x) == pytest.approx(c.C2_of_s[0.5], rel=1e-2)


@pytest.mark.parametrize("x, y", [(3.0, 1.5), (10.0, 1.0), (10.0, 9.0)])
def test_shooting_matches_elliptic(x, y):
    assert general_hit_prob(MORANIAN, x, y) == pytest.approx(moranian_hit_prob(x, y), abs=1e-7)


def test_shooting_boundary():
    assert general_hit_prob(SKEW, 4.0, 0.0) == 0.0
    assert general_hit_prob(SKEW, 4.0, 4.0) == 1.0


@pytest.mark.parametrize("x", [2.0, 8.0])
def test_shooting_matches_quadrature_general(x):
    ys = np.linspace(0.0, x, 7)
    s0, ref = oracles.quadrature_hit_prob(lambda v: float(kappa2(SKEW, v)), x, ys)
    assert shooting_slope(SKEW, x) == pytest.approx(s0, rel=1e-8)
    assert np.allclose(general_hit_prob(SKEW, x, ys), ref, atol=1e-8)


def test_half_variance_is_rescaled_moranian():
    # h(z) = z^2/2, so u_x(y) = v_{x/sqrt2}(y/sqrt2) with v the Moranian profile
    x = 6.0
    ys = np.linspace(0.0, x, 11)
    r = math.sqrt(2.0)
    assert np.allclose(general_hit_prob(HALF, x, ys), moranian_hit_prob(x / r, ys / r), atol=1e-8)


def test_general_power_law_half_variance():
    # rescaled Moranian: the correction is (1 + sqrt(6 / sigma^2) / x)^-3
    x = 200.0
    v = general_hit_prob(HALF, x, 1.0)
    c3 = moranian_asymptotic_constants().C1 / HALF.sigma2
    assert x**3 * v / c3 == pytest.approx((1.0 + math.sqrt(12.0) / x) ** -3, rel=2e-3)


def test_general_power_law_cubic_law():
    x = 100.0
    c3 = hitting.asymptotic_constants(SKEW).C3
    assert abs(x**3 * general_hit_prob(SKEW, x, 1.0) / c3 - 1.0) <= 0.15


def test_shooting_bracket_error():
    with pytest.raises(ShootingBracketError):
        shooting_slope(MORANIAN, 1e-4)


def test_profile_grid_refined():
    prof = moranian_hit_profile(10.0)
    assert prof.y[0] == 0.0 and prof.y[-1] == 10.0
    assert prof.y.size > 512
    assert np.min(np.diff(prof.y)) < 1e-6
    assert prof.period is not None and prof.method == "elliptic"
    g = general_hit_profile(SKEW, 5.0)
    assert g.values[0] == 0.0 and g.values[-1] == 1.0
    assert np.all(np.diff(g.values) > 0.0)
    assert g.slope > 0.0


@settings(max_examples=15)
@given(critical_laws())
def test_profile_invariants(d):
    x = 6.0
    ys = np.linspace(0.0, x, 40)
    u = general_hit_prob(d, x, ys)
    assert u[0] == 0.0 and u[-1] == 1.0
    assert np.all((u >= 0.0) & (u <= 1.0))
    assert np.all(np.diff(u) > 0.0)


@settings(max_examples=10)
@given(critical_laws())
def test_slope_decreasing_in_x(d):
    slopes = [shooting_slope(d, x) for x in (1.0, 2.0, 4.0, 8.0)]
    assert all(a > b for a, b in zip(slopes, slopes[1:]))


def test_values_nonincreasing_in_x():
    ys = np.linspace(0.0, 3.0, 13)
    prev = None
    for x in (3.0, 4.0, 6.0, 9.0):
        u = moranian_hit_prob(x, ys)
        if prev is not None:
            assert np.all(u <= prev + 1e-15)
            assert np.all((prev - u)[1:] > 1e-12)
        prev = u


def test_flip_identity_monotone():
    # w_x(t) = u_x(x - t) is nondecreasing in x
    ts = np.linspace(0.0, 2.0, 9)
    prev = None
    for x in (2.0, 3.0, 5.0, 8.0):
        w = moranian_hit_prob(x, x - ts)
        if prev is not None:
            assert np.all(w >= prev - 1e-15)
        prev = w


@pytest.mark.parametrize("dist", [MORANIAN, HALF, SKEW])
def test_domination_by_no_kill(dist):
    x = 7.0
    ys = np.linspace(0.0, x, 15)
    u = general_hit_prob(dist, x, ys)
    w = np.array([no_kill_reach_prob(dist, x - y) for y in ys])
    assert np.all(u <= w + 1e-12)


@pytest.mark.parametrize("t", [0.0, 1.0, 10.0, 100.0])
def test_no_kill_moranian_closed_form(t):
    assert no_kill_reach_prob(MORANIAN, t) == pytest.approx(oracles.moranian_u_closed_reach(t), abs=1e-8)


def test_no_kill_half_variance_closed_form():
    for t in (0.5, 3.0, 100.0):
        assert no_kill_reach_prob(HALF, t) == pytest.approx(6.0 / (0.5 * (t + math.sqrt(12.0)) ** 2), rel=1e-12)


@pytest.mark.parametrize("t", [0.3, 2.0, 25.0])
def test_no_kill_matches_quadrature(t):
    ref = oracles.quadrature_decay(lambda v: float(kappa2(SKEW, v)), 1.0, t)
    assert no_kill_reach_prob(SKEW, t) == pytest.approx(ref, rel=1e-9)


def test_no_kill_asymptotic_half_variance_known_rate():
    # sigma^2 t^2 w / 6 = (1 + sqrt(6/sigma^2)/t)^-2 exactly for this law
    t = 100.0
    ratio = HALF.sigma2 * t * t * no_kill_reach_prob(HALF, t) / 6.0
    assert ratio == pytest.approx((1.0 + math.sqrt(12.0) / t) ** -2, rel=1e-12)


def test_pinch_bounds_moranian_containment():
    pb = pinch_bounds(MORANIAN, 50.0, 0.1)
    ys = np.linspace(0.0, pb.length, 50)
    u = general_hit_prob(MORANIAN, 50.0, ys)
    assert np.all(pb.lower(ys) <= u) and np.all(u <= pb.upper(ys))
    assert pb.lower(0.0) == 0.0 and pb.upper(0.0) == 0.0


def test_pinch_bounds_cubic_law():
    pb = pinch_bounds(SKEW, 30.0, 0.1)
    assert pb.eps < 1.0 and pb.t_eps > 0.0 and pb.eta <= pb.eps
    assert pb.a_plus == pytest.approx(SKEW.sigma2 * 1.1)
    ys = np.linspace(0.0, pb.length, 50)
    u = general_hit_prob(SKEW, 30.0, ys)
    lo, hi = pb.lower(ys), pb.upper(ys)
    assert np.all(lo <= u) and np.all(u <= hi)
    assert lo[-1] == pb.eta and hi[-1] == pb.eta


def test_pinch_collapse():
    ratios = []
    for delta in (0.2, 0.1, 0.05):
        pb = pinch_bounds(MORANIAN, 50.0, delta)
        ratios.append(pb.upper(25.0) / pb.lower(25.0))
    assert ratios[-1] <= 1.25
    assert ratios[0] > ratios[1] > ratios[2] > 1.0


def test_pinch_region_error():
    with pytest.raises(RegionError):
        pinch_bounds(SKEW, 0.5, 0.01)


def test_pinch_delta_domain():
    with pytest.raises(DomainError):
        pinch_bounds(MORANIAN, 5.0, 1.0)
