"""Reference values computed independently of the package internals."""
import math

import mpmath
import numpy as np
from scipy import integrate, optimize, special

SQRT6 = math.sqrt(6.0)


def omega_unit():
    """Real period of the anti-equianharmonic lattice with g3 = -1."""
    return math.sqrt(3.0) * special.gamma(1.0 / 3.0) ** 3 / (2.0 * math.pi)


def period_for_g3(g3):
    return omega_unit() * (-g3) ** (-1.0 / 6.0)


def carlson_tail(w, g3):
    """int_w^inf dt / sqrt(4 t^3 - g3) via Carlson's R_F."""
    roots = np.roots([4.0, 0.0, 0.0, -g3])
    return special.elliprf(*(w - roots)).real


def g3_for_target_mp(x, dps=30):
    with mpmath.workdps(dps):
        f = lambda G: mpmath.quad(lambda t: 1 / mpmath.sqrt(4 * t**3 + G), [0, mpmath.mpf(1) / 6]) - x
        return -float(mpmath.findroot(f, 0.0238 / x**6))


def moranian_u_closed_reach(t):
    return 6.0 / (t + SQRT6) ** 2


def quadrature_hit_prob(kappa2, x, ys):
    """u_x(y) from the first integral (u')^2 = s0^2 + kappa2(u), independent of any ODE solver."""

    def travel(s0, top):
        f = lambda v: 1.0 / math.sqrt(s0 * s0 + kappa2(v))
        # the integrand changes scale where kappa2(v) ~ s0^2
        mid = min(top, s0 ** (2.0 / 3.0))
        a = integrate.quad(f, 0.0, mid, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        return a + integrate.quad(f, mid, top, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    s0 = optimize.brentq(lambda s: travel(s, 1.0) - x, 1e-6, 1e3, xtol=1e-15, rtol=1e-15)
    out = []
    for y in np.atleast_1d(ys):
        if y <= 0.0:
            out.append(0.0)
        elif y >= x:
            out.append(1.0)
        else:
            out.append(optimize.brentq(lambda u: travel(s0, u) - y, 0.0, 1.0, xtol=1e-15, rtol=1e-15))
    return s0, np.array(out)


def quadrature_decay(kappa2, z, y):
    """w with int_w^z dt / sqrt(kappa2(t)) = y, by quad + brentq."""

    def g(w):
        return integrate.quad(lambda t: 1.0 / math.sqrt(kappa2(t)), w, z, epsabs=1e-13, epsrel=1e-12, limit=200)[0] - y

    lo = z
    while g(lo) < 0.0:
        lo *= 0.5
    return optimize.brentq(g, lo, z, xtol=1e-16, rtol=1e-14)


def moranian_H_complex(y, s):
    c = y / SQRT6
    return s / (1.0 + c * np.sqrt(1.0 - s)) ** 2


def taylor_coeffs_mp(y, n, dps=40):
    """[s^k] H for the Moranian law by mpmath's numerical Taylor expansion."""
    with mpmath.workdps(dps):
        c = mpmath.mpf(y) / mpmath.sqrt(6)
        coeffs = mpmath.taylor(lambda s: s / (1 + c * mpmath.sqrt(1 - s)) ** 2, 0, n)
        return [float(v) for v in coeffs]
