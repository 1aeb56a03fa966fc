"""Weierstrass P on anti-equianharmonic lattices (g2 = 0, g3 < 0).

Such a lattice is fixed by its real period ``Omega``; it is generated by
``(Omega/sqrt 3) e^{i pi/6}`` and ``(Omega/sqrt 3) i``.  On the real axis P has
double poles at multiples of ``Omega``, zeros at ``Omega/3`` and ``2 Omega/3``,
and is strictly increasing on ``(2 Omega/3, Omega)``.

All lattices are homothetic, so the Eisenstein sums are computed once for the
lattice with ``Omega = 1`` and everything else follows from

    P_{b L}(b z) = b^-2 P_L(z),      g3(b L) = b^-6 g3(L).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, PoleError

SQRT3 = math.sqrt(3.0)
SQRT6 = math.sqrt(6.0)

# generators of the reference lattice (Omega = 1)
E1 = np.exp(1j * math.pi / 6.0) / SQRT3
E2 = 1j / SQRT3
_BASIS = np.array([[E1.real, E2.real], [E1.imag, E2.imag]])
_BASIS_INV = np.linalg.inv(_BASIS)

EISENSTEIN_CUTOFF = 400
N_LAURENT = 16  # number of nonzero Laurent terms beyond z^-2
POLE_TOL = 1e-12


def _hex_sums(cutoff: int) -> tuple[complex, complex]:
    m, n = np.meshgrid(np.arange(-cutoff, cutoff + 1), np.arange(-cutoff, cutoff + 1), indexing="ij")
    norm = np.maximum(np.maximum(np.abs(m), np.abs(n)), np.abs(m + n))
    mask = (norm <= cutoff) & (norm > 0)
    lat = m[mask] * E1 + n[mask] * E2
    inv2 = 1.0 / lat**2
    inv4 = inv2 * inv2
    return complex(np.sum(inv4)), complex(np.sum(inv4 * inv2))


@lru_cache(maxsize=None)
def reference_invariants(cutoff: int = EISENSTEIN_CUTOFF) -> tuple[float, float]:
    """``(g2, g3)`` of the ``Omega = 1`` lattice by direct Eisenstein summation.

    Sums run over hexagonal shells (6-fold symmetric); the ``K^-4`` tail is
    removed by one Richardson step against the half-cutoff sum.
    """
    s4, s6 = _hex_sums(cutoff)
    h4, h6 = _hex_sums(cutoff // 2)
    s4 = s4 + (s4 - h4) / 15.0
    s6 = s6 + (s6 - h6) / 15.0
    return 60.0 * s4.real, 140.0 * s6.real


def reference_g3() -> float:
    return reference_invariants()[1]


@lru_cache(maxsize=None)
def _laurent_coeffs() -> np.ndarray:
    """Coefficients ``c_3j`` (j = 1..N_LAURENT) of P for the reference lattice."""
    g3 = reference_g3()
    kmax = 3 * N_LAURENT
    c = np.zeros(kmax + 1)
    c[3] = g3 / 28.0  # c[2] = g2/20 = 0
    for k in range(4, kmax + 1):
        acc = 0.0
        for m in range(2, k - 1):
            acc += c[m] * c[k - m]
        c[k] = 3.0 * acc / ((2 * k + 1) * (k - 3))
    return c[3::3].copy()


@dataclass(frozen=True)
class AehLattice:
    """Anti-equianharmonic lattice; ``g2 = 0`` and ``g3 < 0``."""

    omega_real: float
    g3: float

    @property
    def generators(self) -> tuple[complex, complex]:
        return (complex(self.omega_real * E1), complex(self.omega_real * E2))

    @property
    def zeros(self) -> tuple[float, float]:
        return (self.omega_real / 3.0, 2.0 * self.omega_real / 3.0)

    @property
    def real_root(self) -> float:
        """Real root of ``4 t^3 - g3``; equals P(Omega/2)."""
        return -((-self.g3 / 4.0) ** (1.0 / 3.0))

    def wp(self, z):
        return wp_eval(self, z)


def make_aeh_lattice(g3: float) -> AehLattice:
    if not g3 < 0.0:
        raise DomainError(f"anti-equianharmonic lattices need g3 < 0, got {g3!r}")
    omega = (reference_g3() / g3) ** (1.0 / 6.0)
    return AehLattice(omega, float(g3))


def lattice_from_period(omega: float) -> AehLattice:
    if not omega > 0.0:
        raise DomainError(f"real period must be positive, got {omega!r}")
    return AehLattice(float(omega), reference_g3() / omega**6)


def _reduce(zr: np.ndarray) -> np.ndarray:
    """Subtract the nearest point of the reference lattice."""
    coords = _BASIS_INV @ np.vstack([zr.real.ravel(), zr.imag.ravel()])
    base = np.floor(coords)
    best = None
    best_d = None
    for di in (-1.0, 0.0, 1.0, 2.0):
        for dj in (-1.0, 0.0, 1.0, 2.0):
            pt = (base[0] + di) * E1 + (base[1] + dj) * E2
            w = zr.ravel() - pt
            d = np.abs(w)
            if best is None:
                best, best_d = w, d
            else:
                take = d < best_d
                best = np.where(take, w, best)
                best_d = np.where(take, d, best_d)
    return best.reshape(zr.shape)


def wp_eval(lat: AehLattice, z):
    """Return ``(P(z), P'(z))`` for the lattice ``lat``.

    ``z`` may be a scalar or an array.  Raises :class:`PoleError` within
    ``1e-12 * Omega`` of a lattice point.
    """
    scalar = np.ndim(z) == 0
    om = lat.omega_real
    zr = np.asarray(z, dtype=complex) / om
    w = _reduce(np.atleast_1d(zr))
    if np.any(np.abs(w) < POLE_TOL):
        raise PoleError("argument is a lattice point")
    c = _laurent_coeffs()
    w2 = w * w
    big_w = w2 * w2 * w2
    s = np.zeros_like(w)
    sd = np.zeros_like(w)
    for j in range(N_LAURENT, 0, -1):
        s = s * big_w + c[j - 1]
        sd = sd * big_w + (6 * j - 2) * c[j - 1]
    p = (1.0 + s * big_w) / w2
    dp = (-2.0 + sd * big_w) / (w2 * w)
    p = p / om**2
    dp = dp / om**3
    if scalar:
        return complex(p[0]), complex(dp[0])
    return p.reshape(np.shape(z)), dp.reshape(np.shape(z))


# --- inverse of P via the elliptic integral --------------------------------

_E0 = -(0.25 ** (1.0 / 3.0))  # real root of 4 t^3 + 1
_QUAD = dict(epsabs=1e-14, epsrel=1e-13, limit=200)


def _tail_unit(v: float) -> float:
    """``J(v) = int_v^inf dt / sqrt(4 t^3 + 1)`` for ``v >= E0``."""
    split = max(2.0 * v, 1.0)
    e0 = _E0
    gap = v - e0

    def lower(s):
        t = v + s * s
        return 2.0 * s / (2.0 * math.sqrt(gap + s * s) * math.sqrt(t * t + e0 * t + e0 * e0))

    def upper(r):
        return 2.0 / math.sqrt(4.0 + r**6)

    a, _ = integrate.quad(lower, 0.0, math.sqrt(split - v), **_QUAD)
    b, _ = integrate.quad(upper, 0.0, 1.0 / math.sqrt(split), **_QUAD)
    return a + b


@lru_cache(maxsize=None)
def _j_zero() -> float:
    return _tail_unit(0.0)


def elliptic_integral_inverse(w: float, g3: float) -> float:
    """``int_w^inf dt / sqrt(4 t^3 - g3)`` for real ``w`` and ``g3 < 0``.

    This inverts P on ``(0, Omega/2]``: ``P(result) = w``.
    """
    if not g3 < 0.0:
        raise DomainError("g3 must be negative")
    big_g = -g3
    scale = big_g ** (1.0 / 3.0)
    v = w / scale
    if v < _E0:
        raise DomainError(f"integration path from {w} crosses the real root of 4t^3 - g3")
    return big_g ** (-1.0 / 6.0) * _tail_unit(v)


def wp_inverse_increasing(lat: AehLattice, w: float) -> float:
    """The ``z`` in ``[Omega/2, Omega)`` with ``P(z) = w``."""
    return lat.omega_real - elliptic_integral_inverse(w, lat.g3)


def _height_length(big_g: float, top: float) -> float:
    # int_0^top dt / sqrt(4 t^3 + G)
    scale = big_g ** (1.0 / 3.0)
    return big_g ** (-1.0 / 6.0) * (_j_zero() - _tail_unit(top / scale))


def solve_g3_for_length(length: float, top: float) -> float:
    """Find ``g3 < 0`` with ``int_0^top dt / sqrt(4 t^3 - g3) = length``.

    The left side decreases in ``-g3``, so a bracket on ``log(-g3)`` always exists.
    """
    if not (length > 0.0 and top > 0.0):
        raise DomainError("length and top must be positive")
    omega0 = 3.0 * _j_zero()
    # from the pole expansion: Omega ~ 3 length + 3 / sqrt(top)
    guess_omega = 3.0 * length + 3.0 / math.sqrt(top)
    lg0 = 6.0 * math.log(omega0 / guess_omega)

    def f(lg):
        return _height_length(math.exp(lg), top) - length

    lo, hi = lg0 - 2.0, lg0 + 2.0
    flo, fhi = f(lo), f(hi)
    it = 0
    while flo < 0.0 or fhi > 0.0:
        it += 1
        if it > 200:
            raise ConvergenceError("could not bracket g3")
        if flo < 0.0:
            lo -= 2.0 * it
            flo = f(lo)
        if fhi > 0.0:
            hi += 2.0 * it
            fhi = f(hi)
    lg, res = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200, full_output=True)
    if not res.converged:
        raise ConvergenceError("g3 root finding did not converge")
    return -math.exp(lg)


@dataclass(frozen=True)
class PeriodSolution:
    x: float
    omega_x: float
    g3_x: float
    lambda_x: float
    alpha_x: float

    @property
    def lattice(self) -> AehLattice:
        return AehLattice(self.omega_x, self.g3_x)


@lru_cache(maxsize=4096)
def solve_period_for_target(x: float) -> PeriodSolution:
    """Lattice data for the hitting profile with target ``x``.

    ``g3`` solves ``x = int_0^{1/6} dt / sqrt(4 t^3 - g3)``; the period, the
    scaling ratio against the ``x = 1`` lattice and the centering ``2 Omega/3``
    follow.  The boundary identity ``6 P(x + 2 Omega/3) = 1`` is checked.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError(f"target must be positive, got {x!r}")
    g3 = solve_g3_for_length(x, 1.0 / 6.0)
    lat = make_aeh_lattice(g3)
    omega_1 = solve_period_for_target(1.0).omega_x if x != 1.0 else lat.omega_real
    alpha = 2.0 * lat.omega_real / 3.0
    p, _ = wp_eval(lat, x + alpha)
    if abs(6.0 * p.real - 1.0) > 1e-9:
        raise ConvergenceError(f"boundary identity off by {6.0 * p.real - 1.0:.3e} at x={x}")
    return PeriodSolution(x, lat.omega_real, g3, omega_1 / lat.omega_real, alpha)
