"""Hitting probabilities ``u_x(y) = P^y(M >= x)`` for BBM killed at 0.

``u_x`` solves ``u'' = h(u)`` on ``[0, x]`` with ``u(0) = 0`` and ``u(x) = 1``.
For the Moranian law ``h(z) = z^2`` and the solution is a rescaled
Weierstrass function; in general we shoot on the initial slope.

The first-integral inverter at the bottom of this module is shared with
:mod:`critbbm.killed`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize

from .elliptic import (
    SQRT6,
    AehLattice,
    PeriodSolution,
    make_aeh_lattice,
    solve_g3_for_length,
    solve_period_for_target,
    wp_eval,
)
from .errors import (
    ConvergenceError,
    DomainError,
    InversionFailure,
    RegionError,
    ShootingBracketError,
    StiffnessError,
)
from .offspring import MORANIAN, OffspringDistribution

CLAMP_TOL = 1e-12
SHOOT_RTOL = 1e-10
SHOOT_ATOL = 1e-14
SLOPE_LO, SLOPE_HI = 1e-12, 1e3
MAX_STEPS = 1_000_000


def _clamp_y(x: float, y):
    y = np.asarray(y, dtype=float)
    if not x > 0.0:
        raise DomainError(f"target x must be positive, got {x!r}")
    if np.any(y < -CLAMP_TOL) or np.any(y > x + CLAMP_TOL):
        raise DomainError(f"start position outside [0, {x}]")
    return np.clip(y, 0.0, x)


# --- Moranian closed form ---------------------------------------------------


def moranian_hit_prob(x: float, y):
    """``6 P_{L_x}(y + 2 omega_x / 3)``; scalar or array ``y``."""
    yy = _clamp_y(x, y)
    sol = solve_period_for_target(float(x))
    flat = np.atleast_1d(yy).astype(float)
    out = np.zeros_like(flat)
    inner = flat > 0.0
    if np.any(inner):
        p, _ = wp_eval(sol.lattice, flat[inner] + sol.alpha_x)
        out[inner] = 6.0 * p.real
    out[flat >= x] = 1.0
    out = np.clip(out, 0.0, 1.0)
    if np.ndim(y) == 0:
        return float(out[0])
    return out.reshape(yy.shape)


def moranian_slope(x: float) -> float:
    """``u_x'(0) = 6 P'_{L_x}(2 omega_x / 3)``."""
    sol = solve_period_for_target(float(x))
    _, dp = wp_eval(sol.lattice, sol.alpha_x)
    return 6.0 * dp.real


@dataclass(frozen=True)
class AsymptoticConstants:
    c1: float
    C1: float
    C2_of_s: dict[float, float]
    C3: float
    C4_of_s: dict[float, float]
    sigma2: float = 1.0


def asymptotic_constants(dist: OffspringDistribution, s_grid: Sequence[float] = ()) -> AsymptoticConstants:
    """``c1``, ``C1``, ``C2(s)`` from the ``x = 1`` lattice; ``C3``, ``C4`` divide by ``sigma^2``."""
    for s in s_grid:
        if not 0.0 < s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {s!r}")
    sol = solve_period_for_target(1.0)
    lat = sol.lattice
    c1 = sol.omega_x / 3.0
    _, dp = wp_eval(lat, sol.alpha_x)
    big_c1 = 6.0 * c1**3 * dp.real
    c2 = {}
    for s in s_grid:
        p, _ = wp_eval(lat, sol.alpha_x + s * c1)
        c2[float(s)] = 6.0 * c1**2 * p.real
    sig2 = dist.sigma2
    return AsymptoticConstants(
        c1=c1,
        C1=big_c1,
        C2_of_s=c2,
        C3=big_c1 / sig2,
        C4_of_s={s: v / sig2 for s, v in c2.items()},
        sigma2=sig2,
    )


def moranian_asymptotic_constants(s_grid: Sequence[float] = ()) -> AsymptoticConstants:
    return asymptotic_constants(MORANIAN, s_grid)


# --- shooting -----------------------------------------------------------------


def _horner(coef: tuple[float, ...]):
    rev = coef[::-1]

    def f(z):
        acc = 0.0
        for c in rev:
            acc = acc * z + c
        return acc

    return f


def _integrate_slope(h, x: float, s0: float, dense: bool = False):
    def rhs(_t, v):
        return (v[1], h(v[0]))

    def overshoot(_t, v):
        return v[0] - 1.0

    overshoot.terminal = True
    overshoot.direction = 1.0
    sol = integrate.solve_ivp(
        rhs,
        (0.0, x),
        (0.0, s0),
        method="DOP853",
        rtol=SHOOT_RTOL,
        atol=SHOOT_ATOL,
        events=None if dense else overshoot,
        dense_output=dense,
    )
    if sol.t.size > MAX_STEPS:
        raise StiffnessError(f"shooting needed {sol.t.size} steps")
    if sol.status < 0:
        raise StiffnessError(sol.message)
    return sol


def _terminal_miss(h, x: float, s0: float) -> float:
    # u(x; s0) - 1, or the distance still to go when u reaches 1 early;
    # both pieces are continuous and increasing in s0
    sol = _integrate_slope(h, x, s0)
    if sol.status == 1 and sol.t_events[0].size:
        return x - float(sol.t_events[0][0])
    return float(sol.y[0, -1]) - 1.0


def shooting_slope(dist: OffspringDistribution, x: float) -> float:
    """Initial slope ``u_x'(0)`` of the hitting profile, by shooting."""
    if not x > 0.0:
        raise DomainError(f"target x must be positive, got {x!r}")
    h = _horner(tuple(dist.h_poly.coef))

    def f(ls):
        return _terminal_miss(h, x, math.exp(ls))

    lo, hi = math.log(SLOPE_LO), math.log(SLOPE_HI)
    flo, fhi = f(lo), f(hi)
    if not (flo < 0.0 < fhi):
        raise ShootingBracketError(
            f"no slope in [{SLOPE_LO}, {SLOPE_HI}] brackets u(x)=1 at x={x}"
        )
    ls, res = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500, full_output=True)
    if not res.converged:
        raise ConvergenceError("shooting root finding did not converge")
    return math.exp(ls)


@dataclass(frozen=True)
class HitProfile:
    x: float
    dist: OffspringDistribution
    y: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    slope: float = math.nan
    period: PeriodSolution | None = None
    method: str = "shooting"

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.y.tolist(), self.values.tolist()))


def profile_grid(x: float, n: int = 512, n_layer: int = 32) -> np.ndarray:
    """Uniform grid plus geometric refinement toward both ends."""
    base = np.linspace(0.0, x, n)
    step = x / (n - 1)
    layer = step * np.geomspace(1e-6, 1.0, n_layer, endpoint=False)
    return np.unique(np.concatenate([base, layer, x - layer]))


def general_hit_profile(dist: OffspringDistribution, x: float, y=None) -> HitProfile:
    ys = profile_grid(x) if y is None else np.atleast_1d(_clamp_y(x, y))
    s0 = shooting_slope(dist, x)
    h = _horner(tuple(dist.h_poly.coef))
    sol = _integrate_slope(h, x, s0, dense=True)
    vals = np.clip(sol.sol(ys)[0], 0.0, 1.0)
    vals[ys <= 0.0] = 0.0
    vals[ys >= x] = 1.0
    return HitProfile(float(x), dist, ys, vals, s0)


def moranian_hit_profile(x: float, y=None) -> HitProfile:
    ys = profile_grid(x) if y is None else np.atleast_1d(_clamp_y(x, y))
    vals = np.atleast_1d(moranian_hit_prob(x, ys))
    return HitProfile(
        float(x), MORANIAN, ys, vals, moranian_slope(x), solve_period_for_target(float(x)), "elliptic"
    )


def general_hit_prob(dist: OffspringDistribution, x: float, y):
    """``P^y(M >= x)`` by shooting on ``u'' = h(u)``; scalar or array ``y``."""
    yy = _clamp_y(x, y)
    prof = general_hit_profile(dist, x, yy)
    if np.ndim(y) == 0:
        return float(prof.values[0])
    return prof.values.reshape(yy.shape)


# --- first-integral inversion -----------------------------------------------
#
# Every monotone solution of v'' = h(v) that decays to 0 satisfies
# v' = -sqrt(kappa2(v)).  With q = t^(-1/2) the travel "time" between two
# levels becomes  int I(q) dq,  I(q) = 2 / sqrt(P(q^-2)),  P = kappa2 / t^3,
# which is smooth and bounded (I -> sqrt(6)/sigma as q -> inf).

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class _Integrand:
    def __init__(self, dist: OffspringDistribution, roots: Sequence[complex] | None = None):
        # roots=None: real mode on (0, 1]; otherwise the zeros of P for the complex branch
        self.poly = dist.kappa2_reduced
        self.p0 = float(self.poly.coef[0])
        self.roots = np.asarray(roots if roots is not None else (), dtype=complex)
        # I(q) is analytic for |q| > rho
        self.rho = float(np.max(np.abs(self.roots) ** -0.5)) if self.roots.size else 0.0

    def sqrt_p(self, t):
        if np.iscomplexobj(t):
            # branch continuous from the positive real axis, valid for |t| < min|r|
            out = np.full(np.shape(t), math.sqrt(self.p0), dtype=complex)
            for r in self.roots:
                out = out * np.sqrt(1.0 - t / r)
            return out
        return np.sqrt(self.poly(t))

    def __call__(self, q):
        return 2.0 / self.sqrt_p(1.0 / (q * q))

    def integral(self, qa, qb):
        span = qb - qa
        if span == 0:
            return 0.0 * span
        clear = min(abs(qa), abs(qb)) - self.rho
        if clear <= 0.0:
            raise InversionFailure("integration path leaves the region where kappa2 is zero-free")
        panel = 0.5 * max(clear, 1e-3)
        n = min(int(math.ceil(abs(span) / panel)), 100_000)
        edges = qa + span * np.linspace(0.0, 1.0, n + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        halves = 0.5 * (edges[1:] - edges[:-1])
        nodes = mids[:, None] + halves[:, None] * _GL_X[None, :]
        vals = self(nodes)
        return np.sum(vals * _GL_W[None, :] * halves[:, None])


def invert_first_integral(dist: OffspringDistribution, z, y: float, roots: Sequence[complex] | None = None):
    """Solve ``int_w^z dt / sqrt(kappa2(t)) = y`` for ``w``.

    ``z`` real in ``(0, 1]`` or complex with ``|z| < 2``; ``y >= 0``.  Newton
    iteration runs on ``q = w^(-1/2)``, where the equation is nearly linear.
    """
    if y < 0.0:
        raise DomainError("distance must be nonnegative")
    if y == 0.0:
        return z
    complex_path = np.iscomplexobj(z) and complex(z).imag != 0.0
    if not complex_path:
        z = float(np.real(z))
        if not z > 0.0:
            raise DomainError("real level must be positive")
    if complex_path:
        if roots is None:
            roots = dist.kappa2_reduced.roots() if dist.kappa2_reduced.degree() > 0 else ()
        integrand = _Integrand(dist, roots)
    else:
        integrand = _Integrand(dist)
    qz = (complex(z) ** -0.5) if complex_path else z**-0.5
    q = qz + y * math.sqrt(integrand.p0) / 2.0
    resid = integrand.integral(qz, q) - y
    for _ in range(100):
        step = resid / integrand(q)
        damp = 1.0
        while True:
            q_new = q - damp * step
            r_new = resid + integrand.integral(q, q_new)
            if abs(r_new) <= abs(resid) or damp < 1e-6:
                break
            damp *= 0.5
        q, resid = q_new, r_new
        if abs(damp * step) <= 1e-15 * abs(q) or resid == 0:
            return 1.0 / (q * q)
    if abs(resid) <= 1e-12 * max(1.0, y):
        return 1.0 / (q * q)
    raise InversionFailure(f"Newton on the first integral did not converge (residual {resid!r})")


def first_integral_length(dist: OffspringDistribution, lo: float, hi: float) -> float:
    """``int_lo^hi dv / sqrt(kappa2(v))`` for ``0 < lo <= hi``."""
    if not 0.0 < lo <= hi:
        raise DomainError("need 0 < lo <= hi")
    integrand = _Integrand(dist)
    return float(integrand.integral(hi**-0.5, lo**-0.5))


def no_kill_reach_prob(dist: OffspringDistribution, t: float) -> float:
    """``w_inf(t)``: chance that BBM without killing started at 0 ever reaches ``t``."""
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    if t == 0.0:
        return 1.0
    return float(invert_first_integral(dist, 1.0, float(t)))


def moranian_no_kill_reach_prob(t):
    return 6.0 / (np.asarray(t, dtype=float) + SQRT6) ** 2


# --- pinching ---------------------------------------------------------------


def _quadratic_bvp(a: float, length: float, top: float) -> AehLattice:
    # v'' = a v^2, v(0) = 0, v(length) = top  <=>  v = (6/a) P(y + 2 Omega/3)
    return make_aeh_lattice(solve_g3_for_length(length, a * top / 6.0))


@dataclass(frozen=True)
class PinchBounds:
    x: float
    delta: float
    a_plus: float
    a_minus: float
    eps: float
    t_eps: float
    eta: float
    lattice_plus: AehLattice = field(repr=False)
    lattice_minus: AehLattice = field(repr=False)

    @property
    def length(self) -> float:
        return self.x - self.t_eps

    def _eval(self, lat: AehLattice, a: float, y):
        yy = np.atleast_1d(np.asarray(y, dtype=float))
        if np.any(yy < -CLAMP_TOL) or np.any(yy > self.length + CLAMP_TOL):
            raise DomainError(f"bounds live on [0, {self.length}]")
        yy = np.clip(yy, 0.0, self.length)
        out = np.zeros_like(yy)
        inner = yy > 0.0
        if np.any(inner):
            p, _ = wp_eval(lat, yy[inner] + 2.0 * lat.omega_real / 3.0)
            out[inner] = 6.0 * p.real / a
        # boundary value is eta by construction; don't carry the solver's roundoff there
        out[yy >= self.length] = self.eta
        return float(out[0]) if np.ndim(y) == 0 else out

    def lower(self, y):
        return self._eval(self.lattice_plus, self.a_plus, y)

    def upper(self, y):
        return self._eval(self.lattice_minus, self.a_minus, y)


def pinch_epsilon(dist: OffspringDistribution, delta: float) -> float:
    """Largest ``eps <= 1`` with ``|h(z) - sigma^2 z^2| <= delta sigma^2 z^2`` on ``[0, eps]``.

    Uses ``0 <= sigma^2 z^2 - h(z) <= Psi'''(1) z^3 / 3``.
    """
    third = dist.factorial_moment3
    if third <= 0.0:
        return 1.0
    return min(1.0, 3.0 * delta * dist.sigma2 / third)


def pinch_bounds(dist: OffspringDistribution, x: float, delta: float) -> PinchBounds:
    """Comparison bounds ``u^+ <= u_x <= u^-`` on ``[0, x - t_eps]``.

    ``u^{+-}`` solve ``v'' = sigma^2 (1 +- delta) v^2`` with the same boundary
    values as ``u_x`` at ``0`` and at ``x - t_eps``, where ``w_inf(t_eps) = eps``.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    eps = pinch_epsilon(dist, delta)
    t_eps = first_integral_length(dist, eps, 1.0) if eps < 1.0 else 0.0
    length = x - t_eps
    if not length > 0.0:
        raise RegionError(f"x={x} is below the cutoff t_eps={t_eps:.6g}")
    eta = general_hit_prob(dist, x, length) if t_eps > 0.0 else 1.0
    if eta > eps * (1.0 + 1e-12):
        raise RegionError(f"u_x(x - t_eps) = {eta:.6g} exceeds eps = {eps:.6g}")
    a_plus = dist.sigma2 * (1.0 + delta)
    a_minus = dist.sigma2 * (1.0 - delta)
    return PinchBounds(
        float(x),
        float(delta),
        a_plus,
        a_minus,
        eps,
        t_eps,
        eta,
        _quadratic_bvp(a_plus, length, eta),
        _quadratic_bvp(a_minus, length, eta),
    )
