"""Law of the number ``N`` of particles killed at 0.

``H(y, s) = sum_{k>=1} P^y(N >= k) s^k`` and ``phi(y, s) = E^y s^N`` are tied by
``phi = 1 + H (s - 1) / s``.  With ``u(y, z) = 1 - phi(y, 1 - z)`` the function
``u(., z)`` decays from ``z`` to 0 along ``u'' = h(u)``, so

    int_{u(y,z)}^z dt / sqrt(kappa2(t)) = y.

For the Moranian law this integrates in closed form,
``H = s (1 + c sqrt(1 - s))^-2`` with ``c = y / sqrt 6``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .elliptic import SQRT6
from .errors import DomainError, HypothesisViolated, NearSingularParameter, PrecisionLoss
from .hitting import invert_first_integral
from .offspring import MORANIAN, OffspringDistribution, fo_hypothesis_check

SQRT_6PI = math.sqrt(6.0 * math.pi)
NEAR_SINGULAR = 0.05
MAX_K = 10_000
SERIES_RTOL = 1e-9
GF_RADIUS = 0.9
GF_ACCURACY = 4e-15  # ~10x the measured error of single general_gf values
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class MoranianC:
    c: float

    @classmethod
    def from_y(cls, y: float) -> "MoranianC":
        if not y > 0.0:
            raise DomainError("y must be positive")
        return cls(y / SQRT6)


@dataclass(frozen=True)
class KilledTail:
    """Tails ``P^y(N >= k)`` and masses ``P^y(N = k)`` for ``k = 1..k_max``."""

    y: float
    dist: OffspringDistribution
    k: np.ndarray = field(repr=False)
    tail: np.ndarray = field(repr=False)
    pmf: np.ndarray = field(repr=False)
    p0: float = math.nan
    method: str = "series"
    error: np.ndarray | None = field(default=None, repr=False)

    def tail_at(self, k: int) -> float:
        return float(self.tail[k - 1])

    def pmf_at(self, k: int) -> float:
        return self.p0 if k == 0 else float(self.pmf[k - 1])

    def mean_partial(self) -> float:
        """``sum_{k <= k_max} k P(N = k)``."""
        return float(np.dot(self.k, self.pmf))

    def k_tail_peak(self) -> int:
        """Argmax of ``k P(N >= k)`` over ``1..k_max``; 1 iff the sequence never increases."""
        return int(np.argmax(self.k * self.tail)) + 1


def _check_s(s):
    s_arr = np.asarray(s)
    if np.any(np.iscomplex(s_arr)) or np.any(s_arr < 0.0) or np.any(s_arr > 1.0):
        raise DomainError("s must lie in [0, 1]")
    return s_arr.astype(float)


def moranian_gf(y: float, s):
    """``(H(y, s), phi(y, s))`` for the Moranian law; ``s`` in ``[0, 1]``."""
    if y < 0.0:
        raise DomainError("y must be nonnegative")
    ss = _check_s(s)
    root = np.sqrt(1.0 - ss)
    c = y / SQRT6
    big_h = ss / (1.0 + c * root) ** 2
    phi = 1.0 - 6.0 * (1.0 - ss) / (y * root + SQRT6) ** 2
    if np.ndim(s) == 0:
        return float(big_h), float(phi)
    return big_h, phi


def _exact_dps(c: float, k: int) -> int:
    gap = abs(c * c - 1.0)
    ratio = c * c / gap
    digits = k * max(0.0, math.log10(ratio)) + 4.0 * math.log10(k + 1) - min(0.0, math.log10(gap))
    return int(25 + digits)


def moranian_tail_exact(y: float, k: int) -> float:
    """``P^y(N >= k) = A_k + B_k`` for the Moranian law.

    ``A_k = (2k - 1 + c^2) c^(2k-2) / (c^2-1)^(k+1)`` and
    ``B_k = 2c sum_{i+j=k} t_i j c^(2j-2) / (c^2-1)^(j+1)`` with
    ``t_i = (2i-3)!! / (2^i i!)``, i.e. ``t_0 = -1``, ``t_1 = 1/2``.
    The terms cancel heavily, so the sum runs in mpmath at a working
    precision chosen from ``k`` and ``c``.
    """
    k = int(k)
    if k < 1:
        raise DomainError("k must be a positive integer")
    c_f = MoranianC.from_y(y).c
    if abs(c_f * c_f - 1.0) < NEAR_SINGULAR:
        raise NearSingularParameter(f"|c^2 - 1| = {abs(c_f * c_f - 1.0):.3g} < {NEAR_SINGULAR}; use the series")
    with mpmath.workdps(_exact_dps(c_f, k)):
        c = mpmath.mpf(y) / mpmath.sqrt(6)
        c2 = c * c
        d = c2 - 1
        # A_k = alpha_{k-1} + beta_{k-1} from the I + III part of the expansion
        a_k = (2 * k - 1 + c2) * c2 ** (k - 1) / d ** (k + 1)
        # alpha_j = j c^(2j-2) / d^(j+1) = j rho^(j-1) / d^2
        rho = c2 / d
        t = [mpmath.mpf(-1)]
        for i in range(1, k):
            t.append(t[-1] * (2 * i - 3) / (2 * i))
        acc = mpmath.mpf(0)
        power = mpmath.mpf(1)
        for j in range(1, k + 1):
            acc += t[k - j] * j * power
            power *= rho
        b_k = 2 * c * acc / (d * d)
        return float(a_k + b_k)


def _sqrt_one_minus_coeffs(n: int) -> np.ndarray:
    # (1 - s)^(1/2) = sum b_i s^i
    b = np.empty(n)
    b[0] = 1.0
    for i in range(1, n):
        b[i] = b[i - 1] * (i - 1.5) / i
    return b


def _moranian_series(y: float, n: int) -> np.ndarray:
    """First ``n`` tails ``P^y(N >= k)``, ``k = 1..n``."""
    c = y / SQRT6
    neg_b = -_sqrt_one_minus_coeffs(n)[1:]  # all positive
    # r = 1 / (1 + c sqrt(1 - s)); every term of the recurrence is positive
    r = np.empty(n)
    r[0] = 1.0 / (1.0 + c)
    scale = c / (1.0 + c)
    for m in range(1, n):
        r[m] = scale * np.dot(neg_b[:m], r[m - 1 :: -1])
    return np.convolve(r, r)[:n]


def _cauchy_coeffs(values: np.ndarray, radius: float, n_coef: int) -> np.ndarray:
    n = values.size
    coef = np.fft.fft(values) / n
    return (coef[:n_coef] / radius ** np.arange(n_coef)).real


def _gf_nodes(k_max: int) -> tuple[int, float]:
    n = max(512, 1 << int(math.ceil(math.log2(4 * (k_max + 2)))))
    radius = min(GF_RADIUS, EPS ** (1.0 / (n + k_max)))
    return n, radius


def _general_series(dist: OffspringDistribution, y: float, n_coef: int):
    n, radius = _gf_nodes(n_coef)
    theta = 2.0 * math.pi * np.arange(n // 2 + 1) / n
    s = radius * np.exp(1j * theta)
    half = np.array([general_gf(dist, y, complex(v))[0] for v in s])
    # H has real coefficients: H(conj s) = conj H(s)
    vals = np.concatenate([half, np.conj(half[-2:0:-1])])
    coef = _cauchy_coeffs(vals, radius, n_coef + 1)
    hmax = float(np.max(np.abs(vals)))
    m = np.arange(n_coef + 1)
    # node errors average out over the transform (~1/sqrt(n)); aliasing adds
    # sum_j c_(m + j n) r^(j n) <= r^n / (1 - r^n) since every |c| <= 1
    err = (GF_ACCURACY * hmax / math.sqrt(n) + radius**n / (1.0 - radius**n)) / radius**m
    return coef[1:], err[1:]


def tail_from_series(y: float, k_max: int, dist: OffspringDistribution = MORANIAN, *, method: str | None = None) -> KilledTail:
    """Taylor coefficients of ``H(y, .)`` at 0.

    Moranian law: exact recurrence from the closed form.  Other laws: a
    discrete Cauchy transform of :func:`general_gf` on ``|s| = r <= 0.9``,
    with a per-coefficient error bound; :class:`PrecisionLoss` is raised when
    that bound exceeds ``1e-9`` of the coefficient.  ``method="cauchy"`` forces
    the transform for the Moranian law as well.
    """
    if not y > 0.0:
        raise DomainError("y must be positive")
    k_max = int(k_max)
    if not 1 <= k_max <= MAX_K:
        raise DomainError(f"k_max must lie in [1, {MAX_K}]")
    use_closed = dist.is_moranian and method != "cauchy"
    if use_closed:
        tail = _moranian_series(y, k_max + 1)
        err = 4.0 * EPS * np.arange(1, k_max + 2) * tail
    else:
        tail, err = _general_series(dist, y, k_max + 1)
        bad = np.nonzero(err > SERIES_RTOL * np.abs(tail))[0]
        if bad.size:
            k_bad = int(bad[0]) + 1
            raise PrecisionLoss(
                f"coefficient {k_bad}: error bound {err[bad[0]]:.2e} vs value {tail[bad[0]]:.2e}",
                k_bad,
            )
    ks = np.arange(1, k_max + 1)
    pmf = tail[:-1] - tail[1:]
    return KilledTail(
        float(y), dist, ks, tail[:-1].copy(), pmf, float(1.0 - tail[0]), "series", err[:-1].copy()
    )


def moranian_tail(y: float, k: int) -> tuple[float, str]:
    """``P^y(N >= k)`` from the exact formula, or the series near ``c = 1``."""
    try:
        return moranian_tail_exact(y, k), "exact_moranian"
    except NearSingularParameter:
        return tail_from_series(y, k).tail_at(k), "series"


def _hypothesis_roots(dist: OffspringDistribution):
    key = "fo_report"
    if key not in dist._cache:
        dist._cache[key] = fo_hypothesis_check(dist)
    rep = dist._cache[key]
    if not rep.passes:
        raise HypothesisViolated(f"kappa vanishes in the closed disk of radius 2 at {rep.kappa_zeros_in_disk}")
    return rep.all_nonzero_roots


def general_gf(dist: OffspringDistribution, y: float, s) -> tuple[complex, complex]:
    """``(H(y, s), phi(y, s))`` for any law; real ``s`` in ``[0, 1]`` or ``|s| <= 0.9``.

    Complex arguments need the zero-free hypothesis on ``kappa`` and raise
    :class:`HypothesisViolated` otherwise.
    """
    if y < 0.0:
        raise DomainError("y must be nonnegative")
    s = complex(s)
    if s.imag == 0.0:
        sr = s.real
        if not 0.0 <= sr <= 1.0:
            if abs(sr) > GF_RADIUS:
                raise DomainError("real s must lie in [0, 1] or in [-0.9, 0]")
        if sr == 1.0:
            return 1.0 + 0j, 1.0 + 0j
        if y == 0.0:
            return s, s
        if sr >= 0.0:
            u = float(invert_first_integral(dist, 1.0 - sr, y))
            return complex(sr * u / (1.0 - sr)), complex(1.0 - u)
    if abs(s) > GF_RADIUS + 1e-12:
        raise DomainError("complex s must satisfy |s| <= 0.9")
    if y == 0.0:
        return s, s
    roots = _hypothesis_roots(dist)
    u = complex(invert_first_integral(dist, 1.0 - s, y, roots))
    return s * u / (1.0 - s), 1.0 - u


def killed_asymptotic_constants(dist: OffspringDistribution) -> dict[str, float]:
    """``C5, C6`` (Moranian, sigma = 1) and ``C7 = sigma C5``, ``C8 = sigma C6``."""
    c5 = 1.0 / SQRT_6PI
    c6 = 1.5 / SQRT_6PI
    return {"C5": c5, "C6": c6, "C7": dist.sigma * c5, "C8": dist.sigma * c6}


def expected_killed(dist: OffspringDistribution, y: float) -> float:
    """``E^y[N]``, which is 1 for every critical law and every ``y > 0``."""
    if not y > 0.0:
        raise DomainError("y must be positive")
    return 1.0


def expected_killed_partial(dist: OffspringDistribution, y: float, k_max: int) -> float:
    """Numerical check of :func:`expected_killed`: ``sum_{k <= k_max} k P(N = k)``."""
    return tail_from_series(y, k_max, dist).mean_partial()
