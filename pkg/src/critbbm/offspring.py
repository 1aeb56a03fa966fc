"""Critical offspring laws and the polynomials derived from them.

An offspring law is stored as its probabilities ``p_0..p_m``.  Everything
downstream works with three polynomials:

* ``Psi(z) = sum p_k z^k``, the probability generating function;
* ``h(z) = 2 [Psi(1 - z) - (1 - z)]``, the forcing term of ``u'' = h(u)``;
* ``kappa2(z) = 2 int_0^z h``, so that first integrals read ``(u')^2 = kappa2(u)``.

``kappa(z) = int_0^z h`` (no factor 2) is also exposed; it only matters for
locating zeros, where the factor is irrelevant.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import Degenerate, NotCritical, NotProbability, RootFindingFailure

TOL = 1e-12
CONFIG_TOL = 1e-9

# radius of the closed disk in which kappa must be zero-free (apart from 0)
FO_RADIUS = 2.0
WINDING_NODES = 4096
SPLIT_RADIUS = 4.0


@dataclass(frozen=True)
class OffspringDistribution:
    """Validated critical offspring law with finite support."""

    probs: tuple[float, ...]
    sigma2: float
    third_moment: float

    # polynomial objects are derived data; keep them out of eq/hash/repr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def is_moranian(self) -> bool:
        p = self.probs
        return len(p) == 3 and abs(p[0] - 0.5) < TOL and p[1] < TOL and abs(p[2] - 0.5) < TOL

    @property
    def factorial_moment3(self) -> float:
        """``Psi'''(1) = E[L(L-1)(L-2)]``."""
        return self.third_moment - 3.0 * (self.sigma2 + 1.0) + 2.0

    def _poly(self, name: str) -> Polynomial:
        if name not in self._cache:
            psi = Polynomial(self.probs)
            one_minus = Polynomial([1.0, -1.0])
            h = 2.0 * (psi(one_minus) - one_minus)
            coef = np.array(h.coef, dtype=float)
            coef = np.concatenate([coef, np.zeros(max(0, 3 - coef.size))])
            # h(0) = h'(0) = 0 exactly for a critical law
            coef[0] = 0.0
            coef[1] = 0.0
            h = Polynomial(coef)
            self._cache["psi"] = psi
            self._cache["h"] = h
            self._cache["kappa"] = h.integ()
            self._cache["kappa2"] = 2.0 * h.integ()
        return self._cache[name]

    @property
    def psi_poly(self) -> Polynomial:
        return self._poly("psi")

    @property
    def h_poly(self) -> Polynomial:
        return self._poly("h")

    @property
    def kappa_poly(self) -> Polynomial:
        return self._poly("kappa")

    @property
    def kappa2_poly(self) -> Polynomial:
        return self._poly("kappa2")

    @cached_property
    def kappa2_reduced(self) -> Polynomial:
        """``kappa2(z) / z^3``; its value at 0 is ``2 sigma^2 / 3``."""
        return Polynomial(self.kappa2_poly.coef[3:])

    def to_json(self) -> str:
        return json.dumps(list(self.probs))


def make_offspring(probs: Sequence[float], *, normalize: bool = False) -> OffspringDistribution:
    """Validate ``probs`` and return an :class:`OffspringDistribution`.

    With ``normalize=True`` (used for values read from config files) inputs
    within ``1e-9`` of a valid critical law are projected onto it; anything
    further off is rejected.
    """
    try:
        p = np.array([float(v) for v in probs], dtype=float)
    except (TypeError, ValueError) as exc:
        raise NotProbability(f"offspring probabilities must be numeric: {probs!r}") from exc
    if p.ndim != 1 or p.size == 0:
        raise NotProbability("offspring law must be a non-empty list")
    if not np.all(np.isfinite(p)):
        raise NotProbability("offspring probabilities must be finite")
    tol = CONFIG_TOL if normalize else TOL
    if np.any(p < -tol):
        raise NotProbability(f"negative probability in {p.tolist()}")
    p = np.clip(p, 0.0, None)
    while p.size > 1 and p[-1] == 0.0:
        p = p[:-1]
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise NotProbability(f"probabilities sum to {total!r}, not 1")
    k = np.arange(p.size, dtype=float)
    mean = float(k @ p)
    if abs(mean - 1.0) > tol:
        raise NotCritical(f"offspring mean is {mean!r}; a critical law needs mean 1")
    if normalize and (abs(total - 1.0) > 0.0 or abs(mean - 1.0) > 0.0):
        p = _project_critical(p)
        k = np.arange(p.size, dtype=float)
    sigma2 = float((k * (k - 1.0)) @ p)
    if sigma2 <= TOL:
        raise Degenerate("offspring variance is zero (p_1 = 1)")
    third = float((k**3) @ p)
    return OffspringDistribution(tuple(float(v) for v in p), sigma2, third)


def _project_critical(p: np.ndarray) -> np.ndarray:
    # least-squares correction onto {sum p = 1, sum k p = 1}
    k = np.arange(p.size, dtype=float)
    a = np.vstack([np.ones_like(k), k])
    resid = np.array([1.0 - p.sum(), 1.0 - k @ p])
    corr = a.T @ np.linalg.solve(a @ a.T, resid)
    q = p + corr
    if np.any(q < 0):
        raise NotProbability("cannot normalize offspring law without negative entries")
    return q


MORANIAN = make_offspring([0.5, 0.0, 0.5])


def pgf_eval(dist: OffspringDistribution, z):
    """``Psi(z) = sum_k p_k z^k`` (works on scalars and arrays, real or complex)."""
    return dist.psi_poly(z)


def forcing_h(dist: OffspringDistribution, z):
    return dist.h_poly(z)


def kappa2(dist: OffspringDistribution, z):
    """``2 int_0^z h(t) dt`` from the exact polynomial antiderivative."""
    return dist.kappa2_poly(z)


def kappa(dist: OffspringDistribution, z):
    """``int_0^z h(t) dt`` (factor-1 convention)."""
    return dist.kappa_poly(z)


@dataclass(frozen=True)
class HypothesisReport:
    analytic_radius_ok: bool
    kappa_zeros_in_disk: tuple[complex, ...]
    passes: bool
    winding_count: int = 0
    all_nonzero_roots: tuple[complex, ...] = ()


def _winding_number(poly: Polynomial, radius: float, nodes: int = WINDING_NODES) -> int:
    theta = np.linspace(0.0, 2.0 * math.pi, nodes, endpoint=False)
    vals = poly(radius * np.exp(1j * theta))
    if np.any(np.abs(vals) == 0.0):
        raise RootFindingFailure("polynomial vanishes on the winding contour")
    phase = np.angle(np.concatenate([vals, vals[:1]]))
    steps = np.diff(phase)
    steps = (steps + math.pi) % (2.0 * math.pi) - math.pi
    return int(round(steps.sum() / (2.0 * math.pi)))


def _polish(poly: Polynomial, roots: np.ndarray) -> np.ndarray:
    dpoly = poly.deriv()
    out = roots.astype(complex)
    for _ in range(50):
        step = poly(out) / dpoly(out)
        out = out - step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(1.0, np.abs(out))):
            break
    return out


def fo_hypothesis_check(dist: OffspringDistribution) -> HypothesisReport:
    """Check that ``kappa`` has no zeros in ``0 < |z| <= 2``.

    Roots come from companion-matrix eigenvalues (Newton-polished) and are
    cross-checked against an argument-principle count on a circle just
    outside radius 2.
    """
    reduced = Polynomial(dist.kappa_poly.coef[3:])
    if reduced.degree() == 0:
        return HypothesisReport(True, (), True, 0, ())
    # roots beyond |z| = 4 come from the reversed polynomial as w = 1/z, so a
    # tiny top coefficient cannot overflow; a root past the float range is inf
    rev = Polynomial(reduced.coef[::-1])
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        raw = reduced.roots()
    z_small = raw[np.abs(raw) <= SPLIT_RADIUS]
    w_raw = rev.roots()
    w = w_raw[np.abs(w_raw) < 1.0 / SPLIT_RADIUS]
    if z_small.size + w.size != reduced.degree():
        # a root straddles the split; sizes are moderate so 1/z is safe
        if not np.all(np.isfinite(raw)):
            raise RootFindingFailure("companion roots disagree with the reversed polynomial")
        z_small = raw[np.abs(raw) <= 1.0]
        w = 1.0 / raw[np.abs(raw) > 1.0]
    z_small = _polish(reduced, z_small)
    w = _polish(rev, w)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        z_big = np.where(w == 0.0, np.inf, 1.0 / w)
    roots = np.concatenate([z_small, np.where(np.isfinite(z_big), z_big, np.inf)]).astype(complex)
    for poly, pts in ((reduced, z_small), (rev, w)):
        scale = np.max(np.abs(poly.coef))
        powers = np.arange(poly.coef.size)
        for r in pts:
            # certify: residual small relative to the polynomial's size at |r|
            size = float(np.sum(np.abs(poly.coef) * np.abs(r) ** powers))
            if not abs(poly(r)) <= 1e-10 * max(size, scale):
                raise RootFindingFailure(f"root {r} not certified to 1e-10")
    mods = np.abs(roots)
    inside = tuple(complex(r) for r in roots[mods <= FO_RADIUS])
    # contour radius strictly between 2 and the next root outside
    outside = mods[mods > FO_RADIUS]
    rad = FO_RADIUS * (1.0 + 1e-3)
    if outside.size:
        rad = min(rad, 0.5 * (FO_RADIUS + outside.min()))
    near = np.abs(mods - rad) < 1e-6
    if np.any(near):
        raise RootFindingFailure("root too close to the winding contour")
    count = _winding_number(reduced, rad)
    if count != len(inside):
        raise RootFindingFailure(
            f"companion roots give {len(inside)} zeros in the disk, winding count gives {count}"
        )
    return HypothesisReport(
        analytic_radius_ok=True,
        kappa_zeros_in_disk=inside,
        passes=not inside,
        winding_count=count,
        all_nonzero_roots=tuple(complex(r) for r in roots),
    )


def load_offspring(source: str) -> OffspringDistribution:
    """Parse an inline JSON array or a path to a JSON file holding one."""
    text = source.strip()
    if not text.startswith("["):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    data = json.loads(text)
    if not isinstance(data, list):
        raise NotProbability("offspring JSON must be an array of probabilities")
    return make_offspring(data, normalize=True)
