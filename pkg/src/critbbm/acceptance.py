"""Acceptance checks shared by ``critbbm verify`` and the test suite.

Each check returns a :class:`CheckResult` with the measured values, the
tolerance it was held to and whether it passed (including its time budget).
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import elliptic, hitting, killed, simulate
from .offspring import MORANIAN, OffspringDistribution, make_offspring

HALF_VARIANCE_LAW = (0.25, 0.5, 0.25)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict
    tolerance: str
    seconds: float = 0.0
    budget: float = math.inf
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{flag}] {self.number:2d} {self.name}: {vals} (tol {self.tolerance}; {self.seconds:.2f}s / {self.budget:g}s)"

    def as_dict(self) -> dict:
        return {
            "check": self.number,
            "name": self.name,
            "passed": self.passed,
            "measured": {k: _round(v) for k, v in self.measured.items()},
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _round(v):
    if isinstance(v, float):
        return float(f"{v:.12g}")
    return v


@dataclass
class SuiteOptions:
    n_runs: int = 100_000
    seed: int = 42
    dt: float = 1e-4
    workers: int = 1
    general: OffspringDistribution = field(default_factory=lambda: make_offspring(HALF_VARIANCE_LAW))


def _timed(number: int, name: str, budget: float, fn: Callable[[], tuple[bool, dict, str]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, measured, tol = fn()
    dt = time.perf_counter() - t0
    within = dt <= budget
    detail = "" if within else f"over time budget ({dt:.2f}s > {budget}s)"
    return CheckResult(number, name, bool(ok and within), measured, tol, dt, budget, detail)


def check_period(opts: SuiteOptions) -> CheckResult:
    def run():
        sol = elliptic.solve_period_for_target.__wrapped__(1.0)
        ok = abs(sol.omega_x - 9.88285) <= 1e-4 and abs(sol.g3_x + 0.023786) <= 1e-5
        return ok, {"omega_1": sol.omega_x, "g3": sol.g3_x}, "omega 1e-4, g3 1e-5"

    return _timed(1, "period numerics", 1.0, run)


def check_constants(opts: SuiteOptions) -> CheckResult:
    def run():
        c = hitting.moranian_asymptotic_constants()
        ok = abs(c.c1 - 3.29428) <= 1e-4 and abs(c.C1 - 33.0822) <= 1e-3
        return ok, {"c1": c.c1, "C1": c.C1}, "c1 1e-4, C1 1e-3"

    return _timed(2, "asymptotic constants", 1.0, run)


def check_exact_vs_series(opts: SuiteOptions) -> CheckResult:
    def run():
        worst = 0.0
        for y in (0.5, 1.0, 2.0, 5.0):
            series = killed.tail_from_series(y, 50)
            for k in range(1, 51):
                exact = killed.moranian_tail_exact(y, k)
                ref = series.tail_at(k)
                worst = max(worst, abs(exact - ref) / abs(ref))
        return worst <= 1e-10, {"max_rel_err": worst}, "1e-10 relative"

    return _timed(3, "exact tail vs series", 5.0, run)


def check_tail_power_law(opts: SuiteOptions) -> CheckResult:
    def run():
        k, y = 10_000, 1.0
        t_k = killed.moranian_tail_exact(y, k)
        t_next = killed.moranian_tail_exact(y, k + 1)
        c5 = 1.0 / killed.SQRT_6PI
        r_tail = k**1.5 * t_k / (y * c5)
        r_pmf = k**2.5 * (t_k - t_next) / (1.5 * y * c5)
        ok = 0.97 <= r_tail <= 1.03 and 0.95 <= r_pmf <= 1.05
        return ok, {"tail_ratio": r_tail, "pmf_ratio": r_pmf}, "tail [0.97,1.03], pmf [0.95,1.05]"

    return _timed(4, "killed tail power law", 10.0, run)


def check_hit_power_law(opts: SuiteOptions) -> CheckResult:
    def run():
        x = 200.0
        c1 = hitting.moranian_asymptotic_constants().C1
        ratio = x**3 * hitting.moranian_hit_prob(x, 1.0) / c1
        return 0.97 <= ratio <= 1.03, {"ratio": ratio}, "[0.97,1.03]"

    return _timed(5, "hitting power law", 2.0, run)


def check_cross_solver(opts: SuiteOptions) -> CheckResult:
    def run():
        worst = 0.0
        for x, y in ((3.0, 1.5), (10.0, 1.0), (10.0, 9.0)):
            a = hitting.general_hit_prob(MORANIAN, x, y)
            b = hitting.moranian_hit_prob(x, y)
            worst = max(worst, abs(a - b))
        return worst <= 1e-7, {"max_abs_diff": worst}, "1e-7"

    return _timed(6, "shooting vs elliptic", 5.0, run)


def check_pinch(opts: SuiteOptions) -> CheckResult:
    def run():
        dist = opts.general
        pb = hitting.pinch_bounds(dist, 50.0, 0.1)
        ys = np.linspace(0.0, pb.length, 50)
        u = hitting.general_hit_prob(dist, 50.0, ys)
        lo, hi = pb.lower(ys), pb.upper(ys)
        n_ok = int(np.sum((lo <= u) & (u <= hi)))
        return n_ok == ys.size, {"points_inside": n_ok, "points": int(ys.size)}, "all grid points"

    return _timed(7, "pinch containment", 10.0, run)


def check_sawyer_fleischman(opts: SuiteOptions) -> CheckResult:
    def run():
        t = 100.0
        ratios = {}
        for label, dist in (("moranian", MORANIAN), ("general", opts.general)):
            w = hitting.no_kill_reach_prob(dist, t)
            ratios[f"ratio_{label}"] = dist.sigma2 * t * t * w / 6.0
        closed = max(
            abs(hitting.no_kill_reach_prob(MORANIAN, s) - 6.0 / (s + elliptic.SQRT6) ** 2) for s in (0.0, 1.0, 10.0, 100.0)
        )
        ok = all(0.95 <= r <= 1.05 for r in ratios.values()) and closed <= 1e-8
        return ok, {**ratios, "closed_form_err": closed}, "ratios [0.95,1.05], closed form 1e-8"

    return _timed(8, "no-kill reach asymptotics", 2.0, run)


def mc_concordance(opts: SuiteOptions) -> tuple[bool, dict, str]:
    cfg = simulate.SnakeConfig(1.0, MORANIAN, opts.dt, seed=opts.seed, upper_record=3.0)
    batch = simulate.run_batch(cfg, opts.n_runs, opts.workers)
    targets = {
        "E[N]": (batch.estimate("mean"), 1.0),
        "P(N>=1)": (batch.estimate("tail", 1), 6.0 / (1.0 + elliptic.SQRT6) ** 2),
        "P(N>=5)": (batch.estimate("tail", 5), killed.moranian_tail_exact(1.0, 5)),
        "P(M>=3)": (batch.estimate("hit", 3.0), hitting.moranian_hit_prob(3.0, 1.0)),
    }
    measured = {}
    ok = True
    for name, (est, target) in targets.items():
        z = (est.mean - target) / est.std_error
        measured[name] = est.mean
        measured[f"{name} target"] = target
        measured[f"{name} z"] = z
        ok = ok and abs(z) <= 3.0
    measured["n_truncated"] = batch.n_truncated
    return ok, measured, "|z| <= 3 standard errors"


def check_monte_carlo(opts: SuiteOptions) -> CheckResult:
    return _timed(9, "Monte Carlo concordance", 600.0, lambda: mc_concordance(opts))


def check_tauberian(opts: SuiteOptions) -> CheckResult:
    def run():
        m = 10_000
        tail = killed.tail_from_series(1.0, m)
        ratio = float(np.dot(tail.k, tail.tail)) / (2.0 / killed.SQRT_6PI * math.sqrt(m))
        return 0.95 <= ratio <= 1.05, {"ratio": ratio}, "[0.95,1.05]"

    return _timed(10, "Tauberian partial sum", 10.0, run)


def check_singular_expansion(opts: SuiteOptions) -> CheckResult:
    def run():
        dist = opts.general
        s = 1.0 - 1e-6
        big_h, _ = killed.general_gf(dist, 1.0, s)
        ratio = (1.0 - big_h.real) / math.sqrt(1.0 - s) / (2.0 * dist.sigma / elliptic.SQRT6)
        return abs(ratio - 1.0) <= 0.02, {"ratio": ratio}, "2%"

    return _timed(11, "singular expansion", 5.0, run)


def laurent_wp(g3: complex, z: np.ndarray, terms: int = 40) -> np.ndarray:
    """Laurent series of P for ``g2 = 0`` and arbitrary (complex) ``g3``; small ``|z|`` only."""
    kmax = 3 * terms
    c = np.zeros(kmax + 1, dtype=complex)
    c[3] = g3 / 28.0
    for k in range(4, kmax + 1):
        c[k] = 3.0 * np.dot(c[2 : k - 1], c[k - 2 : 1 : -1]) / ((2 * k + 1) * (k - 3))
    z2 = z * z
    acc = np.zeros_like(z)
    for k in range(kmax, 2, -1):
        acc = acc * z2 + c[k]
    return 1.0 / z2 + acc * z2 * z2


def elliptic_invariants(seed: int = 2024, n: int = 100) -> tuple[bool, dict, str]:
    rng = np.random.default_rng(seed)
    lattices = [
        elliptic.solve_period_for_target(1.0).lattice,
        elliptic.lattice_from_period(1.0),
        elliptic.make_aeh_lattice(-rng.uniform(0.01, 10.0)),
    ]
    worst = {"ode": 0.0, "scaling": 0.0, "periodic": 0.0, "zeros": 0.0, "imag": 0.0, "roundtrip": 0.0}
    monotone = True
    for lat in lattices:
        om = lat.omega_real
        e1, e2 = lat.generators
        a, b = rng.uniform(0.0, 1.0, (2, n))
        z = a * e1 + b * e2
        far = np.min(np.abs(z[:, None] - np.array([0.0, e1, e2, e1 + e2])[None, :]), axis=1) > 1e-3 * om
        z = z[far]
        p, dp = elliptic.wp_eval(lat, z)
        scale = np.maximum(1.0, np.abs(4.0 * p**3))
        worst["ode"] = max(worst["ode"], float(np.max(np.abs(dp**2 - 4.0 * p**3 + lat.g3) / scale)))
        pscale = np.maximum(1.0, np.abs(p))
        for gen in (e1, e2, om):
            q, _ = elliptic.wp_eval(lat, z + gen)
            worst["periodic"] = max(worst["periodic"], float(np.max(np.abs(q - p) / pscale)))
        for beta in (2.0, 1.0 / 3.0):
            big = elliptic.lattice_from_period(beta * om)
            q, _ = elliptic.wp_eval(big, beta * z)
            worst["scaling"] = max(worst["scaling"], float(np.max(np.abs(q - p / beta**2) / pscale)))
        # the rotated lattice is no longer anti-equianharmonic: compare with its own Laurent series
        beta = np.exp(1j * math.pi / 6.0)
        small = z[np.abs(z) < 0.25 * om][:20]
        if small.size:
            ps, _ = elliptic.wp_eval(lat, small)
            rot = laurent_wp(lat.g3 / beta**6, beta * small)
            rel = np.abs(rot - ps / beta**2) / np.maximum(1.0, np.abs(ps))
            worst["scaling"] = max(worst["scaling"], float(np.max(rel)))
        zp, _ = elliptic.wp_eval(lat, np.array([om / 3.0, 2.0 * om / 3.0]))
        worst["zeros"] = max(worst["zeros"], float(np.max(np.abs(zp))) * om**2)
        xr = rng.uniform(1e-3, 1.0 - 1e-3, n) * om
        pr, dpr = elliptic.wp_eval(lat, xr)
        im = np.maximum(np.abs(pr.imag) / np.maximum(1.0, np.abs(pr)), np.abs(dpr.imag) / np.maximum(1.0, np.abs(dpr)))
        worst["imag"] = max(worst["imag"], float(np.max(im)))
        grid = np.linspace(2.0 * om / 3.0, om, 202)[1:-1]
        _, dg = elliptic.wp_eval(lat, grid)
        monotone = monotone and bool(np.all(dg.real > 0.0))
        w = rng.uniform(0.2, 5.0, 20) / om**2
        back = np.array([elliptic.wp_inverse_increasing(lat, v) for v in w])
        pw, _ = elliptic.wp_eval(lat, back)
        worst["roundtrip"] = max(worst["roundtrip"], float(np.max(np.abs(pw.real - w) / w)))
    ok = (
        worst["ode"] <= 1e-9
        and worst["scaling"] <= 1e-9
        and worst["periodic"] <= 1e-9
        and worst["zeros"] <= 1e-9
        and worst["imag"] <= 1e-12
        and worst["roundtrip"] <= 1e-8
        and monotone
    )
    measured = {k: v for k, v in worst.items()}
    measured["increasing_on_branch"] = monotone
    tol = "ode/scaling/periodic/zeros 1e-9 rel, imag 1e-12 rel, roundtrip 1e-8"
    return ok, measured, tol


def check_elliptic(opts: SuiteOptions) -> CheckResult:
    return _timed(12, "elliptic invariants", 5.0, elliptic_invariants)


CHECKS = {
    1: check_period,
    2: check_constants,
    3: check_exact_vs_series,
    4: check_tail_power_law,
    5: check_hit_power_law,
    6: check_cross_solver,
    7: check_pinch,
    8: check_sawyer_fleischman,
    9: check_monte_carlo,
    10: check_tauberian,
    11: check_singular_expansion,
    12: check_elliptic,
}


def run_suite(opts: SuiteOptions | None = None, only: list[int] | None = None) -> list[CheckResult]:
    opts = opts or SuiteOptions()
    numbers = sorted(CHECKS) if not only else sorted(only)
    return [CHECKS[n](opts) for n in numbers]
