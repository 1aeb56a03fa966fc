"""Monte Carlo for critical BBM killed at 0 (the discrete Brownian snake).

Each replicate walks the Galton-Watson tree depth first.  A particle lives an
Exp(1) time, moves as Brownian motion sampled on a grid, and at the end of
its life is replaced by a random number of children at its final position.
Between grid points the path is a Brownian bridge, so the crossing of 0 and
the running maximum are sampled from their exact bridge laws.

Random numbers come from Philox4x32-10 keyed by ``(seed, run)`` with counter
``(step, slot, particle id)``.  Every draw is a pure function of where it is
used, so results do not depend on scheduling and runs started at different
heights (or with killing switched off) are coupled path by path.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from .errors import ConfigError, ExcessTruncation
from .offspring import OffspringDistribution

MASK32 = np.uint64(0xFFFFFFFF)
PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
ROOT_ID = np.uint64(0x243F6A8885A308D3)
HEADER_STEP = np.uint64(0xFFFFFFFF)
TWO32_INV = 1.0 / 4294967296.0
# exp(-23) < 2^-33, below the smallest uniform we ever draw
NEGLIGIBLE_EXPONENT = 23.0

DEFAULT_MAX_BIRTHS = 10_000_000
BLOCK_SCALE = 224.0
MAX_TRUNCATED_FRACTION = 0.01


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 on uint64-held 32-bit words."""
    for _ in range(10):
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        n0 = (p1 >> np.uint64(32)) ^ c1 ^ k0
        n1 = p1 & MASK32
        n2 = (p0 >> np.uint64(32)) ^ c3 ^ k1
        n3 = p0 & MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def splitmix64(z):
    z = z + GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def _uniform(w):
    # open interval (0, 1)
    return (float(w) + 0.5) * TWO32_INV


@nb.njit(cache=True, inline="always")
def _child_id(parent, idx):
    return splitmix64(parent ^ (np.uint64(idx + 1) * GOLDEN))


@nb.njit(cache=True)
def run_key(seed, run):
    k = splitmix64(np.uint64(seed) ^ splitmix64(np.uint64(run)))
    return k & MASK32, k >> np.uint64(32)


@nb.njit(cache=True)
def _simulate(y0, cdf, h, seed, run, max_births, kill, record):
    k0, k1 = run_key(seed, run)
    cap = 1024
    ids = np.empty(cap, dtype=np.uint64)
    pos = np.empty(cap, dtype=np.float64)
    ids[0] = ROOT_ID
    pos[0] = y0
    sp = 1
    m_sup = y0
    n_killed = 0
    births = 0
    truncated = False
    track = record <= 0.0 or y0 < record
    n_types = cdf.size
    while sp > 0:
        sp -= 1
        pid = ids[sp]
        x = pos[sp]
        lo = pid & MASK32
        hi = pid >> np.uint64(32)
        r0, r1, _, _ = philox4x32(HEADER_STEP, np.uint64(1), lo, hi, k0, k1)
        tau = -math.log(_uniform(r0))
        u_off = _uniform(r1)
        n_full = int(tau / h)
        rem = tau - n_full * h
        alive = True
        for step in range(n_full + 1):
            hh = h if step < n_full else rem
            if hh <= 0.0:
                break
            w0, w1, w2, w3 = philox4x32(np.uint64(step), np.uint64(0), lo, hi, k0, k1)
            z = math.sqrt(-2.0 * math.log(_uniform(w0))) * math.cos(2.0 * math.pi * _uniform(w1))
            xn = x + math.sqrt(hh) * z
            if kill:
                if xn <= 0.0:
                    alive = False
                else:
                    e = 2.0 * x * xn / hh
                    if e < NEGLIGIBLE_EXPONENT and _uniform(w2) < math.exp(-e):
                        alive = False
                if not alive:
                    n_killed += 1
                    break
            if track:
                if xn > m_sup:
                    m_sup = xn
                # the bridge max m exceeds m_sup iff U < exp(-2 (m_sup - x)(m_sup - xn) / hh)
                e = 2.0 * (m_sup - x) * (m_sup - xn) / hh
                if e < NEGLIGIBLE_EXPONENT:
                    u = _uniform(w3)
                    if u < math.exp(-e):
                        d = xn - x
                        m_sup = 0.5 * (x + xn + math.sqrt(d * d - 2.0 * hh * math.log(u)))
                if record > 0.0 and m_sup >= record:
                    track = False
            x = xn
        if not alive:
            continue
        births += 1
        if births > max_births:
            truncated = True
            break
        n_child = 0
        while n_child < n_types - 1 and u_off > cdf[n_child]:
            n_child += 1
        if sp + n_child > cap:
            cap = 2 * (sp + n_child)
            ids2 = np.empty(cap, dtype=np.uint64)
            pos2 = np.empty(cap, dtype=np.float64)
            ids2[:sp] = ids[:sp]
            pos2[:sp] = pos[:sp]
            ids = ids2
            pos = pos2
        for j in range(n_child):
            ids[sp] = _child_id(pid, j)
            pos[sp] = x
            sp += 1
    return m_sup, n_killed, births, truncated


@nb.njit(cache=True)
def _simulate_range(y0, cdf, h, seed, start, stop, max_births, kill, record):
    n = stop - start
    m_out = np.empty(n)
    n_out = np.empty(n, dtype=np.int64)
    b_out = np.empty(n, dtype=np.int64)
    t_out = np.empty(n, dtype=np.bool_)
    for i in range(n):
        m, k, b, t = _simulate(y0, cdf, h, seed, start + i, max_births, kill, record)
        m_out[i] = m
        n_out[i] = k
        b_out[i] = b
        t_out[i] = t
    return m_out, n_out, b_out, t_out


@dataclass(frozen=True)
class SnakeConfig:
    """``block`` merges that many ``dt`` steps into one bridge step (``None``: automatic)."""

    y0: float
    dist: OffspringDistribution
    dt: float = 1e-4
    max_births: int = DEFAULT_MAX_BIRTHS
    seed: int = 42
    upper_record: float | None = None
    kill: bool = True
    block: int | None = None

    def __post_init__(self):
        if not self.y0 > 0.0:
            raise ConfigError("y0 must be positive")
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if self.max_births < 1:
            raise ConfigError("max_births must be at least 1")
        if self.block is not None and self.block < 1:
            raise ConfigError("block must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def step(self) -> float:
        """Grid spacing actually used: ``block * dt``."""
        block = self.block
        if block is None:
            block = max(1, int(self.y0 * self.y0 / (BLOCK_SCALE * self.dt)))
        return block * self.dt

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(np.asarray(self.dist.probs, dtype=float))
        c[-1] = 1.0
        return c


@dataclass(frozen=True)
class SimOutcome:
    M: float
    N: int
    births: int
    truncated: bool


def simulate_once(cfg: SnakeConfig, run: int = 0) -> SimOutcome:
    """One replicate; ``run`` selects the stream derived from ``cfg.seed``."""
    record = -1.0 if cfg.upper_record is None else float(cfg.upper_record)
    m, k, b, t = _simulate(
        float(cfg.y0), cfg.cdf, cfg.step, np.uint64(cfg.seed), np.uint64(run), cfg.max_births, cfg.kill, record
    )
    return SimOutcome(float(m), int(k), int(b), bool(t))


def _range_job(args):
    cfg, start, stop = args
    record = -1.0 if cfg.upper_record is None else float(cfg.upper_record)
    return _simulate_range(
        float(cfg.y0), cfg.cdf, cfg.step, np.uint64(cfg.seed), start, stop, cfg.max_births, cfg.kill, record
    )


@dataclass(frozen=True)
class BatchEstimate:
    mean: float
    std_error: float
    n_runs: int
    n_truncated: int
    half_width: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "half_width", 3.0 * self.std_error)

    def contains(self, value: float) -> bool:
        return abs(self.mean - value) <= self.half_width


@dataclass(frozen=True)
class BatchResult:
    cfg: SnakeConfig
    M: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    births: np.ndarray = field(repr=False)
    truncated: np.ndarray = field(repr=False)

    @property
    def n_runs(self) -> int:
        return int(self.M.size)

    @property
    def n_truncated(self) -> int:
        return int(self.truncated.sum())

    def estimate(self, statistic: str, level: float | None = None) -> BatchEstimate:
        """``statistic`` is ``"hit"`` (P(M >= level)), ``"tail"`` (P(N >= level)) or ``"mean"`` (E[N])."""
        frac = self.n_truncated / max(self.n_runs, 1)
        if frac > MAX_TRUNCATED_FRACTION:
            raise ExcessTruncation(f"{frac:.2%} of runs hit max_births")
        keep = ~self.truncated
        if statistic == "hit":
            sample = (self.M[keep] >= _need(level)).astype(float)
        elif statistic == "tail":
            sample = (self.N[keep] >= _need(level)).astype(float)
        elif statistic == "mean":
            sample = self.N[keep].astype(float)
        else:
            raise ConfigError(f"unknown statistic {statistic!r}")
        n = sample.size
        if n < 2:
            raise ConfigError("need at least two untruncated runs")
        return BatchEstimate(float(sample.mean()), float(sample.std(ddof=1) / math.sqrt(n)), n, self.n_truncated)


def _need(level):
    if level is None:
        raise ConfigError("this statistic needs a level")
    return level


def run_batch(cfg: SnakeConfig, n_runs: int, workers: int = 1, chunk: int = 2048) -> BatchResult:
    """Replicates ``0..n_runs-1``; identical output for any ``workers``."""
    if n_runs < 1:
        raise ConfigError("n_runs must be positive")
    bounds = [(cfg, a, min(a + chunk, n_runs)) for a in range(0, n_runs, chunk)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_range_job, bounds))
    else:
        parts = [_range_job(b) for b in bounds]
    m, k, b, t = (np.concatenate(col) for col in zip(*parts))
    return BatchResult(cfg, m, k, b, t)


def estimate(cfg: SnakeConfig, statistic: str, n_runs: int, level: float | None = None, workers: int = 1) -> BatchEstimate:
    if n_runs < 100:
        raise ConfigError("n_runs must be at least 100")
    if statistic == "hit" and level is not None and cfg.upper_record is None:
        cfg = replace(cfg, upper_record=float(level))
    return run_batch(cfg, n_runs, workers).estimate(statistic, level)
