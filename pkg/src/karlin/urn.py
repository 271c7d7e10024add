"""Sampling balls into power-law boxes and the signed occupancy paths.

A run throws m = floor(n*t) balls independently into boxes labelled
k = 1, 2, ... with probabilities p_k.  Tracked path functionals, all
evaluated along a grid of times t in [0, 1]:

    z_star  - number of occupied boxes
    u_star  - number of boxes holding an odd count
    z_eps   - sum of eps_k over occupied boxes   (eps_k = +/-1 signs)
    u_eps   - sum of eps_k over odd boxes
    z2_eps  - deterministic-in-the-urn centering sum_k eps_k p_k(m),
              p_k(m) = 1 - (1-p_k)^m
    u2_eps  - same with q_k(m) = (1 - (1-2 p_k)^m)/2
    z1_eps  - z_eps - z2_eps
    u1_eps  - u_eps - u2_eps

The engine is vectorized: one stable argsort of the label sequence
yields first-visit flags and per-visit parity flips, so each path is a
cumulative sum gathered at the grid counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special as sp

from .errors import DomainError
from .weights import (
    CHUNK,
    WeightSequence,
    _binom_tail_series,
    _exp_tail_series,
    signed_cutoff,
    tail_power_sum,
    weights_array,
)

DISCRETE_PROCESSES = (
    "z_star",
    "u_star",
    "z_eps",
    "u_eps",
    "z1_eps",
    "z2_eps",
    "u1_eps",
    "u2_eps",
)

SIGN_MODES = ("rademacher", "ones", "vector")

# Proposals above this are almost surely singleton boxes; they get
# fresh unique indices instead of risking int64 overflow.
_LABEL_CLAMP = 1 << 62

_U64 = np.uint64
_GOLD = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


def _splitmix(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer (uint64 in, uint64 out)."""
    with np.errstate(over="ignore"):
        x = (x + _GOLD) * _MIX1
        x ^= x >> _U64(30)
        x *= _MIX2
        x ^= x >> _U64(27)
        x *= _MIX1
        x ^= x >> _U64(31)
    return x


@dataclass(frozen=True)
class SignSource:
    """Deterministic +/-1 sign per box index k >= 1.

    mode 'rademacher': sign = top bit of a splitmix64 hash of (seed, k),
    so any index is evaluable lazily and reproducibly.  mode 'ones':
    eps_k = +1 identically (collapses the signed paths onto the plain
    counts).  mode 'vector': an explicit prefix overrides the hash for
    k <= len(prefix); beyond the prefix the hashed signs continue, so
    every operation stays total.
    """

    mode: str = "rademacher"
    seed: int = 0
    prefix: tuple[int, ...] = ()

    def __post_init__(self):
        if self.mode not in SIGN_MODES:
            raise DomainError(f"unknown sign mode {self.mode!r}")
        if not isinstance(self.seed, (int, np.integer)):
            raise DomainError("sign seed must be an integer")
        if self.mode == "vector":
            if len(self.prefix) == 0:
                raise DomainError("vector mode needs a nonempty prefix")
            if any(v not in (-1, 1) for v in self.prefix):
                raise DomainError("sign prefix entries must be +1 or -1")
        elif self.prefix:
            raise DomainError("prefix is only meaningful in vector mode")

    def signs_for(self, k) -> np.ndarray:
        """Signs for an array of box indices (returns float64 +/-1)."""
        karr = np.asarray(k, dtype=np.int64)
        if karr.size and karr.min() < 1:
            raise DomainError("box index k must be >= 1")
        if self.mode == "ones":
            return np.ones(karr.shape, dtype=np.float64)
        h = _splitmix(karr.astype(np.uint64) ^ _splitmix(np.uint64(self.seed & (2**64 - 1))))
        out = 1.0 - 2.0 * (h >> _U64(63)).astype(np.float64)
        if self.mode == "vector":
            small = karr <= len(self.prefix)
            if np.any(small):
                pref = np.asarray(self.prefix, dtype=np.float64)
                out[small] = pref[karr[small] - 1]
        return out

    def sign(self, k: int) -> float:
        """Sign of a single box index."""
        return float(self.signs_for(np.asarray([k]))[0])


@dataclass(frozen=True)
class PathGrid:
    """Strictly increasing times t_0 = 0 < t_1 < ... <= 1."""

    times: tuple[float, ...]

    def __post_init__(self):
        t = self.times
        if len(t) < 2:
            raise DomainError("grid needs t=0 plus at least one positive time")
        if t[0] != 0.0:
            raise DomainError("grid must start at t=0")
        if any(not math.isfinite(x) for x in t):
            raise DomainError("grid times must be finite")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise DomainError("grid times must be strictly increasing")
        if t[-1] > 1.0:
            raise DomainError("grid times must not exceed 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=np.float64)

    def positive(self) -> np.ndarray:
        return self.as_array()[1:]

    def draw_counts(self, n: int) -> np.ndarray:
        """floor(n * t_j) with a 1e-9 relative snap against float noise."""
        x = float(n) * self.as_array()
        return np.floor(x + 1e-9 * np.maximum(x, 1.0)).astype(np.int64)


def make_grid(times) -> PathGrid:
    """PathGrid from any iterable of times (0 prepended if missing)."""
    t = [float(x) for x in times]
    if not t or t[0] != 0.0:
        t = [0.0] + t
    return PathGrid(times=tuple(t))


@dataclass
class BoxState:
    """Ball counts per box, for reference recomputation of the paths."""

    counts: dict[int, int] = field(default_factory=dict)

    def add(self, k: int) -> None:
        self.counts[k] = self.counts.get(k, 0) + 1

    @classmethod
    def from_labels(cls, labels) -> "BoxState":
        st = cls()
        for k in labels:
            st.add(int(k))
        return st

    def total_balls(self) -> int:
        return sum(self.counts.values())

    def occupied(self) -> int:
        return sum(1 for v in self.counts.values() if v > 0)

    def odd(self) -> int:
        return sum(1 for v in self.counts.values() if v % 2 == 1)

    def signed_occupied(self, signs: SignSource) -> float:
        return float(sum(signs.sign(k) for k, v in self.counts.items() if v > 0))

    def signed_odd(self, signs: SignSource) -> float:
        return float(sum(signs.sign(k) for k, v in self.counts.items() if v % 2 == 1))


@dataclass
class ProcessBundle:
    """Aligned sample paths over a grid, plus run metadata."""

    times: tuple[float, ...]
    n: int
    alpha: float
    sign_mode: str
    values: dict[str, np.ndarray]
    counts: np.ndarray
    truncation_index: int
    truncation_rms: float
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# label sampling


@lru_cache(maxsize=16)
def _sampler_tables(ws: WeightSequence, table_size: int):
    cdf = np.cumsum(weights_array(ws, table_size))
    s = ws.s
    xm = table_size + 0.5
    z_tail = sp.zeta(s, table_size + 1)
    # bound on target/proposal density ratio for the tail rejection
    ks = np.arange(table_size + 1.0, table_size + 4097.0)
    num = ks ** (-s) / z_tail
    den = (xm / (ks - 0.5)) ** (s - 1.0) - (xm / (ks + 0.5)) ** (s - 1.0)
    r_inf = 1.0 / ((s - 1.0) * xm ** (s - 1.0) * z_tail)
    bound = max(float(np.max(num / den)), r_inf) * (1.0 + 1e-9)
    return cdf, z_tail, xm, r_inf, bound


def _sample_tail(ws: WeightSequence, table_size: int, size: int, rng) -> np.ndarray:
    """Exact draws from p_k restricted to k > table_size, by rejection.

    Proposal: continuous Pareto on [table_size + 1/2, inf) rounded to
    the nearest integer; acceptance uses the exact probability ratio,
    so the output law is the true conditional law (acceptance rate is
    1 - O(1/table_size)).
    """
    cdf, z_tail, xm, r_inf, bound = _sampler_tables(ws, table_size)
    s = ws.s
    out = np.empty(size, dtype=np.int64)
    filled = 0
    while filled < size:
        todo = size - filled
        m = todo + max(16, todo // 8)
        v = rng.random(m)
        x = np.minimum(xm * (1.0 - v) ** (-1.0 / (s - 1.0)), float(_LABEL_CLAMP))
        k = np.floor(x + 0.5)
        ratio = np.full(m, r_inf)
        small = k < 1e9
        if np.any(small):
            ksm = k[small]
            den = (xm / (ksm - 0.5)) ** (s - 1.0) - (xm / (ksm + 0.5)) ** (s - 1.0)
            ratio[small] = ksm ** (-s) / z_tail / den
        acc = rng.random(m) * bound <= ratio
        kacc = k[acc].astype(np.int64)
        take = min(todo, kacc.size)
        out[filled : filled + take] = kacc[:take]
        filled += take
    # beyond the clamp every box is almost surely a singleton: keep the
    # draws distinct instead of piling them on one index
    clamped = out >= _LABEL_CLAMP
    nclamp = int(np.count_nonzero(clamped))
    if nclamp:
        out[clamped] = _LABEL_CLAMP + np.arange(nclamp, dtype=np.int64)
    return out


def sample_labels(ws: WeightSequence, rng, size: int, table_size: int = 100_000) -> np.ndarray:
    """size i.i.d. box labels with P(label = k) = p_k.

    Inverse-CDF table for k <= table_size, exact rejection sampling in
    the tail.
    """
    if size < 0:
        raise DomainError("size must be >= 0")
    cdf, *_ = _sampler_tables(ws, table_size)
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
    tail = out > table_size
    ntail = int(np.count_nonzero(tail))
    if ntail:
        out[tail] = _sample_tail(ws, table_size, ntail, rng)
    return out


def sample_label(ws: WeightSequence, rng, table_size: int = 100_000) -> int:
    """One box label distributed as p_k."""
    return int(sample_labels(ws, rng, 1, table_size=table_size)[0])


# ---------------------------------------------------------------------------
# centering sums


def _q_center_vec(p: np.ndarray, m: int) -> np.ndarray:
    """(1 - (1 - 2 p)^m) / 2 elementwise, stable for 2p near or above 1."""
    g = 1.0 - 2.0 * p
    out = np.empty_like(p)
    pos = g > 0.0
    out[pos] = -np.expm1(m * np.log1p(-2.0 * p[pos])) * 0.5
    gn = g[~pos]
    out[~pos] = 0.5 * (1.0 - np.sign(gn) ** m * np.abs(gn) ** m)
    return out


def p_center(ws: WeightSequence, k, n: int):
    """p_k(n) = 1 - (1 - p_k)^n for integer n >= 0."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise DomainError(f"draw count n must be a nonnegative integer, got {n!r}")
    p = ws.c * np.asarray(k, dtype=np.float64) ** (-ws.s)
    out = -np.expm1(n * np.log1p(-p))
    return float(out) if np.isscalar(k) else out


def q_center(ws: WeightSequence, k, n: int):
    """q_k(n) = (1 - (1 - 2 p_k)^n) / 2 for integer n >= 0."""
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise DomainError(f"draw count n must be a nonnegative integer, got {n!r}")
    p = ws.c * np.asarray(k, dtype=np.float64) ** (-ws.s)
    out = _q_center_vec(np.atleast_1d(p), int(n))
    return float(out[0]) if np.isscalar(k) else out.reshape(np.shape(k))


def centered_sign_sum(ws: WeightSequence, signs: SignSource, n: int, which: str = "occupancy") -> float:
    """sum_k eps_k p_k(n) (or eps_k q_k(n) for which='odd').

    Random signs: truncated at K = signed_cutoff so the neglected
    zero-mean tail has mean square <= tail_tol; the odd sum at horizon
    n uses the occupancy cutoff at horizon 2n, which keeps the
    Poissonized odd/occupancy coupling exact over a shared index set.
    All-ones signs: the analytic tail of the full series is added, so
    the result is the infinite sum to within tail_tol.
    """
    if which not in ("occupancy", "odd"):
        raise DomainError(f"which must be 'occupancy' or 'odd', got {which!r}")
    if not (isinstance(n, (int, np.integer)) and n >= 0):
        raise DomainError(f"draw count n must be a nonnegative integer, got {n!r}")
    n = int(n)
    if n == 0:
        return 0.0
    u_eff = float(n) if which == "occupancy" else 2.0 * n
    kcut = signed_cutoff(ws, u_eff)
    total = 0.0
    for lo in range(1, kcut + 1, CHUNK):
        hi = min(kcut, lo + CHUNK - 1)
        p = ws.c * np.arange(float(lo), hi + 1.0) ** (-ws.s)
        vals = -np.expm1(n * np.log1p(-p)) if which == "occupancy" else _q_center_vec(p, n)
        eps = signs.signs_for(np.arange(lo, hi + 1, dtype=np.int64))
        total += float(eps @ vals)
    if signs.mode == "ones":
        if which == "occupancy":
            total += _binom_tail_series(ws, n, kcut + 1, b=1)
        else:
            total += 0.5 * _binom_tail_series(ws, n, kcut + 1, b=2)
    return total


@lru_cache(maxsize=8)
def _center_tables(ws: WeightSequence, n: int, times: tuple, poisson: bool):
    """Per-grid centering value matrices shared across replicas.

    Returns (K, P, Q, tail_p, tail_q) where P[j], Q[j] hold p_k(.) and
    q_k(.) for k = 1..K at grid time j, and the tails are the analytic
    remainders beyond K (used only for all-ones signs).
    """
    tpos = np.asarray(times, dtype=np.float64)
    kcut = signed_cutoff(ws, 2.0 * n * float(tpos[-1]))
    p = weights_array(ws, kcut)
    pmat = np.empty((len(tpos), kcut))
    qmat = np.empty((len(tpos), kcut))
    tail_p = np.zeros(len(tpos))
    tail_q = np.zeros(len(tpos))
    if poisson:
        for j, t in enumerate(tpos):
            pmat[j] = -np.expm1(-p * (n * t))
            qmat[j] = -np.expm1(-2.0 * p * (n * t)) * 0.5
            tail_p[j] = _exp_tail_series(ws, n * t, kcut + 1)
            tail_q[j] = 0.5 * _exp_tail_series(ws, 2.0 * n * t, kcut + 1)
    else:
        lp = np.log1p(-p)
        ms = np.floor(n * tpos + 1e-9 * np.maximum(n * tpos, 1.0)).astype(np.int64)
        for j, m in enumerate(ms):
            m = int(m)
            pmat[j] = -np.expm1(m * lp)
            qmat[j] = _q_center_vec(p, m)
            tail_p[j] = _binom_tail_series(ws, m, kcut + 1, b=1)
            tail_q[j] = 0.5 * _binom_tail_series(ws, m, kcut + 1, b=2)
    return kcut, pmat, qmat, tail_p, tail_q


# ---------------------------------------------------------------------------
# path engine


def _paths_from_labels(
    ws: WeightSequence,
    signs: SignSource,
    labels: np.ndarray,
    counts: np.ndarray,
    center: tuple | None,
) -> dict[str, np.ndarray]:
    """Evaluate the processes at the given cumulative ball counts.

    center holds the (K, P, Q, tail_p, tail_q) tables; without them
    only the four sign/count paths are produced (no centered split).
    """
    counts = np.asarray(counts, dtype=np.int64)
    g = len(counts)
    m_total = int(counts[-1]) if g else 0
    raw = ("z_star", "u_star", "z_eps", "u_eps")
    out = {name: np.zeros(g) for name in (DISCRETE_PROCESSES if center else raw)}

    if m_total > 0:
        lab = labels[:m_total]
        order = np.argsort(lab, kind="stable")
        sl = lab[order]
        new = np.empty(m_total, dtype=bool)
        new[0] = True
        np.not_equal(sl[1:], sl[:-1], out=new[1:])
        idx = np.arange(m_total, dtype=np.int64)
        first_idx = idx[new]
        seg = np.cumsum(new) - 1
        rank_sorted = idx - first_idx[seg]
        rank = np.empty(m_total, dtype=np.int64)
        rank[order] = rank_sorted
        is_first = rank == 0
        flip = 1 - 2 * (rank & 1)
        eps = signs.signs_for(lab)

        cz = np.cumsum(is_first.astype(np.int64))
        cu = np.cumsum(flip)
        cze = np.cumsum(eps * is_first)
        cue = np.cumsum(eps * flip)
        nz = counts > 0
        take = counts[nz] - 1
        out["z_star"][nz] = cz[take]
        out["u_star"][nz] = cu[take]
        out["z_eps"][nz] = cze[take]
        out["u_eps"][nz] = cue[take]

    if center is not None:
        kcut, pmat, qmat, tail_p, tail_q = center
        eps_head = signs.signs_for(np.arange(1, kcut + 1, dtype=np.int64))
        z2 = pmat @ eps_head
        u2 = qmat @ eps_head
        if signs.mode == "ones":
            z2 = z2 + tail_p
            u2 = u2 + tail_q
        out["z2_eps"] = z2
        out["u2_eps"] = u2
        out["z1_eps"] = out["z_eps"] - z2
        out["u1_eps"] = out["u_eps"] - u2
    return out


def simulate_discrete(
    ws: WeightSequence,
    signs: SignSource,
    n: int,
    grid: PathGrid,
    rng,
) -> ProcessBundle:
    """One replica of all eight processes along floor(n*t) ball counts."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"sample size n must be a positive integer, got {n!r}")
    n = int(n)
    counts_full = grid.draw_counts(n)
    labels = sample_labels(ws, rng, int(counts_full[-1]))
    tpos = tuple(float(t) for t in grid.positive())
    center = _center_tables(ws, n, tpos, False)
    vals = _paths_from_labels(ws, signs, labels, counts_full[1:], center)
    values = {name: np.concatenate(([0.0], arr)) for name, arr in vals.items()}
    kcut = center[0]
    return ProcessBundle(
        times=grid.times,
        n=n,
        alpha=ws.alpha,
        sign_mode=signs.mode,
        values=values,
        counts=counts_full,
        truncation_index=kcut,
        truncation_rms=tail_power_sum(ws, 2.0, kcut + 1) * (2.0 * n * grid.times[-1]) ** 2,
    )


# ---------------------------------------------------------------------------
# correlated walk


def walk_steps_from_labels(signs: SignSource, labels, mode: str = "odd") -> np.ndarray:
    """Steps of the label-driven walk.

    mode 'odd': the first ball into box k steps by eps_k and each later
    ball into the same box flips the previous step for that box, so the
    running sum equals the signed odd-box count.  mode 'occupancy':
    later balls step 0, so the running sum equals the signed occupied
    count.
    """
    if mode not in ("odd", "occupancy"):
        raise DomainError(f"walk mode must be 'odd' or 'occupancy', got {mode!r}")
    labels = np.asarray(labels, dtype=np.int64)
    uniq = np.unique(labels)
    smap = dict(zip(uniq.tolist(), signs.signs_for(uniq).tolist()))
    steps = np.empty(len(labels))
    last: dict[int, float] = {}
    if mode == "odd":
        for i, k in enumerate(labels.tolist()):
            x = -last[k] if k in last else smap[k]
            last[k] = x
            steps[i] = x
    else:
        for i, k in enumerate(labels.tolist()):
            if k in last:
                steps[i] = 0.0
            else:
                last[k] = 1.0
                steps[i] = smap[k]
    return steps


def correlated_walk(
    ws: WeightSequence,
    signs: SignSource,
    n: int,
    rng,
    mode: str = "odd",
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n labels and return (steps, prefix sums) of the walk."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"walk length n must be a positive integer, got {n!r}")
    labels = sample_labels(ws, rng, int(n))
    steps = walk_steps_from_labels(signs, labels, mode=mode)
    return steps, np.cumsum(steps)
