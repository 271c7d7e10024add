"""Poissonized runs: ball counts arrive along a rate-n Poisson process.

Replacing the deterministic ball count floor(n*t) by N(n*t), a Poisson
process of rate n, makes every box's count an independent Poisson
variable with mean p_k * n * t.  Occupancy probabilities become

    tilde_p(t) = 1 - exp(-p_k t)          (box nonempty)
    tilde_q(t) = (1 - exp(-2 p_k t)) / 2  (box count odd)

and the four signed components have closed-form covariances in terms
of V.  exact_cov below returns them, and depoisson_gap measures how
far the Poissonized centering drifts from the fixed-n one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .urn import (
    PathGrid,
    ProcessBundle,
    SignSource,
    _center_tables,
    _paths_from_labels,
    make_grid,
    sample_labels,
    signed_cutoff,
)
from .weights import CHUNK, WeightSequence, big_v, sigma2, tail_power_sum, _exp_tail_series

POISSON_PROCESSES = (
    "z_tilde",
    "u_tilde",
    "z1_tilde",
    "z2_tilde",
    "u1_tilde",
    "u2_tilde",
    "n_arrivals",
)

_DISCRETE_TO_TILDE = {
    "z_eps": "z_tilde",
    "u_eps": "u_tilde",
    "z1_eps": "z1_tilde",
    "z2_eps": "z2_tilde",
    "u1_eps": "u1_tilde",
    "u2_eps": "u2_tilde",
}

COMPONENTS = ("z1", "z2", "u1", "u2", "z", "u")


def tilde_p(ws: WeightSequence, k, t: float):
    """Probability that box k is nonempty at Poisson time t."""
    if not (math.isfinite(t) and t >= 0.0):
        raise DomainError(f"time t must be finite and >= 0, got {t}")
    p = ws.c * np.asarray(k, dtype=np.float64) ** (-ws.s)
    out = -np.expm1(-p * t)
    return float(out) if np.isscalar(k) else out


def tilde_q(ws: WeightSequence, k, t: float):
    """Probability that box k holds an odd count at Poisson time t."""
    if not (math.isfinite(t) and t >= 0.0):
        raise DomainError(f"time t must be finite and >= 0, got {t}")
    p = ws.c * np.asarray(k, dtype=np.float64) ** (-ws.s)
    out = -np.expm1(-2.0 * p * t) * 0.5
    return float(out) if np.isscalar(k) else out


def centered_sign_sum_tilde(
    ws: WeightSequence, signs: SignSource, t: float, which: str = "occupancy"
) -> float:
    """sum_k eps_k tilde_p_k(t) (or tilde_q for which='odd').

    Truncation mirrors the fixed-n centered sum: the odd sum at horizon
    t shares its cutoff with the occupancy sum at horizon 2t, which
    makes the coupling identity odd(t) == occupancy(2t)/2 exact over a
    common index set (up to float rounding).
    """
    if which not in ("occupancy", "odd"):
        raise DomainError(f"which must be 'occupancy' or 'odd', got {which!r}")
    if not (math.isfinite(t) and t >= 0.0):
        raise DomainError(f"time t must be finite and >= 0, got {t}")
    if t == 0.0:
        return 0.0
    u_eff = t if which == "occupancy" else 2.0 * t
    kcut = signed_cutoff(ws, u_eff)
    total = 0.0
    for lo in range(1, kcut + 1, CHUNK):
        hi = min(kcut, lo + CHUNK - 1)
        p = ws.c * np.arange(float(lo), hi + 1.0) ** (-ws.s)
        vals = -np.expm1(-p * t) if which == "occupancy" else -np.expm1(-2.0 * p * t) * 0.5
        eps = signs.signs_for(np.arange(lo, hi + 1, dtype=np.int64))
        total += float(eps @ vals)
    if signs.mode == "ones":
        if which == "occupancy":
            total += _exp_tail_series(ws, t, kcut + 1)
        else:
            total += 0.5 * _exp_tail_series(ws, 2.0 * t, kcut + 1)
    return total


def simulate_poissonized(
    ws: WeightSequence,
    signs: SignSource,
    n: int,
    grid: PathGrid,
    rng,
) -> ProcessBundle:
    """One Poissonized replica along the grid.

    Arrival counts N(n t_j) are drawn as cumulative Poisson increments;
    the centering sums use the deterministic intensities tilde_p(n t),
    not the realized counts.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"rate n must be a positive integer, got {n!r}")
    n = int(n)
    t = grid.as_array()
    incr = rng.poisson(lam=float(n) * np.diff(t))
    counts_full = np.concatenate(([0], np.cumsum(incr))).astype(np.int64)
    labels = sample_labels(ws, rng, int(counts_full[-1]))
    tpos = tuple(float(x) for x in grid.positive())
    center = _center_tables(ws, n, tpos, True)
    vals = _paths_from_labels(ws, signs, labels, counts_full[1:], center)
    values = {
        tilde: np.concatenate(([0.0], vals[disc])) for disc, tilde in _DISCRETE_TO_TILDE.items()
    }
    values["n_arrivals"] = counts_full.astype(np.float64)
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


def exact_cov(ws: WeightSequence, which: str, n: int, s: float, t: float) -> float:
    """Closed-form covariance of a Poissonized process at times (s, t).

    With V the expected-occupancy function and u = min, v = max:

        z1: V(n(s+t)) - V(n v)
        z2: V(n s) + V(n t) - V(n(s+t))
        z : V(n u)
        u1: (V(2n(s+t)) - V(2n|t-s|)) / 4
        u2: (V(2n s) + V(2n t) - V(2n(s+t))) / 4
        u : (V(2n s) + V(2n t) - V(2n|t-s|)) / 4

    Covariances are unnormalized (divide by sigma2 for the limit
    scale).  The component pairs (z1, z2) and (u1, u2) are independent,
    so the component formulas add up to the composite ones.
    """
    key = which.lower().replace("_tilde", "").replace("_eps", "")
    if key not in COMPONENTS:
        raise DomainError(f"unknown process {which!r}; expected one of {COMPONENTS}")
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"rate n must be a positive integer, got {n!r}")
    for x in (s, t):
        if not (math.isfinite(x) and x >= 0.0):
            raise DomainError(f"times must be finite and >= 0, got {x}")
    n = float(n)
    if key == "z1":
        return big_v(ws, n * (s + t)) - big_v(ws, n * max(s, t))
    if key == "z2":
        return big_v(ws, n * s) + big_v(ws, n * t) - big_v(ws, n * (s + t))
    if key == "z":
        return big_v(ws, n * min(s, t))
    if key == "u1":
        return 0.25 * (big_v(ws, 2.0 * n * (s + t)) - big_v(ws, 2.0 * n * abs(t - s)))
    if key == "u2":
        return 0.25 * (
            big_v(ws, 2.0 * n * s) + big_v(ws, 2.0 * n * t) - big_v(ws, 2.0 * n * (s + t))
        )
    return 0.25 * (big_v(ws, 2.0 * n * s) + big_v(ws, 2.0 * n * t) - big_v(ws, 2.0 * n * abs(t - s)))


@dataclass(frozen=True)
class GapReport:
    """Sup over the grid of the centering drift between the Poissonized
    and fixed-n occupancy (p) and parity (q) probabilities, normalized
    by sigma = sqrt(nu(n)).  uncertainty bounds the truncated tail."""

    n: int
    times: tuple[float, ...]
    p_gap: float
    q_gap: float
    p_uncertainty: float
    q_uncertainty: float
    p_gap_raw: float
    q_gap_raw: float
    sigma: float


def _gap_cutoff(ws: WeightSequence, m: int, delta: float, sig: float) -> tuple[int, float, float]:
    """Truncation K and tail bounds for one grid point of the gap sum.

    |(1-p)^m - e^{-p(m+delta)}| <= p*delta + m p^2/(2(1-p)) per box, so
    the tail beyond K is bounded by delta*sum p + m/(2(1-p_K)) sum p^2;
    the parity version doubles the quadratic part.  K doubles until the
    bound drops below 1e-9*sigma or hits the cap.
    """
    k = 1 << 10
    cap = 1 << 25
    while True:
        pk1 = ws.c * float(k + 1) ** (-ws.s)
        s1 = tail_power_sum(ws, 1.0, k + 1)
        s2 = tail_power_sum(ws, 2.0, k + 1)
        bp = delta * s1 + m * s2 / (2.0 * (1.0 - pk1))
        bq = delta * s1 + 2.0 * m * s2 / max(1.0 - 2.0 * pk1, 0.5)
        if (max(bp, bq) <= 1e-9 * sig) or k >= cap:
            return k, bp, bq
        k *= 2


def depoisson_gap(ws: WeightSequence, n: int, grid: PathGrid) -> GapReport:
    """sup_j sum_k |tilde_p_k(n t_j) - p_k(floor(n t_j))| / sigma_n, and
    the parity analog with tilde_q and q_k.

    Requires sigma2(n) > 0.  The truncated tails are bounded
    analytically and reported as uncertainties.
    """
    if not isinstance(grid, PathGrid):
        grid = make_grid(grid)
    sig2 = sigma2(ws, int(n))
    if sig2 == 0:
        raise DomainError(f"nu(n) = 0 at n = {n}; the normalized gap is undefined")
    sig = math.sqrt(sig2)
    p_sup = q_sup = 0.0
    bp_max = bq_max = 0.0
    for tj in grid.positive():
        x = float(n) * float(tj)
        m = int(math.floor(x + 1e-9 * max(x, 1.0)))
        delta = max(x - m, 0.0)
        kcut, bp, bq = _gap_cutoff(ws, m, delta, sig)
        p_tot = q_tot = 0.0
        for lo in range(1, kcut + 1, CHUNK):
            hi = min(kcut, lo + CHUNK - 1)
            p = ws.c * np.arange(float(lo), hi + 1.0) ** (-ws.s)
            b = -p * x
            if m > 0:
                a = m * np.log1p(-p)
            else:
                a = np.zeros_like(p)
            p_tot += float(np.sum(np.abs(np.exp(b) * np.expm1(a - b))))
            bq2 = -2.0 * p * x
            g = 1.0 - 2.0 * p
            pos = g > 0.0
            dq = np.empty_like(p)
            if m > 0:
                aq = np.empty_like(p)
                aq[pos] = m * np.log1p(-2.0 * p[pos])
                dq[pos] = np.exp(bq2[pos]) * np.expm1(aq[pos] - bq2[pos])
                gn = g[~pos]
                dq[~pos] = np.sign(gn) ** m * np.abs(gn) ** m - np.exp(bq2[~pos])
            else:
                dq = -np.expm1(bq2)
            q_tot += 0.5 * float(np.sum(np.abs(dq)))
        p_sup = max(p_sup, p_tot)
        q_sup = max(q_sup, q_tot)
        bp_max = max(bp_max, bp)
        bq_max = max(bq_max, bq)
    return GapReport(
        n=int(n),
        times=grid.times,
        p_gap=p_sup / sig,
        q_gap=q_sup / sig,
        p_uncertainty=bp_max / sig,
        q_uncertainty=bq_max / sig,
        p_gap_raw=p_sup,
        q_gap_raw=q_sup,
        sigma=sig,
    )
