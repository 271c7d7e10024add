"""Replicated simulation runs and their statistical summaries.

Each replica r gets its own counter-based RNG stream keyed by
(master_seed, r) plus a derived sign seed, so results are independent
of how replicas are distributed over workers: the assembled replica
matrix is identical for any worker count, and every reduction happens
in fixed replica order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy import special as sp

from .errors import DomainError
from .kernels import KernelSpec, chol_psd, cov_matrix, sample_gp
from .poisson import POISSON_PROCESSES, depoisson_gap, simulate_poissonized
from .urn import (
    DISCRETE_PROCESSES,
    PathGrid,
    SignSource,
    _center_tables,
    simulate_discrete,
)
from .weights import big_v, gamma_one_minus_alpha, make_weights, nu_count, sigma2

MC_MODES = ("discrete", "poissonized", "gp")

DEFAULT_TIMES = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))


def env_workers() -> int:
    """Worker count from KARLIN_WORKERS (default 1)."""
    try:
        return max(1, int(os.environ.get("KARLIN_WORKERS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    """Configuration of a replicated run."""

    mode: str = "discrete"
    alpha: float = 0.5
    n: int = 10_000
    times: tuple[float, ...] = DEFAULT_TIMES
    replicas: int = 100
    master_seed: int = 0
    sign_mode: str = "rademacher"
    sign_prefix: tuple[int, ...] = ()
    tail_tol: float = 1e-9
    workers: int | None = None
    gp_family: str | None = None
    gp_alpha: float | None = None
    gp_h: float | None = None
    gp_k: float | None = None

    def kernel_spec(self) -> KernelSpec:
        if self.gp_family is None:
            raise DomainError("gp mode needs a kernel family")
        return KernelSpec(
            family=self.gp_family, alpha=self.gp_alpha, h=self.gp_h, k=self.gp_k
        )


@dataclass
class McResult:
    """Aggregated replica statistics.

    mean/cov/se index the stacked vector (process-major, positive grid
    times within process); cov entries are unnormalized sample
    covariances with jackknife standard errors in se.
    """

    config: McConfig
    names: tuple[str, ...]
    times: tuple[float, ...]
    mean: np.ndarray
    se_mean: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    replicas: int
    sigma2: int
    finals: dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def times_pos(self) -> tuple[float, ...]:
        return self.times[1:]

    def index(self, name: str, time_index: int) -> int:
        g = len(self.times) - 1
        return self.names.index(name) * g + time_index

    def cov_block(self, name_a: str, name_b: str) -> np.ndarray:
        g = len(self.times) - 1
        ia, ib = self.names.index(name_a) * g, self.names.index(name_b) * g
        return self.cov[ia : ia + g, ib : ib + g]

    def se_block(self, name_a: str, name_b: str) -> np.ndarray:
        g = len(self.times) - 1
        ia, ib = self.names.index(name_a) * g, self.names.index(name_b) * g
        return self.se[ia : ia + g, ib : ib + g]


def _sign_seed(master_seed: int, replica: int) -> int:
    """Stable per-replica seed for the sign hash, distinct from the
    label stream key."""
    x = (master_seed * 0x9E3779B97F4A7C15 + replica * 0xBF58476D1CE4E5B9 + 0x1234567) % 2**63
    return int(x)


def _replica_block(config: McConfig, start: int, stop: int) -> np.ndarray:
    """Path rows for replicas [start, stop); shape (stop-start, P*G)."""
    ws = make_weights(config.alpha, config.tail_tol)
    grid = PathGrid(times=config.times)
    names = DISCRETE_PROCESSES if config.mode == "discrete" else POISSON_PROCESSES
    g = len(config.times) - 1
    out = np.empty((stop - start, len(names) * g))
    for r in range(start, stop):
        rng = Generator(Philox(key=[config.master_seed % 2**64, r]))
        signs = SignSource(
            mode=config.sign_mode,
            seed=_sign_seed(config.master_seed, r),
            prefix=config.sign_prefix,
        )
        if config.mode == "discrete":
            b = simulate_discrete(ws, signs, config.n, grid, rng)
        else:
            b = simulate_poissonized(ws, signs, config.n, grid, rng)
        row = np.concatenate([b.values[name][1:] for name in names])
        out[r - start] = row
    return out


def _gather_paths(config: McConfig) -> tuple[tuple[str, ...], np.ndarray]:
    """All replica rows, deterministically ordered by replica index."""
    names = DISCRETE_PROCESSES if config.mode == "discrete" else POISSON_PROCESSES
    r_total = config.replicas
    workers = config.workers if config.workers is not None else env_workers()
    ws = make_weights(config.alpha, config.tail_tol)
    # warm the shared centering tables before any fork
    tpos = tuple(float(t) for t in config.times[1:])
    _center_tables(ws, config.n, tpos, config.mode == "poissonized")
    if workers <= 1 or r_total < 4:
        return names, _replica_block(config, 0, r_total)
    block = max(1, -(-r_total // (workers * 4)))
    spans = [(s, min(s + block, r_total)) for s in range(0, r_total, block)]
    rows = np.empty((r_total, len(names) * (len(config.times) - 1)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = {pool.submit(_replica_block, config, a, b): (a, b) for a, b in spans}
        for fut, (a, b) in futs.items():
            rows[a:b] = fut.result()
    return names, rows


def empirical_cov(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, cov, jackknife SE of each cov entry) for rows of x.

    The leave-one-out covariances have the closed form
    C_(i) = (Pc - R/(R-1) * y_i y_i^T) / (R-2) with y the centered rows
    and Pc = Y^T Y, so the jackknife variance needs only two gram
    matrices.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("empirical_cov needs a 2-d array with at least 2 rows")
    r = x.shape[0]
    mean = x.mean(axis=0)
    y = x - mean
    pc = y.T @ y
    cov = pc / (r - 1)
    if r == 2:
        # No leave-one-out spread exists with two rows.
        return mean, cov, np.full_like(cov, np.inf)
    m2 = (y * y).T @ (y * y)
    a = pc / (r - 2)
    b = (r / (r - 1)) / (r - 2)
    sum_c = r * a - b * pc
    sum_c2 = r * a * a - 2.0 * a * b * pc + b * b * m2
    var_jack = (r - 1) / r * (sum_c2 - sum_c * sum_c / r)
    se = np.sqrt(np.maximum(var_jack, 0.0))
    return mean, cov, se


def run_mc(config: McConfig, keep_finals: bool = False, keep_paths: bool = False) -> McResult:
    """Run all replicas and aggregate.

    keep_finals retains the final-time samples per process (for
    distributional tests); keep_paths retains the whole replica matrix
    in diagnostics['paths'].
    """
    if config.mode not in MC_MODES:
        raise DomainError(f"unknown mc mode {config.mode!r}")
    if config.replicas < 3:
        raise DomainError("need at least 3 replicas")
    t0 = time.perf_counter()
    if config.mode == "gp":
        spec = config.kernel_spec()
        cm = chol_psd(cov_matrix(spec, np.asarray(config.times)))
        rng = Generator(Philox(key=[config.master_seed % 2**64, 0]))
        paths = sample_gp(cm, rng, config.replicas)[:, 1:]
        names = (spec.family,)
        times = tuple(float(v) for v in cm.times)
        diag_extra = {"jitter": cm.jitter}
        sig2 = 0
        ws = None
    else:
        names, paths = _gather_paths(config)
        times = tuple(config.times)
        ws = make_weights(config.alpha, config.tail_tol)
        sig2 = sigma2(ws, config.n)
        diag_extra = {}
    mean, cov, se = empirical_cov(paths)
    g = len(times) - 1
    finals = {}
    if keep_finals:
        for i, name in enumerate(names):
            finals[name] = paths[:, i * g + g - 1].copy()
    diagnostics = {
        "elapsed_s": time.perf_counter() - t0,
        "mode": config.mode,
        **diag_extra,
    }
    if config.mode == "discrete":
        tpos = tuple(float(t) for t in times[1:])
        kcut = _center_tables(ws, config.n, tpos, False)[0]
        diagnostics["truncation_index"] = kcut
    if keep_paths:
        diagnostics["paths"] = paths
    return McResult(
        config=config,
        names=names,
        times=times,
        mean=mean,
        se_mean=np.sqrt(np.maximum(np.diag(cov), 0.0) / paths.shape[0]),
        cov=cov,
        se=se,
        replicas=paths.shape[0],
        sigma2=sig2,
        finals=finals,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class KsResult:
    """Kolmogorov-Smirnov distance of a sample against a fitted normal,
    with the asymptotic p-value (conservative when parameters are
    fitted)."""

    n: int
    d: float
    p_value: float
    mean: float
    sd: float


def ks_normality(samples) -> KsResult:
    """KS statistic of the sample against N(fitted mean, fitted sd)."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n < 100:
        raise DomainError(f"ks_normality needs at least 100 samples, got {n}")
    mu = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        raise DomainError("degenerate sample: zero standard deviation")
    f = sp.ndtr((x - mu) / sd)
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - f))
    d_minus = float(np.max(f - (i - 1) / n))
    d = max(d_plus, d_minus)
    return KsResult(n=n, d=d, p_value=float(sp.kolmogorov(np.sqrt(n) * d)), mean=mu, sd=sd)


@dataclass(frozen=True)
class ConvergenceRow:
    """One n in a convergence sweep: occupancy-scale ratio and
    de-Poissonization gaps."""

    n: int
    nu: int
    v_over_nu: float
    gamma_target: float
    rel_dev: float
    p_gap: float
    q_gap: float
    p_uncertainty: float
    q_uncertainty: float
    lemv_stat: float


def convergence_report(alpha: float, n_list, times=None, tail_tol: float = 1e-9):
    """ConvergenceRow per n: V(n)/nu(n) against Gamma(1-alpha), the
    centering gaps over the grid, and the scaled-time diagnostic
    max over dyadic t of V(n t)/(t^(alpha/2) nu(n))."""
    ws = make_weights(alpha, tail_tol)
    grid = PathGrid(times=tuple(times) if times is not None else DEFAULT_TIMES)
    gamma = gamma_one_minus_alpha(alpha)
    rows = []
    dyadic = [2.0**-j for j in range(10, -1, -1)]
    for n in n_list:
        n = int(n)
        nu = nu_count(ws, float(n))
        if nu == 0:
            raise DomainError(f"nu(n) = 0 at n = {n}; sweep values must satisfy n >= 1/p_1")
        v = big_v(ws, float(n))
        gap = depoisson_gap(ws, n, grid)
        lemv = max(big_v(ws, n * t) / (t ** (alpha / 2.0) * nu) for t in dyadic)
        rows.append(
            ConvergenceRow(
                n=n,
                nu=nu,
                v_over_nu=v / nu,
                gamma_target=gamma,
                rel_dev=abs(v / nu / gamma - 1.0),
                p_gap=gap.p_gap,
                q_gap=gap.q_gap,
                p_uncertainty=gap.p_uncertainty,
                q_uncertainty=gap.q_uncertainty,
                lemv_stat=lemv,
            )
        )
    return rows


def exact_cov_matrix(ws, which: str, n: int, times_pos) -> np.ndarray:
    """Exact Poissonized covariance matrix of one component over the
    positive grid times (unnormalized)."""
    from .poisson import exact_cov

    t = np.asarray(times_pos, dtype=np.float64)
    out = np.empty((t.size, t.size))
    for i in range(t.size):
        for j in range(i, t.size):
            out[i, j] = out[j, i] = exact_cov(ws, which, n, float(t[i]), float(t[j]))
    return out
