"""Limit covariance kernels and Gaussian-process sampling.

The normalized occupancy processes converge to centered Gaussian
processes that are self-similar with index alpha/2.  Their kernels,
with g = Gamma(1 - alpha):

    limit-z1 : g * ((s+t)^a - max(s,t)^a)
    limit-z2 : g * (s^a + t^a - (s+t)^a)
    limit-z  : g * min(s,t)^a                     (= z1 + z2)
    limit-u1 : g * 2^(a-2) * ((s+t)^a - |t-s|^a)
    limit-u2 : g * 2^(a-2) * (s^a + t^a - (s+t)^a)
    limit-u  : g * 2^(a-2) * (s^a + t^a - |t-s|^a) (= u1 + u2)

Reference families for the structural identities:

    fbm    : (s^(2H) + t^(2H) - |t-s|^(2H)) / 2
    bifbm  : 2^(-K) * ((s^(2H) + t^(2H))^K - |t-s|^(2HK))
    tc-bm  : min(s,t)^a        (Brownian motion at clock t^a)

Structural identities: limit-u = g * 2^(a-1) * fbm with Hurst a/2;
limit-u1 is g * 2^a times the odd part of a two-sided fbm with Hurst
a/2; limit-z2 = 2^(2-a) * limit-u2; and under the clock change
x -> x^(1/a), limit-z2 plus g * 2^a times the extended-parameter
bifbm (H = 1/(2a), K = a, so 2HK = 1) adds up to twice the tc-bm
kernel -- the bifbm complement is exactly what separates the
dependent-increment component from a Brownian motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, NotPsdError, QuadratureError

KERNEL_FAMILIES = (
    "limit-z1",
    "limit-z2",
    "limit-z",
    "limit-u1",
    "limit-u2",
    "limit-u",
    "fbm",
    "bifbm",
    "tc-bm",
)

_ALPHA_FAMILIES = ("limit-z1", "limit-z2", "limit-z", "limit-u1", "limit-u2", "limit-u", "tc-bm")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its parameters.

    alpha is used by the limit-* and tc-bm families; h (Hurst) by fbm
    and bifbm; k by bifbm only.  The extended bifbm region h > 1 is
    accepted as long as h*k <= 1.
    """

    family: str
    alpha: float | None = None
    h: float | None = None
    k: float | None = None

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise DomainError(f"unknown kernel family {self.family!r}")
        if self.family in _ALPHA_FAMILIES:
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise DomainError(f"{self.family} needs alpha in (0, 1), got {self.alpha!r}")
        elif self.family == "fbm":
            if self.h is None or not 0.0 < self.h <= 1.0:
                raise DomainError(f"fbm needs Hurst h in (0, 1], got {self.h!r}")
        else:  # bifbm
            if self.h is None or self.k is None:
                raise DomainError("bifbm needs both h and k")
            if not 0.0 < self.k <= 1.0:
                raise DomainError(f"bifbm needs k in (0, 1], got {self.k!r}")
            if not 0.0 < self.h or self.h * self.k > 1.0 + 1e-12:
                raise DomainError(f"bifbm needs h > 0 with h*k <= 1, got h={self.h!r} k={self.k!r}")

    @property
    def hurst(self) -> float:
        """Self-similarity index: kernel(cs, ct) = c^(2*hurst) kernel(s, t)."""
        if self.family in _ALPHA_FAMILIES:
            return 0.5 * self.alpha
        if self.family == "fbm":
            return self.h
        return self.h * self.k


def kernel_eval(spec: KernelSpec, s, t):
    """Kernel value at (s, t); broadcasts over arrays, times must be >= 0."""
    sa = np.asarray(s, dtype=np.float64)
    ta = np.asarray(t, dtype=np.float64)
    if np.any(sa < 0.0) or np.any(ta < 0.0):
        raise DomainError("kernel times must be >= 0")
    fam = spec.family
    if fam in _ALPHA_FAMILIES:
        a = spec.alpha
        g = math.gamma(1.0 - a)
        if fam == "limit-z1":
            out = g * ((sa + ta) ** a - np.maximum(sa, ta) ** a)
        elif fam == "limit-z2":
            out = g * (sa**a + ta**a - (sa + ta) ** a)
        elif fam == "limit-z":
            out = g * np.minimum(sa, ta) ** a
        elif fam == "limit-u1":
            out = g * 2.0 ** (a - 2.0) * ((sa + ta) ** a - np.abs(ta - sa) ** a)
        elif fam == "limit-u2":
            out = g * 2.0 ** (a - 2.0) * (sa**a + ta**a - (sa + ta) ** a)
        elif fam == "limit-u":
            out = g * 2.0 ** (a - 2.0) * (sa**a + ta**a - np.abs(ta - sa) ** a)
        else:  # tc-bm
            out = np.minimum(sa, ta) ** a
    elif fam == "fbm":
        h2 = 2.0 * spec.h
        out = 0.5 * (sa**h2 + ta**h2 - np.abs(ta - sa) ** h2)
    else:  # bifbm
        h2, kk = 2.0 * spec.h, spec.k
        out = 2.0 ** (-kk) * ((sa**h2 + ta**h2) ** kk - np.abs(ta - sa) ** (h2 * kk))
    if out.ndim == 0:
        return float(out)
    return out


def _pair_grids(times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.meshgrid(times, times, indexing="ij")


def decomposition_residual(alpha: float, times) -> float:
    """max |K_z - K_z1 - K_z2| and |K_u - K_u1 - K_u2| over the grid."""
    t = _validate_times(times)
    ss, tt = _pair_grids(t)
    rz = kernel_eval(KernelSpec("limit-z", alpha=alpha), ss, tt) - (
        kernel_eval(KernelSpec("limit-z1", alpha=alpha), ss, tt)
        + kernel_eval(KernelSpec("limit-z2", alpha=alpha), ss, tt)
    )
    ru = kernel_eval(KernelSpec("limit-u", alpha=alpha), ss, tt) - (
        kernel_eval(KernelSpec("limit-u1", alpha=alpha), ss, tt)
        + kernel_eval(KernelSpec("limit-u2", alpha=alpha), ss, tt)
    )
    return float(max(np.max(np.abs(rz)), np.max(np.abs(ru))))


def lei_residual(alpha: float, times) -> float:
    """max |K_u - Gamma(1-alpha) 2^(alpha-1) K_fbm(alpha/2)| over the grid."""
    t = _validate_times(times)
    ss, tt = _pair_grids(t)
    lhs = kernel_eval(KernelSpec("limit-u", alpha=alpha), ss, tt)
    rhs = (
        math.gamma(1.0 - alpha)
        * 2.0 ** (alpha - 1.0)
        * kernel_eval(KernelSpec("fbm", h=alpha / 2.0), ss, tt)
    )
    return float(np.max(np.abs(lhs - rhs)))


def oddpart_residual(alpha: float, times) -> float:
    """max |K_u1 - Gamma(1-alpha) 2^alpha K_odd| over the grid, where
    K_odd(s,t) = ((s+t)^alpha - |t-s|^alpha)/4 is the covariance of the
    odd part of a two-sided fbm with Hurst alpha/2."""
    t = _validate_times(times)
    ss, tt = _pair_grids(t)
    lhs = kernel_eval(KernelSpec("limit-u1", alpha=alpha), ss, tt)
    k_odd = 0.25 * ((ss + tt) ** alpha - np.abs(tt - ss) ** alpha)
    rhs = math.gamma(1.0 - alpha) * 2.0**alpha * k_odd
    return float(np.max(np.abs(lhs - rhs)))


def self_similarity_residual(spec: KernelSpec, times, scale: float) -> float:
    """max |k(c s, c t) - c^(2h) k(s, t)| over the grid, c = scale."""
    if not (math.isfinite(scale) and scale > 0.0):
        raise DomainError(f"scale must be positive, got {scale}")
    t = _validate_times(times)
    ss, tt = _pair_grids(t)
    lhs = kernel_eval(spec, scale * ss, scale * tt)
    rhs = scale ** (2.0 * spec.hurst) * kernel_eval(spec, ss, tt)
    return float(np.max(np.abs(lhs - rhs)))


def u2_cov_quadrature(alpha: float, s: float, t: float) -> float:
    """limit-u2 evaluated through its spectral integral
    2^(alpha-2) * alpha * int_0^inf (1-e^(-xs))(1-e^(-xt)) x^(-1-alpha) dx,
    an independent route to the closed form."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie strictly in (0, 1), got {alpha}")
    for x in (s, t):
        if not (math.isfinite(x) and x >= 0.0):
            raise DomainError(f"times must be finite and >= 0, got {x}")
    if s == 0.0 or t == 0.0:
        return 0.0

    def f(x: float) -> float:
        return -math.expm1(-x * s) * -math.expm1(-x * t) * x ** (-1.0 - alpha)

    b = 1.0 / max(s, t)
    v1, e1 = integrate.quad(f, 0.0, b, epsabs=0.0, epsrel=1e-12, limit=300)
    v2, e2 = integrate.quad(f, b, np.inf, epsabs=1e-300, epsrel=1e-12, limit=300)
    val = v1 + v2
    if not math.isfinite(val) or (e1 + e2) > 1e-9 * max(abs(val), 1e-12):
        raise QuadratureError(
            f"u2 quadrature did not converge: value {val}, error estimate {e1 + e2}"
        )
    return 2.0 ** (alpha - 2.0) * alpha * val


@dataclass
class CovMatrix:
    """Kernel matrix over a grid that starts at t=0, with an optional
    Cholesky factor of the positive-time block."""

    spec: KernelSpec
    times: np.ndarray
    matrix: np.ndarray
    factor: np.ndarray | None = None
    jitter: float = 0.0


def _validate_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=np.float64).ravel()
    if t.size == 0:
        raise DomainError("empty time grid")
    if not np.all(np.isfinite(t)) or np.any(t < 0.0):
        raise DomainError("grid times must be finite and >= 0")
    if np.any(np.diff(t) <= 0.0):
        raise DomainError("grid times must be strictly increasing")
    return t


def cov_matrix(spec: KernelSpec, times) -> CovMatrix:
    """Kernel matrix on the grid; t=0 is prepended when missing, giving
    the pinned zero row/column."""
    t = _validate_times(times)
    if t[0] != 0.0:
        t = np.concatenate(([0.0], t))
    ss, tt = _pair_grids(t)
    m = kernel_eval(spec, ss, tt)
    return CovMatrix(spec=spec, times=t, matrix=np.asarray(m, dtype=np.float64))


def min_eig(cov: CovMatrix) -> float:
    """Smallest eigenvalue of the full kernel matrix."""
    return float(np.linalg.eigvalsh(cov.matrix)[0])


def chol_psd(cov: CovMatrix, max_rel_jitter: float = 1e-8) -> CovMatrix:
    """Cholesky-factor the positive-time block, escalating a diagonal
    jitter from 1e-12 to max_rel_jitter (relative to the largest
    diagonal entry) if plain factorization fails.

    Raises NotPsdError when the budget is exhausted; cov.jitter records
    what was added.
    """
    block = cov.matrix[1:, 1:]
    dmax = float(np.max(np.diag(block))) if block.size else 1.0
    if dmax <= 0.0:
        dmax = 1.0
    rel = 0.0
    while True:
        try:
            fac = np.linalg.cholesky(block + rel * dmax * np.eye(block.shape[0]))
            cov.factor = fac
            cov.jitter = rel * dmax
            return cov
        except np.linalg.LinAlgError:
            if rel == 0.0:
                rel = 1e-12
            else:
                rel *= 10.0
            if rel > max_rel_jitter:
                raise NotPsdError(
                    f"kernel matrix for {cov.spec.family} not factorizable within "
                    f"jitter {max_rel_jitter:g} * max diagonal"
                ) from None


def sample_gp(cov: CovMatrix, rng, n_paths: int = 1) -> np.ndarray:
    """n_paths Gaussian paths with the kernel's covariance, shape
    (n_paths, len(times)); the t=0 coordinate is pinned to zero."""
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    if cov.factor is None:
        chol_psd(cov)
    m = cov.factor.shape[0]
    g = rng.standard_normal((m, n_paths))
    paths = (cov.factor @ g).T
    return np.concatenate([np.zeros((n_paths, 1)), paths], axis=1)
