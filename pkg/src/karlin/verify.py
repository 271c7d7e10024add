"""Named verification suites.

Each suite returns a SuiteReport with individual Check entries; the
CLI `verify` subcommand serializes these to JSON, and the acceptance
tests call them directly so both paths exercise identical code.

Gating follows fixed rules per suite; anything informational that
should not gate lands in the stats dicts.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from . import kernels as kern
from . import montecarlo as mc
from . import poisson as po
from . import urn
from . import weights as wt

SUITES = ("identities", "poisson-cov", "limit-cov", "clt", "gaps", "psd", "walk")

FIVE_POINT = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass
class Check:
    name: str
    passed: bool
    stats: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    suite: str
    passed: bool
    checks: list[Check]
    params: dict
    elapsed_s: float

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": bool(self.passed),
            "params": self.params,
            "elapsed_s": self.elapsed_s,
            "checks": [asdict(c) for c in self.checks],
        }


def _finish(suite: str, checks: list[Check], params: dict, t0: float) -> SuiteReport:
    return SuiteReport(
        suite=suite,
        passed=all(c.passed for c in checks),
        checks=checks,
        params=params,
        elapsed_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------


def identities(seed: int = 0, draws: int = 20, alpha: float | None = None) -> SuiteReport:
    """Deterministic and structural identities at float accuracy.

    Kernel-level identities are checked on random grids in [0, 4] over
    `draws` random parameter draws; intensity and covariance identities
    on random scalar arguments; path decompositions on small simulated
    replicas (exactness is bitwise there). Passing alpha pins every
    index draw to that value; grids and seeds stay random.
    """
    t0 = time.perf_counter()
    rng = Generator(Philox(key=[seed, 0]))

    def _draw_alpha(lo: float, hi: float) -> float:
        if alpha is not None:
            return float(alpha)
        return float(rng.uniform(lo, hi))
    tol = 1e-11
    worst: dict[str, float] = {
        "kernel-decomposition": 0.0,
        "kernel-fbm-match": 0.0,
        "kernel-odd-part": 0.0,
        "kernel-self-similarity": 0.0,
        "kernel-z2-u2-ratio": 0.0,
        "kernel-clock-change": 0.0,
        "intensity-subadd-p": 0.0,
        "intensity-subadd-q": 0.0,
        "parity-halving": 0.0,
        "coupling-centered-sums": 0.0,
        "exact-cov-additivity": 0.0,
        "quadrature-u2": 0.0,
    }
    decomp_exact = True
    ones_collapse = True
    for _ in range(draws):
        a = _draw_alpha(0.02, 0.98)
        npts = int(rng.integers(5, 51))
        grid = np.unique(rng.uniform(0.0, 4.0, npts))
        ss, tt = np.meshgrid(grid, grid, indexing="ij")
        worst["kernel-decomposition"] = max(
            worst["kernel-decomposition"], kern.decomposition_residual(a, grid)
        )
        worst["kernel-fbm-match"] = max(worst["kernel-fbm-match"], kern.lei_residual(a, grid))
        worst["kernel-odd-part"] = max(worst["kernel-odd-part"], kern.oddpart_residual(a, grid))
        fam = str(rng.choice(kern.KERNEL_FAMILIES))
        if fam == "fbm":
            spec = kern.KernelSpec(fam, h=float(rng.uniform(0.05, 1.0)))
        elif fam == "bifbm":
            kk = float(rng.uniform(0.05, 1.0))
            spec = kern.KernelSpec(fam, h=float(rng.uniform(0.05, 1.0 / kk)), k=kk)
        else:
            spec = kern.KernelSpec(fam, alpha=a)
        worst["kernel-self-similarity"] = max(
            worst["kernel-self-similarity"],
            kern.self_similarity_residual(spec, grid, float(rng.uniform(0.25, 4.0))),
        )
        z2m = kern.kernel_eval(kern.KernelSpec("limit-z2", alpha=a), ss, tt)
        u2m = kern.kernel_eval(kern.KernelSpec("limit-u2", alpha=a), ss, tt)
        worst["kernel-z2-u2-ratio"] = max(
            worst["kernel-z2-u2-ratio"], float(np.max(np.abs(z2m - 2.0 ** (2.0 - a) * u2m)))
        )
        zm = kern.kernel_eval(kern.KernelSpec("limit-z", alpha=a), ss, tt)
        tc = kern.kernel_eval(kern.KernelSpec("tc-bm", alpha=a), ss, tt)
        worst["kernel-clock-change"] = max(
            worst["kernel-clock-change"], float(np.max(np.abs(zm - math.gamma(1.0 - a) * tc)))
        )

        ws = wt.make_weights(_draw_alpha(0.05, 0.95))
        k = int(rng.integers(1, 1_000_000))
        s_, t_ = np.sort(rng.uniform(0.0, 50.0, 2))
        lhs = po.tilde_p(ws, k, t_) - po.tilde_p(ws, k, s_)
        rhs = (1.0 - po.tilde_p(ws, k, s_)) * po.tilde_p(ws, k, t_ - s_)
        worst["intensity-subadd-p"] = max(worst["intensity-subadd-p"], abs(lhs - rhs))
        lhs = po.tilde_q(ws, k, t_) - po.tilde_q(ws, k, s_)
        rhs = (1.0 - 2.0 * po.tilde_q(ws, k, s_)) * po.tilde_q(ws, k, t_ - s_)
        worst["intensity-subadd-q"] = max(worst["intensity-subadd-q"], abs(lhs - rhs))
        worst["parity-halving"] = max(
            worst["parity-halving"],
            abs(po.tilde_q(ws, k, t_) - 0.5 * po.tilde_p(ws, k, 2.0 * t_)),
        )

        a_c = _draw_alpha(0.05, 0.70)
        ws_c = wt.make_weights(a_c, tail_tol=1e-6)
        sgn = urn.SignSource(mode="rademacher", seed=int(rng.integers(0, 2**62)))
        # Larger indices blow up the signed-sum cutoff; shorten the
        # horizon there so the streamed sums stay cheap.
        tc_ = float(rng.uniform(1.0, 256.0 if a_c <= 0.7 else 64.0))
        co = po.centered_sign_sum_tilde(ws_c, sgn, tc_, "odd")
        cz = po.centered_sign_sum_tilde(ws_c, sgn, 2.0 * tc_, "occupancy")
        worst["coupling-centered-sums"] = max(worst["coupling-centered-sums"], abs(co - 0.5 * cz))

        ws_e = wt.make_weights(_draw_alpha(0.05, 0.80))
        n_e = int(rng.integers(10, 2000))
        se, te = float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, 1.0))
        za = po.exact_cov(ws_e, "z1", n_e, se, te) + po.exact_cov(ws_e, "z2", n_e, se, te)
        worst["exact-cov-additivity"] = max(
            worst["exact-cov-additivity"], abs(za - po.exact_cov(ws_e, "z", n_e, se, te))
        )
        ua = po.exact_cov(ws_e, "u1", n_e, se, te) + po.exact_cov(ws_e, "u2", n_e, se, te)
        worst["exact-cov-additivity"] = max(
            worst["exact-cov-additivity"], abs(ua - po.exact_cov(ws_e, "u", n_e, se, te))
        )

        # Path identities are bitwise regardless of centering accuracy,
        # so a loose tail_tol keeps the centering tables small here.
        a_sim = _draw_alpha(0.1, 0.8)
        ws_sim = wt.make_weights(a_sim, tail_tol=1e-4 if a_sim <= 0.8 else 1e-3)
        n_sim = int(rng.integers(50, 400))
        pg = urn.make_grid([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
        bun = urn.simulate_discrete(
            ws_sim, sgn, n_sim, pg, Generator(Philox(key=[seed, int(rng.integers(0, 2**62))]))
        )
        v = bun.values
        decomp_exact &= bool(
            np.all((v["z_eps"] - v["z2_eps"]) - v["z1_eps"] == 0.0)
            and np.all((v["u_eps"] - v["u2_eps"]) - v["u1_eps"] == 0.0)
        )
        ones = urn.SignSource(mode="ones")
        bun1 = urn.simulate_discrete(
            ws_sim, ones, n_sim, pg, Generator(Philox(key=[seed, int(rng.integers(0, 2**62))]))
        )
        v1 = bun1.values
        ones_collapse &= bool(
            np.array_equal(v1["z_eps"], v1["z_star"]) and np.array_equal(v1["u_eps"], v1["u_star"])
        )

    for _ in range(5):
        a = float(rng.uniform(0.1, 0.9))
        sq, tq = float(rng.uniform(0.1, 3.0)), float(rng.uniform(0.1, 3.0))
        q = kern.u2_cov_quadrature(a, sq, tq)
        c = kern.kernel_eval(kern.KernelSpec("limit-u2", alpha=a), sq, tq)
        worst["quadrature-u2"] = max(worst["quadrature-u2"], abs(q - c) / max(abs(c), 1e-12))

    checks = [
        Check(name, res <= (1e-12 if name.startswith("intensity") else
                            1e-15 if name == "parity-halving" else
                            1e-9 if name == "quadrature-u2" else tol),
              {"max_residual": res,
               "tolerance": (1e-12 if name.startswith("intensity") else
                             1e-15 if name == "parity-halving" else
                             1e-9 if name == "quadrature-u2" else tol)})
        for name, res in worst.items()
    ]
    checks.append(Check("path-decomposition-bitexact", decomp_exact, {}))
    checks.append(Check("ones-signs-collapse", ones_collapse, {}))
    return _finish("identities", checks, {"seed": seed, "draws": draws}, t0)


# ---------------------------------------------------------------------------


def _upper_entries(m: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(m.shape[0])
    return m[iu]


def poisson_cov(
    alphas=(0.25, 0.5),
    n: int = 10_000,
    replicas: int = 10_000,
    seed: int = 20260826,
    times=FIVE_POINT,
    workers: int | None = None,
) -> SuiteReport:
    """Empirical covariances of the Poissonized components against the
    closed forms, pooled z-scores gated at frac(|z|>3) < 1% and
    max |z| < 6."""
    t0 = time.perf_counter()
    comps = ("z1_tilde", "z2_tilde", "u1_tilde", "u2_tilde")
    pooled: list[float] = []
    checks: list[Check] = []
    for a in alphas:
        cfg = mc.McConfig(
            mode="poissonized",
            alpha=float(a),
            n=int(n),
            times=tuple(times),
            replicas=int(replicas),
            master_seed=int(seed),
            workers=workers,
        )
        res = mc.run_mc(cfg)
        ws = wt.make_weights(float(a))
        detail: dict = {"alpha": a}
        for comp in comps:
            emp = res.cov_block(comp, comp)
            se = res.se_block(comp, comp)
            tgt = mc.exact_cov_matrix(ws, comp, int(n), res.times_pos)
            z = (emp - tgt) / se
            zu = _upper_entries(z)
            pooled.extend(float(v) for v in zu)
            detail[comp] = {
                "z": np.round(z, 4).tolist(),
                "max_abs_z": float(np.max(np.abs(zu))),
            }
        for pair in (("z1_tilde", "z2_tilde"), ("u1_tilde", "u2_tilde")):
            zc = res.cov_block(*pair) / res.se_block(*pair)
            detail[f"cross-{pair[0]}-{pair[1]}-max-abs-z"] = float(np.max(np.abs(zc)))
        # Mean diagnostic over the signed (mean-zero) processes only;
        # n_arrivals is excluded since its mean is n*t by construction.
        g = len(res.times_pos)
        mz = []
        for name in comps:
            i0 = res.index(name, 0)
            mz.append(np.abs(res.mean[i0 : i0 + g] / np.maximum(res.se_mean[i0 : i0 + g], 1e-300)))
        detail["mean_max_abs_z"] = float(np.max(mz))
        checks.append(Check(f"exact-cov-alpha-{a}", True, detail))
    zp = np.abs(np.asarray(pooled))
    frac3 = float(np.mean(zp > 3.0))
    maxz = float(np.max(zp))
    checks.append(
        Check(
            "pooled-z-gate",
            frac3 < 0.01 and maxz < 6.0,
            {"entries": int(zp.size), "frac_gt3": frac3, "max_abs_z": maxz},
        )
    )
    return _finish(
        "poisson-cov",
        checks,
        {"alphas": list(alphas), "n": n, "replicas": replicas, "seed": seed, "times": list(times)},
        t0,
    )


def limit_cov(
    alpha: float = 0.5,
    n: int = 100_000,
    replicas: int = 5_000,
    seed: int = 20260827,
    times=FIVE_POINT,
    workers: int | None = None,
) -> SuiteReport:
    """Normalized empirical covariances of the discrete components
    against the limit kernels: each entry within 4 SE + 5% of the
    kernel value, cross-covariances within 4 SE of zero."""
    t0 = time.perf_counter()
    cfg = mc.McConfig(
        mode="discrete",
        alpha=float(alpha),
        n=int(n),
        times=tuple(times),
        replicas=int(replicas),
        master_seed=int(seed),
        workers=workers,
    )
    res = mc.run_mc(cfg)
    nu = res.sigma2
    tpos = np.asarray(res.times_pos)
    fam = {"z1_eps": "limit-z1", "z2_eps": "limit-z2", "u1_eps": "limit-u1", "u2_eps": "limit-u2"}
    checks: list[Check] = []
    for comp, family in fam.items():
        emp = res.cov_block(comp, comp) / nu
        se = res.se_block(comp, comp) / nu
        smat, tmat = np.meshgrid(tpos, tpos, indexing="ij")
        tgt = kern.kernel_eval(kern.KernelSpec(family, alpha=float(alpha)), smat, tmat)
        gap = np.abs(emp - tgt)
        allow = 4.0 * se + 0.05 * np.abs(tgt)
        ok = bool(np.all(_upper_entries(gap) <= _upper_entries(allow)))
        checks.append(
            Check(
                f"limit-{comp}",
                ok,
                {
                    "max_gap_over_allowance": float(np.max(gap / allow)),
                    "empirical_normalized": np.round(emp, 5).tolist(),
                    "kernel": np.round(tgt, 5).tolist(),
                },
            )
        )
    for pair in (("z1_eps", "z2_eps"), ("u1_eps", "u2_eps")):
        emp = res.cov_block(*pair) / nu
        se = res.se_block(*pair) / nu
        ok = bool(np.all(np.abs(emp) <= 4.0 * se))
        checks.append(
            Check(
                f"cross-{pair[0]}-{pair[1]}",
                ok,
                {"max_abs_z": float(np.max(np.abs(emp / se)))},
            )
        )
    return _finish(
        "limit-cov",
        checks,
        {
            "alpha": alpha,
            "n": n,
            "replicas": replicas,
            "seed": seed,
            "times": list(times),
            "nu": nu,
        },
        t0,
    )


def clt(
    alpha: float = 0.5,
    n: int = 100_000,
    replicas: int = 10_000,
    seed: int = 20260828,
    level: float = 0.001,
) -> SuiteReport:
    """KS normality of the final-time occupancy counts.

    The odd-count statistic lives on a lattice of spacing 2 (each ball
    flips exactly one box parity, so u_star(n) has the parity of n);
    the KS distance against a continuous normal is floored near
    1/(2 sd * sqrt(2 pi)) regardless of n, which this gate will expose
    at large replica counts.
    """
    t0 = time.perf_counter()
    ws = wt.make_weights(float(alpha))
    zs = np.empty(replicas)
    us = np.empty(replicas)
    for r in range(replicas):
        rng = Generator(Philox(key=[int(seed), r]))
        labels = urn.sample_labels(ws, rng, int(n))
        _, counts = np.unique(labels, return_counts=True)
        zs[r] = counts.size
        us[r] = int(np.count_nonzero(counts & 1))
    checks = []
    for name, sample in (("z_star", zs), ("u_star", us)):
        ks = mc.ks_normality(sample)
        hv, hc = np.unique(sample.astype(np.int64), return_counts=True)
        checks.append(
            Check(
                f"clt-{name}",
                ks.p_value > level,
                {
                    "d": ks.d,
                    "p_value": ks.p_value,
                    "mean": ks.mean,
                    "sd": ks.sd,
                    "lattice_spacing": 1 if name == "z_star" else 2,
                    "hist_values": hv.tolist(),
                    "hist_counts": hc.tolist(),
                },
            )
        )
    return _finish(
        "clt",
        checks,
        {"alpha": alpha, "n": n, "replicas": replicas, "seed": seed, "level": level},
        t0,
    )


def gaps(
    trend_alpha: float = 0.5,
    trend_ns=(1_000, 100_000, 10_000_000),
    ratio_alphas=(0.25, 0.5, 0.75),
    ratio_n: int = 1_000_000,
    lemv_ns=(1_000, 10_000, 100_000, 1_000_000),
) -> SuiteReport:
    """Occupancy-scale ratio, centering-gap trend, and the scaled-time
    boundedness diagnostic."""
    t0 = time.perf_counter()
    checks: list[Check] = []
    for a in ratio_alphas:
        rows = mc.convergence_report(float(a), [ratio_n])
        r = rows[0]
        checks.append(
            Check(
                f"v-over-nu-alpha-{a}",
                r.rel_dev < 0.05,
                {"v_over_nu": r.v_over_nu, "target": r.gamma_target, "rel_dev": r.rel_dev},
            )
        )
    rows = mc.convergence_report(float(trend_alpha), list(trend_ns) if isinstance(trend_ns, tuple) else trend_ns)
    for gap_name in ("p_gap", "q_gap"):
        vals = [getattr(r, gap_name) for r in rows]
        mono = all(b <= 1.1 * a for a, b in zip(vals, vals[1:]))
        checks.append(
            Check(
                f"gap-trend-{gap_name}",
                mono and vals[-1] < 0.1,
                {"n": [r.n for r in rows], "values": vals, "final": vals[-1]},
            )
        )
    lemv_rows = mc.convergence_report(float(trend_alpha), list(lemv_ns))
    lv = [r.lemv_stat for r in lemv_rows]
    checks.append(
        Check(
            "lemv-bounded",
            all(b <= 1.1 * a for a, b in zip(lv, lv[1:])),
            {"n": [r.n for r in lemv_rows], "values": lv},
        )
    )
    return _finish(
        "gaps",
        checks,
        {
            "trend_alpha": trend_alpha,
            "trend_ns": list(trend_ns),
            "ratio_alphas": list(ratio_alphas),
            "ratio_n": ratio_n,
            "lemv_ns": list(lemv_ns),
        },
        t0,
    )


def psd(
    alphas=tuple(np.round(np.arange(0.1, 0.95, 0.1), 10)),
    grids: int = 10,
    grid_size: int = 15,
    seed: int = 31,
) -> SuiteReport:
    """Positive semidefiniteness of the extended-parameter bifbm
    (h = 1/(2 alpha), k = alpha) on random grids."""
    t0 = time.perf_counter()
    rng = Generator(Philox(key=[seed, 1]))
    checks: list[Check] = []
    for a in alphas:
        a = float(a)
        spec = kern.KernelSpec("bifbm", h=1.0 / (2.0 * a), k=a)
        worst_ratio = -np.inf
        for _ in range(grids):
            t = np.sort(rng.uniform(0.01, 4.0, grid_size))
            while np.any(np.diff(t) <= 0.0):
                t = np.sort(rng.uniform(0.01, 4.0, grid_size))
            cm = kern.cov_matrix(spec, t)
            me = kern.min_eig(cm)
            dm = float(np.max(np.diag(cm.matrix)))
            worst_ratio = max(worst_ratio, -me / dm)
        checks.append(
            Check(
                f"bifbm-psd-alpha-{a:g}",
                worst_ratio <= 1e-10,
                {"worst_negative_eig_over_maxdiag": worst_ratio},
            )
        )
    return _finish(
        "psd",
        checks,
        {"alphas": [float(a) for a in alphas], "grids": grids, "grid_size": grid_size, "seed": seed},
        t0,
    )


def walk(
    seeds: int = 1_000,
    n: int = 1_000,
    alpha: float = 0.5,
    seed0: int = 400,
) -> SuiteReport:
    """Exact equivalence of the label-driven walk with the signed
    occupancy processes, step by step, over many independent runs."""
    t0 = time.perf_counter()
    ws = wt.make_weights(float(alpha))
    counts = np.arange(1, n + 1, dtype=np.int64)
    all_equal = True
    fails = 0
    for s in range(seeds):
        rng = Generator(Philox(key=[seed0, s]))
        labels = urn.sample_labels(ws, rng, n)
        signs = urn.SignSource(mode="rademacher", seed=seed0 * 1_000_003 + s)
        paths = urn._paths_from_labels(ws, signs, labels, counts, None)
        odd = np.cumsum(urn.walk_steps_from_labels(signs, labels, "odd"))
        occ = np.cumsum(urn.walk_steps_from_labels(signs, labels, "occupancy"))
        ok = np.array_equal(odd, paths["u_eps"]) and np.array_equal(occ, paths["z_eps"])
        all_equal &= bool(ok)
        fails += 0 if ok else 1
    checks = [Check("walk-matches-signed-paths", all_equal, {"seeds": seeds, "failures": fails})]
    return _finish("walk", checks, {"seeds": seeds, "n": n, "alpha": alpha, "seed0": seed0}, t0)


# ---------------------------------------------------------------------------

_REGISTRY = {
    "identities": identities,
    "poisson-cov": poisson_cov,
    "limit-cov": limit_cov,
    "clt": clt,
    "gaps": gaps,
    "psd": psd,
    "walk": walk,
}


def run_suite(name: str, **kwargs) -> SuiteReport:
    """Run one named suite (see SUITES) with overridable parameters."""
    if name not in _REGISTRY:
        from .errors import DomainError

        raise DomainError(f"unknown suite {name!r}; choose from {SUITES}")
    return _REGISTRY[name](**kwargs)
