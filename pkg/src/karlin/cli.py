"""Command-line front end: simulations, verification suites, and
Gaussian-process sampling, all emitting CSV data plus a JSON manifest.

Output contract:
  - path data goes to CSV with header `t,process,value,replica`;
  - every run writes manifest.json echoing the resolved configuration,
    referencing each emitted file by name and sha256, and recording the
    wall clock (the only field allowed to differ between reruns);
  - `verify` additionally writes report.json with per-check statistics.

Exit codes: 0 success / all checks passed, 1 runtime or check failure,
2 invalid flags or domain errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np
from numpy.random import Generator, Philox

from . import __version__
from . import kernels as kern
from . import montecarlo as mc
from . import verify as ver
from .errors import DomainError, NotPsdError


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_grid(text: str) -> list[float]:
    """Either `start:end:step` (inclusive) or a comma list of times."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError("expected start:end:step")
            start, end, step = parts
            if step <= 0 or end < start:
                raise ValueError("need step > 0 and end >= start")
            count = int(round((end - start) / step)) + 1
            vals = np.round(np.linspace(start, end, count), 12)
        else:
            vals = np.asarray([float(p) for p in text.split(",") if p.strip() != ""])
    except ValueError as exc:
        raise DomainError(f"bad grid {text!r}: {exc}") from None
    if vals.size == 0:
        raise DomainError(f"bad grid {text!r}: empty")
    return [float(v) for v in vals]


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_paths_csv(path: str, times, names, paths: np.ndarray) -> int:
    """Long-format path dump; `paths` excludes the t=0 column (all
    processes start at zero). Returns the number of value rows."""
    times = [float(t) for t in times]
    g = len(times) - 1
    rows = 0
    with open(path, "w", newline="") as fh:
        fh.write("t,process,value,replica\n")
        for r in range(paths.shape[0]):
            for i, name in enumerate(names):
                fh.write(f"{_fmt(times[0])},{name},{_fmt(0.0)},{r}\n")
                block = paths[r, i * g : (i + 1) * g]
                for j in range(g):
                    fh.write(f"{_fmt(times[j + 1])},{name},{_fmt(block[j])},{r}\n")
                rows += g + 1
    return rows


def _write_matrix_csv(path: str, times, matrix: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t," + ",".join(_fmt(t) for t in times) + "\n")
        for t, row in zip(times, matrix):
            fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: str, subcommand: str, config: dict, files: list[str],
                    checks: list[dict], wall_clock_s: float) -> str:
    man = {
        "subcommand": subcommand,
        "artifact_version": __version__,
        "config": config,
        "seed": config.get("seed"),
        "files": [
            {"name": os.path.basename(f), "sha256": _sha256(f)} for f in sorted(files)
        ],
        "checks": checks,
        "wall_clock_s": round(wall_clock_s, 3),
    }
    path = os.path.join(out_dir, "manifest.json")
    _write_json(path, man)
    return path


def _ensure_out(out: str) -> str:
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out = _ensure_out(args.out)
    grid = _parse_grid(args.grid)
    if grid[0] != 0.0:
        grid = [0.0] + grid
    cfg = mc.McConfig(
        mode=args.mode,
        alpha=args.alpha,
        n=args.n,
        times=tuple(grid),
        replicas=args.replicas,
        master_seed=args.seed,
        sign_mode=args.sign_mode,
        sign_prefix=tuple(int(v) for v in args.sign_prefix.split(",")) if args.sign_prefix else (),
        tail_tol=args.tail_tol,
        workers=args.workers,
    )
    res = mc.run_mc(cfg, keep_paths=True)
    paths = res.diagnostics["paths"]
    csv_path = os.path.join(out, "paths.csv")
    rows = _write_paths_csv(csv_path, res.times, res.names, paths)
    files = [csv_path]
    if args.figures:
        from . import figures

        fig_path = os.path.join(out, "paths.png")
        figures.save_path_spaghetti(
            fig_path, res.times, res.names, paths,
            title=f"{args.mode} paths, alpha={args.alpha}, n={args.n}",
        )
        files.append(fig_path)
    config = {
        "mode": args.mode,
        "alpha": args.alpha,
        "n": args.n,
        "times": list(res.times),
        "replicas": args.replicas,
        "seed": args.seed,
        "sign_mode": args.sign_mode,
        "sign_prefix": args.sign_prefix,
        "tail_tol": args.tail_tol,
        "workers": cfg.workers,
    }
    _write_manifest(out, "simulate", config, files, [], time.perf_counter() - t0)
    print(f"simulate: wrote {rows} value rows ({len(res.names)} processes x "
          f"{len(res.times)} times x {args.replicas} replicas) to {csv_path}")
    return 0


_SUITE_CHOICES = ver.SUITES


def _suite_kwargs(args) -> dict:
    """Translate shared CLI flags into per-suite keyword arguments,
    keeping each suite's own defaults when a flag is absent."""
    name = args.suite
    kw: dict = {}
    if name == "identities":
        if args.seed is not None:
            kw["seed"] = args.seed
        if args.draws is not None:
            kw["draws"] = args.draws
        if args.alpha is not None:
            kw["alpha"] = args.alpha
    elif name == "poisson-cov":
        if args.alpha is not None:
            kw["alphas"] = (args.alpha,)
        for flag, key in (("n", "n"), ("replicas", "replicas"), ("seed", "seed"),
                          ("workers", "workers")):
            if getattr(args, flag) is not None:
                kw[key] = getattr(args, flag)
        if args.grid is not None:
            kw["times"] = tuple(_parse_grid(args.grid))
    elif name == "limit-cov":
        for flag in ("alpha", "n", "replicas", "seed", "workers"):
            if getattr(args, flag) is not None:
                kw[flag] = getattr(args, flag)
        if args.grid is not None:
            kw["times"] = tuple(_parse_grid(args.grid))
    elif name == "clt":
        for flag in ("alpha", "n", "replicas", "seed"):
            if getattr(args, flag) is not None:
                kw[flag] = getattr(args, flag)
    elif name == "gaps":
        if args.alpha is not None:
            kw["trend_alpha"] = args.alpha
    elif name == "psd":
        if args.alpha is not None:
            kw["alphas"] = (args.alpha,)
        if args.seed is not None:
            kw["seed"] = args.seed
    elif name == "walk":
        if args.alpha is not None:
            kw["alpha"] = args.alpha
        if args.n is not None:
            kw["n"] = args.n
        if args.replicas is not None:
            kw["seeds"] = args.replicas
        if args.seed is not None:
            kw["seed0"] = args.seed
    return kw


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    out = _ensure_out(args.out)
    rep = ver.run_suite(args.suite, **_suite_kwargs(args))
    report = rep.to_dict()
    # Wall clock lives in the manifest only, so report.json is
    # byte-stable across reruns and worker counts.
    elapsed = report.pop("elapsed_s")
    report_path = os.path.join(out, "report.json")
    _write_json(report_path, report)
    files = [report_path]
    if args.figures:
        from . import figures

        files.extend(figures.render_suite_figures(out, report))
    checks = [{"name": c.name, "passed": bool(c.passed)} for c in rep.checks]
    config = {"suite": args.suite, "seed": args.seed, **_suite_kwargs(args)}
    config.pop("alphas", None)
    if args.alpha is not None:
        config["alpha"] = args.alpha
    _write_manifest(out, "verify", config, files, checks, time.perf_counter() - t0)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}")
    print(f"suite {args.suite}: {'PASS' if rep.passed else 'FAIL'} "
          f"({len(rep.checks)} checks, {elapsed:.1f}s)")
    return 0 if rep.passed else 1


def cmd_gp_sample(args) -> int:
    t0 = time.perf_counter()
    out = _ensure_out(args.out)
    spec = kern.KernelSpec(family=args.family, alpha=args.alpha, h=args.h, k=args.k)
    grid = _parse_grid(args.grid)
    cov = kern.cov_matrix(spec, grid)
    try:
        kern.chol_psd(cov)
    except NotPsdError as exc:
        print(f"gp-sample: covariance not PSD within jitter budget: {exc}", file=sys.stderr)
        return 1
    rng = Generator(Philox(key=[args.seed, 0]))
    paths = kern.sample_gp(cov, rng, n_paths=args.paths)
    csv_path = os.path.join(out, "paths.csv")
    rows = _write_paths_csv(csv_path, cov.times, [args.family], paths[:, 1:])
    cov_path = os.path.join(out, "covariance.csv")
    _write_matrix_csv(cov_path, cov.times, cov.matrix)
    files = [csv_path, cov_path]
    if args.figures:
        from . import figures

        fig_path = os.path.join(out, "gp_paths.png")
        figures.save_path_spaghetti(
            fig_path, cov.times, [args.family], paths[:, 1:],
            title=f"{args.family} sample paths",
        )
        files.append(fig_path)
    config = {
        "family": args.family,
        "alpha": args.alpha,
        "h": args.h,
        "k": args.k,
        "grid": [float(t) for t in cov.times],
        "paths": args.paths,
        "seed": args.seed,
        "jitter_used": cov.jitter,
    }
    _write_manifest(out, "gp-sample", config, files, [], time.perf_counter() - t0)
    print(f"gp-sample: wrote {rows} value rows ({args.paths} paths x "
          f"{len(cov.times)} times) to {csv_path}; jitter_used={cov.jitter:g}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="karlin",
        description="Randomized infinite occupancy simulation, limit-kernel "
                    "verification, and Gaussian-process sampling.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run replicas and dump per-replica paths")
    sim.add_argument("--mode", choices=("discrete", "poissonized"), default="discrete")
    sim.add_argument("--alpha", type=float, required=True)
    sim.add_argument("--n", type=int, required=True, help="throws (or rate horizon scale)")
    sim.add_argument("--grid", default="0:1:0.1", help="start:end:step or comma list")
    sim.add_argument("--replicas", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--sign-mode", choices=("rademacher", "ones", "vector"),
                     default="rademacher")
    sim.add_argument("--sign-prefix", default=None,
                     help="comma list of +-1 used by sign-mode=vector")
    sim.add_argument("--tail-tol", type=float, default=1e-9)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--out", default=".")
    sim.add_argument("--figures", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    vf = sub.add_parser("verify", help="run a named verification suite")
    vf.add_argument("suite", choices=_SUITE_CHOICES)
    vf.add_argument("--alpha", type=float, default=None)
    vf.add_argument("--n", type=int, default=None)
    vf.add_argument("--replicas", type=int, default=None)
    vf.add_argument("--seed", type=int, default=None)
    vf.add_argument("--draws", type=int, default=None)
    vf.add_argument("--grid", default=None)
    vf.add_argument("--workers", type=int, default=None)
    vf.add_argument("--out", default=".")
    vf.add_argument("--figures", action="store_true")
    vf.set_defaults(func=cmd_verify)

    gp = sub.add_parser("gp-sample", help="sample Gaussian paths from a limit kernel")
    gp.add_argument("--family", choices=kern.KERNEL_FAMILIES, required=True)
    gp.add_argument("--alpha", type=float, default=None)
    gp.add_argument("--H", dest="h", type=float, default=None)
    gp.add_argument("--K", dest="k", type=float, default=None)
    gp.add_argument("--grid", default="0:1:0.01")
    gp.add_argument("--paths", type=int, default=10)
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--out", default=".")
    gp.add_argument("--figures", action="store_true")
    gp.set_defaults(func=cmd_gp_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NotPsdError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
