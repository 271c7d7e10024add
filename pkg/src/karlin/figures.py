"""Optional matplotlib rendering for the CLI report paths.

Every figure is written PNG with metadata={'Date': None} so reruns are
byte-identical; rendering is opt-in via the --figures flag.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 110, "metadata": {"Date": None}}


def save_path_spaghetti(
    path: str,
    times,
    names,
    paths: np.ndarray,
    max_lines: int = 40,
    title: str = "sampled paths",
) -> None:
    """Grid of per-process path overlays; paths has shape
    (replicas, len(names)*len(times[1:])) and excludes the t=0 column."""
    times = np.asarray(times, dtype=float)
    g = times.size - 1
    r = min(paths.shape[0], max_lines)
    ncol = min(4, len(names))
    nrow = int(np.ceil(len(names) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.2 * ncol, 2.6 * nrow), squeeze=False)
    for i, name in enumerate(names):
        ax = axes[i // ncol][i % ncol]
        block = paths[:r, i * g : (i + 1) * g]
        full = np.concatenate([np.zeros((r, 1)), block], axis=1)
        ax.plot(times, full.T, lw=0.6, alpha=0.6)
        ax.plot(times, np.concatenate([[0.0], paths[:, i * g : (i + 1) * g].mean(axis=0)]),
                color="black", lw=1.5)
        ax.set_title(name, fontsize=9)
        ax.tick_params(labelsize=7)
    fig.suptitle(title, fontsize=11)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_z_heatmaps(path: str, report: dict) -> None:
    """Per-component z-score heatmaps from a covariance-suite report."""
    panels = []
    for check in report["checks"]:
        for key, val in check["stats"].items():
            if isinstance(val, dict) and "z" in val:
                panels.append((f"{check['name']}:{key}", np.asarray(val["z"])))
    if not panels:
        return
    ncol = min(4, len(panels))
    nrow = int(np.ceil(len(panels) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(2.9 * ncol, 2.7 * nrow), squeeze=False)
    for i, (name, z) in enumerate(panels):
        ax = axes[i // ncol][i % ncol]
        im = ax.imshow(z, cmap="coolwarm", vmin=-4, vmax=4)
        ax.set_title(name, fontsize=7)
        ax.tick_params(labelsize=6)
        fig.colorbar(im, ax=ax, shrink=0.75)
    fig.suptitle("covariance z-scores (empirical vs exact)", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_gap_trends(path: str, report: dict) -> None:
    """Log-log trend lines for the centering-gap checks."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    drew = False
    for check in report["checks"]:
        st = check["stats"]
        if "values" in st and "n" in st:
            ax.loglog(st["n"], st["values"], marker="o", label=check["name"])
            drew = True
    if not drew:
        plt.close(fig)
        return
    ax.set_xlabel("n")
    ax.set_ylabel("normalized gap / diagnostic")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_psd_margins(path: str, report: dict) -> None:
    """Bar chart of the worst negative-eigenvalue ratios per parameter."""
    names, vals = [], []
    for check in report["checks"]:
        if "worst_negative_eig_over_maxdiag" in check["stats"]:
            names.append(check["name"].rsplit("-", 1)[-1])
            vals.append(check["stats"]["worst_negative_eig_over_maxdiag"])
    if not names:
        return
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.bar(names, np.maximum(vals, 1e-18))
    ax.axhline(1e-10, color="red", lw=1, ls="--", label="tolerance")
    ax.set_yscale("log")
    ax.set_xlabel("alpha")
    ax.set_ylabel("-min eig / max diag (clipped)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_clt_hist(path: str, report: dict) -> None:
    """Histogram of the final-time counts with the fitted normal curve."""
    panels = []
    for check in report["checks"]:
        st = check["stats"]
        if "hist_values" in st:
            panels.append((check["name"], st))
    if not panels:
        return
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.2), squeeze=False)
    for i, (name, st) in enumerate(panels):
        ax = axes[0][i]
        v = np.asarray(st["hist_values"], dtype=float)
        c = np.asarray(st["hist_counts"], dtype=float)
        total = c.sum()
        ax.bar(v, c / total, width=1.0, alpha=0.6)
        mu, sd = st["mean"], st["sd"]
        xs = np.linspace(v.min(), v.max(), 300)
        ax.plot(xs, np.exp(-0.5 * ((xs - mu) / sd) ** 2) / (sd * np.sqrt(2 * np.pi)),
                color="black", lw=1.2)
        ax.set_title(f"{name} (p={st['p_value']:.2g})", fontsize=9)
        ax.tick_params(labelsize=7)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_residual_bars(path: str, report: dict) -> None:
    """Log-scale bars of max identity residuals against tolerances."""
    names, vals, tols = [], [], []
    for check in report["checks"]:
        st = check["stats"]
        if "max_residual" in st:
            names.append(check["name"])
            vals.append(max(st["max_residual"], 1e-22))
            tols.append(st["tolerance"])
    if not names:
        return
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    x = np.arange(len(names))
    ax.bar(x, vals)
    ax.scatter(x, tols, color="red", marker="_", s=200, label="tolerance")
    ax.set_yscale("log")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("max residual (clipped)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_suite_figures(out_dir: str, report: dict) -> list[str]:
    """Render whatever figures apply to the given suite report; returns
    the list of files written."""
    import os

    suite = report.get("suite", "")
    written: list[str] = []

    def _target(stem: str) -> str:
        return os.path.join(out_dir, f"{stem}.png")

    if suite in ("poisson-cov",):
        f = _target("z_scores")
        save_z_heatmaps(f, report)
        written.append(f)
    if suite == "gaps":
        f = _target("gap_trends")
        save_gap_trends(f, report)
        written.append(f)
    if suite == "psd":
        f = _target("psd_margins")
        save_psd_margins(f, report)
        written.append(f)
    if suite == "clt":
        f = _target("clt_hist")
        save_clt_hist(f, report)
        written.append(f)
    if suite in ("identities", "limit-cov", "walk"):
        f = _target("residuals" if suite != "limit-cov" else "kernel_gaps")
        if suite == "limit-cov":
            save_limit_gap_panels(f, report)
        else:
            save_residual_bars(f, report)
        written.append(f)
    return [w for w in written if os.path.exists(w)]


def save_limit_gap_panels(path: str, report: dict) -> None:
    """Empirical-vs-kernel diagonal comparison from a limit-cov report."""
    panels = []
    for check in report["checks"]:
        st = check["stats"]
        if "empirical_normalized" in st:
            panels.append((check["name"], st))
    if not panels:
        return
    times = report["params"].get("times", [])[1:]
    fig, axes = plt.subplots(1, len(panels), figsize=(3.0 * len(panels), 3.0), squeeze=False)
    for i, (name, st) in enumerate(panels):
        ax = axes[0][i]
        emp = np.asarray(st["empirical_normalized"])
        tgt = np.asarray(st["kernel"])
        ax.plot(times, np.diag(emp), marker="o", ms=3, label="empirical")
        ax.plot(times, np.diag(tgt), marker="x", ms=4, label="kernel")
        ax.set_title(name, fontsize=8)
        ax.tick_params(labelsize=7)
        if i == 0:
            ax.legend(fontsize=7)
    fig.suptitle("normalized variance vs limit kernel (diagonal)", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
