"""Figure rendering for the experiment runner.

Every experiment kind gets one PNG next to its delimited output.  Rendering
is deliberately plain: headless backend, fixed size, no styling beyond what
reads well in a notebook or a paper draft.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

from .tables import ResultTable  # noqa: E402

__all__ = [
    "parallel_sweep_figure",
    "restart_run_figure",
    "restart_gain_figure",
    "fv_converge_figure",
    "queue_compare_figure",
    "variance_link_figure",
    "cumulant_figure",
]

_FIGSIZE = (7.0, 4.5)
_DPI = 120


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def parallel_sweep_figure(table: ResultTable, path: str | Path) -> Path:
    xs = table.column("x")
    ns = table.column("N")
    ratios = table.column("ratio")
    cis = table.column("ci")
    threshold = table.column("thresholdN")[0]
    n_star = table.column("nStar")[0]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for x in sorted(set(xs)):
        pts = [(n, r, c) for xx, n, r, c in zip(xs, ns, ratios, cis) if xx == x]
        pts.sort()
        ax.errorbar(
            [p[0] for p in pts],
            [p[1] for p in pts],
            yerr=[p[2] if math.isfinite(p[2]) else 0.0 for p in pts],
            marker="o",
            ms=3,
            lw=1,
            capsize=2,
            label=f"x = {x:g}",
        )
    grid_n = sorted(set(ns))
    ax.plot(grid_n, grid_n, ls=":", color="grey", label="identity")
    ax.axvline(threshold, ls="--", color="black", lw=1, label=f"threshold = {threshold:g}")
    ax.axvline(n_star, ls="-.", color="firebrick", lw=1, label=f"N* = {n_star}")
    ax.set_xlabel("number of particles N")
    ax.set_ylabel("split-budget / full-budget passage ratio")
    ax.legend(fontsize=8)
    return _save(fig, path)


def restart_run_figure(summary: ResultTable, path: str | Path) -> Path:
    horizons = summary.column("horizon")
    probs = summary.column("successProb")
    cis = summary.column("ci")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.errorbar(horizons, probs, yerr=cis, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_xlabel("time horizon")
    ax.set_ylabel("P(restarted passage within horizon)")
    ax.set_ylim(0.0, 1.05)
    return _save(fig, path)


def restart_gain_figure(table: ResultTable, path: str | Path) -> Path:
    xs = table.column("x")
    gains = table.column("G")
    cis = table.column("ci")
    pred = table.column("analyticPrediction")
    sat = table.column("saturatedPrediction")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.errorbar(xs, gains, yerr=cis, marker="o", capsize=3, label="measured gain")
    ax.plot(xs, pred, ls="--", marker="s", ms=3, label="beta q B prediction")
    ax.plot(xs, sat, ls=":", marker="^", ms=3, label="saturation-corrected")
    ax.set_xlabel("barrier x")
    ax.set_ylabel("normalized restart gain")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    return _save(fig, path)


def fv_converge_figure(table: ResultTable, path: str | Path) -> Path:
    ns = table.column("N")
    tv = table.column("tvMean")
    sd = table.column("tvStd")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.errorbar(ns, tv, yerr=sd, marker="o", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("particles N")
    ax.set_ylabel("TV distance to oracle QSD")
    return _save(fig, path)


def queue_compare_figure(table: ResultTable, truth: float, path: str | Path) -> Path:
    methods = table.column("method")
    horizons = table.column("horizon")
    estimates = table.column("estimate")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for method in sorted(set(methods)):
        pts = [
            (h, e)
            for m, h, e in zip(methods, horizons, estimates)
            if m == method
        ]
        pts.sort()
        ax.plot(
            [p[0] for p in pts],
            [max(p[1], 1e-12) for p in pts],
            marker="o",
            ls="none",
            ms=4,
            alpha=0.7,
            label=method,
        )
    ax.axhline(truth, color="black", ls="--", lw=1, label="exact stationary value")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("event budget")
    ax.set_ylabel("stationary probability estimate")
    ax.legend(fontsize=8)
    return _save(fig, path)


def variance_link_figure(table: ResultTable, path: str | Path) -> Path:
    ks = table.column("k")
    var_pi = table.column("varPi")
    var_xi = table.column("varXi")
    p_hit = table.column("pHit")
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    width = 0.35
    idx = np.arange(len(ks))
    ax.bar(idx - width / 2, var_pi, width, label="Var occupation estimator")
    ax.bar(idx + width / 2, var_xi, width, label="Var surrogate indicator")
    ax2 = ax.twinx()
    ax2.plot(idx, p_hit, color="black", marker="o", ls="--", label="P(hit within budget)")
    ax2.set_ylabel("hitting probability")
    ax.set_xticks(idx, [str(k) for k in ks])
    ax.set_xlabel("target state k")
    ax.set_ylabel("variance")
    ax.set_yscale("log")
    ax.legend(fontsize=8, loc="upper left")
    return _save(fig, path)


def cumulant_figure(profile, path: str | Path) -> Path:
    lam_hi = profile.lambda_max
    if not math.isfinite(lam_hi):
        lam_hi = 2.5 * profile.lambda_star
    grid = np.linspace(1e-6, lam_hi - 1e-6 * max(1.0, abs(lam_hi)), 400)
    values = [profile.psi(v) for v in grid]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(grid, values, lw=1.5)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.axvline(profile.lambda_zero, ls=":", color="grey", label="argmin (lambda_0)")
    ax.axvline(profile.lambda_star, ls="--", color="firebrick", label="Cramer root (lambda*)")
    ax.set_xlabel("lambda")
    ax.set_ylabel("cumulant psi(lambda)")
    ax.legend(fontsize=8)
    return _save(fig, path)
