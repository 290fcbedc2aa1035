"""Optional PNG figures rendered from a finished report."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .report import RunReport  # noqa: E402


def _moment_figure(rows, out: Path) -> Path | None:
    series = defaultdict(list)
    for r in rows:
        series[r["scenario"]].append(r)
    if not series:
        return None
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, rs in sorted(series.items()):
        Ns = {r["N"] for r in rs}
        x_key = "N" if len(Ns) > 1 else "p"
        rs = sorted(rs, key=lambda r: r[x_key])
        ax.errorbar([r[x_key] for r in rs], [r["estimate"] for r in rs],
                    yerr=[3 * r["std_error"] for r in rs], marker="o", capsize=3,
                    label=f"{label} (vs {x_key})")
    if any(len({r["N"] for r in rs}) > 1 for rs in series.values()):
        ax.set_xscale("log")
    ax.set_ylabel("power-mean estimate of |W|")
    ax.set_title("norm moments, 3 se bars")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out / "moments.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _tail_figure(name, rows, fit, out: Path) -> Path:
    t = [r["threshold"] for r in rows if r["survival"] > 0]
    s = [r["survival"] for r in rows if r["survival"] > 0]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(t, s, ".", label="empirical survival")
    ax.fill_between([r["threshold"] for r in rows], [max(r["ci_low"], 1e-12) for r in rows],
                    [r["ci_high"] for r in rows], alpha=0.25, label="Wilson 95%")
    if fit:
        import numpy as np
        line = np.exp(fit["intercept"] + fit["slope"] * np.asarray(t))
        ax.semilogy(t, line, "-", label=f"log-linear fit, slope {fit['slope']:.3g}")
    ax.set_xlabel("threshold")
    ax.set_ylabel("P{|W| >= t}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out / f"tail_{name}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_figures(report: RunReport, path) -> list[Path]:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    fig = _moment_figure(report.tables.get("moments", []), out)
    if fig:
        written.append(fig)
    for name, rows in sorted(report.tail_curves.items()):
        fit = report.fits.get(name.replace("_", ":"))
        written.append(_tail_figure(name, rows, fit, out))
    return written
