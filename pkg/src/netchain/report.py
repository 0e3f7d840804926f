"""Figures for benchmark CSV rows (search latency, response size, verify latency, k sweep)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 150,
}

MARKERS = {"netchain": "o", "netchain-plus": "s"}
LABELS = {"netchain": "NetChain", "netchain-plus": "NetChain+"}
COLORS = {"netchain": "tab:blue", "netchain-plus": "tab:orange"}


def _series(rows, mode, x, y, **fixed):
    pts = sorted((r[x], r[y]) for r in rows
                 if r["mode"] == mode and all(r[k] == v for k, v in fixed.items()))
    return [p[0] for p in pts], [p[1] for p in pts]


def _modes(rows):
    return [m for m in MARKERS if any(r["mode"] == m for r in rows)]


def _line_plot(rows, x, y, ylabel, path, log=True, **fixed):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 2.4))
        for mode in _modes(rows):
            xs, ys = _series(rows, mode, x, y, **fixed)
            ax.plot(xs, ys, marker=MARKERS[mode], color=COLORS[mode], label=LABELS[mode])
        ax.set_xlabel("time window size" if x == "window" else x)
        ax.set_ylabel(ylabel)
        if log:
            ax.set_yscale("log")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def window_figures(rows: Sequence[dict], outdir: Path, k: int = 20, prefix: str = "") -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    sel = [r for r in rows if r["k"] == k]
    if not sel:
        return []
    return [
        _line_plot(sel, "window", "search_ms", "search latency (ms)", outdir / f"{prefix}search_latency.png"),
        _line_plot(sel, "window", "resp_bytes", "response size (bytes)", outdir / f"{prefix}response_size.png"),
        _line_plot(sel, "window", "verify_ms", "verify latency (ms)", outdir / f"{prefix}verify_latency.png"),
    ]


def k_figure(rows: Sequence[dict], outdir: Path, prefix: str = "") -> list[Path]:
    """Three panels against k at the largest window; response size split into R and VO."""
    if not rows:
        return []
    window = max(r["window"] for r in rows)
    sel = [r for r in rows if r["window"] == window]
    if len({r["k"] for r in sel}) < 2:
        return []
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{prefix}k_effect.png"
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(9, 2.4))
        for mode in _modes(sel):
            style = {"marker": MARKERS[mode], "color": COLORS[mode]}
            axes[0].plot(*_series(sel, mode, "k", "search_ms"), label=LABELS[mode], **style)
            axes[1].plot(*_series(sel, mode, "k", "r_bytes"), label=f"{LABELS[mode]} R", **style)
            axes[1].plot(*_series(sel, mode, "k", "vo_bytes"), linestyle="--",
                         label=f"{LABELS[mode]} VO", **style)
            axes[2].plot(*_series(sel, mode, "k", "verify_ms"), label=LABELS[mode], **style)
        for ax, title in zip(axes, ("search latency (ms)", "response size (bytes)", "verify latency (ms)")):
            ax.set_xlabel("k")
            ax.set_ylabel(title)
            ax.set_yscale("log")
        axes[1].legend(frameon=False, fontsize=6, loc="center right")
        axes[0].legend(frameon=False)
        fig.suptitle(f"window = {window}", fontsize=9)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return [path]
