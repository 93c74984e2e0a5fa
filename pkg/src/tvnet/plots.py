"""Matplotlib figure rendering for the CLI report path.

Figures are written straight from Figure objects (no pyplot state) with a
fixed SVG hash salt and no date metadata, so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure

_SVG_RC = {"svg.hashsalt": "tvnet"}


def _save(fig: Figure, path) -> None:
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})


def scan_plot(curve, path, changepoints=()) -> None:
    """Line plot of the break-size curve |D(s)|_inf over the search grid."""
    fig = Figure(figsize=(7, 3.5))
    ax = fig.subplots()
    ax.plot(curve.grid, curve.scores, lw=1.0, color="tab:blue")
    for cp in changepoints:
        ax.axvline(cp, color="tab:red", ls="--", lw=0.8)
    ax.set_xlabel("index")
    ax.set_ylabel(r"$|D(s)|_\infty$")
    ax.set_title(f"break-size scan (h = {curve.h:g})")
    fig.tight_layout()
    _save(fig, path)


def roc_plot(points_by_t, path) -> None:
    """Sensitivity against 1 - specificity, one curve per evaluation time.

    ``points_by_t`` maps a label (typically the time t) to its RocPoint list.
    """
    fig = Figure(figsize=(5, 5))
    ax = fig.subplots()
    for label, pts in points_by_t.items():
        pts = sorted(pts, key=lambda q: (q.one_minus_specificity, q.sensitivity))
        ax.plot(
            [q.one_minus_specificity for q in pts],
            [q.sensitivity for q in pts],
            marker="o", ms=2.5, lw=1.0, label=str(label),
        )
    ax.plot([0, 1], [0, 1], color="grey", lw=0.6, ls=":")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("1 - specificity")
    ax.set_ylabel("sensitivity")
    ax.legend(fontsize=7, title="t")
    fig.tight_layout()
    _save(fig, path)
