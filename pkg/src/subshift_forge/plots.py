"""Figure rendering for the command-line report paths.

Headless Agg only; every figure lands next to its CSV so a report directory
is self-contained. PNG metadata is pinned to keep reruns byte-identical.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "subshift-forge"}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plot_tower_levels(level_rows, path) -> None:
    """Entropy interval per level; exact levels collapse to a point."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    idx = [r["index"] for r in level_rows]
    lo = np.array([r["entropy_lo"] for r in level_rows])
    hi = np.array([r["entropy_hi"] for r in level_rows])
    mid = (lo + hi) / 2.0
    ax.errorbar(idx, mid, yerr=np.vstack([mid - lo, hi - mid]), fmt="o", capsize=4.0)
    ax.set_xlabel("level")
    ax.set_ylabel("entropy (nats)")
    ax.set_title("entropy bounds along the tower")
    ax.set_xticks(idx)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_witness_rows(rows, bound_factor: float, path) -> None:
    """Correlation ratio per checkpoint, one line per level, against the
    final bound."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    levels = sorted({r[0] for r in rows})
    for lvl in levels:
        pts = [(r[2], r[3] / r[4]) for r in rows if r[0] == lvl and r[4] > 0]
        if pts:
            ax.plot(*zip(*pts), marker="o", label=f"level {lvl}")
    ax.axhline(bound_factor, linestyle="--", color="k", label="bound")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("checkpoint N")
    ax.set_ylabel("correlation / mass")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower left", fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_correlation_rows(rows, path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ns = [r[0] for r in rows]
    ax.plot(ns, [r[1] for r in rows], marker="o", label="correlation")
    ax.plot(ns, [r[3] for r in rows], linestyle="--", label="pigeonhole floor")
    ax.set_xscale("log")
    ax.set_xlabel("prefix N")
    ax.set_ylabel("(1/N) sum a_n f_n")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def plot_scan(scan, path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    grid = np.asarray(scan.xi_grid)
    for i, N in enumerate(scan.prefixes):
        ax.plot(grid, scan.magnitudes[:, i], marker=".", linestyle="none",
                label=f"N={N}")
    ax.set_xlabel("angle (turns)")
    ax.set_ylabel("|A_N|")
    ax.set_title(scan.series_id)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    _save(fig, path)
