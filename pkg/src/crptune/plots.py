"""Figure rendering for the CLI report path.

Only cli.py imports this module; the core library stays free of plotting
dependencies.  All functions write a file and return its path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_tuning", "plot_rates", "plot_throughput", "plot_jain", "plot_bounds"]

# fixed metadata keeps repeated renders byte-identical
_SAVEKW = {"dpi": 150, "metadata": {"Software": "crptune"}}


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, **_SAVEKW)
    plt.close(fig)
    return path


def plot_tuning(f, partition, rho: float, path) -> Path:
    """f' with the tuned partition's lower-sum rectangles underneath."""
    z = partition.points
    f1 = f.derivative()
    x = np.linspace(0.0, 1.0, 513)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(x, f1(x), lw=2, label="f'(x)")
    ax.stairs(f1(z[:-1]), z, fill=True, alpha=0.35, color="tab:orange",
              label=f"lower sum = {rho:.4f}")
    ax.set_xlabel("x")
    ax.set_ylabel("f'(x)")
    ax.set_title(f"{partition.m}-piece partition")
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def plot_rates(ns, series: dict, path, stderr: dict | None = None) -> Path:
    """Collision-rate curves per tree; optional MC error bars."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, rates in series.items():
        line, = ax.plot(ns, 100.0 * np.asarray(rates), lw=2, label=label)
        if stderr and label in stderr:
            ax.errorbar(ns, 100.0 * np.asarray(rates),
                        yerr=300.0 * np.asarray(stderr[label]),
                        fmt="none", ecolor=line.get_color(), alpha=0.5)
    ax.set_xlabel("contending stations n")
    ax.set_ylabel("collision rate [%]")
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def _per_protocol_means(rows, value_key):
    by = {}
    for r in rows:
        by.setdefault(r["protocol"], {}).setdefault(r["n"], []).append(r[value_key])
    out = {}
    for proto, d in by.items():
        ns = sorted(d)
        out[proto] = (ns, [float(np.mean(d[n])) for n in ns])
    return out


def plot_throughput(rows, path) -> Path:
    """Mean throughput vs n, one line per protocol; rows as dicts."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for proto, (ns, means) in sorted(_per_protocol_means(rows, "throughput_mbps").items()):
        ax.plot(ns, means, marker="o", lw=2, label=proto)
    ax.set_xlabel("contending stations n")
    ax.set_ylabel("throughput [Mbit/s]")
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def plot_jain(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for proto, (ns, means) in sorted(_per_protocol_means(rows, "jain").items()):
        ax.plot(ns, means, marker="o", lw=2, label=proto)
    ax.set_xlabel("contending stations n")
    ax.set_ylabel("Jain fairness index")
    ax.set_ylim(0.0, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    return _finish(fig, Path(path))


def plot_bounds(ks, measured, asymptotic, lower, path) -> Path:
    """Collision-rate convergence on a log scale over tree depth."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.semilogy(ks, measured, marker="o", lw=2, label="optimal partition (DP)")
    ax.semilogy(ks, asymptotic, marker="s", lw=1.5, ls="--", label="asymptotic")
    ax.semilogy(ks, lower, marker="^", lw=1.5, ls=":", label="lower bound")
    ax.set_xlabel("tree depth k")
    ax.set_ylabel("collision rate 1 - rho")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    return _finish(fig, Path(path))
