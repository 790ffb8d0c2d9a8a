"""Figure rendering for the CLI report path.

Every renderer takes the rows that went into the CSV (or the
simulation stats) and writes a PNG next to it.  The Agg backend is
forced so the commands work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_DPI = 150


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_eigen(path: str, ns, lams) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.stem(ns, lams)
    ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("eigenvalue")
    ax.set_title("Discrete spectrum")
    _finish(fig, path)


def render_density(path: str, ys, gammas, x: float, tau: float) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(ys, gammas)
    ax.set_xlabel("y")
    ax.set_ylabel("density")
    ax.set_title(f"Transition density from x={x:g}, horizon {tau:g}")
    _finish(fig, path)


def render_curve(path: str, mats, bonds, ylds, which: str) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    if which == "yield":
        ax.plot(mats, ylds, marker="o")
        ax.set_ylabel("yield")
    else:
        ax.plot(mats, bonds, marker="o")
        ax.set_ylabel("bond price")
    ax.set_xlabel("maturity")
    ax.set_title("Zero-coupon curve")
    _finish(fig, path)


def render_histogram(path: str, edges, masses, absorbed_at_zero: float,
                     absorbed_at_cap: float) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    widths = edges[1:] - edges[:-1]
    ax.bar(edges[:-1], masses / widths, width=widths, align="edge",
           edgecolor="none")
    ax.set_xlabel("terminal state")
    ax.set_ylabel("surviving density")
    ax.set_title("Terminal distribution (absorbed: %.3f at 0, %.3f at cap)"
                 % (absorbed_at_zero, absorbed_at_cap))
    _finish(fig, path)
