"""Figure rendering for path and density outputs.

Used by the CLI report path: whenever a command writes a CSV of a sample
path or a density, a PNG of the same data can be rendered next to it.
The Agg backend keeps rendering headless; PNG metadata is stripped so a
re-run reproduces the file byte for byte.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_OPTS = {"dpi": 130, "metadata": {"Software": None}}


def _new_axes(xlabel, ylabel):
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    return fig, ax


def _finish(fig, out_path):
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_OPTS)
    plt.close(fig)


def save_step_path(times, values, out_path, xlabel="time", ylabel="value") -> None:
    """Piecewise-constant trajectory (arrival counts, queue level, inventory)."""
    fig, ax = _new_axes(xlabel, ylabel)
    ax.step(times, values, where="post", color="crimson", lw=1.2)
    _finish(fig, out_path)


def save_line_path(times, values, out_path, xlabel="time", ylabel="value") -> None:
    """Continuous-looking trajectory (random walk, Wiener path)."""
    fig, ax = _new_axes(xlabel, ylabel)
    ax.plot(times, values, color="steelblue", lw=0.9)
    _finish(fig, out_path)


def save_distribution(values, probs, out_path, xlabel="state", ylabel="probability") -> None:
    """Bar chart of a discrete law or state distribution."""
    fig, ax = _new_axes(xlabel, ylabel)
    ax.bar(values, probs, width=0.8, color="seagreen", alpha=0.85)
    _finish(fig, out_path)


def save_density(x, density, out_path, xlabel="x", ylabel="density") -> None:
    """Continuous density or value function on a grid."""
    fig, ax = _new_axes(xlabel, ylabel)
    ax.plot(x, density, color="darkorange", lw=1.4)
    ax.fill_between(np.asarray(x), 0.0, np.asarray(density), color="darkorange", alpha=0.2)
    _finish(fig, out_path)


def save_histogram(samples, out_path, xlabel="value", ylabel="frequency") -> None:
    """Histogram of raw draws."""
    fig, ax = _new_axes(xlabel, ylabel)
    ax.hist(np.asarray(samples), bins=60, color="slateblue", alpha=0.85)
    _finish(fig, out_path)
