"""Figures from run directories: champion curves and allocation shares.

A "run directory" is what run_experiment writes: seed_<s>/metrics.csv
children plus config.toml.  Champion curves from different seeds live on
different step grids (generation lengths vary), so they are linearly
interpolated onto a common grid before averaging; the band is a Student-t
95% interval over seeds (zero-width for a single seed).  Readers only
look up columns by name, so files with extra columns plot fine.
"""

import csv
import math
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

from .errors import ConfigError


def t_confidence_band(stack, confidence=0.95):
    """Mean and half-width of the t-interval across rows of (n, m) data.

    One row (a single run) has no spread estimate: the band collapses to
    zero width rather than guessing.
    """
    stack = np.asarray(stack, dtype=np.float64)
    if stack.ndim != 2:
        raise ValueError(f"expected (runs, points) data, got shape {stack.shape}")
    n = stack.shape[0]
    mean = stack.mean(axis=0)
    if n < 2:
        return mean, np.zeros_like(mean)
    sem = stack.std(axis=0, ddof=1) / math.sqrt(n)
    tcrit = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1))
    return mean, tcrit * sem


def read_metrics(path):
    """Parse a metrics.csv into {column: array}; numeric columns become
    float arrays, everything else stays a list of strings."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such metrics file")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ConfigError(f"{path}: file is empty")
    header = rows[0]
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigError(
                f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
            )
    columns = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in rows[1:]]
        try:
            columns[name] = np.array([float(x) for x in raw])
        except ValueError:
            columns[name] = raw
    return columns


def seed_dirs(run_dir):
    run_dir = Path(run_dir)
    found = []
    for child in run_dir.iterdir() if run_dir.is_dir() else []:
        m = re.fullmatch(r"seed_(-?\d+)", child.name)
        if m and child.is_dir():
            found.append((int(m.group(1)), child))
    return [d for _, d in sorted(found)]


def load_champion_curves(run_dir):
    """One (steps, champion) pair per seed directory, seed order."""
    dirs = seed_dirs(run_dir)
    if not dirs:
        raise ConfigError(f"{run_dir}: no seed_<n> directories found")
    curves = []
    for d in dirs:
        cols = read_metrics(d / "metrics.csv")
        for needed in ("steps", "champion"):
            if needed not in cols:
                raise ConfigError(f"{d / 'metrics.csv'}: missing column {needed!r}")
        if len(cols["steps"]) == 0:
            raise ConfigError(f"{d / 'metrics.csv'}: no generations recorded")
        curves.append((cols["steps"], cols["champion"]))
    return curves


def curves_on_common_grid(curves, points=200):
    """Interpolate per-seed curves onto a shared step grid.

    The grid spans the overlap of all curves so no curve is extrapolated.
    """
    lo = max(float(s[0]) for s, _ in curves)
    hi = min(float(s[-1]) for s, _ in curves)
    if hi <= lo:
        grid = np.array([lo])
    else:
        grid = np.linspace(lo, hi, points)
    stack = np.vstack([np.interp(grid, s, c) for s, c in curves])
    return grid, stack


def plot_champion_curves(run_dirs, out_path, confidence=0.95, points=200):
    """One mean-over-seeds champion curve (with t-band) per run directory."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for run_dir in run_dirs:
        curves = load_champion_curves(run_dir)
        grid, stack = curves_on_common_grid(curves, points)
        mean, half = t_confidence_band(stack, confidence)
        label = Path(run_dir).name or str(run_dir)
        (line,) = ax.plot(grid, mean, label=label)
        if len(curves) > 1:
            ax.fill_between(grid, mean - half, mean + half,
                            color=line.get_color(), alpha=0.25, linewidth=0)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("champion return")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(out_path)


def _learner_labels(cols):
    labels = []
    j = 0
    while f"l{j}_gamma" in cols:
        g = cols[f"l{j}_gamma"]
        labels.append(f"discount {float(g[0]):g}")
        j += 1
    return labels


def plot_allocation(run_dir, out_path):
    """Cumulative rollout share per learner versus generation, averaged
    over the run's seeds."""
    dirs = seed_dirs(run_dir)
    if not dirs:
        raise ConfigError(f"{run_dir}: no seed_<n> directories found")
    per_seed = []
    labels = None
    for d in dirs:
        cols = read_metrics(d / "metrics.csv")
        labels = labels or _learner_labels(cols)
        if not labels:
            raise ConfigError(f"{d / 'metrics.csv'}: no learner columns found")
        counts = np.vstack([cols[f"l{j}_y"] for j in range(len(labels))])
        if counts.shape[1] == 0:
            raise ConfigError(f"{d / 'metrics.csv'}: no generations recorded")
        shares = counts / counts.sum(axis=0, keepdims=True)
        per_seed.append(shares)

    gens = min(s.shape[1] for s in per_seed)
    mean_shares = np.mean([s[:, :gens] for s in per_seed], axis=0)
    x = np.arange(1, gens + 1)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for j, label in enumerate(labels):
        ax.plot(x, mean_shares[j], label=label)
    ax.set_xlabel("generation")
    ax.set_ylabel("cumulative rollout share")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(out_path)
