"""Figure rendering for the report-producing command paths.

Each report command writes its delimited output and a PNG figure next to
it. Rendering is pinned (Agg backend, fixed dpi, no timestamps in
metadata) so figures are byte-identical across runs with the same inputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata={"Software": "sparfima"})
    plt.close(fig)


def plot_influence(profile, path, label="influence") -> None:
    """Distance-decay curve of a center site's influence weights."""
    dists = np.array([p[0] for p in profile])
    weights = np.array([p[1] for p in profile])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(dists, weights, ".", ms=4, alpha=0.6)
    # average weight per distinct distance as the guide curve
    uniq = np.unique(dists)
    means = [weights[dists == u].mean() for u in uniq]
    ax.plot(uniq, means, "-", lw=1.5, label=label)
    ax.set_xlabel("distance from center site")
    ax.set_ylabel("influence weight")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_acf(results, path) -> None:
    """Spatial ACF: Moran's I per lag with the null expectation line."""
    lags = [r.lag_order for r in results]
    stats = [r.i_stat for r in results]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(lags, stats, width=0.6, color="tab:blue", alpha=0.8)
    if results:
        ax.axhline(results[0].expected, color="k", lw=1, ls="--",
                   label="null expectation")
        ax.legend()
    ax.axhline(0.0, color="k", lw=0.5)
    ax.set_xlabel("spatial lag order")
    ax.set_ylabel("Moran's I")
    ax.set_xticks(lags)
    fig.tight_layout()
    _save(fig, path)


def _cell_groups(cells):
    groups = {}
    for c in cells:
        groups.setdefault((c.rho, c.d, c.lam), []).append(c)
    return groups


def plot_timing(cells, path) -> None:
    """Mean fit time against sample size, one line per parameter cell."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for (rho, d, lam), group in sorted(_cell_groups(cells).items()):
        group = sorted(group, key=lambda c: c.n)
        ax.plot([c.n for c in group], [c.mean_seconds for c in group],
                "o-", label=f"rho={rho:g}, d={d:g}, lambda={lam:g}")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("mean fit time [s]")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def plot_rmse(cells, path) -> None:
    """RMSE of each estimated parameter against sample size."""
    params = sorted({name for c in cells for name in c.rmse})
    fig, axes = plt.subplots(1, len(params), figsize=(4 * len(params), 4),
                             squeeze=False)
    for ax, name in zip(axes[0], params):
        for (rho, d, lam), group in sorted(_cell_groups(cells).items()):
            group = sorted(group, key=lambda c: c.n)
            ax.plot([c.n for c in group], [c.rmse[name] for c in group],
                    "o-", label=f"rho={rho:g}, d={d:g}, lambda={lam:g}")
        ax.set_xlabel("sample size n")
        ax.set_ylabel(f"RMSE({name})")
        ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)


def plot_field(values, rows, cols, path) -> None:
    """Heat map of a regular-grid field."""
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(np.asarray(values).reshape(rows, cols), origin="upper",
                   cmap="viridis")
    fig.colorbar(im, ax=ax, shrink=0.8)
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    fig.tight_layout()
    _save(fig, path)
