"""Optional SVG output for CLI runs. CSV/JSON stay the primary artifacts."""

from __future__ import annotations

import numpy as np


def _mpl():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "spindrift"
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt
    plt.close(fig)


def line_series(path, t, series: dict, xlabel: str, ylabel: str, title: str):
    """Plot named time series against t and save as SVG."""
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label, values in series.items():
        ax.plot(t, values, label=label, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if series:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def sphere_heatmap(path, eta_edges, phi_edges, weights, title: str):
    """Equal-area (eta, phi) histogram as a heatmap SVG."""
    plt = _mpl()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    mesh = ax.pcolormesh(phi_edges, eta_edges, weights, shading="auto")
    fig.colorbar(mesh, ax=ax, label="weight")
    ax.set_xlabel("phi")
    ax.set_ylabel("eta")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def ball_trajectories(path, trajectories, title: str):
    """3-D view of mean-field trajectories on/inside the unit ball."""
    plt = _mpl()
    fig = plt.figure(figsize=(5.6, 5.6))
    ax = fig.add_subplot(projection="3d")
    u = np.linspace(0, 2 * np.pi, 40)
    v = np.linspace(0, np.pi, 20)
    ax.plot_wireframe(np.outer(np.cos(u), np.sin(v)),
                      np.outer(np.sin(u), np.sin(v)),
                      np.outer(np.ones_like(u), np.cos(v)),
                      color="0.85", lw=0.3)
    for traj in trajectories:
        ax.plot(traj.r[:, 0], traj.r[:, 1], traj.r[:, 2], lw=0.9)
    ax.set_box_aspect((1, 1, 1))
    ax.set_title(title)
    _save(fig, path)
