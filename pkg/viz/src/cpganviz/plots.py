"""Figure rendering for the training artifacts.

Everything here consumes the documented CSV files only: generated samples
(one point per row, no header), the potential grid (x, y, phi rows), and
the metrics log (header line, one row per epoch).  No model internals are
touched, so the plots stay valid for any producer of the same formats.
"""

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

PENALTY_FLOOR = 1e-10


def _load_points(samples_csv, min_cols=1):
    if os.path.getsize(samples_csv) == 0:
        raise ValueError(f"{samples_csv}: no rows")
    pts = np.loadtxt(samples_csv, delimiter=",", ndmin=2)
    if pts.size == 0:
        raise ValueError(f"{samples_csv}: no rows")
    if pts.shape[1] < min_cols:
        raise ValueError(f"{samples_csv}: expected at least {min_cols} "
                         f"columns, found {pts.shape[1]}")
    return pts


def _kde_grid(points, bandwidth, grid=150, margin=0.25):
    lo = points.min(axis=0) - margin
    hi = points.max(axis=0) + margin
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    A, B = np.meshgrid(xs, ys, indexing="ij")
    q = np.stack([A.reshape(-1), B.reshape(-1)], axis=1)
    inv = 1.0 / (2.0 * bandwidth ** 2)
    dens = np.zeros(q.shape[0])
    for start in range(0, q.shape[0], 4096):
        block = q[start:start + 4096]
        d2 = ((block[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        dens[start:start + block.shape[0]] = np.exp(-d2 * inv).mean(axis=1)
    dens /= 2.0 * np.pi * bandwidth ** 2
    return xs, ys, dens.reshape(grid, grid)


def plot_density(samples_csv, bandwidth, out_image):
    """Kernel density heat map of 2-D generated samples, points overlaid."""
    pts = _load_points(samples_csv, min_cols=2)[:, :2]
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    xs, ys, dens = _kde_grid(pts, bandwidth)
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    mesh = ax.pcolormesh(xs, ys, dens.T, shading="auto", cmap="viridis")
    step = max(len(pts) // 2000, 1)
    ax.plot(pts[::step, 0], pts[::step, 1], ".", ms=1.5, color="white",
            alpha=0.35)
    fig.colorbar(mesh, ax=ax, label="density")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"generated sample density (bandwidth {bandwidth:g})")
    fig.tight_layout()
    fig.savefig(out_image, dpi=120)
    plt.close(fig)
    return out_image


def plot_surface(grid_csv, out_image):
    """Contour plot of the learned potential from (x, y, value) rows."""
    rows = _load_points(grid_csv, min_cols=3)
    xs = np.unique(rows[:, 0])
    ys = np.unique(rows[:, 1])
    n, m = len(xs), len(ys)
    if n * m != rows.shape[0]:
        raise ValueError(f"{grid_csv}: rows do not form a regular grid")
    order = np.lexsort((rows[:, 1], rows[:, 0]))
    vals = rows[order, 2].reshape(n, m)
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    filled = ax.contourf(xs, ys, vals.T, levels=30, cmap="magma")
    ax.contour(xs, ys, vals.T, levels=12, colors="black", linewidths=0.4)
    fig.colorbar(filled, ax=ax, label="potential value")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("learned potential")
    fig.tight_layout()
    fig.savefig(out_image, dpi=120)
    plt.close(fig)
    return out_image


def read_penalty_series(metrics_csv):
    """(epoch, penalty) pairs with zero values floored at 1e-10 for display."""
    out = []
    with open(metrics_csv, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "penalty" not in reader.fieldnames:
            raise ValueError(f"{metrics_csv}: missing 'penalty' column")
        for row in reader:
            pen = float(row["penalty"])
            out.append((int(row["epoch"]), max(pen, PENALTY_FLOOR)))
    if not out:
        raise ValueError(f"{metrics_csv}: no metric rows")
    return out


def plot_convexity(metrics_csvs, out_image, labels=None):
    """Penalty curves on a log axis, one per metrics file.

    Exact zeros are shown at the 1e-10 floor so that runs whose penalty
    vanishes remain visible on the logarithmic scale.
    """
    if isinstance(metrics_csvs, (str, os.PathLike)):
        metrics_csvs = [metrics_csvs]
    if labels is None:
        labels = [os.path.basename(os.path.dirname(os.path.abspath(p)))
                  or str(p) for p in metrics_csvs]
    if len(labels) != len(metrics_csvs):
        raise ValueError("one label per metrics file required")
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    for path, label in zip(metrics_csvs, labels):
        series = read_penalty_series(path)
        epochs = [e for e, _ in series]
        pens = [p for _, p in series]
        ax.plot(epochs, pens, label=label)
    ax.set_yscale("log")
    ax.set_ylim(bottom=PENALTY_FLOOR / 2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("convexity penalty (floored at 1e-10)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_image, dpi=120)
    plt.close(fig)
    return out_image


def plot_image_grid(samples_csv, side, out_image, tiles=16):
    """Rows reshaped to side x side grayscale tiles on a square sheet.

    Sample rows are produced in the symmetric [-1, 1] convention, so they
    are mapped back through (v + 1) / 2 and clamped to [0, 1].
    """
    pts = _load_points(samples_csv, min_cols=side * side)
    if side < 1:
        raise ValueError("side must be >= 1")
    if pts.shape[1] != side * side:
        raise ValueError(f"{samples_csv}: rows of length {pts.shape[1]} "
                         f"cannot form {side}x{side} tiles")
    tiles = min(tiles, pts.shape[0])
    cols = int(np.ceil(np.sqrt(tiles)))
    rows = int(np.ceil(tiles / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(1.4 * cols, 1.4 * rows))
    axes = np.atleast_1d(axes).reshape(-1)
    for i, ax in enumerate(axes):
        ax.axis("off")
        if i >= tiles:
            continue
        img = np.clip((pts[i].reshape(side, side) + 1.0) / 2.0, 0.0, 1.0)
        ax.imshow(img, cmap="gray", vmin=0.0, vmax=1.0)
    fig.tight_layout()
    fig.savefig(out_image, dpi=120)
    plt.close(fig)
    return out_image
