"""Post-hoc quality and theory probes: KDE, mode recovery, JS from samples."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .networks import forward_discriminator

PENALTY_LOG_FLOOR = 1e-10  # zero penalties shown at this level on log plots


def kde_density(samples, bandwidth, query):
    """Isotropic Gaussian kernel density estimate at the query points.

    samples: SampleSet or (n, d) array; query: (m, d) array.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    pts = getattr(samples, "points", samples)
    pts = np.asarray(pts, dtype=np.float64)
    query = np.atleast_2d(np.asarray(query, dtype=np.float64))
    n, d = pts.shape
    norm = n * (2.0 * math.pi) ** (d / 2.0) * bandwidth ** d
    out = np.empty(query.shape[0])
    # chunked to bound the (m, n) distance matrix
    chunk = max(1, int(2e7) // max(n, 1))
    for s in range(0, query.shape[0], chunk):
        q = query[s:s + chunk]
        sq = np.sum((q[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        out[s:s + chunk] = np.exp(-sq / (2.0 * bandwidth ** 2)).sum(axis=1) / norm
    return out


def detect_modes(density_grid, xs, ys, min_separation=0.1, threshold=0.2):
    """Local maxima of a 2-D density grid, non-maximum-suppressed.

    density_grid[i, j] is the value at (xs[i], ys[j]).  threshold is the
    fraction of the global maximum below which peaks are ignored.  Returns
    peak locations sorted by decreasing density.
    """
    g = np.asarray(density_grid, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("density grid must be 2-D")
    cut = threshold * g.max()
    pad = np.full((g.shape[0] + 2, g.shape[1] + 2), -np.inf)
    pad[1:-1, 1:-1] = g
    interior = pad[1:-1, 1:-1]
    is_max = np.ones_like(g, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            is_max &= interior >= pad[1 + di:pad.shape[0] - 1 + di,
                                      1 + dj:pad.shape[1] - 1 + dj]
    cand = np.argwhere(is_max & (g > cut))
    order = np.argsort(-g[cand[:, 0], cand[:, 1]])
    peaks = []
    for i, j in cand[order]:
        loc = np.array([xs[i], ys[j]])
        if all(np.linalg.norm(loc - p) >= min_separation for p in peaks):
            peaks.append(loc)
    return peaks


@dataclass
class JsEstimate:
    value: float
    value_double_bandwidth: float


def js_from_samples(a, b, bandwidth=0.1, grid=200):
    """JS divergence between two d<=2 sample sets via KDE plus quadrature.

    Both KDEs are renormalized on the common evaluation box so that equal
    samples give exactly zero.  Also reports the value at twice the
    bandwidth as a sensitivity check.
    """
    pa = getattr(a, "points", a)
    pb = getattr(b, "points", b)
    pa, pb = np.asarray(pa, np.float64), np.asarray(pb, np.float64)
    d = pa.shape[1]
    if d > 2:
        raise ValueError("grid-based JS estimate supports d <= 2")
    both = np.vstack([pa, pb])

    def estimate(h):
        lo = both.min() - 3.0 * h
        hi = both.max() + 3.0 * h
        pts = lo + (hi - lo) * (np.arange(grid) + 0.5) / grid
        if d == 1:
            X = pts[:, None]
        else:
            A, B = np.meshgrid(pts, pts, indexing="ij")
            X = np.stack([A.reshape(-1), B.reshape(-1)], axis=1)
        cell = ((hi - lo) / grid) ** d
        da = kde_density(pa, h, X)
        db = kde_density(pb, h, X)
        da = da / (da.sum() * cell)
        db = db / (db.sum() * cell)
        mix = np.maximum(0.5 * (da + db), 1e-300)
        ratio_a = np.where(da > 0, np.maximum(da, 1e-300) / mix, 1.0)
        ratio_b = np.where(db > 0, np.maximum(db, 1e-300) / mix, 1.0)
        kl_a = np.sum(da * np.log(ratio_a)) * cell
        kl_b = np.sum(db * np.log(ratio_b)) * cell
        return 0.5 * (kl_a + kl_b)

    return JsEstimate(estimate(bandwidth), estimate(2.0 * bandwidth))


def discriminator_balance(disc, real, fake):
    """Mean discriminator output on the real and generated sets."""
    pr = getattr(real, "points", real)
    pf = getattr(fake, "points", fake)
    if len(pr) == 0 or len(pf) == 0:
        raise ValueError("empty sample set")
    mean_real = float(np.mean(forward_discriminator(disc, pr).data))
    mean_fake = float(np.mean(forward_discriminator(disc, pf).data))
    return mean_real, mean_fake


def convexity_history(metrics_csv):
    """Penalty series from the training log, zeros floored for log display."""
    with open(metrics_csv, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or "penalty" not in reader.fieldnames:
            raise ValueError(f"{metrics_csv}: missing column 'penalty'")
        series = []
        for row in reader:
            val = float(row["penalty"])
            series.append((int(row["epoch"]), max(val, PENALTY_LOG_FLOOR)))
    return series
