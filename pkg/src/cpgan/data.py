"""Source sampling, synthetic Gaussian mixtures, and IDX image ingestion."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

DOMAINS = {"unit_box": (0.0, 1.0), "symmetric_box": (-1.0, 1.0)}


@dataclass
class SampleSet:
    points: np.ndarray  # (n, d) float64
    origin: str  # "real" | "generated" | "source"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("sample set contains non-finite entries")

    def __len__(self):
        return self.points.shape[0]


@dataclass
class GmmSpec:
    modes: list  # of (mean: (d,) array, variance: float)
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if any(v <= 0 for _, v in self.modes):
            raise ValueError("variances must be positive")
        self.modes = [(np.asarray(m, dtype=np.float64), float(v))
                      for m, v in self.modes]

    @property
    def d(self):
        return self.modes[0][0].shape[0]


def ring_gmm(n_modes=7, radius=1.0, center=(0.5, 0.5), variance=0.02):
    """Equal-weight isotropic modes on a circle around the center."""
    angles = 2.0 * math.pi * np.arange(n_modes) / n_modes
    center = np.asarray(center, dtype=np.float64)
    modes = [(center + radius * np.array([math.cos(a), math.sin(a)]), variance)
             for a in angles]
    return GmmSpec(modes, np.full(n_modes, 1.0 / n_modes))


def uniform_source(n, d, domain="unit_box", seed=0):
    """i.i.d. uniform points on the chosen box."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    lo, hi = DOMAINS[domain] if isinstance(domain, str) else domain
    rng = np.random.default_rng(seed)
    return SampleSet(rng.uniform(lo, hi, size=(n, d)), "source")


def gmm_sample(spec, n, seed=0):
    """Categorical mode draw followed by an isotropic Gaussian draw."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(spec.modes), size=n, p=spec.weights)
    pts = np.empty((n, spec.d))
    for k, (mean, var) in enumerate(spec.modes):
        mask = idx == k
        m = int(mask.sum())
        if m:
            pts[mask] = mean + math.sqrt(var) * rng.standard_normal((m, spec.d))
    return SampleSet(pts, "real")


def gmm_density(spec, x):
    """Mixture density at each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.zeros(x.shape[0])
    d = spec.d
    for w, (mean, var) in zip(spec.weights, spec.modes):
        sq = np.sum((x - mean) ** 2, axis=1)
        out += w * np.exp(-sq / (2.0 * var)) / ((2.0 * math.pi * var) ** (d / 2.0))
    return out


# ---------------------------------------------------------------------------
# IDX ingestion


def _read_idx(path, expected_magic, kind):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise ValueError(f"{path}: truncated IDX header")
    magic = struct.unpack(">i", raw[:4])[0]
    if magic != expected_magic:
        raise ValueError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x} "
            f"for {kind}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise ValueError(f"{path}: truncated IDX dimension block")
    dims = struct.unpack(f">{ndim}i", raw[4:header])
    if any(s < 0 for s in dims):
        raise ValueError(f"{path}: negative IDX dimension {dims}")
    count = math.prod(dims)
    payload = raw[header:]
    if len(payload) != count:
        raise ValueError(
            f"{path}: payload length {len(payload)} does not match "
            f"dimensions {dims}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx_labels(path):
    return _read_idx(path, IDX_LABELS_MAGIC, "labels").astype(np.int64)


def load_idx_images(path, normalize_to="unit", pad_to=None):
    """Parse a big-endian IDX image file into a flattened float SampleSet.

    Pixels are scaled from [0, 255] to [0, 1] ("unit") or [-1, 1]
    ("symmetric").  pad_to=k zero-pads each HxW image to k x k, centered,
    before flattening.
    """
    arr = _read_idx(path, IDX_IMAGES_MAGIC, "images")
    n, h, w = arr.shape
    imgs = arr.astype(np.float64) / 255.0
    if pad_to is not None:
        if pad_to < h or pad_to < w:
            raise ValueError(f"pad_to={pad_to} smaller than image {h}x{w}")
        top, left = (pad_to - h) // 2, (pad_to - w) // 2
        padded = np.zeros((n, pad_to, pad_to))
        padded[:, top:top + h, left:left + w] = imgs
        imgs = padded
    if normalize_to == "symmetric":
        imgs = 2.0 * imgs - 1.0
    elif normalize_to != "unit":
        raise ValueError(f"unknown normalization {normalize_to!r}")
    return SampleSet(imgs.reshape(n, -1), "real")


def class_filter(images, labels, keep):
    """Order-preserving subset of the images whose label equals keep."""
    labels = np.asarray(labels)
    if len(labels) != len(images):
        raise ValueError(
            f"label count {len(labels)} != image count {len(images)}")
    return SampleSet(images.points[labels == keep], images.origin)
