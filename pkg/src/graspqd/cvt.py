"""Centroidal Voronoi tessellation of the normalized behavior space.

Centroids come from Lloyd k-means iterations over uniform samples of
[0, 1]^dim (50 samples per cell, at most 100 iterations or a centroid shift
below 1e-6). Construction is seeded and deterministic; grids can be cached
on disk keyed by (n_cells, dim, stream identity).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigurationError, RngStream

SAMPLES_PER_CELL = 50
MAX_ITERATIONS = 100
SHIFT_TOLERANCE = 1e-6
_ASSIGN_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class CvtGrid:
    """Fixed centroids over [0, 1]^dim; one cell per centroid."""

    centroids: np.ndarray
    n_cells: int
    dim: int

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=float)
        if c.shape != (self.n_cells, self.dim):
            raise ConfigurationError(f"centroid matrix shape {c.shape} != ({self.n_cells}, {self.dim})")
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise ConfigurationError("centroids must lie in [0, 1]^dim")
        if len(np.unique(c, axis=0)) != self.n_cells:
            raise ConfigurationError("centroids must be pairwise distinct")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "centroids", c)


def _assign(samples: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per sample (chunked to bound memory)."""
    sq = np.sum(centroids * centroids, axis=1)
    out = np.empty(len(samples), dtype=np.int64)
    for start in range(0, len(samples), _ASSIGN_CHUNK):
        chunk = samples[start:start + _ASSIGN_CHUNK]
        scores = sq[None, :] - 2.0 * (chunk @ centroids.T)
        out[start:start + _ASSIGN_CHUNK] = np.argmin(scores, axis=1)
    return out


def build_cvt(n_cells: int, dim: int, rng: RngStream) -> CvtGrid:
    """Lloyd iterations over uniform samples of the unit cube."""
    if n_cells < 1 or dim < 1:
        raise ConfigurationError("n_cells and dim must be >= 1")
    n_samples = SAMPLES_PER_CELL * n_cells
    samples = rng.uniform(0.0, 1.0, size=(n_samples, dim))
    init = rng.choice(n_samples, size=n_cells, replace=False)
    centroids = samples[init].copy()
    for _ in range(MAX_ITERATIONS):
        labels = _assign(samples, centroids)
        counts = np.bincount(labels, minlength=n_cells).astype(float)
        sums = np.column_stack([
            np.bincount(labels, weights=samples[:, d], minlength=n_cells)
            for d in range(dim)
        ])
        # Empty cells keep their previous centroid.
        updated = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1.0)[:, None], centroids)
        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        if shift < SHIFT_TOLERANCE:
            break
    return CvtGrid(centroids=centroids, n_cells=n_cells, dim=dim)


def nearest_cell(point, grid: CvtGrid) -> int:
    """Index of the L2-nearest centroid; ties resolve to the lowest index."""
    p = np.asarray(point, dtype=float)
    if p.shape != (grid.dim,):
        raise ValueError(f"point shape {p.shape} does not match grid dim {grid.dim}")
    deltas = grid.centroids - p[None, :]
    return int(np.argmin(np.einsum("ij,ij->i", deltas, deltas)))


def nearest_cells(points: np.ndarray, grid: CvtGrid) -> np.ndarray:
    """Vectorized nearest_cell for a batch of normalized points."""
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    return _assign(pts, grid.centroids)


def cache_key(n_cells: int, dim: int, rng: RngStream) -> str:
    tag = hashlib.sha256(f"{rng.seed}:{rng.label}".encode()).hexdigest()[:12]
    return f"cvt_{n_cells}x{dim}_{tag}.npz"


def load_or_build_cvt(n_cells: int, dim: int, rng: RngStream, cache_dir=None) -> CvtGrid:
    """Build a grid, reusing a cached centroid file when one matches."""
    if cache_dir is None:
        return build_cvt(n_cells, dim, rng)
    path = Path(cache_dir) / cache_key(n_cells, dim, rng)
    if path.exists():
        data = np.load(path)
        return CvtGrid(centroids=data["centroids"], n_cells=n_cells, dim=dim)
    grid = build_cvt(n_cells, dim, rng)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, centroids=grid.centroids)
    return grid
