"""Point-cloud primitives: normalization, corruption, Chamfer distance, xyz I/O.

A point cloud is an (N, 3) float array, one row per point. Clouds handed to
the networks are float32; the distance kernels compute in float64 regardless
of input dtype so both Chamfer routes agree to tight tolerances.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

MISSING_RATIOS = (0.2, 0.3, 0.4, 0.5, 0.7)


def seed_sequence(seed) -> np.random.SeedSequence:
    """Wrap ints (or pass through SeedSequence) for deterministic child seeds."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def as_cloud(points, dtype=None) -> np.ndarray:
    """Validate and return points as an (N, 3) array."""
    pts = np.asarray(points, dtype=dtype)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) point array, got shape {pts.shape}")
    if pts.shape[0] < 1:
        raise ValueError("empty point cloud")
    if not np.isfinite(pts).all():
        raise ValueError("point cloud contains non-finite coordinates")
    return pts


def bounding_box(points) -> tuple[np.ndarray, np.ndarray]:
    pts = as_cloud(points)
    return pts.min(axis=0), pts.max(axis=0)


def normalize_cloud(points) -> np.ndarray:
    """Center the bounding box on the origin and scale its diagonal to 1.

    Pure translation plus one uniform scale; relative geometry is preserved.
    Computes in and returns float64 so repeated application is stable.
    Raises ValueError for degenerate clouds (all points identical) whose
    bounding box has zero diagonal.
    """
    pts = as_cloud(points).astype(np.float64, copy=False)
    if pts.shape[0] < 2:
        raise ValueError("normalization needs at least 2 points")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    diag = float(np.linalg.norm(hi - lo))
    if diag <= 0.0:
        raise ValueError("degenerate bounding box: all points identical")
    center = (lo + hi) / 2.0
    return (pts - center) / diag


def corrupt_cloud(points, missing_ratio: float, seed) -> np.ndarray:
    """Remove the k = round(m*N) points nearest a randomly chosen anchor point.

    The anchor is drawn uniformly from the cloud; ties in the nearest-k
    selection break by ascending input index. Survivors keep their original
    order and scale (no re-normalization).
    """
    pts = as_cloud(points)
    if not 0.0 < missing_ratio < 1.0:
        raise ValueError(f"missing_ratio must be in (0, 1), got {missing_ratio}")
    n = pts.shape[0]
    k = removal_count(n, missing_ratio)
    if k >= n:
        raise ValueError(f"missing_ratio {missing_ratio} would remove all {n} points")
    rng = np.random.default_rng(seed)
    anchor = int(rng.integers(n))
    return remove_nearest(pts, anchor, k)


def removal_count(n: int, missing_ratio: float) -> int:
    # half-away-from-zero so the size formula is platform independent
    return int(np.floor(missing_ratio * n + 0.5))


def remove_nearest(points, anchor_index: int, k: int) -> np.ndarray:
    """Drop the k points closest (squared Euclidean) to points[anchor_index]."""
    pts = as_cloud(points)
    if k == 0:
        return pts.copy()
    d2 = ((pts.astype(np.float64) - pts[anchor_index].astype(np.float64)) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")  # stable: ties keep input index order
    removed = np.zeros(pts.shape[0], dtype=bool)
    removed[order[:k]] = True
    return pts[~removed]


def jitter_cloud(points, sigma: float, seed) -> np.ndarray:
    """Add zero-mean Gaussian noise with std sigma, clipped at 5*sigma."""
    pts = as_cloud(points)
    if sigma <= 0.0:
        return pts.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=pts.shape)
    np.clip(noise, -5.0 * sigma, 5.0 * sigma, out=noise)
    return (pts + noise.astype(pts.dtype)).astype(pts.dtype, copy=False)


def chamfer_distance(p1, p2, method: str = "kdtree") -> float:
    """Symmetric sum of squared nearest-neighbor distances between two clouds.

    No averaging, no square root. `method` picks the nearest-neighbor route:
    "kdtree" (spatial index) or "brute" (the reference double loop, realized
    as a full pairwise distance matrix). Both accumulate per-point minima in
    input index order, so the two routes and d(A,B) vs d(B,A) agree.
    """
    a = as_cloud(p1).astype(np.float64, copy=False)
    b = as_cloud(p2).astype(np.float64, copy=False)
    if method == "brute":
        d_ab = _brute_min_sqdist(a, b)
        d_ba = _brute_min_sqdist(b, a)
    elif method == "kdtree":
        da, _ = cKDTree(b).query(a)
        db, _ = cKDTree(a).query(b)
        d_ab, d_ba = da * da, db * db
    else:
        raise ValueError(f"unknown chamfer method {method!r}")
    return float(np.sum(d_ab) + np.sum(d_ba))


def chamfer_normalized(p1, p2, method: str = "kdtree") -> float:
    """Chamfer sum divided by the total point count |P1| + |P2|.

    Reporting metric: comparable across clouds of different sizes.
    """
    a, b = as_cloud(p1), as_cloud(p2)
    return chamfer_distance(a, b, method=method) / (a.shape[0] + b.shape[0])


def _brute_min_sqdist(a: np.ndarray, b: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """min_j ||a_i - b_j||^2 for every row of a, computed exactly."""
    out = np.empty(a.shape[0], dtype=np.float64)
    for start in range(0, a.shape[0], chunk):
        block = a[start:start + chunk]
        diff = block[:, None, :] - b[None, :, :]
        out[start:start + chunk] = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
    return out


def nearest_indices(src, dst) -> np.ndarray:
    """Index of the nearest dst point for every src point (kdtree route)."""
    a = as_cloud(src).astype(np.float64, copy=False)
    b = as_cloud(dst).astype(np.float64, copy=False)
    _, idx = cKDTree(b).query(a)
    return idx


def save_xyz(path, points) -> None:
    """Write a cloud as ASCII: one `x y z` line per point, 9 significant digits."""
    pts = as_cloud(points)
    with open(path, "w", newline="\n") as fh:
        for x, y, z in pts:
            fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def load_xyz(path, dtype=np.float32) -> np.ndarray:
    pts = np.loadtxt(path, dtype=dtype, ndmin=2)
    return as_cloud(pts, dtype=dtype)
