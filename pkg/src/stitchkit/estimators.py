"""Warp-field sources: the ground-truth oracle, a global homography baseline
fitted by RANSAC + normalized DLT, and warps loaded from ``.flo`` files.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateConfiguration, InconsistentSample, InsufficientOverlap
from .geometry import pixel_grid
from .io import read_flo
from .scene import derive_warp, rng_for


def oracle_warp(sample):
    """Ground-truth warp of ``sample``, re-derived from its cameras and depth.

    Raises ``InconsistentSample`` if the stored field disagrees with the
    re-derivation by more than 1e-6 px anywhere.
    """
    warp, _ = derive_warp(sample.cam_target, sample.cam_ref, sample.depth_target)
    stored = np.asarray(sample.warp_gt)
    if stored.shape != warp.shape:
        raise InconsistentSample(f"stored warp {stored.shape} vs derived {warp.shape}")
    err = np.abs(warp.astype(np.float64) - stored.astype(np.float64))
    if not np.all(np.isfinite(stored)) or err.max(initial=0.0) > 1e-6:
        bad = np.argwhere(~(err <= 1e-6))[0][:2].tolist() if err.size else []
        raise InconsistentSample(f"stored warp deviates from cameras+depth (first bad pixel row/col {bad})")
    return stored


@dataclass
class Correspondences:
    """Matched pixel pairs as ``(N, 2)`` arrays plus per-pair weights in (0, 1]."""

    x_t: np.ndarray
    x_r: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.x_t)


def sample_correspondences(sample, n, seed=0):
    """Draw ``n`` distinct overlap pixels uniformly and pair them with their
    ground-truth positions in the reference image.
    """
    if n < 4:
        raise ValueError("need at least 4 correspondences")
    ys, xs = np.nonzero(sample.overlap)
    if len(ys) < n:
        raise InsufficientOverlap(f"overlap holds {len(ys)} pixels, {n} requested")
    pick = np.sort(rng_for(seed, 3).choice(len(ys), size=n, replace=False))
    x_t = np.stack([xs[pick], ys[pick]], axis=1).astype(np.float64)
    x_r = x_t + np.asarray(sample.warp_gt, dtype=np.float64)[ys[pick], xs[pick]]
    return Correspondences(x_t, x_r, np.ones(n))


def _hartley(points):
    c = points.mean(axis=0)
    d = np.sqrt(((points - c) ** 2).sum(axis=1)).mean()
    s = np.sqrt(2) / d if d > 0 else 1.0
    T = np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])
    return T


def _apply(H, pts):
    hom = np.hstack([pts, np.ones((len(pts), 1))]) @ H.T
    with np.errstate(divide="ignore", invalid="ignore"):
        return hom[:, :2] / hom[:, 2:3]


def normalize_homography(H):
    H = np.asarray(H, dtype=np.float64)
    if abs(H[2, 2]) > 1e-9:
        return H / H[2, 2]
    return H / np.linalg.norm(H)


def dlt_homography(x_t, x_r, weight=None):
    """Homography mapping ``x_t`` onto ``x_r`` by Hartley-normalised DLT."""
    x_t = np.asarray(x_t, dtype=np.float64)
    x_r = np.asarray(x_r, dtype=np.float64)
    Tt, Tr = _hartley(x_t), _hartley(x_r)
    a = _apply(Tt, x_t)
    b = _apply(Tr, x_r)
    n = len(a)
    A = np.zeros((2 * n, 9))
    A[0::2, 0:2] = a
    A[0::2, 2] = 1
    A[0::2, 6:8] = -b[:, :1] * a
    A[0::2, 8] = -b[:, 0]
    A[1::2, 3:5] = a
    A[1::2, 5] = 1
    A[1::2, 6:8] = -b[:, 1:] * a
    A[1::2, 8] = -b[:, 1]
    if weight is not None:
        A *= np.repeat(np.asarray(weight, dtype=np.float64), 2)[:, None]
    _, _, vt = np.linalg.svd(A)
    Hn = vt[-1].reshape(3, 3)
    return normalize_homography(np.linalg.inv(Tr) @ Hn @ Tt)


def _degenerate(pts):
    # any three points (nearly) collinear, judged in normalized coordinates
    q = _apply(_hartley(pts), pts)
    for i, j, k in combinations(range(len(q)), 3):
        u, v = q[j] - q[i], q[k] - q[i]
        if abs(u[0] * v[1] - u[1] * v[0]) < 1e-6:
            return True
    return False


def transfer_error(H, x_t, x_r):
    """Euclidean distance between ``H x_t`` and ``x_r`` per pair (inf where undefined)."""
    err = np.linalg.norm(_apply(H, np.asarray(x_t, dtype=np.float64)) - x_r, axis=1)
    return np.where(np.isfinite(err), err, np.inf)


def fit_homography(x_t, x_r=None, iterations=1000, inlier_px=1.0, seed=0, return_inliers=False):
    """Robust global homography from target to reference pixels.

    RANSAC over 4-point minimal samples (each fitted by normalized DLT, skipping
    collinear samples), then a DLT re-fit on the largest inlier set. Ties keep the
    earliest iteration. ``x_t`` may also be a :class:`Correspondences`.
    """
    if isinstance(x_t, Correspondences):
        x_t, x_r = x_t.x_t, x_t.x_r
    x_t = np.asarray(x_t, dtype=np.float64)
    x_r = np.asarray(x_r, dtype=np.float64)
    n = len(x_t)
    if n < 4 or len(x_r) != n:
        raise ValueError("need at least 4 paired correspondences")
    rng = rng_for(seed, 4)
    best_H, best_in, best_count = None, None, -1
    trials = 1 if n == 4 else iterations
    for _ in range(trials):
        idx = np.arange(4) if n == 4 else rng.choice(n, size=4, replace=False)
        if _degenerate(x_t[idx]) or _degenerate(x_r[idx]):
            continue
        H = dlt_homography(x_t[idx], x_r[idx])
        if not np.all(np.isfinite(H)) or abs(np.linalg.det(H)) <= 1e-12:
            continue
        inliers = transfer_error(H, x_t, x_r) < inlier_px
        count = int(inliers.sum())
        if count > best_count:
            best_H, best_in, best_count = H, inliers, count
            if count == n:
                break
    if best_H is None:
        raise DegenerateConfiguration("every minimal sample was collinear-degenerate")
    H = dlt_homography(x_t[best_in], x_r[best_in]) if best_count >= 4 else best_H
    if return_inliers:
        return H, transfer_error(H, x_t, x_r) < inlier_px
    return H


def homography_to_warp(H, size):
    """Dense displacement field of ``H`` on a ``size = (height, width)`` grid.

    Returns ``(warp, valid)``; pixels mapped to (near) infinity have
    ``valid = False`` and a zero displacement.
    """
    h, w = size
    u, v = pixel_grid(h, w)
    H = np.asarray(H, dtype=np.float64)
    X = H[0, 0] * u + H[0, 1] * v + H[0, 2]
    Y = H[1, 0] * u + H[1, 1] * v + H[1, 2]
    W = H[2, 0] * u + H[2, 1] * v + H[2, 2]
    valid = np.abs(W) >= 1e-9
    safe = np.where(valid, W, 1.0)
    warp = np.stack([np.where(valid, X / safe - u, 0.0), np.where(valid, Y / safe - v, 0.0)], axis=-1)
    return warp, valid


def homography_warp(sample, n=200, seed=0, iterations=1000, inlier_px=1.0):
    """Fit the global homography baseline to oracle matches and densify it."""
    corr = sample_correspondences(sample, n, seed)
    H = fit_homography(corr, iterations=iterations, inlier_px=inlier_px, seed=seed)
    warp, _ = homography_to_warp(H, sample.shape)
    return warp, H


def load_warp(path, expected_shape=None):
    """Load an externally produced warp (``.flo``), optionally checking its ``(H, W)``."""
    return read_flo(path, expected_shape)


def format_homography(H):
    return " ".join(f"{x:.9g}" for x in np.asarray(H).ravel())
