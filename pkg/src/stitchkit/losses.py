"""Loss evaluators and evaluation metrics.

All functions are pure and operate on numpy arrays. Region terms are masked
*means* (not sums), so weights stay comparable across image sizes and overlap
ratios.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyEvalRegion, EmptyMask, EmptyRegion
from .geometry import pixel_grid, sampson_residuals

PSNR_CAP = 99.0
DEFAULT_BUCKETS = ((0.2, 0.4), (0.4, 0.6), (0.6, 0.8))
NORMALIZATION_NOTE = "region terms are per-region means (not sums)"


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.3
    lambda_r: float = 1.0
    lambda_a: float = 0.1

    def __post_init__(self):
        if self.alpha < 0 or self.lambda_r < 0 or self.lambda_a < 0:
            raise ValueError("loss weights must be non-negative")


def _masked_mean(values, mask, warning, what):
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        warnings.warn(f"{what} is empty; its term contributes 0", warning, stacklevel=3)
        return 0.0
    return float(values[mask].sum() / count)


def warp_loss(W, W_gt, overlap, alpha=0.3, valid=None):
    """NOV-regularised warp loss: ``mean_OV |W - W_gt|_1 + alpha * mean_NOV |W - W_gt|_1``.

    ``valid`` optionally restricts both regions (e.g. to pixels with ground truth).
    """
    W = np.asarray(W, dtype=np.float64)
    W_gt = np.asarray(W_gt, dtype=np.float64)
    if W.shape != W_gt.shape:
        raise ValueError(f"warp shapes differ: {W.shape} vs {W_gt.shape}")
    overlap = np.asarray(overlap, dtype=bool)
    keep = np.ones(overlap.shape, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    l1 = np.abs(W - W_gt).sum(axis=-1)
    ov = _masked_mean(l1, overlap & keep, EmptyRegion, "OV region")
    nov = _masked_mean(l1, ~overlap & keep, EmptyRegion, "NOV region")
    return ov + alpha * nov


def _l1_map(a, b):
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    return d.mean(axis=-1) if d.ndim == 3 else d


def recon_loss(I_S, I_R, I_WT, M_R, M_WT) -> Tuple[float, float, float]:
    """Hole-aware reconstruction loss.

    ``L_R`` is the mean absolute difference between ``I_S`` and ``I_R`` over
    ``M_R``, ``L_WT`` the same against ``I_WT`` over ``M_WT`` (channels averaged).
    Returns ``(L_R + L_WT, L_R, L_WT)``.
    """
    l_r = _masked_mean(_l1_map(I_S, I_R), M_R, EmptyMask, "M^R")
    l_wt = _masked_mean(_l1_map(I_S, I_WT), M_WT, EmptyMask, "M^WT")
    return l_r + l_wt, l_r, l_wt


def lsgan_losses(d_real, d_fake) -> Tuple[float, float]:
    """Least-squares GAN objectives from discriminator score maps: ``(L_D, L_adv)``."""
    d_real = np.asarray(d_real, dtype=np.float64)
    d_fake = np.asarray(d_fake, dtype=np.float64)
    if not (np.all(np.isfinite(d_real)) and np.all(np.isfinite(d_fake))):
        raise ValueError("discriminator scores must be finite")
    l_d = float(np.mean((d_real - 1.0) ** 2) + np.mean(d_fake ** 2))
    l_adv = float(np.mean((d_fake - 1.0) ** 2))
    return l_d, l_adv


def sigmo_total_loss(recon_total, l_adv, config: LossConfig = LossConfig()):
    if recon_total < 0 or l_adv < 0:
        raise ValueError("loss components must be non-negative")
    return config.lambda_r * recon_total + config.lambda_a * l_adv


def sampson_epipolar_loss(W, F, region, return_skipped=False):
    """Mean squared Sampson distance of ``(x, x + W(x))`` over ``region``.

    ``F`` maps target points to reference epipolar lines (``x_r^T F x_t = 0``).
    Pixels whose Sampson denominator is below 1e-12 are skipped; with
    ``return_skipped`` their count is returned alongside the loss.
    """
    W = np.asarray(W, dtype=np.float64)
    region = np.asarray(region, dtype=bool)
    u, v = pixel_grid(*W.shape[:2])
    x_t = np.stack([u[region], v[region]], axis=1)
    x_r = x_t + W[region]
    res, ok = sampson_residuals(np.asarray(F, dtype=np.float64), x_t, x_r)
    skipped = int((~ok).sum())
    loss = float(res[ok].mean()) if ok.any() else 0.0
    return (loss, skipped) if return_skipped else loss


def masked_psnr(I_R, I_WT, overlap, hole, peak=1.0):
    """PSNR between ``I_R`` and ``I_WT`` over ``overlap`` minus ``hole`` (all channels).

    Zero error returns the 99 dB cap.
    """
    region = np.asarray(overlap, dtype=bool) & ~np.asarray(hole, dtype=bool)
    if not region.any():
        raise EmptyEvalRegion("overlap region is empty once holes are excluded")
    diff = np.asarray(I_R, dtype=np.float64)[region] - np.asarray(I_WT, dtype=np.float64)[region]
    mse = float(np.mean(diff ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak ** 2 / mse))


# -- end-point error tables ---------------------------------------------------

def bucket_label(bucket):
    lo, hi = bucket
    return f"{round(lo * 100):d}-{round(hi * 100):d}"


def assign_bucket(ratio, buckets=DEFAULT_BUCKETS):
    """Index of the left-closed, right-open bucket holding ``ratio``, or None."""
    for i, (lo, hi) in enumerate(buckets):
        if lo <= ratio < hi:
            return i
    return None


@dataclass
class _Accum:
    ov_sum: float = 0.0
    ov_px: int = 0
    nov_sum: float = 0.0
    nov_px: int = 0
    samples: int = 0

    def add(self, epe, ov, nov):
        self.ov_sum += float(epe[ov].sum())
        self.ov_px += int(ov.sum())
        self.nov_sum += float(epe[nov].sum())
        self.nov_px += int(nov.sum())
        self.samples += 1

    def row(self):
        return {
            "OV": self.ov_sum / self.ov_px if self.ov_px else None,
            "NOV": self.nov_sum / self.nov_px if self.nov_px else None,
            "samples": self.samples,
            "px_ov": self.ov_px,
            "px_nov": self.nov_px,
        }


@dataclass
class EpeReport:
    """End-point error split by region (OV / NOV) and overlap-ratio bucket.

    Cell means pool every pixel of every sample in the cell; ``total`` pools all
    samples, so it is the pixel-count-weighted mean of the bucket cells.
    """

    buckets: Tuple[Tuple[float, float], ...]
    cells: Dict[str, dict]
    total: dict
    label: str = ""

    @property
    def columns(self) -> List[str]:
        cols = [bucket_label(b) for b in self.buckets]
        if self.cells.get("other", {}).get("samples"):
            cols.append("other")
        return cols

    def to_dict(self):
        return {
            "label": self.label,
            "buckets": [list(b) for b in self.buckets],
            "cells": self.cells,
            "total": self.total,
            "normalization": "EPE pooled over pixels within each cell",
        }


def end_point_error(W, W_gt):
    d = np.asarray(W, dtype=np.float64) - np.asarray(W_gt, dtype=np.float64)
    return np.sqrt((d ** 2).sum(axis=-1))


def epe_report(samples: Sequence, buckets=DEFAULT_BUCKETS, label="") -> EpeReport:
    """Build an :class:`EpeReport` from ``(W, W_gt, overlap, overlap_ratio[, valid])`` tuples.

    Samples whose ratio falls in no bucket are collected in an ``other`` cell.
    """
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    ordered = sorted(buckets)
    if any(a[1] > b[0] for a, b in zip(ordered, ordered[1:])):
        raise ValueError("bucket intervals must be disjoint")
    acc = [_Accum() for _ in buckets]
    other, total = _Accum(), _Accum()
    for item in samples:
        W, W_gt, overlap, ratio = item[:4]
        valid = item[4] if len(item) > 4 and item[4] is not None else None
        epe = end_point_error(W, W_gt)
        ov = np.asarray(overlap, dtype=bool)
        keep = np.ones_like(ov) if valid is None else np.asarray(valid, dtype=bool)
        i = assign_bucket(ratio, buckets)
        (other if i is None else acc[i]).add(epe, ov & keep, ~ov & keep)
        total.add(epe, ov & keep, ~ov & keep)
    cells = {bucket_label(b): a.row() for b, a in zip(buckets, acc)}
    cells["other"] = other.row()
    return EpeReport(tuple(tuple(b) for b in buckets), cells, total.row(), label)
