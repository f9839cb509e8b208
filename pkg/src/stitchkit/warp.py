"""Forward (softmax-splatting) and backward warping onto the stitching canvas."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import AnchorOutOfCanvas
from .geometry import bilinear_sample, pixel_grid

Z_CLAMP = 20.0
WEIGHT_EPS = 1e-8
DEFAULT_BETA = 10.0
DEFAULT_CHUNKS = 16


@dataclass(frozen=True)
class CanvasSpec:
    """Canvas of ``height x width`` pixels with the reference origin at ``anchor = (x, y)``."""

    height: int
    width: int
    anchor: Tuple[int, int] = (0, 0)

    @classmethod
    def for_reference(cls, ref_height, ref_width, anchor=None):
        """Canvas twice the reference size; the reference is centred unless ``anchor`` is given."""
        if anchor is None:
            anchor = (ref_width // 2, ref_height // 2)
        return cls(2 * ref_height, 2 * ref_width, (int(anchor[0]), int(anchor[1])))

    @property
    def shape(self):
        return (self.height, self.width)


@dataclass(eq=False)
class StitchCanvas:
    """Layers of one stitching instance on a common canvas."""

    spec: CanvasSpec
    ref: np.ndarray
    warped: np.ndarray
    mask_ref: np.ndarray
    mask_warped: np.ndarray
    stitched: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    @property
    def holes(self):
        """Canvas pixels covered by neither the reference nor the warped target."""
        return ~(self.mask_ref | self.mask_warped)

    @property
    def warp_holes(self):
        """Pixels the splat left empty (complement of ``mask_warped``)."""
        return ~self.mask_warped


def importance_from_depth(depth, beta=DEFAULT_BETA):
    """Splat importance ``Z = -beta * depth / mean(valid depth)`` clamped to [-20, 20].

    Pixels without depth get -20 so they only win collisions against nothing.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.isfinite(depth) & (depth > 0)
    z = np.full(depth.shape, -Z_CLAMP)
    if valid.any():
        mean = depth[valid].mean()
        z[valid] = np.clip(-beta * depth[valid] / mean, -Z_CLAMP, Z_CLAMP)
    return z


def _splat_chunk(values, x, y, weight, shape):
    h, w = shape
    n = h * w
    c = values.shape[1]
    num = np.zeros((c, n))
    den = np.zeros(n)
    ok = np.isfinite(x) & np.isfinite(y) & (weight > 0)
    if not ok.any():
        return num, den
    x, y, weight, values = x[ok], y[ok], weight[ok], values[ok]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    for dx, dy, b in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)), (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi = x0 + dx
        yi = y0 + dy
        keep = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h) & (b > 0)
        if not keep.any():
            continue
        idx = yi[keep] * w + xi[keep]
        wk = b[keep] * weight[keep]
        den += np.bincount(idx, weights=wk, minlength=n)
        for ch in range(c):
            num[ch] += np.bincount(idx, weights=wk * values[keep, ch], minlength=n)
    return num, den


def _splat(values, positions, weight, shape, jobs=1, chunks=DEFAULT_CHUNKS):
    """Accumulate bilinear splats of ``values`` (``(H, W, C)``) at ``positions``.

    Returns the raw weighted sums ``(num, den)`` with shapes ``(h, w, C)`` and
    ``(h, w)``. Source rows are split into ``chunks`` fixed groups whose private
    buffers are merged in ascending order, so the result does not depend on
    ``jobs``.
    """
    src_h = values.shape[0]
    bounds = np.linspace(0, src_h, min(chunks, src_h) + 1).astype(int)
    spans = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def work(span):
        a, b = span
        return _splat_chunk(
            values[a:b].reshape(-1, values.shape[2]),
            positions[a:b, :, 0].ravel(),
            positions[a:b, :, 1].ravel(),
            weight[a:b].ravel(),
            shape,
        )

    c = values.shape[2]
    num = np.zeros((c, shape[0] * shape[1]))
    den = np.zeros(shape[0] * shape[1])
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(work, spans)
            for pn, pd in parts:
                num += pn
                den += pd
    else:
        for span in spans:
            pn, pd = work(span)
            num += pn
            den += pd
    return np.moveaxis(num, 0, -1).reshape(shape + (c,)), den.reshape(shape)


def forward_warp_softmax(image, warp, importance, canvas: CanvasSpec, jobs=1, chunks=DEFAULT_CHUNKS, eps=WEIGHT_EPS):
    """Softmax-splat ``image`` along ``warp`` onto ``canvas``.

    Each source pixel ``q`` lands at ``q + warp(q) + anchor`` and spreads over its
    four bilinear neighbours with weight ``b * exp(Z(q))``. Output pixels are the
    normalised weighted sum wherever the total weight exceeds ``eps``; the rest
    are holes (value 0, occupancy False).

    Returns ``(warped, occupancy)``.
    """
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    warp = np.asarray(warp, dtype=np.float64)
    if warp.shape != image.shape[:2] + (2,):
        raise ValueError(f"warp {warp.shape} does not match image {image.shape[:2]}")
    importance = np.asarray(importance, dtype=np.float64)
    if importance.shape != image.shape[:2]:
        raise ValueError("importance map must match the image")
    u, v = pixel_grid(*image.shape[:2])
    pos = np.stack([u + warp[..., 0] + canvas.anchor[0], v + warp[..., 1] + canvas.anchor[1]], axis=-1)
    weight = np.exp(np.clip(importance, -Z_CLAMP, Z_CLAMP))
    num, den = _splat(image, pos, weight, canvas.shape, jobs, chunks)
    occ = den > eps
    out = np.zeros_like(num)
    out[occ] = num[occ] / den[occ][:, None]
    if squeeze:
        out = out[..., 0]
    return out, occ


def backward_warp(image, warp):
    """Gather ``image`` at ``x + warp(x)`` with bilinear interpolation.

    Returns ``(warped, inside)``; samples falling outside the image are 0 and
    flagged False.
    """
    warp = np.asarray(warp, dtype=np.float64)
    u, v = pixel_grid(*warp.shape[:2])
    return bilinear_sample(image, u + warp[..., 0], v + warp[..., 1])


def to_canvas(image, occupancy=None, anchor=(0, 0), canvas_shape=None, crop=False):
    """Place ``image`` on a zero canvas with its origin at ``anchor = (x, y)``.

    ``canvas_shape`` defaults to twice the image size. Returns ``(padded, mask)``
    where ``mask`` marks canvas pixels covered by the image (restricted to
    ``occupancy`` when given). Content falling off the canvas raises
    ``AnchorOutOfCanvas`` unless ``crop`` is set, in which case it is clipped.
    """
    image = np.asarray(image)
    h, w = image.shape[:2]
    if canvas_shape is None:
        canvas_shape = (2 * h, 2 * w)
    ch, cw = canvas_shape
    ax, ay = int(anchor[0]), int(anchor[1])
    if not crop and (ax < 0 or ay < 0 or ax + w > cw or ay + h > ch):
        raise AnchorOutOfCanvas(f"{h}x{w} image at anchor {(ax, ay)} does not fit a {ch}x{cw} canvas")
    occ = np.ones((h, w), dtype=bool) if occupancy is None else np.asarray(occupancy, dtype=bool)
    padded = np.zeros((ch, cw) + image.shape[2:], dtype=np.float64)
    mask = np.zeros((ch, cw), dtype=bool)
    y0, y1 = max(ay, 0), min(ay + h, ch)
    x0, x1 = max(ax, 0), min(ax + w, cw)
    if y1 > y0 and x1 > x0:
        src = (slice(y0 - ay, y1 - ay), slice(x0 - ax, x1 - ax))
        keep = occ[src]
        padded[y0:y1, x0:x1] = np.where(keep.reshape(keep.shape + (1,) * (image.ndim - 2)), image[src], 0)
        mask[y0:y1, x0:x1] = keep
    return padded, mask
