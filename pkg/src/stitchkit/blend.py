"""Deterministic compositing of the reference and warped target on the canvas."""

import numpy as np
from scipy import ndimage, sparse

from .warp import StitchCanvas

_CROSS = ndimage.generate_binary_structure(2, 1)


def _expand(mask, like):
    return mask.reshape(mask.shape + (1,) * (like.ndim - 2))


def average_blend(canvas: StitchCanvas):
    """Mean of both layers where they overlap, the covering layer elsewhere, 0 in holes."""
    ref, wt = canvas.ref, canvas.warped
    m_r, m_wt = canvas.mask_ref, canvas.mask_warped
    both = m_r & m_wt
    out = np.zeros_like(ref, dtype=np.float64)
    out = np.where(_expand(m_r & ~m_wt, ref), ref, out)
    out = np.where(_expand(m_wt & ~m_r, ref), wt, out)
    return np.where(_expand(both, ref), (ref + wt) / 2, out)


def _inner_distance(mask):
    # canvas edge counts as a mask boundary
    padded = np.pad(mask, 1, constant_values=False)
    return ndimage.distance_transform_edt(padded)[1:-1, 1:-1]


def feather_blend(canvas: StitchCanvas, feather_px=8):
    """Distance-weighted blend across the overlap band.

    Each layer's weight is its distance to its own mask boundary, clamped at
    ``feather_px``; weights are normalised per pixel. Pixels covered by only one
    layer keep that layer's value.
    """
    if feather_px < 1:
        raise ValueError("feather_px must be >= 1")
    ref, wt = canvas.ref, canvas.warped
    m_r, m_wt = canvas.mask_ref, canvas.mask_warped
    d_r = np.minimum(_inner_distance(m_r), feather_px)
    d_wt = np.minimum(_inner_distance(m_wt), feather_px)
    both = m_r & m_wt
    total = np.where(both, d_r + d_wt, 1.0)
    w_r = np.where(both, d_r / total, 0.0)
    mixed = _expand(w_r, ref) * ref + _expand(1.0 - w_r, ref) * wt
    out = average_blend(canvas)
    return np.where(_expand(both, ref), mixed, out)


def fill_holes_diffusion(image, hole, max_iters=2000, tol=1e-5):
    """Fill ``hole`` pixels with a harmonic interpolation of their surroundings.

    Jacobi sweeps of the 4-neighbour discrete Laplace equation; non-hole pixels
    act as Dirichlet data and the canvas edge as a zero-flux boundary. Each
    component starts from the mean of the data bordering it. Stops once the
    largest per-pixel update drops below ``tol`` or after ``max_iters`` sweeps.
    Hole components that touch no data keep their input values (0 on a blended
    canvas).

    Returns ``(filled, unfillable)`` where ``unfillable`` marks those pixels.
    """
    image = np.asarray(image, dtype=np.float64)
    hole = np.asarray(hole, dtype=bool)
    out = image.copy()
    if not hole.any():
        return out, np.zeros_like(hole)
    squeeze = out.ndim == 2
    if squeeze:
        out = out[..., None]
    h, w = hole.shape
    labels, count = ndimage.label(hole, structure=_CROSS)
    touching = ndimage.binary_dilation(~hole, structure=_CROSS) & hole
    good = np.zeros(count + 1, dtype=bool)
    good[np.unique(labels[touching])] = True
    good[0] = False
    fillable = good[labels]
    unfillable = hole & ~fillable

    ys, xs = np.nonzero(fillable)
    n = len(ys)
    if n == 0:
        return image.copy(), unfillable
    flat = out.reshape(h * w, -1)
    order = np.full(h * w, -1)
    order[ys * w + xs] = np.arange(n)
    is_data = ~hole.ravel()

    # one sweep is x <- (C x + b) / deg with C the hole-hole adjacency and b the data sum
    rows, cols = [], []
    b = np.zeros((n, flat.shape[1]))
    data_count = np.zeros(n)
    deg = np.zeros(n)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = ys + dy, xs + dx
        inside = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        deg += inside
        nb = np.where(inside, ny * w + nx, 0)
        data = inside & is_data[nb]
        b[data] += flat[nb[data]]
        data_count += data
        link = inside & ~is_data[nb]
        rows.append(np.nonzero(link)[0])
        cols.append(order[nb[link]])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    C = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    inv_deg = (1.0 / deg)[:, None]

    comp = labels[ys, xs]
    seen = data_count > 0
    local = b[seen] / data_count[seen][:, None]
    start = np.zeros((count + 1, flat.shape[1]))
    for ch in range(flat.shape[1]):
        start[:, ch] = np.bincount(comp[seen], weights=local[:, ch], minlength=count + 1)
    start /= np.maximum(np.bincount(comp[seen], minlength=count + 1), 1)[:, None]
    x = start[comp]

    for _ in range(max_iters):
        new = (C @ x + b) * inv_deg
        delta = np.abs(new - x).max()
        x = new
        if delta < tol:
            break
    flat[ys * w + xs] = x
    out = flat.reshape(out.shape)
    if squeeze:
        out = out[..., 0]
    return out, unfillable
