"""End-to-end stitching of one sample: estimate, splat, compose, blend, fill, score."""

import logging
import warnings

import numpy as np

from .blend import average_blend, feather_blend, fill_holes_diffusion
from .errors import DegenerateBaseline, EmptyEvalRegion
from .estimators import homography_warp, load_warp, oracle_warp
from .geometry import fundamental_from_cameras
from .losses import end_point_error, masked_psnr, recon_loss, sampson_epipolar_loss, warp_loss
from .warp import DEFAULT_BETA, CanvasSpec, StitchCanvas, forward_warp_softmax, importance_from_depth, to_canvas

log = logging.getLogger(__name__)

ESTIMATORS = ("oracle", "homography")
BLENDS = ("average", "feather")


def estimate_warp(sample, estimator="oracle", **kw):
    """Resolve ``estimator`` to a warp field for ``sample``.

    ``estimator`` is ``"oracle"``, ``"homography"``, ``"file:PATH"`` or an
    ``(H, W, 2)`` array. Returns ``(warp, info)``.
    """
    if isinstance(estimator, np.ndarray):
        if estimator.shape != sample.shape + (2,):
            raise ValueError(f"warp {estimator.shape} does not match sample {sample.shape}")
        return estimator, {"estimator": "array"}
    if estimator == "oracle":
        return oracle_warp(sample), {"estimator": "oracle"}
    if estimator == "homography":
        warp, H = homography_warp(sample, **kw)
        return warp, {"estimator": "homography", "H": [float(x) for x in H.ravel()]}
    if isinstance(estimator, str) and estimator.startswith("file:"):
        path = estimator[5:]
        return load_warp(path, expected_shape=sample.shape), {"estimator": estimator}
    raise ValueError(f"unknown estimator {estimator!r}")


def canvas_overlap(ov_splat, mask_ref, mask_warped):
    """Reference-frame overlap on the canvas: reference pixels reached mostly by
    splats of target overlap pixels."""
    return mask_ref & mask_warped & (ov_splat >= 0.5)


def stitch_pipeline(sample, estimator="oracle", blend="average", fill=False, beta=DEFAULT_BETA,
                    feather_px=8, jobs=1, alpha=0.3, estimator_kw=None):
    """Stitch ``sample`` on a canvas twice the reference size.

    Returns a :class:`StitchCanvas` whose ``stitched`` layer is the result and
    whose ``extras`` hold the warp, the canvas overlap/hole masks and a
    ``losses`` dict (warp loss, reconstruction terms, Sampson loss, masked PSNR
    and per-region EPE against the ground truth).
    """
    if blend not in BLENDS:
        raise ValueError(f"unknown blend {blend!r}; choose from {BLENDS}")
    warp, info = estimate_warp(sample, estimator, **(estimator_kw or {}))
    h, w = sample.image_ref.shape[:2]
    spec = CanvasSpec.for_reference(h, w)
    z = importance_from_depth(sample.depth_target, beta)
    stack = np.concatenate([sample.image_target, sample.overlap[..., None].astype(np.float64)], axis=-1)
    splat, m_wt = forward_warp_softmax(stack, warp, z, spec, jobs=jobs)
    warped, ov_splat = splat[..., :3], splat[..., 3]
    ref_pad, m_r = to_canvas(sample.image_ref, anchor=spec.anchor, canvas_shape=spec.shape)
    canvas = StitchCanvas(spec, ref_pad, warped, m_r, m_wt)

    blended = average_blend(canvas) if blend == "average" else feather_blend(canvas, feather_px)
    canvas.extras["blend"] = blended
    stitched = blended
    unfillable = np.zeros(spec.shape, dtype=bool)
    if fill:
        stitched, unfillable = fill_holes_diffusion(blended, canvas.holes)
    canvas.stitched = stitched

    ov_canvas = canvas_overlap(ov_splat, m_r, m_wt)
    losses = {"estimator": info["estimator"]}
    total, l_r, l_wt = recon_loss(stitched, ref_pad, warped, m_r, m_wt)
    losses.update(recon_total=total, recon_ref=l_r, recon_warped=l_wt)
    valid = sample.warp_valid
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        losses["warp_loss"] = warp_loss(warp, sample.warp_gt, sample.overlap, alpha, valid=valid)
    epe = end_point_error(warp, sample.warp_gt)
    ov, nov = sample.overlap & valid, ~sample.overlap & valid
    losses["epe_ov"] = float(epe[ov].mean()) if ov.any() else None
    losses["epe_nov"] = float(epe[nov].mean()) if nov.any() else None
    try:
        F = fundamental_from_cameras(sample.cam_ref, sample.cam_target)
        losses["sampson"] = sampson_epipolar_loss(warp, F, sample.overlap)
    except DegenerateBaseline:
        losses["sampson"] = None
    try:
        losses["masked_psnr"] = masked_psnr(ref_pad, warped, ov_canvas, ~m_wt)
    except EmptyEvalRegion:
        losses["masked_psnr"] = None
    losses["unfillable_px"] = int(unfillable.sum())
    if "H" in info:
        losses["H"] = info["H"]

    canvas.extras.update(warp=warp, overlap=ov_canvas, unfillable=unfillable, losses=losses)
    log.debug("%s: %s", sample.name, {k: v for k, v in losses.items() if k != "H"})
    return canvas
