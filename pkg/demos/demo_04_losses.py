"""
Loss evaluators and metrics
===========================

The warp loss weights errors outside the overlap by ``alpha``; the Sampson
loss measures how far a warp strays from the epipolar geometry.
"""

import numpy as np

from stitchkit import (
    SceneSpec,
    epe_report,
    fundamental_from_cameras,
    generate_pair,
    lsgan_losses,
    masked_psnr,
    sampson_epipolar_loss,
    sigmo_total_loss,
    warp_loss,
)
from stitchkit.estimators import homography_warp

s = generate_pair(SceneSpec(layout="two_plane"), (0.4, 0.6), 2, size=(128, 128), stitched=False)
pred, H = homography_warp(s)

print("warp loss of the homography prediction")
for alpha in (0.0, 0.3, 0.5, 1.0):
    print(f"  alpha={alpha:.1f}  {warp_loss(pred, s.warp_gt, s.overlap, alpha, valid=s.warp_valid):.4f}")

F = fundamental_from_cameras(s.cam_ref, s.cam_target)
print("Sampson loss, ground truth:", sampson_epipolar_loss(s.warp_gt, F, s.overlap))
# The homography errs mostly along the epipolar lines here, so it scores
# nearly as well as ground truth: the Sampson term only sees the cross component.
print("Sampson loss, homography  :", sampson_epipolar_loss(pred, F, s.overlap))

# Sliding along an epipolar line costs nothing; stepping across it does.
h, w = s.shape
v, u = np.mgrid[0:h, 0:w].astype(float)
lines = np.stack([u, v, np.ones_like(u)], -1) @ F.T
normal = lines[..., :2] / np.linalg.norm(lines[..., :2], axis=-1, keepdims=True)
along = np.stack([-normal[..., 1], normal[..., 0]], -1)
print("1 px along :", sampson_epipolar_loss(s.warp_gt + along, F, s.overlap))
print("1 px across:", sampson_epipolar_loss(s.warp_gt + normal, F, s.overlap))

rep = epe_report([(pred, s.warp_gt, s.overlap, s.overlap_ratio, s.warp_valid)], label="homography")
print("EPE cells:", {k: round(v["OV"], 3) for k, v in rep.cells.items() if v["OV"] is not None})

# Adversarial terms are evaluated on discriminator score maps.
print("LSGAN (perfect D):", lsgan_losses(np.ones(4), np.zeros(4)))
print("total loss:", sigmo_total_loss(0.4, 0.25))

img = np.full((4, 4), 0.5)
print("PSNR of a 0.1 offset:", masked_psnr(img, img + 0.1, np.ones((4, 4), bool), np.zeros((4, 4), bool)))
