"""Pixel-wise image stitching toolkit: synthetic pairs with exact warps,
softmax-splatting forward warping, loss evaluators and baselines."""

from .blend import average_blend, feather_blend, fill_holes_diffusion
from .errors import *  # noqa: F401,F403
from .estimators import (
    Correspondences,
    fit_homography,
    homography_to_warp,
    load_warp,
    oracle_warp,
    sample_correspondences,
)
from .geometry import (
    Camera,
    backproject,
    fundamental_from_cameras,
    gt_warp_field,
    overlap_mask,
    project,
)
from .losses import (
    EpeReport,
    LossConfig,
    epe_report,
    lsgan_losses,
    masked_psnr,
    recon_loss,
    sampson_epipolar_loss,
    sigmo_total_loss,
    warp_loss,
)
from .pipeline import stitch_pipeline
from .scene import (
    DatasetSample,
    PoseSampling,
    SceneSpec,
    TextureSpec,
    generate_pair,
    make_scene,
    render,
    sample_camera_pair,
)
from .warp import (
    CanvasSpec,
    StitchCanvas,
    backward_warp,
    forward_warp_softmax,
    importance_from_depth,
    to_canvas,
)

__version__ = "0.1.0"
