"""Pinhole cameras, reprojection and ground-truth warp derivation.

Conventions used throughout the package:

* world -> camera is ``x_cam = R @ x_world + t`` (row-major matrices);
* pixel ``(u, v)`` is (column, row) and pixel centres sit on integer coordinates;
* warp fields are displacements of shape ``(H, W, 2)`` holding ``(du, dv)``
  so that target pixel ``(u, v)`` lands at ``(u + du, v + dv)`` in the reference;
* depth maps hold the camera z coordinate, ``+inf`` marks pixels that see nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DegenerateBaseline, DegenerateProjection

DEPTH_EPS = 1e-12
OCCLUSION_TOL = 0.01
BOUNDS_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera ``P = K [R | t]`` with an image resolution."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.array(self.K, dtype=np.float64).reshape(3, 3)
        R = np.array(self.R, dtype=np.float64).reshape(3, 3)
        t = np.array(self.t, dtype=np.float64).reshape(3)
        if abs(np.linalg.det(R) - 1.0) > 1e-9 or not np.allclose(R @ R.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal with det 1")
        if K[2, 2] != 1.0 or K[1, 0] != 0 or K[2, 0] != 0 or K[2, 1] != 0:
            raise ValueError("intrinsics must be upper triangular with K[2][2] = 1")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if int(self.width) <= 0 or int(self.height) <= 0:
            raise ValueError("resolution must be positive")
        for arr in (K, R, t):
            arr.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @classmethod
    def from_fov(cls, width, height, fov_deg=60.0, R=None, t=None):
        """Camera with square pixels, horizontal field of view ``fov_deg`` and a centred principal point."""
        f = 0.5 * width / np.tan(np.deg2rad(fov_deg) / 2)
        K = np.array([[f, 0, (width - 1) / 2], [0, f, (height - 1) / 2], [0, 0, 1]])
        R = np.eye(3) if R is None else R
        t = np.zeros(3) if t is None else t
        return cls(K, R, t, width, height)

    @classmethod
    def looking_from(cls, center, R, K, width, height):
        """Camera with world->camera rotation ``R`` whose optical centre is ``center``."""
        R = np.asarray(R, dtype=np.float64)
        return cls(K, R, -R @ np.asarray(center, dtype=np.float64), width, height)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def P(self) -> np.ndarray:
        return self.K @ np.hstack([self.R, self.t[:, None]])

    @property
    def center(self) -> np.ndarray:
        return -self.R.T @ self.t

    def resized(self, width, height) -> "Camera":
        """Same camera sampled on a ``width x height`` pixel grid covering the same field of view."""
        sx, sy = width / self.width, height / self.height
        K = self.K.copy()
        K[0, 0] *= sx
        K[0, 1] *= sx
        K[1, 1] *= sy
        K[0, 2] = (K[0, 2] + 0.5) * sx - 0.5
        K[1, 2] = (K[1, 2] + 0.5) * sy - 0.5
        return Camera(K, self.R, self.t, width, height)

    def with_resolution(self, width, height) -> "Camera":
        """Same intrinsics and pose, different image extent."""
        return Camera(self.K, self.R, self.t, width, height)

    def to_dict(self) -> dict:
        return {
            "K": [float(x) for x in self.K.ravel()],
            "R": [float(x) for x in self.R.ravel()],
            "t": [float(x) for x in self.t],
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, d) -> "Camera":
        return cls(d["K"], d["R"], d["t"], d["width"], d["height"])

    def __eq__(self, other):
        if not isinstance(other, Camera):
            return NotImplemented
        return (
            np.array_equal(self.K, other.K)
            and np.array_equal(self.R, other.R)
            and np.array_equal(self.t, other.t)
            and self.shape == other.shape
        )

    def __repr__(self):
        return f"Camera({self.width}x{self.height}, f={self.K[0, 0]:.3f}, center={np.round(self.center, 4).tolist()})"


def pixel_grid(height, width) -> Tuple[np.ndarray, np.ndarray]:
    """Integer pixel-centre coordinates ``(u, v)`` as float arrays of shape ``(H, W)``."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return u, v


def project(camera: Camera, point) -> Tuple[np.ndarray, float]:
    """Project one world point. Returns ``(pixel, depth)``; the pixel may fall outside the image."""
    point = np.asarray(point, dtype=np.float64)
    if not np.all(np.isfinite(point)):
        raise ValueError("point must be finite")
    pix, depth = project_points(camera, point[None])
    if abs(depth[0]) < DEPTH_EPS:
        raise DegenerateProjection(f"point {point.tolist()} lies on the camera's principal plane")
    return pix[0], float(depth[0])


def project_points(camera: Camera, points) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised projection of ``(..., 3)`` world points.

    Entries with ``|depth| < 1e-12`` get NaN pixels instead of raising.
    """
    points = np.asarray(points, dtype=np.float64)
    cam = points @ camera.R.T + camera.t
    hom = cam @ camera.K.T
    depth = cam[..., 2]
    ok = np.abs(depth) >= DEPTH_EPS
    safe = np.where(ok, hom[..., 2], 1.0)
    pix = hom[..., :2] / safe[..., None]
    pix[~ok] = np.nan
    return pix, depth


def backproject(camera: Camera, pixels, depth) -> np.ndarray:
    """World points seen at ``pixels`` (``(..., 2)``) with camera z-depth ``depth``."""
    pixels = np.asarray(pixels, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    hom = np.concatenate([pixels, np.ones(pixels.shape[:-1] + (1,))], axis=-1)
    rays = hom @ np.linalg.inv(camera.K).T
    cam = rays * depth[..., None]
    return (cam - camera.t) @ camera.R


def bilinear_sample(image, x, y):
    """Bilinearly sample ``image`` (``(H, W)`` or ``(H, W, C)``) at float coordinates.

    Returns ``(values, inside)``. Points outside ``[0, W-1] x [0, H-1]`` give 0;
    overshoots below ``BOUNDS_EPS`` (floating-point round-off) are clamped in.
    Corners with zero weight never contribute, so ``inf`` entries only leak into
    samples that actually touch them.
    """
    image = np.asarray(image)
    h, w = image.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    e = BOUNDS_EPS
    inside = np.isfinite(x) & np.isfinite(y) & (x >= -e) & (x <= w - 1 + e) & (y >= -e) & (y <= h - 1 + e)
    xs = np.clip(np.where(inside, x, 0.0), 0, w - 1)
    ys = np.clip(np.where(inside, y, 0.0), 0, h - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    out = 0.0
    for yi, xi, wgt in (
        (y0, x0, (1 - fx) * (1 - fy)),
        (y0, x1, fx * (1 - fy)),
        (y1, x0, (1 - fx) * fy),
        (y1, x1, fx * fy),
    ):
        val = image[yi, xi]
        if val.ndim > wgt.ndim:
            wgt = wgt[..., None]
        out = out + wgt * np.where(wgt > 0, val, 0.0)
    out = np.asarray(out, dtype=np.float64)
    keep = inside if out.ndim == inside.ndim else inside[..., None]
    return np.where(keep, out, 0.0), inside


def _reproject(cam_t: Camera, cam_r: Camera, depth_t):
    depth_t = np.asarray(depth_t, dtype=np.float64)
    if depth_t.shape != cam_t.shape:
        raise ValueError(f"depth map {depth_t.shape} does not match camera {cam_t.shape}")
    u, v = pixel_grid(*depth_t.shape)
    has_depth = np.isfinite(depth_t) & (depth_t > 0)
    d = np.where(has_depth, depth_t, 1.0)
    world = backproject(cam_t, np.stack([u, v], axis=-1), d)
    pix, z_r = project_points(cam_r, world)
    valid = has_depth & (z_r > DEPTH_EPS)
    return u, v, pix, z_r, valid


def gt_warp_field(cam_t: Camera, cam_r: Camera, depth_t, return_depth=False):
    """Ground-truth target->reference displacement field.

    Returns ``(warp, valid)`` where ``warp`` has shape ``(H, W, 2)``. Pixels without
    depth, or whose 3D point is not in front of the reference camera, get a zero
    displacement and ``valid = False``. With ``return_depth`` the reference-camera
    depth of every target pixel is returned as a third item.
    """
    u, v, pix, z_r, valid = _reproject(cam_t, cam_r, depth_t)
    warp = np.zeros(u.shape + (2,))
    if cam_t != cam_r:
        # identical cameras map every pixel onto itself; skip the round-off
        warp[..., 0] = np.where(valid, pix[..., 0] - u, 0.0)
        warp[..., 1] = np.where(valid, pix[..., 1] - v, 0.0)
    if return_depth:
        return warp, valid, np.where(valid, z_r, np.inf)
    return warp, valid


def overlap_mask(warp, valid, cam_t: Camera, cam_r: Camera, depth_t, depth_r, tau=OCCLUSION_TOL):
    """Target pixels that have a visible correspondence in the reference view.

    A pixel qualifies when it is valid, its warped position lies inside the
    reference image and the depth it would have in the reference camera agrees
    with the bilinearly sampled reference depth to relative tolerance ``tau``.
    """
    warp = np.asarray(warp, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    depth_r = np.asarray(depth_r, dtype=np.float64)
    if depth_r.shape != cam_r.shape:
        raise ValueError(f"reference depth {depth_r.shape} does not match camera {cam_r.shape}")
    _, _, _, z_r, ok = _reproject(cam_t, cam_r, depth_t)
    u, v = pixel_grid(*warp.shape[:2])
    xr = u + warp[..., 0]
    yr = v + warp[..., 1]
    sampled, inside = bilinear_sample(depth_r, xr, yr)
    with np.errstate(invalid="ignore"):
        consistent = np.abs(z_r - sampled) <= tau * sampled
    return valid & ok & inside & np.isfinite(sampled) & consistent


def skew(v) -> np.ndarray:
    """Cross-product matrix ``[v]_x``."""
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])


def relative_pose(cam_r: Camera, cam_t: Camera):
    """``(R_rel, t_rel)`` with ``x_r = R_rel @ x_t + t_rel`` in camera coordinates."""
    R_rel = cam_r.R @ cam_t.R.T
    t_rel = cam_r.t - R_rel @ cam_t.t
    return R_rel, t_rel


def fundamental_from_cameras(cam_r: Camera, cam_t: Camera) -> np.ndarray:
    """Fundamental matrix with ``x_r^T F x_t = 0``, scaled to unit Frobenius norm."""
    R_rel, t_rel = relative_pose(cam_r, cam_t)
    if np.linalg.norm(t_rel) <= 1e-9:
        raise DegenerateBaseline("cameras share an optical centre; F is undefined")
    F = np.linalg.inv(cam_r.K).T @ skew(t_rel) @ R_rel @ np.linalg.inv(cam_t.K)
    return F / np.linalg.norm(F)


def sampson_residuals(F, x_t, x_r) -> Tuple[np.ndarray, np.ndarray]:
    """Squared Sampson distance of point pairs ``(x_t, x_r)`` (``(N, 2)`` pixels).

    Returns ``(residuals, ok)``; pairs whose denominator is below 1e-12 get
    residual 0 and ``ok = False``.
    """
    x_t = np.asarray(x_t, dtype=np.float64).reshape(-1, 2)
    x_r = np.asarray(x_r, dtype=np.float64).reshape(-1, 2)
    xt = np.hstack([x_t, np.ones((len(x_t), 1))])
    xr = np.hstack([x_r, np.ones((len(x_r), 1))])
    Fx = xt @ F.T
    Ftx = xr @ F
    num = np.einsum("ij,ij->i", xr, Fx) ** 2
    den = Fx[:, 0] ** 2 + Fx[:, 1] ** 2 + Ftx[:, 0] ** 2 + Ftx[:, 1] ** 2
    ok = den >= 1e-12
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0), ok
