"""Procedural ray-cast scenes and synthetic stitching pairs.

Scenes are built from a handful of analytic primitives (bounded planar
rectangles and a single heightfield) so that depth is exact and every render is
a pure function of ``(spec, seed, camera)``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import BucketUnreachable, InvalidSpec
from .geometry import Camera, gt_warp_field, overlap_mask, pixel_grid
from .io import quantize

log = logging.getLogger(__name__)

LAYOUTS = ("single_plane", "two_plane", "heightfield", "box_room")
TEXTURES = ("checker", "value_noise", "voronoi")

LIGHT_DIR = np.array([0.3, -0.6, -1.0]) / np.linalg.norm([0.3, -0.6, -1.0])
AMBIENT = 0.25
MAX_ATTEMPTS = 200
PROBE_SIZE = 32


# -- random streams -----------------------------------------------------------

def rng_for(seed, *stream):
    """Counter-based generator keyed by ``seed`` and a stream path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xC2B2AE3D27D4EB4F)
_M3 = np.uint64(0x165667B19E3779F9)
_F1 = np.uint64(0xBF58476D1CE4E5B9)
_F2 = np.uint64(0x94D049BB133111EB)


def _hash01(ix, iy, seed):
    """Stateless lattice hash to [0, 1)."""
    with np.errstate(over="ignore"):
        h = ix.astype(np.int64).view(np.uint64) * _M1
        h ^= iy.astype(np.int64).view(np.uint64) * _M2
        h ^= np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) * _M3
        h ^= h >> np.uint64(30)
        h *= _F1
        h ^= h >> np.uint64(27)
        h *= _F2
        h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _fade(t):
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(x, y, seed, octaves=2):
    """Smooth lattice noise in [0, 1] (unit lattice spacing)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    total = np.zeros(x.shape)
    amp, norm, freq = 1.0, 0.0, 1.0
    for o in range(octaves):
        xs, ys = x * freq, y * freq
        x0, y0 = np.floor(xs), np.floor(ys)
        fx, fy = _fade(xs - x0), _fade(ys - y0)
        ix, iy = x0.astype(np.int64), y0.astype(np.int64)
        s = seed * 131 + o
        n00 = _hash01(ix, iy, s)
        n10 = _hash01(ix + 1, iy, s)
        n01 = _hash01(ix, iy + 1, s)
        n11 = _hash01(ix + 1, iy + 1, s)
        total += amp * ((n00 * (1 - fx) + n10 * fx) * (1 - fy) + (n01 * (1 - fx) + n11 * fx) * fy)
        norm += amp
        amp *= 0.5
        freq *= 2.0
    return total / norm


# -- specs --------------------------------------------------------------------

@dataclass(frozen=True)
class TextureSpec:
    kind: str = "value_noise"
    frequency: float = 6.0
    seed: int = 0


@dataclass(frozen=True)
class SceneSpec:
    """Layout and appearance of a procedural scene.

    ``parallax`` in [0, 1] scales how far foreground geometry is pulled from
    ``far`` toward ``near``.
    """

    layout: str = "two_plane"
    near: float = 2.0
    far: float = 4.0
    texture: TextureSpec = field(default_factory=TextureSpec)
    parallax: float = 1.0

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise InvalidSpec(f"unknown layout {self.layout!r}; choose from {LAYOUTS}")
        if not (0 < self.near < self.far) or not np.isfinite(self.far):
            raise InvalidSpec(f"need 0 < near < far, got near={self.near}, far={self.far}")
        if not (0.0 <= self.parallax <= 1.0):
            raise InvalidSpec(f"parallax must lie in [0, 1], got {self.parallax}")
        if self.texture.kind not in TEXTURES:
            raise InvalidSpec(f"unknown texture {self.texture.kind!r}; choose from {TEXTURES}")
        if not self.texture.frequency > 0:
            raise InvalidSpec("texture frequency must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        tex = d.pop("texture", {})
        return cls(texture=TextureSpec(**tex), **d)


# -- textures -----------------------------------------------------------------

def texture_rgb(spec: TextureSpec, s1, s2, seed):
    """Albedo in [0.15, 0.85] at surface coordinates ``(s1, s2)`` (world units)."""
    x = np.asarray(s1, dtype=np.float64) * spec.frequency
    y = np.asarray(s2, dtype=np.float64) * spec.frequency
    out = np.empty(np.shape(x) + (3,))
    if spec.kind == "checker":
        palette = _hash01(np.arange(6), np.full(6, 7), seed).reshape(2, 3)
        parity = (np.floor(x) + np.floor(y)).astype(np.int64) & 1
        out[:] = palette[parity]
    elif spec.kind == "value_noise":
        for c in range(3):
            out[..., c] = value_noise(x, y, seed * 3 + c)
    else:
        out[:] = _voronoi(x, y, seed)
    return 0.15 + 0.7 * out


def _voronoi(x, y, seed):
    cx, cy = np.floor(x), np.floor(y)
    best = np.full(np.shape(x), np.inf)
    color = np.zeros(np.shape(x) + (3,))
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            ix = (cx + dx).astype(np.int64)
            iy = (cy + dy).astype(np.int64)
            px = ix + _hash01(ix, iy, seed * 5 + 1)
            py = iy + _hash01(ix, iy, seed * 5 + 2)
            d2 = (x - px) ** 2 + (y - py) ** 2
            closer = d2 < best
            best = np.where(closer, d2, best)
            for c in range(3):
                color[..., c] = np.where(closer, _hash01(ix, iy, seed * 5 + 3 + c), color[..., c])
    return color


# -- geometry -----------------------------------------------------------------

@dataclass(frozen=True)
class Rect:
    """Planar patch ``origin + s1*axis1 + s2*axis2`` with ``s`` inside ``bounds``."""

    origin: Tuple[float, float, float]
    axis1: Tuple[float, float, float]
    axis2: Tuple[float, float, float]
    bounds: Tuple[float, float, float, float] = (-np.inf, np.inf, -np.inf, np.inf)
    tex_seed: int = 0

    @property
    def normal(self):
        n = np.cross(self.axis1, self.axis2)
        return n / np.linalg.norm(n)

    def intersect(self, origin, dirs):
        n = self.normal
        p0 = np.asarray(self.origin)
        denom = dirs @ n
        ok = np.abs(denom) > 1e-12
        t = np.where(ok, ((p0 - origin) @ n) / np.where(ok, denom, 1.0), np.inf)
        p = origin + t[..., None] * dirs
        s1 = (p - p0) @ np.asarray(self.axis1)
        s2 = (p - p0) @ np.asarray(self.axis2)
        lo1, hi1, lo2, hi2 = self.bounds
        hit = ok & (t > 1e-9) & (s1 >= lo1) & (s1 <= hi1) & (s2 >= lo2) & (s2 <= hi2)
        t = np.where(hit, t, np.inf)
        normal = np.broadcast_to(n, dirs.shape)
        return t, normal, s1, s2


@dataclass(frozen=True)
class Heightfield:
    """Relief surface ``z = base - amplitude * h(x, y)`` with ``h`` smooth noise in [0, 1]."""

    base: float
    amplitude: float
    frequency: float = 0.6
    seed: int = 0
    tex_seed: int = 1

    def z(self, x, y):
        return self.base - self.amplitude * value_noise(x * self.frequency, y * self.frequency, self.seed, octaves=2)

    def intersect(self, origin, dirs, steps=64, refine=32):
        """March each ray through the slab ``[base - amplitude, base]`` and bisect the first crossing."""
        shape = dirs.shape[:-1]
        d = dirs.reshape(-1, 3)
        dz = d[:, 2]
        s_lo = np.zeros(len(d))
        s_hi = np.zeros(len(d))
        fwd = dz > 1e-9
        s_lo[fwd] = np.maximum((self.base - self.amplitude - origin[2]) / dz[fwd], 0.0)
        s_hi[fwd] = (self.base - origin[2]) / dz[fwd]
        fwd &= s_hi > 0

        def f(s, rows):
            p = origin + s[:, None] * d[rows]
            return p[:, 2] - self.z(p[:, 0], p[:, 1])

        lo = np.zeros(len(d))
        hi = np.zeros(len(d))
        found = np.zeros(len(d), dtype=bool)
        active = np.flatnonzero(fwd)
        prev = s_lo[active]
        start = f(prev, active) >= 0
        hi[active[start]] = prev[start]
        lo[active[start]] = prev[start]
        found[active[start]] = True
        active, prev = active[~start], prev[~start]
        for a in np.linspace(0.0, 1.0, steps + 1)[1:]:
            if not len(active):
                break
            s = s_lo[active] + a * (s_hi[active] - s_lo[active])
            cross = f(s, active) >= 0
            rows = active[cross]
            lo[rows] = prev[cross]
            hi[rows] = s[cross]
            found[rows] = True
            active, prev = active[~cross], s[~cross]
        rows = np.flatnonzero(found)
        a, b = lo[rows], hi[rows]
        for _ in range(refine):
            mid = 0.5 * (a + b)
            above = f(mid, rows) >= 0
            b = np.where(above, mid, b)
            a = np.where(above, a, mid)
        t = np.full(len(d), np.inf)
        t[rows] = b
        p = origin + np.where(found, t, 0.0)[:, None] * d
        x, y = p[:, 0], p[:, 1]
        e = 1e-5
        gx = (self.z(x + e, y) - self.z(x - e, y)) / (2 * e)
        gy = (self.z(x, y + e) - self.z(x, y - e)) / (2 * e)
        normal = np.stack([gx, gy, -np.ones_like(gx)], axis=-1)
        normal /= np.linalg.norm(normal, axis=-1, keepdims=True)
        return t.reshape(shape), normal.reshape(shape + (3,)), x.reshape(shape), y.reshape(shape)


def _box(x0, x1, y0, y1, z0, z1, seed):
    ex, ey, ez = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
    return [
        Rect((0, 0, z0), ex, ey, (x0, x1, y0, y1), seed),
        Rect((0, 0, z1), ex, ey, (x0, x1, y0, y1), seed + 1),
        Rect((x0, 0, 0), ez, ey, (z0, z1, y0, y1), seed + 2),
        Rect((x1, 0, 0), ez, ey, (z0, z1, y0, y1), seed + 3),
        Rect((0, y0, 0), ex, ez, (x0, x1, z0, z1), seed + 4),
        Rect((0, y1, 0), ex, ez, (x0, x1, z0, z1), seed + 5),
    ]


@dataclass(frozen=True)
class Scene:
    spec: SceneSpec
    seed: int
    rects: Tuple[Rect, ...] = ()
    heightfield: Optional[Heightfield] = None

    def cast(self, origin, dirs):
        """First hit along rays ``origin + t * dirs``.

        Returns ``(t, normal, albedo)``; ``t = inf`` and albedo 0 where nothing is hit.
        """
        origin = np.asarray(origin, dtype=np.float64)
        dirs = np.asarray(dirs, dtype=np.float64)
        best = np.full(dirs.shape[:-1], np.inf)
        normal = np.zeros(dirs.shape)
        albedo = np.zeros(dirs.shape)
        prims = list(self.rects) + ([self.heightfield] if self.heightfield is not None else [])
        for prim in prims:
            t, n, s1, s2 = prim.intersect(origin, dirs)
            closer = t < best
            if not closer.any():
                continue
            best = np.where(closer, t, best)
            normal[closer] = n[closer]
            albedo[closer] = texture_rgb(self.spec.texture, s1[closer], s2[closer], self._tex_seed(prim))
        return best, normal, albedo

    def _tex_seed(self, prim):
        return (self.spec.texture.seed * 1_000_003 + self.seed * 7919 + prim.tex_seed) & 0x7FFFFFFF


def make_scene(spec: SceneSpec, seed: int) -> Scene:
    """Deterministic scene for ``(spec, seed)``; raises ``InvalidSpec`` on bad specs."""
    if not isinstance(spec, SceneSpec):
        raise InvalidSpec("spec must be a SceneSpec")
    near, far, p = spec.near, spec.far, spec.parallax
    front = far - p * (far - near)
    rng = rng_for(seed, 1)
    ex, ey, ez = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)
    if spec.layout == "single_plane":
        tilt = np.deg2rad(20.0 * p)
        a1 = (float(np.cos(tilt)), 0.0, float(np.sin(tilt)))
        return Scene(spec, seed, (Rect((0.0, 0.0, near), a1, ey, tex_seed=1),))
    if spec.layout == "two_plane":
        rects = (
            Rect((0.0, 0.0, front), ex, ey, (-np.inf, np.inf, 0.0, np.inf), tex_seed=1),
            Rect((0.0, 0.0, far), ex, ey, tex_seed=2),
        )
        return Scene(spec, seed, rects)
    if spec.layout == "heightfield":
        hf = Heightfield(base=far, amplitude=p * (far - near), seed=int(rng.integers(1 << 30)))
        return Scene(spec, seed, (), hf)
    # box_room: walls of a room plus a block standing on the floor
    half_w, floor, ceil = 0.9 * far, 0.5 * far, -0.5 * far
    rects = [
        Rect((0, 0, far), ex, ey, (-half_w, half_w, ceil, floor), tex_seed=1),
        Rect((-half_w, 0, 0), ez, ey, (-far, far, ceil, floor), tex_seed=2),
        Rect((half_w, 0, 0), ez, ey, (-far, far, ceil, floor), tex_seed=3),
        Rect((0, floor, 0), ex, ez, (-half_w, half_w, -far, far), tex_seed=4),
        Rect((0, ceil, 0), ex, ez, (-half_w, half_w, -far, far), tex_seed=5),
    ]
    if p > 0:
        size = 0.35 * (far - near) + 0.2 * near
        x_off = float(rng.uniform(-0.3, 0.3)) * near
        z1 = min(front + size, far)
        rects = _box(x_off - size / 2, x_off + size / 2, floor - 1.5 * size, floor, front, z1, 10) + rects
    return Scene(spec, seed, tuple(rects))


# -- rendering ----------------------------------------------------------------

def camera_rays(camera: Camera):
    """Per-pixel world directions scaled so that ``t`` along them equals camera depth."""
    u, v = pixel_grid(camera.height, camera.width)
    pix = np.stack([u, v, np.ones_like(u)], axis=-1)
    return pix @ np.linalg.inv(camera.K).T @ camera.R


def render(scene: Scene, camera: Camera):
    """Ray-cast ``scene`` through every pixel centre of ``camera``.

    Returns ``(image, depth)``: a float RGB image in [0, 1] (albedo times
    Lambertian shading under a fixed directional light) and the z-depth map,
    ``+inf`` where a ray hits nothing.
    """
    if camera.width * camera.height > 1024 * 1024:
        raise ValueError("render supports at most 1024x1024 pixels")
    dirs = camera_rays(camera)
    t, normal, albedo = scene.cast(camera.center, dirs)
    facing = np.einsum("...i,...i->...", normal, dirs) > 0
    normal = np.where(facing[..., None], -normal, normal)
    shade = AMBIENT + (1 - AMBIENT) * np.clip(normal @ LIGHT_DIR, 0.0, None)
    image = albedo * shade[..., None]
    hit = np.isfinite(t)
    image[~hit] = 0.0
    return image, np.where(hit, t, np.inf)


# -- camera pairs ---------------------------------------------------------------

@dataclass(frozen=True)
class PoseSampling:
    """Target-pose distribution relative to the reference camera.

    A single pose magnitude ``s ~ U[0, 1]`` drives both the yaw (``s * max_yaw_deg``)
    and the baseline (``near * (lo + s * (hi - lo))``), so smaller overlap comes
    with larger parallax.
    """

    baseline: Tuple[float, float] = (0.1, 0.3)
    max_yaw_deg: float = 55.0
    fov_deg: float = 60.0


def _yaw(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def reference_camera(width, height, fov_deg=60.0):
    return Camera.from_fov(width, height, fov_deg)


def _candidate_cameras(spec: SceneSpec, seed, width, height, sampling: PoseSampling):
    cam_r = reference_camera(width, height, sampling.fov_deg)
    rng = rng_for(seed, 2)
    lo, hi = sampling.baseline
    while True:
        s = rng.uniform()
        side = 1.0 if rng.uniform() < 0.5 else -1.0
        yaw = side * np.deg2rad(s * sampling.max_yaw_deg)
        baseline = spec.near * (lo + s * (hi - lo))
        R_cw = _yaw(yaw)
        cam_t = Camera.looking_from((side * baseline, 0.0, 0.0), R_cw.T, cam_r.K, width, height)
        yield cam_r, cam_t


def overlap_ratio(scene: Scene, cam_r: Camera, cam_t: Camera, depth_r=None, depth_t=None):
    """Fraction of target pixels with a visible correspondence in the reference view."""
    if depth_r is None:
        _, depth_r = render(scene, cam_r)
    if depth_t is None:
        _, depth_t = render(scene, cam_t)
    warp, valid = gt_warp_field(cam_t, cam_r, depth_t)
    return float(overlap_mask(warp, valid, cam_t, cam_r, depth_t, depth_r).mean())


def _in_bucket(ratio, bucket):
    return bucket[0] <= ratio <= bucket[1]


def in_bucket_half_open(ratio, bucket):
    """Left-closed, right-open membership (closed at 1.0)."""
    lo, hi = bucket
    return lo <= ratio < hi or ratio == hi == 1.0


def _check_bucket(bucket):
    lo, hi = bucket
    if not (0.0 <= lo <= hi <= 1.0):
        raise ValueError(f"bucket must satisfy 0 <= lo <= hi <= 1, got {bucket}")


def sample_camera_pair(spec: SceneSpec, bucket, seed, size=(256, 256), sampling=PoseSampling(),
                       scene=None, probe=PROBE_SIZE):
    """Rejection-sample a (reference, target) camera pair whose overlap ratio,
    measured on a ``probe x probe`` grid, falls inside ``bucket``.

    ``size`` is ``(width, height)`` of the returned cameras.
    """
    _check_bucket(bucket)
    scene = make_scene(spec, seed) if scene is None else scene
    width, height = size
    depth_probe = None
    for attempt, (cam_r, cam_t) in enumerate(_candidate_cameras(spec, seed, width, height, sampling)):
        if attempt >= MAX_ATTEMPTS:
            break
        pr = cam_r.resized(probe, probe)
        if depth_probe is None:
            _, depth_probe = render(scene, pr)
        ratio = overlap_ratio(scene, pr, cam_t.resized(probe, probe), depth_probe)
        if _in_bucket(ratio, bucket):
            return cam_r, cam_t
    raise BucketUnreachable(f"no pose within {MAX_ATTEMPTS} attempts reached overlap bucket {tuple(bucket)}")


# -- dataset samples ----------------------------------------------------------

@dataclass(eq=False)
class DatasetSample:
    """One stitching instance. Images are float RGB, depths float32, the warp float32."""

    image_ref: np.ndarray
    image_target: np.ndarray
    depth_ref: np.ndarray
    depth_target: np.ndarray
    warp_gt: np.ndarray
    overlap: np.ndarray
    cam_ref: Camera
    cam_target: Camera
    overlap_ratio: float
    sample_stitched: Optional[np.ndarray] = None
    seed: int = 0
    spec: Optional[SceneSpec] = None
    bucket: Optional[Tuple[float, float]] = None
    name: str = ""

    @property
    def shape(self):
        return self.image_target.shape[:2]

    @property
    def warp_valid(self):
        return np.isfinite(self.depth_target) & (self.depth_target > 0)


def derive_warp(cam_t: Camera, cam_r: Camera, depth_t):
    """Ground-truth warp rounded to the float32 grid it is stored on."""
    warp, valid = gt_warp_field(cam_t, cam_r, np.asarray(depth_t, dtype=np.float64))
    return warp.astype(np.float32), valid


def assemble_sample(scene, cam_r, cam_t, seed=0, bucket=None, name="", stitched=True, renders=None):
    """Render both views and derive every ground-truth layer of a sample."""
    from .blend import average_blend
    from .warp import CanvasSpec, StitchCanvas, forward_warp_softmax, importance_from_depth, to_canvas

    (img_r, depth_r), (img_t, depth_t) = renders or (render(scene, cam_r), render(scene, cam_t))
    img_r, img_t = quantize(img_r), quantize(img_t)
    depth_r = depth_r.astype(np.float32)
    depth_t = depth_t.astype(np.float32)
    warp, valid = derive_warp(cam_t, cam_r, depth_t)
    ov = overlap_mask(warp, valid, cam_t, cam_r, depth_t, depth_r)
    sample = DatasetSample(
        image_ref=img_r, image_target=img_t, depth_ref=depth_r, depth_target=depth_t,
        warp_gt=warp, overlap=ov, cam_ref=cam_r, cam_target=cam_t,
        overlap_ratio=float(ov.mean()), seed=seed, spec=scene.spec,
        bucket=None if bucket is None else tuple(float(b) for b in bucket), name=name,
    )
    if stitched:
        canvas = CanvasSpec.for_reference(*img_r.shape[:2])
        z = importance_from_depth(depth_t)
        warped, m_wt = forward_warp_softmax(img_t, warp, z, canvas)
        ref_pad, m_r = to_canvas(img_r, anchor=canvas.anchor, canvas_shape=canvas.shape)
        layers = StitchCanvas(canvas, ref_pad, warped, m_r, m_wt)
        sample.sample_stitched = quantize(average_blend(layers))
    return sample


def generate_pair(spec: SceneSpec, bucket, seed, size=(256, 256), sampling=PoseSampling(), stitched=True, name=""):
    """Generate one sample whose full-resolution overlap ratio lies in ``bucket``.

    Candidate poses are screened on the coarse probe grid first; survivors are
    re-measured at full resolution and kept only if the left-closed,
    right-open bucket holds the exact ratio.
    """
    _check_bucket(bucket)
    scene = make_scene(spec, seed)
    width, height = size
    cam_r = reference_camera(width, height, sampling.fov_deg)
    ref_render = render(scene, cam_r)
    pr = cam_r.resized(PROBE_SIZE, PROBE_SIZE)
    _, depth_probe = render(scene, pr)
    for attempt, (cam_r, cam_t) in enumerate(_candidate_cameras(spec, seed, width, height, sampling)):
        if attempt >= MAX_ATTEMPTS:
            break
        ratio = overlap_ratio(scene, pr, cam_t.resized(PROBE_SIZE, PROBE_SIZE), depth_probe)
        if not _in_bucket(ratio, bucket):
            continue
        tgt_render = render(scene, cam_t)
        full = overlap_ratio(scene, cam_r, cam_t, ref_render[1].astype(np.float32), tgt_render[1].astype(np.float32))
        if in_bucket_half_open(full, bucket):
            log.debug("seed %d accepted after %d attempts (probe %.3f, full %.3f)", seed, attempt + 1, ratio, full)
            return assemble_sample(scene, cam_r, cam_t, seed, bucket, name, stitched, (ref_render, tgt_render))
    raise BucketUnreachable(f"no pose within {MAX_ATTEMPTS} attempts reached overlap bucket {tuple(bucket)}")
