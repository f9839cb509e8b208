"""Readers and writers for the on-disk dataset layout.

* ``.flo``  Middlebury optical-flow format (float32 magic 202021.25, int32 width,
  int32 height, interleaved little-endian float32 ``(u, v)`` rows);
* ``.pfm``  portable float map, little-endian (scale -1.0), rows stored bottom-up;
* ``.png``  8-bit RGB images and 8-bit gray masks (255 = set);
* ``.json`` camera metadata ``{"K": [9], "R": [9], "t": [3], "width", "height"}``.
"""

import json
import os

import numpy as np
from PIL import Image

from .errors import BadMagic, DimensionMismatch, TruncatedFile
from .geometry import Camera

FLO_MAGIC = np.float32(202021.25)


def write_flo(path, warp):
    warp = np.asarray(warp)
    if warp.ndim != 3 or warp.shape[2] != 2:
        raise ValueError(f"warp must have shape (H, W, 2), got {warp.shape}")
    h, w = warp.shape[:2]
    with open(path, "wb") as f:
        f.write(np.array([FLO_MAGIC], dtype="<f4").tobytes())
        f.write(np.array([w, h], dtype="<i4").tobytes())
        f.write(np.ascontiguousarray(warp, dtype="<f4").tobytes())


def read_flo(path, expected_shape=None):
    """Read a ``.flo`` file into a float32 ``(H, W, 2)`` array.

    ``expected_shape`` is an optional ``(H, W)`` checked against the header.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or np.frombuffer(data[:4], dtype="<f4")[0] != FLO_MAGIC:
        raise BadMagic(f"{path}: not a .flo file (bad magic)")
    if len(data) < 12:
        raise TruncatedFile(f"{path}: header truncated")
    w, h = (int(x) for x in np.frombuffer(data[4:12], dtype="<i4"))
    if w <= 0 or h <= 0:
        raise BadMagic(f"{path}: invalid dimensions {w}x{h}")
    need = 12 + 8 * w * h
    if len(data) < need:
        raise TruncatedFile(f"{path}: header claims {w}x{h} but payload holds {(len(data) - 12) // 8} of {w * h} vectors")
    warp = np.frombuffer(data[12:need], dtype="<f4").reshape(h, w, 2).astype(np.float32)
    if expected_shape is not None and tuple(expected_shape) != (h, w):
        raise DimensionMismatch(f"{path}: field is {h}x{w}, expected {expected_shape[0]}x{expected_shape[1]}")
    return warp


def write_pfm(path, data):
    data = np.asarray(data, dtype="<f4")
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM holds (H, W) or (H, W, 3) data, got {data.shape}")
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path):
    with open(path, "rb") as f:
        lines = []
        for _ in range(3):
            lines.append(f.readline())
        payload = f.read()
    kind = lines[0].strip()
    if kind not in (b"PF", b"Pf"):
        raise BadMagic(f"{path}: not a PFM file")
    try:
        w, h = (int(x) for x in lines[1].split())
        scale = float(lines[2])
    except ValueError:
        raise BadMagic(f"{path}: malformed PFM header") from None
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    if len(payload) < 4 * count:
        raise TruncatedFile(f"{path}: payload shorter than {w}x{h}x{channels}")
    data = np.frombuffer(payload[: 4 * count], dtype=dtype).astype(np.float32)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return data.reshape(shape)[::-1].copy()


def to_uint8(image):
    return np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def quantize(image):
    """Round a [0, 1] float image to the 8-bit levels a PNG round-trip preserves."""
    return to_uint8(image).astype(np.float64) / 255.0


def write_png(path, image):
    """Write a float [0, 1] RGB or gray image as 8-bit PNG."""
    Image.fromarray(to_uint8(image)).save(path, format="PNG")


def read_png(path):
    """Read an 8-bit PNG as float64 in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.float64) / 255.0


def write_mask(path, mask):
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)).save(path, format="PNG")


def read_mask(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) >= 128


def dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def load_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def write_camera(path, camera: Camera):
    dump_json(path, camera.to_dict())


def read_camera(path) -> Camera:
    return Camera.from_dict(load_json(path))


def write_cameras(path, cameras):
    """Write a ``{name: Camera}`` mapping (e.g. ``cams.json``)."""
    dump_json(path, {k: c.to_dict() for k, c in cameras.items()})


def read_cameras(path):
    return {k: Camera.from_dict(d) for k, d in load_json(path).items()}


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
