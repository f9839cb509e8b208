import numpy as np
import pytest

from stitchkit import BadMagic, Camera, DimensionMismatch, TruncatedFile
from stitchkit import io


def test_flo_roundtrip_bit_identical(tmp_path, rng):
    warp = (rng.normal(size=(7, 5, 2)) * 30).astype(np.float32)
    warp[0, 0] = [np.float32(1e-30), np.float32(-3.4e38)]
    path = tmp_path / "w.flo"
    io.write_flo(path, warp)
    back = io.read_flo(path)
    assert back.dtype == np.float32 and back.tobytes() == warp.tobytes()
    # header layout: magic, width, height
    raw = path.read_bytes()
    assert np.frombuffer(raw[:4], "<f4")[0] == np.float32(202021.25)
    assert np.frombuffer(raw[4:12], "<i4").tolist() == [5, 7]
    assert len(raw) == 12 + 7 * 5 * 8


def test_flo_bad_magic(tmp_path):
    path = tmp_path / "bad.flo"
    io.write_flo(path, np.zeros((2, 2, 2), np.float32))
    raw = bytearray(path.read_bytes())
    raw[:4] = np.array([202021.5], "<f4").tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        io.read_flo(path)


def test_flo_truncated_payload(tmp_path):
    path = tmp_path / "t.flo"
    io.write_flo(path, np.ones((100, 100, 2), np.float32))
    raw = path.read_bytes()
    path.write_bytes(raw[: 12 + 99 * 100 * 8])
    with pytest.raises(TruncatedFile):
        io.read_flo(path)
    path.write_bytes(raw[:8])
    with pytest.raises(TruncatedFile):
        io.read_flo(path)


def test_flo_dimension_mismatch(tmp_path):
    path = tmp_path / "d.flo"
    io.write_flo(path, np.zeros((4, 6, 2), np.float32))
    assert io.read_flo(path, expected_shape=(4, 6)).shape == (4, 6, 2)
    with pytest.raises(DimensionMismatch):
        io.read_flo(path, expected_shape=(6, 4))


def test_flo_rejects_wrong_array_shape(tmp_path):
    with pytest.raises(ValueError):
        io.write_flo(tmp_path / "x.flo", np.zeros((4, 4, 3)))


@pytest.mark.parametrize("shape", [(6, 4), (3, 5, 3)])
def test_pfm_roundtrip_bit_identical(tmp_path, rng, shape):
    data = rng.uniform(0.5, 9, size=shape).astype(np.float32)
    data.flat[0] = np.inf
    path = tmp_path / "d.pfm"
    io.write_pfm(path, data)
    back = io.read_pfm(path)
    assert back.dtype == np.float32 and back.tobytes() == data.tobytes()


def test_pfm_rows_stored_bottom_up(tmp_path):
    data = np.array([[1, 2], [3, 4]], np.float32)
    path = tmp_path / "o.pfm"
    io.write_pfm(path, data)
    payload = path.read_bytes().split(b"\n", 3)[3]
    assert np.frombuffer(payload, "<f4").tolist() == [3, 4, 1, 2]


def test_pfm_faults(tmp_path):
    path = tmp_path / "f.pfm"
    path.write_bytes(b"P6\n2 2\n-1.0\n" + bytes(16))
    with pytest.raises(BadMagic):
        io.read_pfm(path)
    path.write_bytes(b"Pf\n2 2\n-1.0\n" + bytes(12))
    with pytest.raises(TruncatedFile):
        io.read_pfm(path)
    path.write_bytes(b"Pf\ntwo 2\n-1.0\n" + bytes(16))
    with pytest.raises(BadMagic):
        io.read_pfm(path)


def test_png_mask_roundtrip(tmp_path, rng):
    mask = rng.uniform(size=(9, 13)) > 0.4
    path = tmp_path / "m.png"
    io.write_mask(path, mask)
    back = io.read_mask(path)
    assert back.dtype == bool and np.array_equal(back, mask)


def test_png_image_roundtrip_of_quantized_values(tmp_path, rng):
    img = io.quantize(rng.uniform(size=(5, 6, 3)))
    path = tmp_path / "i.png"
    io.write_png(path, img)
    assert np.array_equal(io.read_png(path), img)


def test_camera_json_roundtrip(tmp_path):
    a = np.deg2rad(23.0)
    R = np.array([[np.cos(a), 0, -np.sin(a)], [0, 1, 0], [np.sin(a), 0, np.cos(a)]])
    cam = Camera.looking_from((0.1234567891234, -2.5, 1 / 3), R, Camera.from_fov(33, 17, 47.0).K, 33, 17)
    io.write_camera(tmp_path / "c.json", cam)
    back = io.read_camera(tmp_path / "c.json")
    assert back == cam and back.t.tobytes() == cam.t.tobytes()
    io.write_cameras(tmp_path / "cams.json", {"ref": cam, "target": cam})
    assert io.read_cameras(tmp_path / "cams.json") == {"ref": cam, "target": cam}


def test_camera_json_rejects_non_rotation(tmp_path):
    d = Camera.from_fov(4, 4).to_dict()
    d["R"][0] = 2.0
    io.dump_json(tmp_path / "c.json", d)
    with pytest.raises(ValueError):
        io.read_camera(tmp_path / "c.json")
