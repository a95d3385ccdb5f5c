import struct

import numpy as np
import pytest

from gwlrtf.io import (
    TensorFormatError,
    flatten_color_stack,
    load_image_stack,
    read_mask,
    read_pnm,
    read_tensor,
    save_image_stack,
    unflatten_color_stack,
    write_mask,
    write_pnm,
    write_tensor,
)


def test_tensor_round_trip(tmp_path):
    t = np.random.default_rng(0).standard_normal((3, 4, 5))
    t[0, 0, 0] = -0.0
    t[1, 1, 1] = np.nan
    p = tmp_path / "t.gwt"
    write_tensor(p, t)
    back = read_tensor(p)
    assert back.tobytes() == t.tobytes()


def test_tensor_layout(tmp_path):
    p = tmp_path / "t.gwt"
    write_tensor(p, np.arange(6.0).reshape(2, 3))
    blob = p.read_bytes()
    assert blob[:4] == b"GWT1" and blob[4] == 2
    assert struct.unpack("<2Q", blob[5:21]) == (2, 3)
    assert struct.unpack("<6d", blob[21:]) == (0, 1, 2, 3, 4, 5)


def test_tensor_corruption(tmp_path):
    p = tmp_path / "t.gwt"
    write_tensor(p, np.ones((2, 3)))
    good = p.read_bytes()
    cases = {
        "magic": b"XXXX" + good[4:],
        "truncated": good[:-8],
        "oversized": good + b"\0" * 8,
        "header": good[:3],
        "dims": good[:10],
        "order": good[:4] + b"\0" + good[5:],
        "overflow": good[:5] + struct.pack("<2Q", 2**40, 2**40) + good[21:],
    }
    for name, blob in cases.items():
        p.write_bytes(blob)
        with pytest.raises(TensorFormatError) as err:
            read_tensor(p)
        assert str(p) in str(err.value), name


def test_mask_round_trip_and_errors(tmp_path):
    mask = np.random.default_rng(0).uniform(size=(3, 4, 2)) < 0.5
    p = tmp_path / "m.gwm"
    write_mask(p, mask)
    np.testing.assert_array_equal(read_mask(p), mask)
    assert read_mask(p).dtype == bool
    with pytest.raises(TensorFormatError):
        read_mask(p, (3, 4, 3))
    blob = bytearray(p.read_bytes())
    blob[-1] = 2
    p.write_bytes(bytes(blob))
    with pytest.raises(TensorFormatError):
        read_mask(p)
    write_tensor(p, np.ones(3))
    with pytest.raises(TensorFormatError):
        read_mask(p)
    with pytest.raises(ValueError):
        write_mask(p, np.array([0, 2]))


def test_writes_leave_no_temp_files(tmp_path):
    write_tensor(tmp_path / "a.gwt", np.ones(2))
    write_mask(tmp_path / "b.gwm", np.ones(2, bool))
    assert sorted(f.name for f in tmp_path.iterdir()) == ["a.gwt", "b.gwm"]


def test_pgm_scaling(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n# comment\n2 2\n255\n" + bytes([0, 255, 127, 255]))
    t = load_image_stack([p])
    assert t.shape == (2, 2, 1)
    np.testing.assert_array_equal(t.ravel(), [0, 1, 127 / 255, 1])


def test_sixteen_bit_pgm(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5 1 2 65535\n" + bytes([0xFF, 0xFF, 0x00, 0x01]))
    np.testing.assert_array_equal(read_pnm(p), [[1.0], [1 / 65535]])


def test_gray_stack_order(tmp_path):
    paths = []
    for b in range(3):
        paths.append(tmp_path / f"{b}.pgm")
        write_pnm(paths[-1], np.full((4, 5), b / 4))
    t = load_image_stack(paths)
    assert t.shape == (4, 5, 3)
    np.testing.assert_allclose(t[0, 0], np.rint(np.array([0, 0.25, 0.5]) * 255) / 255)


def test_color_images(tmp_path):
    rng = np.random.default_rng(0)
    imgs = [np.rint(rng.uniform(size=(4, 5, 3)) * 255) / 255 for _ in range(2)]
    paths = [tmp_path / "a.ppm", tmp_path / "b.ppm"]
    for p, im in zip(paths, imgs):
        write_pnm(p, im)
    np.testing.assert_array_equal(load_image_stack(paths[:1]), imgs[0])
    stack = load_image_stack(paths)
    assert stack.shape == (4, 5, 3, 2)
    flat = flatten_color_stack(stack)
    assert flat.shape == (4, 5, 6)
    np.testing.assert_array_equal(unflatten_color_stack(flat, 2), stack)
    out = save_image_stack(stack, tmp_path / "out", ["a.ppm", "b.ppm"])
    np.testing.assert_array_equal(load_image_stack(out), stack)


def test_image_errors(tmp_path):
    a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
    write_pnm(a, np.zeros((2, 2)))
    write_pnm(b, np.zeros((3, 2)))
    with pytest.raises(TensorFormatError):
        load_image_stack([a, b])
    c = tmp_path / "c.ppm"
    write_pnm(c, np.zeros((2, 2, 3)))
    with pytest.raises(TensorFormatError):
        load_image_stack([a, c])
    d = tmp_path / "d.pgm"
    d.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(TensorFormatError):
        read_pnm(d)
    d.write_bytes(b"P5\n2 2\n255\n" + bytes(3))
    with pytest.raises(TensorFormatError):
        read_pnm(d)
    with pytest.raises(ValueError):
        load_image_stack([])
