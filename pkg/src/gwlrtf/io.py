"""Binary tensor/mask files and PGM/PPM image stacks.

Tensor file (``GWT1``)::

    magic   4 bytes   b"GWT1"
    order   u8
    dims    order x u64, little endian
    payload prod(dims) x f64, little endian, last index fastest

Mask files (``GWM1``) share the header layout; the payload is one byte per
entry, 1 for observed and 0 for missing.
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

__all__ = [
    "TensorFormatError",
    "atomic_write",
    "write_tensor",
    "read_tensor",
    "write_mask",
    "read_mask",
    "read_pnm",
    "write_pnm",
    "load_image_stack",
    "save_image_stack",
    "flatten_color_stack",
    "unflatten_color_stack",
]

TENSOR_MAGIC = b"GWT1"
MASK_MAGIC = b"GWM1"
_MAX_ELEMENTS = 2**62


class TensorFormatError(ValueError):
    """Malformed tensor, mask or image file."""


def atomic_write(path, payload):
    """Write ``payload`` to a temporary file, then rename it over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _header(magic, shape):
    if not 1 <= len(shape) <= 255:
        raise ValueError(f"order {len(shape)} cannot be stored")
    return magic + struct.pack(f"<B{len(shape)}Q", len(shape), *shape)


def _parse(path, magic, itemsize):
    blob = Path(path).read_bytes()
    if len(blob) < 5:
        raise TensorFormatError(f"{path}: file too short for a header")
    if blob[:4] != magic:
        raise TensorFormatError(f"{path}: bad magic {blob[:4]!r}, expected {magic!r}")
    order = blob[4]
    if order == 0:
        raise TensorFormatError(f"{path}: order must be at least 1")
    end = 5 + 8 * order
    if len(blob) < end:
        raise TensorFormatError(f"{path}: truncated dimension block")
    dims = struct.unpack(f"<{order}Q", blob[5:end])
    count = 1
    for d in dims:
        if d == 0:
            raise TensorFormatError(f"{path}: zero-sized dimension")
        count *= d
        if count > _MAX_ELEMENTS:
            raise TensorFormatError(f"{path}: dimensions {dims} overflow")
    payload = blob[end:]
    if len(payload) != count * itemsize:
        kind = "truncated" if len(payload) < count * itemsize else "oversized"
        raise TensorFormatError(
            f"{path}: {kind} payload, {len(payload)} bytes for dims {dims}"
        )
    return dims, payload


def write_tensor(path, t):
    t = np.asarray(t, dtype="<f8")
    atomic_write(path, _header(TENSOR_MAGIC, t.shape) + np.ascontiguousarray(t).tobytes())


def read_tensor(path):
    dims, payload = _parse(path, TENSOR_MAGIC, 8)
    return np.frombuffer(payload, dtype="<f8").astype(float).reshape(dims)


def write_mask(path, mask):
    mask = np.asarray(mask)
    if mask.dtype != bool and not np.isin(mask, (0, 1)).all():
        raise ValueError("mask entries must be 0/1 or boolean")
    data = np.ascontiguousarray(mask, dtype=np.uint8)
    atomic_write(path, _header(MASK_MAGIC, mask.shape) + data.tobytes())


def read_mask(path, shape=None):
    """Read a mask; ``shape`` (e.g. of the paired tensor) is checked if given."""
    dims, payload = _parse(path, MASK_MAGIC, 1)
    raw = np.frombuffer(payload, dtype=np.uint8)
    if raw.size and raw.max() > 1:
        raise TensorFormatError(f"{path}: mask byte {int(raw.max())} is not 0 or 1")
    if shape is not None and tuple(shape) != tuple(dims):
        raise TensorFormatError(f"{path}: mask dims {dims} do not match tensor dims {tuple(shape)}")
    return raw.astype(bool).reshape(dims)


# -- PGM / PPM ---------------------------------------------------------------

def _pnm_tokens(blob, count):
    """First ``count`` header tokens and the offset of the raster."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TensorFormatError("truncated PNM header")
        tokens.append(blob[start:pos])
    # Exactly one whitespace byte separates the header from the raster.
    return tokens, pos + 1


def read_pnm(path):
    """Read a binary PGM (P5) or PPM (P6) image scaled to [0, 1].

    Returns an ``H x W`` array for PGM and ``H x W x 3`` for PPM.
    """
    blob = Path(path).read_bytes()
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise TensorFormatError(f"{path}: unsupported image format {magic!r} (need P5 or P6)")
    try:
        tokens, offset = _pnm_tokens(blob[2:], 3)
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise TensorFormatError(f"{path}: malformed PNM header") from exc
    if not 0 < maxval < 65536 or width < 1 or height < 1:
        raise TensorFormatError(f"{path}: invalid PNM header values")
    channels = 3 if magic == b"P6" else 1
    dtype = ">u2" if maxval > 255 else "u1"
    n = width * height * channels
    raster = blob[2 + offset:]
    size = n * np.dtype(dtype).itemsize
    if len(raster) < size:
        raise TensorFormatError(f"{path}: truncated raster")
    pixels = np.frombuffer(raster[:size], dtype=dtype).astype(float) / maxval
    shape = (height, width, 3) if channels == 3 else (height, width)
    return pixels.reshape(shape)


def write_pnm(path, image, maxval=255):
    """Write values in [0, 1] (clipped) as P5 (2-D) or P6 (``H x W x 3``)."""
    image = np.asarray(image, dtype=float)
    if image.ndim == 2:
        magic = b"P5"
    elif image.ndim == 3 and image.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot write an image of shape {image.shape}")
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.rint(np.clip(image, 0.0, 1.0) * maxval).astype(dtype)
    header = b"%s\n%d %d\n%d\n" % (magic, image.shape[1], image.shape[0], maxval)
    atomic_write(path, header + raster.tobytes())


def load_image_stack(paths):
    """Stack images into a tensor with values in [0, 1].

    Grayscale images become the bands of an ``H x W x B`` tensor; a single
    colour image is ``H x W x 3``; several colour images give an
    ``H x W x 3 x B`` tensor (see :func:`flatten_color_stack`).
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("no images given")
    images = [read_pnm(p) for p in paths]
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise TensorFormatError(f"images differ in size or type: {sorted(shapes)}")
    if images[0].ndim == 2:
        return np.stack(images, axis=-1)
    if len(images) == 1:
        return images[0]
    return np.stack(images, axis=-1)


def save_image_stack(t, out_dir, names, maxval=255):
    """Inverse of :func:`load_image_stack`; writes one file per name."""
    t = np.asarray(t, dtype=float)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(names)
    if t.ndim == 3 and len(names) == 1 and t.shape[2] == 3:
        images = [t]
    elif t.ndim == 3:
        images = [t[:, :, b] for b in range(t.shape[2])]
    elif t.ndim == 4:
        images = [t[..., b] for b in range(t.shape[3])]
    else:
        raise ValueError(f"cannot split a tensor of shape {t.shape} into images")
    if len(images) != len(names):
        raise ValueError(f"{len(images)} images but {len(names)} names")
    written = []
    for image, name in zip(images, names):
        path = out_dir / name
        write_pnm(path, image, maxval)
        written.append(path)
    return written


def flatten_color_stack(t):
    """``H x W x 3 x B`` to ``H x W x 3B`` (colour index varies slowest)."""
    t = np.asarray(t)
    if t.ndim != 4:
        raise ValueError("expected a 4-order colour stack")
    return t.reshape(t.shape[0], t.shape[1], -1)


def unflatten_color_stack(t, n_images):
    t = np.asarray(t)
    return t.reshape(t.shape[0], t.shape[1], -1, n_images)
