"""Image buffers: (H, W, 3) uint8 RGB arrays.

Binary PPM (P6, maxval 255) is always supported. PNG needs Pillow, installed
with the ``png`` extra.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import InputError

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if not m:
            raise InputError(f"{path}: truncated PPM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P6":
        raise InputError(f"{path}: only binary PPM (P6) is supported, got {fields[0]!r}")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError as e:
        raise InputError(f"{path}: malformed PPM header") from e
    if maxval != 255:
        raise InputError(f"{path}: only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos:pos + w * h * 3]
    if len(raster) != w * h * 3:
        raise InputError(f"{path}: raster is {len(raster)} bytes, expected {w * h * 3}")
    return check_image(np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy())


def write_ppm(path, image) -> None:
    image = check_image(image)
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(image).tobytes())


def read_image(path) -> np.ndarray:
    suffix = Path(path).suffix.lower()
    if not Path(path).is_file():
        raise InputError(f"image not found: {path}")
    if suffix in (".ppm", ".pnm"):
        return read_ppm(path)
    if suffix == ".png":
        try:
            from PIL import Image
        except ImportError as e:
            raise InputError("PNG input needs Pillow (pip install 'artifact[png]')") from e
        with Image.open(path) as im:
            return check_image(np.asarray(im.convert("RGB")))
    raise InputError(f"unsupported image format {suffix!r}; use .ppm or .png")


def check_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.size == 0:
        raise InputError("image is empty")
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise InputError(f"expected an (H, W, 3) uint8 RGB image, got {image.shape} {image.dtype}")
    return image
