"""Raster containers and file I/O.

A probability map is a 2-D ``float32`` array with values in ``[0, 1]``; a
binary mask is a 2-D ``bool`` array. Pixels are ``(row, col)`` tuples.
"""
import logging
import struct
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

CPLR_MAGIC = b"CPLR"
_HEADER = struct.Struct("<4sII")
_MAX_PIXELS = 1 << 31


class FormatError(ValueError):
    """Raised when a raster file is malformed."""


def as_mask(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"mask must be a non-empty 2-D array, got shape {a.shape}")
    return a.astype(bool, copy=False)


def as_prob(a):
    a = np.asarray(a, dtype=np.float32)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"probability map must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > 1:
        raise ValueError("probability map values must be finite and in [0, 1]")
    return a


def check_same_shape(*arrays):
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ValueError(f"dimension mismatch: {shape} vs {a.shape}")


def load_mask(path):
    """Read an 8-bit grayscale/RGB PNG; foreground where the first channel >= 128."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB", "RGBA", "LA", "P", "1"):
                raise FormatError(f"{path}: unsupported PNG mode {im.mode}")
            if im.mode in ("P", "1"):
                im = im.convert("L")
            data = np.asarray(im)
    except FormatError:
        raise
    except Exception as exc:
        raise FormatError(f"{path}: cannot decode image ({exc})") from exc
    if data.ndim == 3:
        data = data[..., 0]
    if data.size == 0:
        raise FormatError(f"{path}: zero-size image")
    return data >= 128


def save_mask(mask, path):
    mask = as_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def save_gray(image, path):
    """Write a [0, 1] grayscale grid as an 8-bit PNG (lossy; for inspection)."""
    img = np.clip(np.round(np.asarray(image, dtype=np.float64) * 255), 0, 255)
    Image.fromarray(img.astype(np.uint8), mode="L").save(path, format="PNG")


def load_gray(path):
    with Image.open(path) as im:
        data = np.asarray(im.convert("L"))
    return data.astype(np.float32) / 255.0


def save_prob(prob, path):
    prob = np.asarray(prob, dtype=np.float32)
    if prob.ndim != 2 or prob.size == 0:
        raise ValueError(f"raster must be a non-empty 2-D array, got shape {prob.shape}")
    h, w = prob.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CPLR_MAGIC, h, w))
        fh.write(prob.astype("<f4").tobytes(order="C"))


def read_cplr(path):
    """Read a CPLR raster without range checks (used for weight dumps too)."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, h, w = _HEADER.unpack_from(blob)
    if magic != CPLR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if h == 0 or w == 0:
        raise FormatError(f"{path}: zero dimension {h}x{w}")
    if h * w >= _MAX_PIXELS:
        raise FormatError(f"{path}: dimensions {h}x{w} overflow")
    n = h * w
    payload = blob[_HEADER.size:]
    if len(payload) != 4 * n:
        raise FormatError(f"{path}: expected {4 * n} payload bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(h, w).astype(np.float32)


def load_prob(path):
    a = read_cplr(path)
    if not np.all(np.isfinite(a)):
        raise FormatError(f"{path}: non-finite values")
    if a.min() < -1e-6 or a.max() > 1 + 1e-6:
        log.warning("%s: values outside [0, 1] clamped", path)
    return np.clip(a, 0.0, 1.0)


def threshold(prob, tau):
    """Foreground where ``p > tau`` (strict)."""
    return np.asarray(prob) > tau
