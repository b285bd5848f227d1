"""Small encoder-decoder pixel classifier with hand-written backprop.

Layout (channels, resolution)::

    enc1  conv3x3 1->8   + ReLU          H
    enc2  conv3x3 8->8   stride 2        H/2
    enc3  conv3x3 8->16  + ReLU          H/2
    enc4  conv3x3 16->16 stride 2        H/4
    dec1  up x2, conv3x3 16->8, + enc2 skip, ReLU   H/2
    dec2  up x2, conv3x3 8->8,  + enc1 skip, ReLU   H
    head  conv1x1 8->1, logistic

Convolutions are zero padded ("same" for stride 1). The input grid is
standardised per image before the first layer.
"""
import hashlib
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

# name, out channels, in channels, kernel size, stride
LAYERS = (
    ("enc1", 8, 1, 3, 1),
    ("enc2", 8, 8, 3, 2),
    ("enc3", 16, 8, 3, 1),
    ("enc4", 16, 16, 3, 2),
    ("dec1", 8, 16, 3, 1),
    ("dec2", 8, 8, 3, 1),
    ("head", 1, 8, 1, 1),
)


def param_shapes():
    shapes = {}
    for name, co, ci, k, _ in LAYERS:
        shapes[name + ".w"] = (co, ci, k, k)
        shapes[name + ".b"] = (co,)
    return shapes


ARCH_DIGEST = hashlib.sha256(repr(LAYERS).encode()).digest()


def init_params(seed, dtype=np.float32):
    """He-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, co, ci, k, _ in LAYERS:
        std = np.sqrt(2.0 / (ci * k * k))
        params[name + ".w"] = (rng.standard_normal((co, ci, k, k)) * std).astype(dtype)
        params[name + ".b"] = np.zeros(co, dtype=dtype)
    return params


def zero_params(dtype=np.float32):
    return {k: np.zeros(s, dtype=dtype) for k, s in param_shapes().items()}


def num_params():
    return sum(int(np.prod(s)) for s in param_shapes().values())


# --------------------------------------------------------------------------
# layer primitives, x has shape (C, H, W)
# --------------------------------------------------------------------------


def _windows(h, w, k, stride):
    pad = k // 2
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    return pad, ho, wo


def _im2col(x, k, stride):
    c, h, w = x.shape
    pad, ho, wo = _windows(h, w, k, stride)
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = np.empty((c, k, k, ho, wo), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            cols[:, ky, kx] = xp[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride]
    return cols.reshape(c * k * k, ho * wo), ho, wo


def _col2im(dcols, shape, k, stride):
    c, h, w = shape
    pad, ho, wo = _windows(h, w, k, stride)
    dcols = dcols.reshape(c, k, k, ho, wo)
    dxp = np.zeros((c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for ky in range(k):
        for kx in range(k):
            dxp[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride] += dcols[:, ky, kx]
    return dxp[:, pad:pad + h, pad:pad + w] if pad else dxp


def conv_forward(x, wt, b, stride):
    co, _, k, _ = wt.shape
    cols, ho, wo = _im2col(x, k, stride)
    y = wt.reshape(co, -1) @ cols + b[:, None]
    return y.reshape(co, ho, wo), cols


def conv_backward(dy, x_shape, cols, wt, stride):
    co, _, k, _ = wt.shape
    dy2 = dy.reshape(co, -1)
    dw = (dy2 @ cols.T).reshape(wt.shape)
    db = dy2.sum(axis=1)
    dx = _col2im(wt.reshape(co, -1).T @ dy2, x_shape, k, stride)
    return dx, dw, db


def upsample2(x):
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upsample2_backward(dy):
    c, h, w = dy.shape
    return dy.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4))


def standardize(image):
    img = np.asarray(image, dtype=np.float64)
    return (img - img.mean()) / (img.std() + 1e-6)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------


@dataclass
class Cache:
    shapes: dict = field(default_factory=dict)
    cols: dict = field(default_factory=dict)
    acts: dict = field(default_factory=dict)
    prob: np.ndarray = None


def _check_image(image):
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {image.shape}")
    h, w = image.shape
    if h == 0 or w == 0 or h % 4 or w % 4:
        raise ValueError(f"image dimensions must be positive multiples of 4, got {h}x{w}")
    return image


def forward(params, image, normalize=True):
    """Return ``(prob, cache)``. Computes in the dtype of ``params``.

    ``normalize=False`` skips the per-image standardisation, which is the only
    non-local step; tests use it to probe receptive fields.
    """
    image = _check_image(image)
    dt = params["enc1.w"].dtype
    cache = Cache()
    x = (standardize(image) if normalize else np.asarray(image)).astype(dt)[None]

    def conv(name, inp, stride):
        cache.shapes[name] = inp.shape
        y, cols = conv_forward(inp, params[name + ".w"], params[name + ".b"], stride)
        cache.cols[name] = cols
        return y

    a = cache.acts
    a["h1"] = np.maximum(conv("enc1", x, 1), 0)
    a["h2"] = conv("enc2", a["h1"], 2)
    a["h3"] = np.maximum(conv("enc3", a["h2"], 1), 0)
    a["h4"] = conv("enc4", a["h3"], 2)
    a["h5"] = np.maximum(conv("dec1", upsample2(a["h4"]), 1) + a["h2"], 0)
    a["h6"] = np.maximum(conv("dec2", upsample2(a["h5"]), 1) + a["h1"], 0)
    z = conv("head", a["h6"], 1)[0]
    cache.prob = _sigmoid(z)
    return cache.prob, cache


def predict(params, image):
    return forward(params, image)[0].astype(np.float32)


def backward(params, image, grad_prob, cache=None, normalize=True):
    """Gradients of ``sum(grad_prob * prob)`` with respect to every parameter."""
    if cache is None:
        _, cache = forward(params, image, normalize)
    p = cache.prob
    grad_prob = np.asarray(grad_prob)
    if grad_prob.shape != p.shape:
        raise ValueError(f"gradient shape {grad_prob.shape} does not match output {p.shape}")
    dt = p.dtype
    a = cache.acts
    grads = {}

    def conv_b(name, dy, stride):
        dx, dw, db = conv_backward(dy, cache.shapes[name], cache.cols[name],
                                   params[name + ".w"], stride)
        grads[name + ".w"] = dw
        grads[name + ".b"] = db
        return dx

    dz = (grad_prob * p * (1.0 - p)).astype(dt)[None]
    dh6 = conv_b("head", dz, 1)
    da6 = dh6 * (a["h6"] > 0)
    dh1 = da6.copy()
    dh5 = upsample2_backward(conv_b("dec2", da6, 1))
    da5 = dh5 * (a["h5"] > 0)
    dh2 = da5.copy()
    dh4 = upsample2_backward(conv_b("dec1", da5, 1))
    dh3 = conv_b("enc4", dh4, 2)
    dh2 += conv_b("enc3", dh3 * (a["h3"] > 0), 1)
    dh1 += conv_b("enc2", dh2, 2)
    conv_b("enc1", dh1 * (a["h1"] > 0), 1)
    return {k: grads[k] for k in param_shapes()}


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

CKPT_MAGIC = b"CPCK"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sI32s32sIQ")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    params: dict
    adam_m: dict
    adam_v: dict
    step: int = 0
    epoch: int = 0
    config_digest: bytes = b"\0" * 32

    @classmethod
    def fresh(cls, params):
        return cls(params, zero_params(), zero_params())


def save_checkpoint(ckpt, path):
    parts = [_CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, ARCH_DIGEST, ckpt.config_digest,
                               ckpt.epoch, ckpt.step)]
    for group in (ckpt.params, ckpt.adam_m, ckpt.adam_v):
        for name, shape in param_shapes().items():
            t = np.asarray(group[name])
            if t.shape != shape:
                raise CheckpointError(f"{name}: shape {t.shape} != {shape}")
            parts.append(t.astype("<f4").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_checkpoint(path):
    blob = open(path, "rb").read()
    if len(blob) < _CKPT_HEADER.size + 4:
        raise CheckpointError(f"{path}: truncated checkpoint")
    magic, version, arch, cfg, epoch, step = _CKPT_HEADER.unpack_from(blob)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    if arch != ARCH_DIGEST:
        raise CheckpointError(f"{path}: architecture digest mismatch")
    shapes = param_shapes()
    n = sum(int(np.prod(s)) for s in shapes.values())
    expected = _CKPT_HEADER.size + 3 * 4 * n + 4
    if len(blob) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, found {len(blob)}")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: checksum mismatch")
    off = _CKPT_HEADER.size
    groups = []
    for _ in range(3):
        g = {}
        for name, shape in shapes.items():
            size = int(np.prod(shape))
            g[name] = np.frombuffer(body, dtype="<f4", count=size, offset=off).reshape(shape).astype(np.float32)
            off += 4 * size
        groups.append(g)
    return Checkpoint(groups[0], groups[1], groups[2], step=step, epoch=epoch, config_digest=cfg)
