"""Distance transforms, thinning, component labelling and skeleton comparison."""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import as_mask, check_same_shape


@dataclass(frozen=True)
class InstanceLabeling:
    labels: np.ndarray  # int64, 0 = background, 1..count
    count: int


def edt_sq(source):
    """Exact squared Euclidean distance to the nearest ``True`` pixel (``inf`` if none)."""
    return _kernels.edt_sq(as_mask(source))


def edt(source):
    """Exact Euclidean distance field of ``source``. Empty source gives all ``inf``."""
    return np.sqrt(edt_sq(source))


def min_dis(p, omega):
    r, c = p
    omega = as_mask(omega)
    h, w = omega.shape
    if not (0 <= r < h and 0 <= c < w):
        raise IndexError(f"pixel {p} outside {h}x{w} grid")
    pts = np.argwhere(omega)
    if len(pts) == 0:
        return float("inf")
    d2 = (pts[:, 0] - r) ** 2 + (pts[:, 1] - c) ** 2
    return float(np.sqrt(d2.min()))


def has_block(mask):
    """True if ``mask`` contains a 2x2 all-foreground block."""
    m = np.asarray(mask, dtype=bool)
    return bool(np.any(m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]))


def skeletonize(mask):
    """One-pixel-wide, topology-preserving skeleton.

    Directional (N, S, E, W) thinning: a pass marks border pixels facing one
    direction, then deletes those that are simple and not line ends, four
    non-adjacent parity subfields at a time. Repeats until stable. Line ends
    are never removed, so 8-minimal curves are fixed points; redundant
    staircase corners are removed.
    """
    return _kernels.thin(as_mask(mask))


def gt_skeleton(gt):
    """GT labels are expected one pixel wide; thin them only if they are not."""
    gt = as_mask(gt)
    return skeletonize(gt) if has_block(gt) else gt


def connected_components(mask, connectivity=8):
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count = _kernels.label(as_mask(mask), eight=connectivity == 8)
    return InstanceLabeling(labels, int(count))


def far_region(skel, delta):
    """Pixels whose distance to ``skel`` exceeds ``delta`` (strict)."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    # compare squared distances so integer geometry stays exact
    return edt_sq(skel) > float(delta) ** 2


def failed_skeletons(skel_p, skel_g, delta):
    """Return ``(skel_fG, skel_fP)``: GT pixels missed by the prediction and
    predicted pixels far from any GT pixel."""
    skel_p, skel_g = as_mask(skel_p), as_mask(skel_g)
    check_same_shape(skel_p, skel_g)
    return skel_g & far_region(skel_p, delta), skel_p & far_region(skel_g, delta)
