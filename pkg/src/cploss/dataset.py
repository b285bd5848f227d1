"""Polyline annotations to one-pixel raster labels, plus tiling.

Annotation JSON::

    {"transform": [a, b, c, d, e, f] | null, "polylines": [[[x, y], ...], ...]}

With a transform, world ``(X, Y)`` maps to pixel ``(col, row) =
(a*X + b*Y + c, d*X + e*Y + f)``; without one, ``(x, y)`` already is
``(col, row)``.
"""
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class Annotation:
    polylines: list
    transform: Optional[tuple] = None

    def __post_init__(self):
        if not self.polylines:
            raise ValueError("annotation has no polylines")
        for i, line in enumerate(self.polylines):
            if len(line) < 2:
                raise ValueError(f"polyline {i} has fewer than 2 vertices")
        if self.transform is not None:
            if len(self.transform) != 6:
                raise ValueError("transform must have 6 coefficients")
            a, b, _, d, e, _ = self.transform
            if a * e - b * d == 0:
                raise ValueError("transform is not invertible")

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        unknown = set(obj) - {"transform", "polylines"}
        if unknown:
            raise ValueError(f"unknown annotation keys: {sorted(unknown)}")
        tr = obj.get("transform")
        lines = [[(float(x), float(y)) for x, y in line] for line in obj.get("polylines") or []]
        return cls(lines, tuple(float(t) for t in tr) if tr is not None else None)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def pixel_polylines(self):
        """Vertices as float ``(col, row)`` arrays, transform applied."""
        out = []
        for line in self.polylines:
            v = np.asarray(line, dtype=np.float64)
            if self.transform is not None:
                a, b, c, d, e, f = self.transform
                v = np.stack([a * v[:, 0] + b * v[:, 1] + c, d * v[:, 0] + e * v[:, 1] + f], axis=1)
            out.append(v)
        return out


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def line_pixels(r0, c0, r1, c1, height=None, width=None):
    """8-connected digital segment between two integer pixels.

    Endpoints are put in a canonical order first so a segment and its reverse
    produce the same pixels. With ``height``/``width`` only in-bounds pixels
    are generated.
    """
    if (r1, c1) < (r0, c0):
        r0, c0, r1, c1 = r1, c1, r0, c0
    dr, dc = r1 - r0, c1 - c0
    n = max(abs(dr), abs(dc))
    if n == 0:
        rows, cols = np.array([r0]), np.array([c0])
    else:
        if abs(dc) >= abs(dr):
            major0, dmaj, lim = c0, dc, width
        else:
            major0, dmaj, lim = r0, dr, height
        sgn = 1 if dmaj > 0 else -1
        lo, hi = 0, n
        if lim is not None:
            # restrict i so the major coordinate stays inside [0, lim)
            a, b = (0 - major0) * sgn, (lim - 1 - major0) * sgn
            lo, hi = max(lo, min(a, b)), min(hi, max(a, b))
        i = np.arange(lo, hi + 1, dtype=np.int64)
        # minor offset = floor(i * d / n + 1/2), exact in integers
        minor_r = r0 + (2 * i * dr + n) // (2 * n)
        minor_c = c0 + (2 * i * dc + n) // (2 * n)
        rows, cols = minor_r, minor_c
    if height is not None:
        keep = (rows >= 0) & (rows < height) & (cols >= 0) & (cols < width)
        rows, cols = rows[keep], cols[keep]
    return rows, cols


def draw_polyline(mask, vertices_rc):
    """Draw integer ``(row, col)`` vertices onto ``mask`` in place."""
    h, w = mask.shape
    for (r0, c0), (r1, c1) in zip(vertices_rc[:-1], vertices_rc[1:]):
        rr, cc = line_pixels(int(r0), int(c0), int(r1), int(c1), h, w)
        mask[rr, cc] = True
    return mask


def rasterize_polylines(ann, height, width):
    if height <= 0 or width <= 0:
        raise ValueError("raster dimensions must be positive")
    mask = np.zeros((height, width), dtype=bool)
    for v in ann.pixel_polylines():
        cols, rows = round_half_away(v[:, 0]), round_half_away(v[:, 1])
        draw_polyline(mask, list(zip(rows.tolist(), cols.tolist())))
    return mask


def tile_and_filter(image, label, tile, min_fg=1):
    """Row-major ``tile`` x ``tile`` patches, dropping those whose label has
    fewer than ``min_fg`` foreground pixels."""
    image, label = np.asarray(image), np.asarray(label)
    h, w = label.shape
    if image.shape[:2] != (h, w):
        raise ValueError(f"image {image.shape[:2]} and label {(h, w)} differ in size")
    if tile <= 0 or h % tile or w % tile:
        raise ValueError(f"tile size {tile} does not divide {h}x{w}")
    out = []
    for r in range(0, h, tile):
        for c in range(0, w, tile):
            lab = label[r:r + tile, c:c + tile]
            if np.count_nonzero(lab) >= min_fg:
                out.append((image[r:r + tile, c:c + tile], lab))
    return out


def stitch(patches, height, width):
    """Inverse of unfiltered tiling (``min_fg=0``)."""
    t = patches[0].shape[0]
    rows = [np.concatenate(patches[i:i + width // t], axis=1)
            for i in range(0, len(patches), width // t)]
    out = np.concatenate(rows, axis=0)
    if out.shape[:2] != (height, width):
        raise ValueError("patch count does not match the target size")
    return out
