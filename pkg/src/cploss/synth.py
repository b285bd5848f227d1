"""Seeded synthetic curb scenes and skeleton corruptions."""
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataset import draw_polyline, line_pixels, round_half_away
from .grid import as_mask, save_gray, save_mask
from .morphology import connected_components, edt, edt_sq, has_block


@dataclass
class SceneConfig:
    size: int = 128
    curve_count: tuple = (1, 3)
    occluder_count: tuple = (2, 5)
    occluder_radius: tuple = (3, 6)
    noise_std: float = 0.04
    seed: int = 0

    def __post_init__(self):
        self.curve_count = tuple(self.curve_count)
        self.occluder_count = tuple(self.occluder_count)
        self.occluder_radius = tuple(self.occluder_radius)
        if self.size < 64:
            raise ValueError("scene size must be at least 64")
        for name in ("curve_count", "occluder_count", "occluder_radius"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} range {lo}..{hi} is empty or negative")
        if self.curve_count[1] < 1:
            raise ValueError("curve_count must allow at least one curve")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    def with_seed(self, seed):
        d = asdict(self)
        d["seed"] = int(seed)
        return SceneConfig(**d)


RIDGE_SIGMA = 1.0  # ~4 px visible profile
RIDGE_AMP = 0.35
MIN_CURVE_PIXELS = 24
CURVE_SEPARATION = 8.0


def _random_curve(rng, size):
    """Quadratic Bezier with endpoints near two different image borders."""
    def border_point():
        side = rng.integers(4)
        t = rng.uniform(0.1, 0.9) * (size - 1)
        m = rng.uniform(-0.15, 0.1) * size
        return [(t, m), (t, size - 1 - m), (m, t), (size - 1 - m, t)][side]

    p0, p2 = np.array(border_point()), np.array(border_point())
    if np.hypot(*(p2 - p0)) < size * 0.4:
        return None
    mid = (p0 + p2) / 2
    normal = np.array([-(p2 - p0)[1], (p2 - p0)[0]])
    normal /= np.linalg.norm(normal)
    p1 = mid + normal * rng.uniform(-0.3, 0.3) * size
    t = np.linspace(0.0, 1.0, 9)[:, None]
    pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2
    pts = round_half_away(pts)
    mask = np.zeros((size, size), dtype=bool)
    draw_polyline(mask, [tuple(p) for p in pts.tolist()])
    return mask


def _texture(rng, size):
    base = gaussian_filter(rng.standard_normal((size, size)), 4.0)
    base *= 0.06 / (base.std() + 1e-12)
    fine = gaussian_filter(rng.standard_normal((size, size)), 1.0)
    fine *= 0.03 / (fine.std() + 1e-12)
    rr, cc = np.mgrid[0:size, 0:size] / size
    a, b = rng.uniform(-0.08, 0.08, 2)
    return 0.35 + base + fine + a * rr + b * cc


def gen_scene(cfg):
    """Return ``(image, gt)``: a float32 grayscale scene in ``[0, 1]`` and a
    one-pixel-wide boolean curb mask. Occluders hide ridges but never touch
    ``gt``."""
    rng = np.random.default_rng(cfg.seed)
    size = cfg.size
    n_curves = int(rng.integers(cfg.curve_count[0], cfg.curve_count[1] + 1))
    gt = np.zeros((size, size), dtype=bool)
    placed = 0
    for _ in range(200):
        if placed >= n_curves:
            break
        curve = _random_curve(rng, size)
        if curve is None or curve.sum() < MIN_CURVE_PIXELS:
            continue
        if placed and np.min(edt(gt)[curve]) < CURVE_SEPARATION:
            continue
        if has_block(curve) or connected_components(curve).count != 1:
            continue
        gt |= curve
        placed += 1
    if placed == 0:
        # fall back to a straight line so gt is never empty
        r = int(rng.integers(size // 4, 3 * size // 4))
        gt[r, :] = True

    image = _texture(rng, size)
    ridge = RIDGE_AMP * rng.uniform(0.7, 1.0) * np.exp(-edt_sq(gt) / (2 * RIDGE_SIGMA ** 2))
    image = image + ridge

    n_occ = int(rng.integers(cfg.occluder_count[0], cfg.occluder_count[1] + 1))
    pts = np.argwhere(gt)
    rr, cc = np.mgrid[0:size, 0:size]
    canopy = gaussian_filter(rng.standard_normal((size, size)), 1.5)
    canopy = 0.25 + 0.05 * canopy / (canopy.std() + 1e-12)
    for _ in range(n_occ):
        r0, c0 = pts[rng.integers(len(pts))] + rng.integers(-2, 3, 2)
        rad = rng.uniform(cfg.occluder_radius[0], cfg.occluder_radius[1])
        disk = (rr - r0) ** 2 + (cc - c0) ** 2 <= rad ** 2
        image[disk] = canopy[disk]

    if cfg.noise_std > 0:
        image = image + rng.normal(0.0, cfg.noise_std, image.shape)
    return np.clip(image, 0.0, 1.0).astype(np.float32), gt


def _walk(skel, start, length, rng):
    """Up to ``length`` consecutive skeleton pixels starting at ``start``."""
    h, w = skel.shape
    path = [start]
    seen = {start}
    while len(path) < length:
        r, c = path[-1]
        nxt = [(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
               if (dr or dc) and 0 <= r + dr < h and 0 <= c + dc < w
               and skel[r + dr, c + dc] and (r + dr, c + dc) not in seen]
        if not nxt:
            break
        # prefer 4-neighbours so the walk follows the curve, not a staircase corner
        nxt.sort(key=lambda q: abs(q[0] - r) + abs(q[1] - c))
        q = nxt[0]
        path.append(q)
        seen.add(q)
    return path


def corrupt_skeleton(skel, gap_count=0, gap_len=5, ghost_count=0, seed=0,
                     delta=3.0, ghost_len=6):
    """Cut ``gap_count`` runs of ``gap_len`` pixels from ``skel`` and add
    ``ghost_count`` straight strokes at least ``2 * delta`` away from it."""
    skel = as_mask(skel)
    if not skel.any():
        raise ValueError("cannot corrupt an empty skeleton")
    if gap_count * (gap_len + 2) > skel.sum():
        raise ValueError("skeleton too small for the requested gaps")
    rng = np.random.default_rng(seed)
    out = skel.copy()
    h, w = skel.shape
    for g in range(gap_count):
        for _ in range(200):
            pts = np.argwhere(out)
            start = tuple(int(x) for x in pts[rng.integers(len(pts))])
            path = _walk(out, start, gap_len, rng)
            if len(path) == gap_len:
                break
        else:
            raise ValueError(f"could not place gap {g} of length {gap_len}")
        for r, c in path:
            out[r, c] = False

    far = edt_sq(skel) >= (2 * delta) ** 2
    for k in range(ghost_count):
        for _ in range(500):
            r0, c0 = int(rng.integers(h)), int(rng.integers(w))
            ang = rng.uniform(0, np.pi)
            r1 = r0 + int(round((ghost_len - 1) * np.sin(ang)))
            c1 = c0 + int(round((ghost_len - 1) * np.cos(ang)))
            rr, cc = line_pixels(r0, c0, r1, c1)
            if rr.min() < 0 or cc.min() < 0 or rr.max() >= h or cc.max() >= w:
                continue
            if far[rr, cc].all():
                out[rr, cc] = True
                break
        else:
            raise ValueError(f"could not place ghost stroke {k}")
    return out


def write_dataset(cfg, out_dir, count):
    """Write ``count`` scenes (image/gt PNG pairs) and ``manifest.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = []
    for i in range(count):
        image, gt = gen_scene(cfg.with_seed(cfg.seed + i))
        img_name, gt_name = f"scene_{i:05d}_image.png", f"scene_{i:05d}_gt.png"
        save_gray(image, out_dir / img_name)
        save_mask(gt, out_dir / gt_name)
        pairs.append({"image": img_name, "gt": gt_name, "seed": cfg.seed + i})
    manifest = {"config": asdict(cfg), "pairs": pairs}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
