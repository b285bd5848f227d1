"""Slow reference implementations used only by the tests.

Nothing here imports the package's kernels: distances are all-pairs integer
searches and components come from an explicit flood fill.
"""
from collections import deque

import numpy as np


def brute_edt_sq(mask):
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    src = np.argwhere(mask)
    out = np.full((h, w), np.inf)
    if len(src) == 0:
        return out
    for r in range(h):
        for c in range(w):
            out[r, c] = int(np.min((src[:, 0] - r) ** 2 + (src[:, 1] - c) ** 2))
    return out


def flood_components(mask, eight=True):
    """List of components, each a set of (row, col), in raster order of first pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if eight:
        steps += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            comp = set()
            queue = deque([(r, c)])
            seen[r, c] = True
            while queue:
                y, x = queue.popleft()
                comp.add((y, x))
                for dy, dx in steps:
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                        seen[yy, xx] = True
                        queue.append((yy, xx))
            comps.append(comp)
    return comps


def _min_d2(p, pts):
    if not pts:
        return float("inf")
    return min((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 for q in pts)


def brute_counts(skel_p, skel_g, delta):
    P = [tuple(x) for x in np.argwhere(skel_p)]
    G = [tuple(x) for x in np.argwhere(skel_g)]
    d2 = delta * delta
    n_tp = sum(1 for x in P if _min_d2(x, G) <= d2)
    n_tg = sum(1 for x in G if _min_d2(x, P) <= d2)
    return len(P), len(G), n_tp, n_tg


def brute_prf(skel_p, skel_g, delta, s=1e-7):
    n_p, n_g, n_tp, n_tg = brute_counts(skel_p, skel_g, delta)
    p = n_tp / n_p if n_p else 0.0
    r = n_tg / n_g
    f1 = 0.0 if p + r == 0 else (2 * p * r + s) / (p + r + s)
    return p, r, f1


def brute_scm(skel_p, skel_g, delta):
    P = [tuple(x) for x in np.argwhere(skel_p)]
    G = [tuple(x) for x in np.argwhere(skel_g)]
    d2 = delta * delta
    total = len(G)
    score = 0.0
    for inst in flood_components(skel_g, eight=True):
        inst_pts = list(inst)
        tp = np.zeros(np.shape(skel_p), dtype=bool)
        for x in P:
            if _min_d2(x, inst_pts) < d2:
                tp[x] = True
        n_i = len(flood_components(tp, eight=True))
        tg = sum(1 for x in inst_pts if _min_d2(x, P) <= d2)
        if n_i:
            score += tg / total / n_i
    return score


def finite_difference(f, x, h=1e-4):
    """Central differences of scalar ``f`` at every entry of ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def max_rel_error(analytic, numeric, floor=1e-6):
    a, n = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))
