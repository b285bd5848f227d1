"""Raster kernels with a numba implementation and a vectorised numpy twin.

Each ``*_nb`` / ``*_np`` pair computes bit-identical output. The public
dispatchers at the bottom pick one according to ``_accel.USE_NUMBA``;
benchmarks call both flavours directly.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# Exact squared Euclidean distance transform
# --------------------------------------------------------------------------


@njit
def edt_sq_nb(src):
    h, w = src.shape
    inf = np.inf
    g = np.empty((h, w), dtype=np.float64)
    for c in range(w):
        d = inf
        for r in range(h):
            if src[r, c]:
                d = 0.0
            elif d < inf:
                d += 1.0
            g[r, c] = d
        d = inf
        for r in range(h - 1, -1, -1):
            if src[r, c]:
                d = 0.0
            elif d < inf:
                d += 1.0
            if d < g[r, c]:
                g[r, c] = d

    out = np.empty((h, w), dtype=np.float64)
    f = np.empty(w, dtype=np.float64)
    v = np.empty(w, dtype=np.int64)
    z = np.empty(w + 1, dtype=np.float64)
    for r in range(h):
        for q in range(w):
            f[q] = g[r, q] * g[r, q]
        # lower envelope of the parabolas rooted at finite entries
        k = -1
        for q in range(w):
            fq = f[q]
            if fq == inf:
                continue
            if k < 0:
                k = 0
                v[0] = q
                z[0] = -inf
                z[1] = inf
                continue
            while True:
                p = v[k]
                s = ((fq + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
                if s <= z[k]:
                    k -= 1
                else:
                    break
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = inf
        if k < 0:
            for q in range(w):
                out[r, q] = inf
            continue
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            p = v[k]
            out[r, q] = (q - p) * (q - p) + f[p]
    return out


def _minplus_axis0(f):
    # out[i, j] = min_k (i - k)^2 + f[k, j], chunked over i to bound memory
    n = f.shape[0]
    idx = np.arange(n, dtype=np.float64)
    out = np.empty_like(f)
    step = max(1, int(4_000_000 // max(1, n * f.shape[1])))
    for i0 in range(0, n, step):
        rows = idx[i0:i0 + step]
        cost = (rows[:, None] - idx[None, :]) ** 2
        out[i0:i0 + step] = np.min(cost[:, :, None] + f[None, :, :], axis=1)
    return out


def edt_sq_np(src):
    f = np.where(src, 0.0, np.inf)
    g = _minplus_axis0(f)
    return _minplus_axis0(g.T.copy()).T.copy()


# --------------------------------------------------------------------------
# Topology-preserving thinning
# --------------------------------------------------------------------------

# Neighbour bit order: N, NE, E, SE, S, SW, W, NW.
_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _build_deletable_lut():
    lut = np.zeros(256, dtype=np.bool_)
    for code in range(256):
        nb = np.zeros((3, 3), dtype=bool)
        for bit, (dr, dc) in enumerate(_OFFSETS):
            nb[1 + dr, 1 + dc] = bool(code >> bit & 1)
        if nb.sum() < 2:
            continue  # isolated pixels and line ends are kept
        fg = [(r, c) for r in range(3) for c in range(3) if nb[r, c]]
        bg = [(r, c) for r in range(3) for c in range(3)
              if (r, c) != (1, 1) and not nb[r, c]]
        n_fg = _count_components(fg, eight=True)
        four_adj = {(0, 1), (1, 0), (1, 2), (2, 1)}
        n_bg = _count_components(bg, eight=False, must_touch=four_adj)
        lut[code] = n_fg == 1 and n_bg == 1
    return lut


def _count_components(cells, eight, must_touch=None):
    cells = set(cells)
    seen = set()
    count = 0
    for start in sorted(cells):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            r, c = stack.pop()
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if (dr, dc) == (0, 0) or (not eight and dr and dc):
                        continue
                    q = (r + dr, c + dc)
                    if q in cells and q not in comp:
                        comp.add(q)
                        stack.append(q)
        seen |= comp
        if must_touch is None or comp & must_touch:
            count += 1
    return count


DELETABLE = _build_deletable_lut()
_DIRS = (0, 4, 2, 6)  # N, S, E, W pass order (bit index of the facing neighbour)


@njit
def _code_at(img, r, c):
    h, w = img.shape
    code = 0
    if r > 0 and img[r - 1, c]:
        code |= 1
    if r > 0 and c + 1 < w and img[r - 1, c + 1]:
        code |= 2
    if c + 1 < w and img[r, c + 1]:
        code |= 4
    if r + 1 < h and c + 1 < w and img[r + 1, c + 1]:
        code |= 8
    if r + 1 < h and img[r + 1, c]:
        code |= 16
    if r + 1 < h and c > 0 and img[r + 1, c - 1]:
        code |= 32
    if c > 0 and img[r, c - 1]:
        code |= 64
    if r > 0 and c > 0 and img[r - 1, c - 1]:
        code |= 128
    return code


@njit
def thin_nb(mask, lut):
    img = mask.copy()
    h, w = img.shape
    cand = np.zeros((h, w), dtype=np.bool_)
    dirs = np.array([0, 4, 2, 6])
    changed = True
    while changed:
        changed = False
        for d in dirs:
            bit = 1 << d
            for r in range(h):
                for c in range(w):
                    cand[r, c] = img[r, c] and (_code_at(img, r, c) & bit) == 0
            for pr in range(2):
                for pc in range(2):
                    for r in range(pr, h, 2):
                        for c in range(pc, w, 2):
                            if cand[r, c] and img[r, c] and lut[_code_at(img, r, c)]:
                                img[r, c] = False
                                changed = True
    return img


def _codes_np(img):
    p = np.pad(img, 1)
    h, w = img.shape
    code = np.zeros((h, w), dtype=np.int64)
    for bit, (dr, dc) in enumerate(_OFFSETS):
        code |= p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w].astype(np.int64) << bit
    return code


def thin_np(mask, lut):
    img = mask.copy()
    h, w = img.shape
    rr, cc = np.indices((h, w))
    parity = [(rr % 2 == pr) & (cc % 2 == pc) for pr in range(2) for pc in range(2)]
    changed = True
    while changed:
        changed = False
        for d in _DIRS:
            cand = img & ((_codes_np(img) >> d) & 1 == 0)
            for par in parity:
                kill = cand & par & img & lut[_codes_np(img)]
                if kill.any():
                    img &= ~kill
                    changed = True
    return img


# --------------------------------------------------------------------------
# Connected-component labelling, raster-order ids
# --------------------------------------------------------------------------


@njit
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit
def label_nb(mask, eight):
    h, w = mask.shape
    parent = np.arange(h * w)
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            i = r * w + c
            for dr, dc in ((-1, -1), (-1, 0), (-1, 1), (0, -1)):
                if not eight and dr != 0 and dc != 0:
                    continue
                rr = r + dr
                cc = c + dc
                if rr < 0 or cc < 0 or cc >= w or not mask[rr, cc]:
                    continue
                a = _find(parent, i)
                b = _find(parent, rr * w + cc)
                if a < b:
                    parent[b] = a
                elif b < a:
                    parent[a] = b
    labels = np.zeros((h, w), dtype=np.int64)
    ids = np.zeros(h * w, dtype=np.int64)
    count = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                root = _find(parent, r * w + c)
                if ids[root] == 0:
                    count += 1
                    ids[root] = count
                labels[r, c] = ids[root]
    return labels, count


def label_np(mask, eight):
    h, w = mask.shape
    big = h * w + 1
    lab = np.where(mask, np.arange(1, h * w + 1).reshape(h, w), big)
    shifts = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if eight:
        shifts += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    while True:
        p = np.pad(lab, 1, constant_values=big)
        best = lab.copy()
        for dr, dc in shifts:
            np.minimum(best, p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w], out=best)
        best = np.where(mask, best, big)
        # pointer jumping: a label is the flat index (+1) of a member pixel
        flat = best.ravel()
        jumped = np.where(mask.ravel(), flat[np.minimum(flat, h * w) - 1], big)
        best = np.minimum(best, jumped.reshape(h, w))
        if np.array_equal(best, lab):
            break
        lab = best
    labels = np.zeros((h, w), dtype=np.int64)
    if not mask.any():
        return labels, 0
    roots = lab[mask]
    uniq, first, inv = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(1, len(uniq) + 1)
    labels[mask] = rank[inv]
    return labels, len(uniq)


# --------------------------------------------------------------------------
# Dispatch
# --------------------------------------------------------------------------


def edt_sq(src):
    src = np.ascontiguousarray(src, dtype=np.bool_)
    return edt_sq_nb(src) if USE_NUMBA else edt_sq_np(src)


def thin(mask):
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    return thin_nb(mask, DELETABLE) if USE_NUMBA else thin_np(mask, DELETABLE)


def label(mask, eight=True):
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if USE_NUMBA:
        return label_nb(mask, eight)
    return label_np(mask, eight)
