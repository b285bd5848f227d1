"""Skeleton-based precision/recall/F1, the SCM connectivity score, and
threshold sweeps."""
import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .grid import as_mask, check_same_shape, threshold
from .morphology import connected_components, edt_sq, failed_skeletons, gt_skeleton, skeletonize

SMOOTH = 1e-7


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    scm: float
    delta: float
    tau: float
    n_skel_p: int
    n_skel_g: int
    n_true_p: int
    n_true_g: int

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _check(skel_p, skel_g):
    skel_p, skel_g = as_mask(skel_p), as_mask(skel_g)
    check_same_shape(skel_p, skel_g)
    if not skel_g.any():
        raise ValueError("ground-truth skeleton is empty")
    return skel_p, skel_g


def _prf_counts(skel_p, skel_g, delta):
    skel_fg, skel_fp = failed_skeletons(skel_p, skel_g, delta)
    n_p, n_g = int(skel_p.sum()), int(skel_g.sum())
    n_tp = n_p - int(skel_fp.sum())
    n_tg = n_g - int(skel_fg.sum())
    return n_p, n_g, n_tp, n_tg


def _f1(p, r, s):
    # the smoothed formula alone would give s / s = 1 when nothing matches
    if p + r == 0:
        return 0.0
    return (2 * p * r + s) / (p + r + s)


def skeleton_prf(skel_p, skel_g, delta=3.0, s=SMOOTH):
    """Return ``(precision, recall, f1)`` of a predicted skeleton against GT."""
    skel_p, skel_g = _check(skel_p, skel_g)
    n_p, n_g, n_tp, n_tg = _prf_counts(skel_p, skel_g, delta)
    p = n_tp / n_p if n_p else 0.0
    r = n_tg / n_g
    return p, r, _f1(p, r, s)


def scm(skel_p, skel_g, delta=3.0):
    """Skeleton connectivity measure.

    Each 8-connected GT instance contributes its share of retrieved GT pixels,
    divided by the number of separate predicted segments lying within
    ``delta`` of it (zero if there are none).
    """
    skel_p, skel_g = _check(skel_p, skel_g)
    d2 = float(delta) ** 2
    retrieved = skel_g & (edt_sq(skel_p) <= d2)
    inst = connected_components(skel_g, 8)
    total = int(skel_g.sum())
    score = 0.0
    for i in range(1, inst.count + 1):
        g_i = inst.labels == i
        tp_i = skel_p & (edt_sq(g_i) < d2)
        n_i = connected_components(tp_i, 8).count
        if n_i:
            score += int((retrieved & g_i).sum()) / total / n_i
    return score


def evaluate(skel_p, skel_g, delta=3.0, tau=float("nan"), s=SMOOTH):
    skel_p, skel_g = _check(skel_p, skel_g)
    n_p, n_g, n_tp, n_tg = _prf_counts(skel_p, skel_g, delta)
    p = n_tp / n_p if n_p else 0.0
    r = n_tg / n_g
    return EvalReport(p, r, _f1(p, r, s), scm(skel_p, skel_g, delta), float(delta), float(tau),
                      n_p, n_g, n_tp, n_tg)


def postprocess(prob, tau):
    """Threshold then skeletonize a probability map."""
    return skeletonize(threshold(prob, tau))


def evaluate_prob(prob, gt, tau=0.5, delta=3.0):
    return evaluate(postprocess(prob, tau), gt_skeleton(gt), delta, tau)


def sweep_curves(prob, gt, taus, delta=3.0):
    """Evaluate ``prob`` at every threshold in ``taus`` (strictly increasing, in (0, 1))."""
    taus = [float(t) for t in taus]
    if any(not 0 < t < 1 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau grid must be strictly increasing inside (0, 1)")
    prob = np.asarray(prob)
    skel_g = gt_skeleton(gt)
    check_same_shape(prob, skel_g)
    return [evaluate(postprocess(prob, t), skel_g, delta, t) for t in taus]


CURVE_FIELDS = ("tau", "precision", "recall", "f1", "scm")


def curve_rows(reports):
    return np.array([[getattr(r, f) for f in CURVE_FIELDS] for r in reports], dtype=np.float64)


def aggregate(tables):
    """Unweighted per-tau mean of several ``curve_rows`` tables."""
    tables = [np.asarray(t) for t in tables]
    if not tables:
        raise ValueError("nothing to aggregate")
    for t in tables[1:]:
        if not np.array_equal(t[:, 0], tables[0][:, 0]):
            raise ValueError("tables use different tau grids")
    return np.mean(np.stack(tables), axis=0)


def write_curves_csv(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for row in np.asarray(table):
            w.writerow([f"{x:.6f}" for x in row])


def read_curves_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != CURVE_FIELDS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float64)
