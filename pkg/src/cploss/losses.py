"""Connectivity-preserving loss, its weight maps, and baseline losses.

Every loss returns a :class:`LossResult` holding the scalar value and the
analytic gradient with respect to the per-pixel probabilities. Weight maps
are treated as constants when differentiating.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import as_mask, check_same_shape
from .morphology import edt, failed_skeletons, gt_skeleton, skeletonize

EPS = 1e-7
DICE_SMOOTH = 1e-7

BASELINES = ("bce", "focal", "balance_ce", "distance_ce", "dice")
CP_VARIANTS = ("cp", "cp_no_ce", "cp_no_dice", "cp_no_weights")
LOSS_KINDS = BASELINES + CP_VARIANTS


@dataclass
class LossResult:
    value: float
    grad: np.ndarray


@dataclass
class DistanceTerms:
    """Skeleton-derived part of the weights, ``exp(-d / sigma)`` with ``exp(-inf) = 0``."""
    near_fg: np.ndarray  # w.r.t. failed-retrieved GT skeleton
    near_union: np.ndarray  # w.r.t. failed GT skeleton plus ghost skeleton
    skel_fg: np.ndarray
    skel_fp: np.ndarray


@dataclass
class WeightMaps:
    u: np.ndarray
    v: np.ndarray
    beta: np.ndarray
    sigma: float
    delta: float
    terms: Optional[DistanceTerms] = None


def _prep(prob, gt):
    p = np.asarray(prob, dtype=np.float64)
    g = as_mask(gt).astype(np.float64)
    check_same_shape(p, g)
    return p, g


def distance_terms(prob, gt, sigma=100.0, delta=3.0, tau_bin=0.5):
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    prob = np.asarray(prob)
    gt = as_mask(gt)
    check_same_shape(prob, gt)
    skel_p = skeletonize(prob > tau_bin)
    skel_fg, skel_fp = failed_skeletons(skel_p, gt_skeleton(gt), delta)
    near_fg = np.exp(-edt(skel_fg) / sigma)
    near_union = np.exp(-edt(skel_fg | skel_fp) / sigma)
    return DistanceTerms(near_fg, near_union, skel_fg, skel_fp)


def weights_from_terms(prob, terms, sigma=100.0, delta=3.0):
    p = np.asarray(prob, dtype=np.float64)
    u = (1.0 + terms.near_fg - p) ** 2
    v = (terms.near_union + p) ** 2
    beta = 0.25 * (1.0 + terms.near_union - p / 2.0)
    return WeightMaps(u, v, beta, sigma, delta, terms)


def cp_weights(prob, gt, sigma=100.0, delta=3.0, tau_bin=0.5):
    """Per-pixel weights ``u`` (foreground CE), ``v`` (background CE) and
    ``beta`` (Dice) from the current prediction."""
    terms = distance_terms(prob, gt, sigma, delta, tau_bin)
    return weights_from_terms(prob, terms, sigma, delta)


def _clamp(p, eps):
    ph = np.clip(p, eps, 1.0 - eps)
    active = (p >= eps) & (p <= 1.0 - eps)
    return ph, active


def weighted_ce(prob, gt, u, v, eps=EPS):
    p, g = _prep(prob, gt)
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), p.shape)
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), p.shape)
    ph, active = _clamp(p, eps)
    value = np.sum(-u * g * np.log(ph) - v * (1.0 - g) * np.log1p(-ph))
    grad = np.where(active, -u * g / ph + v * (1.0 - g) / (1.0 - ph), 0.0)
    return LossResult(float(value), grad)


def weighted_dice(prob, gt, beta, smooth=DICE_SMOOTH):
    p, g = _prep(prob, gt)
    beta = np.broadcast_to(np.asarray(beta, dtype=np.float64), p.shape)
    num = np.sum(beta * p * g)
    den = np.sum((beta * p) ** 2) + np.sum(g * g) + smooth
    value = 1.0 - 2.0 * num / den
    grad = -2.0 * (beta * g * den - 2.0 * beta ** 2 * p * num) / den ** 2
    return LossResult(float(value), grad)


def cp_loss(prob, gt, sigma=100.0, delta=3.0, tau_bin=0.5, eps=EPS, smooth=DICE_SMOOTH,
            ce=True, dice=True, use_weights=True, weights=None):
    """CP-loss = weighted CE + weighted Dice.

    ``ce`` / ``dice`` switch the two terms off for ablations; with
    ``use_weights=False`` the weights are ``u = v = beta = 1``. Passing
    precomputed ``weights`` freezes them (no skeletonization is done).
    """
    if not (ce or dice):
        raise ValueError("at least one of the CE and Dice terms must be enabled")
    p, g = _prep(prob, gt)
    if not use_weights:
        u = v = beta = 1.0
    else:
        if weights is None:
            weights = cp_weights(p, gt, sigma, delta, tau_bin)
        u, v, beta = weights.u, weights.v, weights.beta
    value = 0.0
    grad = np.zeros_like(p)
    if ce:
        r = weighted_ce(p, gt, u, v, eps)
        value += r.value
        grad += r.grad
    if dice:
        r = weighted_dice(p, gt, beta, smooth)
        value += r.value
        grad += r.grad
    return LossResult(value, grad)


def _focal(p, g, gamma, eps):
    ph, active = _clamp(p, eps)
    lp, lq = np.log(ph), np.log1p(-ph)
    q = 1.0 - ph
    value = np.sum(-g * q ** gamma * lp - (1.0 - g) * ph ** gamma * lq)
    d_fg = gamma * q ** (gamma - 1) * lp - q ** gamma / ph
    d_bg = -gamma * ph ** (gamma - 1) * lq + ph ** gamma / q
    grad = np.where(active, g * d_fg + (1.0 - g) * d_bg, 0.0)
    return LossResult(float(value), grad)


def baseline_loss(kind, prob, gt, gamma=2.0, sigma=100.0, eps=EPS, smooth=DICE_SMOOTH):
    p, g = _prep(prob, gt)
    if kind == "bce":
        return weighted_ce(p, gt, 1.0, 1.0, eps)
    if kind == "focal":
        return _focal(p, g, gamma, eps)
    if kind == "balance_ce":
        n_fg = g.sum()
        n = g.size
        return weighted_ce(p, gt, (n - n_fg) / n, n_fg / n, eps)
    if kind == "distance_ce":
        w = 1.0 + np.exp(-edt(gt_skeleton(gt)) / sigma)
        return weighted_ce(p, gt, w, w, eps)
    if kind == "dice":
        return weighted_dice(p, gt, 1.0, smooth)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {BASELINES}")


def compute_loss(kind, prob, gt, sigma=100.0, delta=3.0, tau_bin=0.5, gamma=2.0,
                 eps=EPS, smooth=DICE_SMOOTH, weights=None):
    """Dispatch on ``kind`` (one of ``LOSS_KINDS``)."""
    if kind in BASELINES:
        return baseline_loss(kind, prob, gt, gamma=gamma, sigma=sigma, eps=eps, smooth=smooth)
    if kind not in CP_VARIANTS:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    return cp_loss(prob, gt, sigma=sigma, delta=delta, tau_bin=tau_bin, eps=eps, smooth=smooth,
                   ce=kind != "cp_no_ce", dice=kind != "cp_no_dice",
                   use_weights=kind != "cp_no_weights", weights=weights)
