import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cploss import losses as L
from cploss.morphology import edt
from oracles import finite_difference, max_rel_error


def _random_case(rng, n=16):
    p = rng.uniform(0.05, 0.95, (n, n))
    g = np.zeros((n, n), bool)
    r = int(rng.integers(2, n - 2))
    g[r, :] = True
    g[:, int(rng.integers(2, n - 2))] |= rng.random(n) < 0.7
    return p, g


# ---- weight maps -----------------------------------------------------------

def test_weights_without_failures():
    g = np.zeros((8, 8), bool)
    g[3, :] = True
    p = np.where(g, 0.9, 0.3)  # thresholds to exactly the GT line
    w = L.cp_weights(p, g, sigma=100, delta=1)
    off = ~g
    assert not w.terms.skel_fg.any() and not w.terms.skel_fp.any()
    assert np.allclose(w.u[off], 0.49, atol=1e-12)
    assert np.allclose(w.v[off], 0.09, atol=1e-12)
    assert np.allclose(w.beta[off], 0.2125, atol=1e-12)


def test_weights_on_failed_skeletons():
    g = np.zeros((9, 9), bool)
    g[4, :] = True
    p = np.zeros((9, 9))
    p[0, 0] = 0.9  # a ghost far from GT; GT itself unpredicted
    w = L.cp_weights(p, g, sigma=100, delta=1)
    assert w.terms.skel_fg[4, 4] and w.terms.skel_fp[0, 0]
    assert w.u[4, 4] == pytest.approx(4.0, abs=1e-12)
    assert w.v[0, 0] == pytest.approx(3.61, abs=1e-12)


def test_weight_formula_at_distance_sigma():
    terms = L.DistanceTerms(np.full((1, 1), math.exp(-100 / 100)), np.zeros((1, 1)),
                            np.zeros((1, 1), bool), np.zeros((1, 1), bool))
    w = L.weights_from_terms(np.full((1, 1), 0.5), terms)
    assert w.u[0, 0] == pytest.approx((1 + math.exp(-1) - 0.5) ** 2)
    assert w.u[0, 0] == pytest.approx(0.753215, abs=1e-6)


def test_weight_bounds(rng):
    for _ in range(10):
        p, g = _random_case(rng)
        w = L.cp_weights(p, g, sigma=4.0, delta=2.0)
        assert np.all(w.u >= 0) and np.all(w.u <= 4)
        assert np.all((w.beta >= 0.125) & (w.beta <= 0.5))


def test_weights_non_increasing_in_distance(rng):
    p = rng.random((8, 8))
    d_near = rng.uniform(0, 50, (8, 8))
    d_far = d_near + rng.uniform(0, 50, (8, 8))
    blank = np.zeros((8, 8), bool)

    def weights(d_fg, d_u):
        terms = L.DistanceTerms(np.exp(-d_fg / 10), np.exp(-d_u / 10), blank, blank)
        return L.weights_from_terms(p, terms)

    near, far = weights(d_near, d_near), weights(d_far, d_far)
    assert np.all(far.u <= near.u) and np.all(far.v <= near.v) and np.all(far.beta <= near.beta)


def test_cp_weights_errors():
    with pytest.raises(ValueError):
        L.cp_weights(np.zeros((3, 3)), np.zeros((3, 4), bool))
    with pytest.raises(ValueError):
        L.cp_weights(np.zeros((3, 3)), np.zeros((3, 3), bool), sigma=0)


# ---- loss values -------------------------------------------------------------

def test_weighted_ce_values():
    one = np.ones((1, 1), bool)
    half = np.full((1, 1), 0.5)
    assert L.weighted_ce(half, one, 1, 1).value == pytest.approx(0.693147, abs=1e-6)
    assert L.weighted_ce(half, one, 4, 1).value == pytest.approx(2.772589, abs=1e-6)


def test_weighted_dice_values(line9):
    p = line9.astype(float)
    assert L.weighted_dice(p, line9, 1.0).value == pytest.approx(0.0, abs=1e-8)
    assert L.weighted_dice(np.zeros((9, 9)), line9, 1.0).value == 1.0


def test_focal_value():
    r = L.baseline_loss("focal", np.full((1, 1), 0.9), np.ones((1, 1), bool))
    assert r.value == pytest.approx(-0.01 * math.log(0.9), rel=1e-9)
    assert r.value == pytest.approx(0.0010536, abs=1e-7)


def test_balance_ce_weights():
    g = np.zeros((2, 2), bool)
    g[0, 0] = True
    p = np.full((2, 2), 0.5)
    r = L.baseline_loss("balance_ce", p, g)
    assert r.value == pytest.approx(0.75 * math.log(2) + 3 * 0.25 * math.log(2))


def test_unknown_kind():
    with pytest.raises(ValueError):
        L.baseline_loss("hinge", np.zeros((2, 2)), np.zeros((2, 2), bool))
    with pytest.raises(ValueError):
        L.compute_loss("cp_plus", np.zeros((2, 2)), np.zeros((2, 2), bool))


def test_cp_perfect_prediction(line9):
    p = np.where(line9, 1 - 1e-7, 1e-7)
    w = L.cp_weights(p, line9)
    assert not w.terms.skel_fg.any() and not w.terms.skel_fp.any()
    r = L.cp_loss(p, line9)
    # CE ~ 0, Dice residual from beta ~ 1/8 on the line
    assert r.value == pytest.approx(0.7538461565, abs=1e-8)
    assert r.value / line9.size < 0.01


def test_cp_no_weights_is_bce_plus_dice(rng):
    p, g = _random_case(rng)
    r = L.compute_loss("cp_no_weights", p, g)
    ref = L.baseline_loss("bce", p, g).value + L.baseline_loss("dice", p, g).value
    assert r.value == pytest.approx(ref, rel=1e-12)


def test_cp_ablation_terms(rng):
    p, g = _random_case(rng)
    w = L.cp_weights(p, g)
    full = L.cp_loss(p, g, weights=w).value
    ce = L.compute_loss("cp_no_dice", p, g, weights=w).value
    dice = L.compute_loss("cp_no_ce", p, g, weights=w).value
    assert full == pytest.approx(ce + dice, rel=1e-12)
    with pytest.raises(ValueError):
        L.cp_loss(p, g, ce=False, dice=False)


# ---- gradients -------------------------------------------------------------

def _fd_check(fun, p, tol=1e-4):
    r = fun(p)
    num = finite_difference(lambda x: fun(x).value, p)
    assert max_rel_error(r.grad, num) < tol


@pytest.mark.parametrize("kind", L.BASELINES)
def test_baseline_gradients(kind, rng):
    for _ in range(3):
        p, g = _random_case(rng, 8)
        _fd_check(lambda x: L.baseline_loss(kind, x, g), p)


def test_weighted_gradients(rng):
    for _ in range(3):
        p, g = _random_case(rng, 8)
        u, v, beta = rng.uniform(0, 4, (3, 8, 8))
        _fd_check(lambda x: L.weighted_ce(x, g, u, v), p)
        _fd_check(lambda x: L.weighted_dice(x, g, beta / 8), p)


@pytest.mark.parametrize("kind", L.CP_VARIANTS)
def test_cp_gradient_frozen_weights(kind, rng):
    p, g = _random_case(rng, 8)
    w = L.cp_weights(p, g, sigma=5.0, delta=1.0)
    _fd_check(lambda x: L.compute_loss(kind, x, g, weights=w), p)


def test_ce_gradient_zero_where_clamped():
    g = np.array([[True, False]])
    r = L.weighted_ce(np.array([[0.0, 1.0]]), g, 1, 1)
    assert r.grad.tolist() == [[0.0, 0.0]]
    assert np.isfinite(r.value)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(0, 1)), arrays(bool, (6, 6)))
def test_losses_finite_and_signed(p, g):
    for kind in L.LOSS_KINDS:
        if kind in L.CP_VARIANTS and not g.any():
            continue
        r = L.compute_loss(kind, p, g)
        assert np.isfinite(r.value) and np.all(np.isfinite(r.grad))
    w = L.cp_weights(p, g)
    ce = L.weighted_ce(p, g, w.u, w.v)
    assert np.all(ce.grad[g] <= 0) and np.all(ce.grad[~g] >= 0)


@settings(max_examples=40, deadline=None)
@given(arrays(bool, (6, 6)), arrays(bool, (6, 6)))
def test_binary_dice_in_unit_interval(p, g):
    v = L.weighted_dice(p.astype(float), g, 1.0).value
    assert -1e-9 <= v <= 1.0
