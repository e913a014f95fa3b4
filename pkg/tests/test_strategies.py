"""Acquisition strategies: random, uncertainty, k-center, HAL, CBAL, FScore."""

import numpy as np
import pytest

from allab.classifiers import decision_values, fit_logistic
from allab.strategies import (
    StrategyConfig,
    select_cbal,
    select_fscore,
    select_hal,
    select_kcenter_greedy,
    select_random,
    select_uncertainty,
)
from conftest import logistic_model, make_state, svm_model_with_values


def _logit(p):
    return float(np.log(p / (1.0 - p)))


def _binary_prob_state(pool_p1, annot_labels=(0, 1)):
    """State + unit-coefficient model whose class-1 pool probs are pool_p1."""
    annot_feats = [[0.0]] * len(annot_labels)
    pool_feats = [[_logit(p)] for p in pool_p1]
    feats = np.array(annot_feats + pool_feats)
    labels = np.array(list(annot_labels) + [0] * len(pool_p1))
    state = make_state(feats, labels, len(annot_labels))
    return state, logistic_model([1.0], 0.0)


# ------------------------------------------------------------------ random

def test_random_single_point_pool():
    state = make_state([[0.0], [1.0]], [0, 1], 1)
    assert select_random(state, np.random.default_rng(0)) == 0


def test_random_uniform_frequencies():
    state = make_state(np.zeros((5, 1)), [0, 1, 0, 1, 0], 1)
    rng = np.random.default_rng(1)
    draws = np.array([select_random(state, rng) for _ in range(100_000)])
    freqs = np.bincount(draws, minlength=4) / len(draws)
    np.testing.assert_allclose(freqs, 0.25, atol=0.01)


def test_random_deterministic_given_rng_state():
    state = make_state(np.zeros((10, 1)), [0, 1] * 5, 2)
    a = select_random(state, np.random.default_rng(42))
    b = select_random(state, np.random.default_rng(42))
    assert a == b


# ------------------------------------------------------------- uncertainty

def test_uncertainty_binary_variants_agree():
    # (0.9,0.1) vs (0.5,0.5): the maximally unsure point wins under all three.
    state, model = _binary_prob_state([0.1, 0.5])
    for variant in ("entropy", "margin", "least_confident"):
        assert select_uncertainty(state, model, variant) == 1


def test_uncertainty_margin_multiclass():
    # (0.4,0.35,0.25) has margin 0.05 < 0.2 of (0.5,0.3,0.2).
    probs = np.array([[0.4, 0.35, 0.25], [0.5, 0.3, 0.2]])
    # One-vs-rest scores z_c = logit(p_c) give normalized probs == p
    # because each row of p already sums to one.
    w = [[1.0], [0.0], [0.0]]
    b = [0.0, 0.0, 0.0]
    feats, labels, machines_w, machines_b = [], [], [], []
    # Build with 3 features so each machine reads its own column.
    pool = np.log(probs / (1 - probs))  # logits, one row per pool point
    annot = np.zeros((3, 3))
    feats = np.vstack([annot, pool])
    labels = np.array([0, 1, 2, 0, 0])
    state = make_state(feats, labels, 3)
    model = logistic_model(np.eye(3).tolist(), [0.0, 0.0, 0.0], n_classes=3)
    assert select_uncertainty(state, model, "margin") == 0
    assert select_uncertainty(state, model, "entropy") == 0


def test_uncertainty_entropy_ordering_matches_definition():
    pool_p1 = [0.05, 0.35, 0.65, 0.98]
    state, model = _binary_prob_state(pool_p1)
    ps = np.array(pool_p1)
    ent = -(ps * np.log(ps) + (1 - ps) * np.log(1 - ps))
    assert select_uncertainty(state, model, "entropy") == int(np.argmax(ent))


def test_uncertainty_unknown_variant_rejected():
    state, model = _binary_prob_state([0.3])
    with pytest.raises(ValueError):
        select_uncertainty(state, model, "softmax")


# ---------------------------------------------------------------- k-center

def test_kcenter_farthest_first():
    feats = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]])
    state = make_state(feats, [0, 1, 1], 1)  # annotated: origin
    assert select_kcenter_greedy(state) == 1  # pool position of (5,0)


def test_kcenter_never_picks_coincident_duplicate():
    feats = np.array([[0.0], [0.0], [0.7]])
    state = make_state(feats, [0, 0, 1], 1)
    assert select_kcenter_greedy(state) == 1


def test_kcenter_matches_exhaustive_min_max():
    rng = np.random.default_rng(7)
    for trial in range(20):
        feats = rng.normal(size=(50, 3))
        labels = rng.integers(0, 2, size=50)
        n_annot = int(rng.integers(1, 10))
        state = make_state(feats, labels, n_annot)
        # independent exhaustive oracle: farthest pool point from annotated
        d = np.linalg.norm(
            state.pool_features[:, None, :] - state.annotated_features[None],
            axis=-1,
        ).min(axis=1)
        assert select_kcenter_greedy(state) == int(np.argmax(d))


# --------------------------------------------------------------------- HAL

def test_hal_explore_never_matches_entropy_limit():
    state, model = _binary_prob_state([0.1, 0.45, 0.9])
    cfg = StrategyConfig("hal_uniform", p_explore=0.0)
    rng = np.random.default_rng(3)
    got = select_hal(state, model, "uniform", cfg, rng)
    assert got == select_uncertainty(state, model, "entropy")


def test_hal_uniform_full_explore_is_uniform():
    state, model = _binary_prob_state([0.1, 0.45, 0.9, 0.2])
    cfg = StrategyConfig("hal_uniform", p_explore=1.0)
    rng = np.random.default_rng(4)
    draws = np.array([select_hal(state, model, "uniform", cfg, rng)
                      for _ in range(100_000)])
    freqs = np.bincount(draws, minlength=4) / len(draws)
    np.testing.assert_allclose(freqs, 0.25, atol=0.01)


def test_hal_gaussian_weight_ratio():
    # One far pool point (d=20) vs three near ones (d=0), delta=10:
    # relative weight e^2 per near point -> frequency e^2/(e^2+3).
    feats = np.array([[0.0], [0.0], [0.0], [0.0], [20.0]])
    labels = np.array([0, 1, 0, 1, 1])
    state = make_state(feats, labels, 1)
    model = logistic_model([1.0], 0.0)
    cfg = StrategyConfig("hal_gaussian", p_explore=1.0, delta=10.0)
    rng = np.random.default_rng(5)
    draws = np.array([select_hal(state, model, "gaussian", cfg, rng)
                      for _ in range(50_000)])
    far_freq = float(np.mean(draws == 3))
    expect = np.e ** 2 / (np.e ** 2 + 3.0)
    assert abs(far_freq - expect) < 0.02


# -------------------------------------------------------------------- CBAL

def test_cbal_lambda_zero_equals_entropy():
    rng = np.random.default_rng(6)
    for trial in range(10):
        feats = rng.normal(size=(25, 2))
        labels = rng.integers(0, 2, size=25)
        labels[:2] = [0, 1]
        state = make_state(feats, labels, 5)
        model = fit_logistic(state.annotated_features, state.annotated_labels)
        cfg = StrategyConfig("cbal", lam=0.0)
        assert select_cbal(state, model, cfg) == \
            select_uncertainty(state, model, "entropy")


def test_cbal_prefers_deficit_class():
    # Annotated heavily class 0; two pool points with equal entropy, one
    # confidently class 1: the class-1-leaning point should win.
    state, model = _binary_prob_state([0.9, 0.1],
                                      annot_labels=(0,) * 9 + (1,))
    cfg = StrategyConfig("cbal", lam=5.0)
    assert select_cbal(state, model, cfg) == 0  # p1=0.9 point


def test_cbal_balanced_annotated_reduces_to_entropy():
    state, model = _binary_prob_state([0.2, 0.45, 0.8],
                                      annot_labels=(0, 1, 0, 1))
    cfg = StrategyConfig("cbal", lam=3.0)
    assert select_cbal(state, model, cfg) == \
        select_uncertainty(state, model, "entropy")


# ------------------------------------------------------------------ FScore

def test_fscore_smallest_absolute_decision_value():
    pts = np.array([[0.0], [1.0], [2.0]])
    model = svm_model_with_values(pts, [0.1, -0.05, 2.0])
    state = make_state(np.vstack([[[9.0]], pts]), [0, 1, 0, 1], 1)
    assert select_fscore(state, model) == 1


def test_fscore_margin_sv_loses_to_interior_point():
    pts = np.array([[0.0], [1.0]])
    model = svm_model_with_values(pts, [1.0, 0.4])
    state = make_state(np.vstack([[[9.0]], pts]), [0, 1, 0], 1)
    assert select_fscore(state, model) == 1


def test_fscore_multiclass_min_over_machines():
    # per-class |f| (2, 0.01, 3) beats (0.5, 0.5, 0.5).
    from allab.classifiers import ClassifierModel, _BinarySvm

    pts = np.array([[0.0], [1.0]])
    cols = np.array([[2.0, -0.01, 3.0], [0.5, 0.5, 0.5]])
    machines = [_BinarySvm(pts, cols[:, c], 0.0, 1e4, True) for c in range(3)]
    model = ClassifierModel("svm", 3, 1, machines)
    state = make_state(np.vstack([[[9.0]], [[8.0]], [[7.0]], pts]),
                       [0, 1, 2, 0, 0], 3)
    assert select_fscore(state, model) == 0


def test_fscore_matches_independent_argmin_on_fit_model():
    rng = np.random.default_rng(8)
    feats = np.vstack([rng.normal(size=(20, 2)) - 1.5,
                       rng.normal(size=(20, 2)) + 1.5])
    labels = np.repeat([0, 1], 20)
    order = rng.permutation(40)
    state = make_state(feats[order], labels[order], 12)
    from allab.classifiers import fit_svm_rbf

    model = fit_svm_rbf(state.annotated_features, state.annotated_labels)
    f = decision_values(model, state.pool_features)
    assert select_fscore(state, model) == int(np.argmin(np.abs(f)))
