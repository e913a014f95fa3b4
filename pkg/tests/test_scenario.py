"""Simulated scenario sampling and improvement labeling."""

import numpy as np
import pytest

from allab.classifiers import LogisticConfig, fit_logistic
from allab.data import ALState
from allab.metrics import weighted_accuracy
from allab.scenario import SimulatedScenario, label_scenarios, sample_scenarios
from conftest import make_dataset, make_state


def test_half_split_sizes():
    annot = np.arange(10)
    rng = np.random.default_rng(0)
    scenarios = sample_scenarios(annot, (0.5,), 2, rng)
    assert len(scenarios) == 2
    for sc in scenarios:
        assert len(sc.s_annot) == 5
        assert len(sc.s_pool) == 5
        assert sc.fraction == 0.5


def test_partition_union_and_disjointness():
    annot = np.arange(100, 137)
    rng = np.random.default_rng(1)
    scenarios = sample_scenarios(annot, (0.1, 0.3, 0.7, 0.9), 50, rng)
    for sc in scenarios:
        merged = np.sort(np.concatenate([sc.s_annot, sc.s_pool]))
        np.testing.assert_array_equal(merged, annot)
        assert len(np.intersect1d(sc.s_annot, sc.s_pool)) == 0


def test_fractions_drawn_from_q_set():
    annot = np.arange(40)
    q_set = (0.2, 0.5, 0.8)
    rng = np.random.default_rng(2)
    scenarios = sample_scenarios(annot, q_set, 200, rng)
    seen = {sc.fraction for sc in scenarios}
    assert seen <= set(q_set)
    assert len(seen) == len(q_set)  # all fractions appear over 200 draws
    for sc in scenarios:
        assert len(sc.s_annot) == round(sc.fraction * 40)


def test_sampling_deterministic():
    annot = np.arange(20)
    a = sample_scenarios(annot, (0.3, 0.6), 5, np.random.default_rng(3))
    b = sample_scenarios(annot, (0.3, 0.6), 5, np.random.default_rng(3))
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(sa.s_annot, sb.s_annot)
        np.testing.assert_array_equal(sa.s_pool, sb.s_pool)


def test_degenerate_split_rejected():
    # a fraction that would leave an empty pseudo-annotated set is invalid
    with pytest.raises(ValueError):
        sample_scenarios(np.arange(4), (0.01,), 1, np.random.default_rng(4))


# ---------------------------------------------------------------- labeling

def _toy_problem():
    rng = np.random.default_rng(5)
    feats = np.vstack([rng.normal(size=(10, 2)) - 1,
                       rng.normal(size=(10, 2)) + 1])
    labels = np.repeat([0, 1], 10)
    order = rng.permutation(20)
    ds = make_dataset(feats[order], labels[order])
    reward = make_dataset(rng.normal(size=(8, 2)),
                          rng.integers(0, 2, size=8))
    return ds, reward


def test_single_point_pool_target_length_one():
    ds, reward = _toy_problem()
    sc = SimulatedScenario(np.arange(11), np.array([11]), 11 / 12)
    out = label_scenarios([sc], ds, reward, LogisticConfig())
    assert out[0].targets.shape == (1,)


def test_identical_scenarios_identical_targets():
    ds, reward = _toy_problem()
    scenarios = [SimulatedScenario(np.arange(6), np.arange(6, 12), 0.5)
                 for _ in range(2)]
    out = label_scenarios(scenarios, ds, reward, LogisticConfig())
    np.testing.assert_array_equal(out[0].targets, out[1].targets)


def test_targets_match_brute_force_refit_loop():
    ds, reward = _toy_problem()
    s_annot = np.array([0, 2, 4, 6, 8, 10])
    s_pool = np.array([1, 3, 5, 7, 9, 11])
    sc = SimulatedScenario(s_annot, s_pool, 0.5)
    out = label_scenarios([sc], ds, reward, LogisticConfig())

    base = fit_logistic(ds.features[s_annot], ds.labels[s_annot])
    base_score = weighted_accuracy(base, reward)
    expect = []
    for idx in s_pool:
        x = np.vstack([ds.features[s_annot], ds.features[idx:idx + 1]])
        y = np.append(ds.labels[s_annot], ds.labels[idx])
        model = fit_logistic(x, y)
        expect.append(weighted_accuracy(model, reward) - base_score)
    np.testing.assert_array_equal(out[0].targets, np.array(expect))


def test_labeling_passes_sample_weight_hook():
    ds, reward = _toy_problem()
    sc = SimulatedScenario(np.arange(6), np.arange(6, 12), 0.5)
    calls = []

    def weights_for(y):
        calls.append(len(y))
        return np.ones(len(y))

    label_scenarios([sc], ds, reward, LogisticConfig(),
                    sample_weights_for=weights_for)
    assert len(calls) == 1 + 6  # base fit + one refit per pseudo-pool point
