"""Myopic oracle: exhaustive one-step-lookahead improvement scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import LogisticConfig, SvmConfig, fit_logistic, fit_svm_rbf
from .data import ALState, Dataset
from .metrics import weighted_accuracy


@dataclass
class ImprovementScores:
    """Score deltas per pool point, aligned with the state's pool ordering."""

    values: np.ndarray
    base_score: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite improvement scores")


def _fit(x, y, weights, classifier_cfg):
    if isinstance(classifier_cfg, SvmConfig):
        return fit_svm_rbf(x, y, weights, classifier_cfg)
    return fit_logistic(x, y, weights, classifier_cfg)


def oracle_scores(state: ALState, classifier_cfg, eval_set: Dataset,
                  sample_weights_for=None) -> ImprovementScores:
    """Refit once per pool point and record the eval-score change.

    ``sample_weights_for(labels) -> weights`` supplies training weights (the
    weighted objective setting); default is uniform weights. Uses the hidden
    pool labels, so this is only valid in oracle/simulation contexts.
    """
    if len(eval_set) == 0:
        raise ValueError("empty eval set")
    if sample_weights_for is None:
        sample_weights_for = lambda labels: np.ones(len(labels))
    ax = state.annotated_features
    ay = state.annotated_labels
    base = _fit(ax, ay, sample_weights_for(ay), classifier_cfg)
    v = weighted_accuracy(base, eval_set)
    pool_x = state.pool_features
    pool_y = state.true_pool_labels()
    values = np.empty(len(state.pool))
    for j in range(len(state.pool)):
        x_j = np.vstack([ax, pool_x[j]])
        y_j = np.append(ay, pool_y[j])
        try:
            refit = _fit(x_j, y_j, sample_weights_for(y_j), classifier_cfg)
        except Exception as exc:
            raise RuntimeError(f"refit failed at pool index {state.pool[j]}") from exc
        values[j] = weighted_accuracy(refit, eval_set) - v
    return ImprovementScores(values, v)


def select_oracle(scores: ImprovementScores) -> int:
    """Pool position of the largest improvement; ties break low."""
    if len(scores.values) == 0:
        raise ValueError("empty improvement scores")
    return int(np.argmax(scores.values))
