"""Classical acquisition strategies over an ALState and a fitted classifier.

Every selector returns a *position into the pool list* (which is kept in
ascending index order), so ties always break toward the lowest pool index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifiers import ClassifierModel, UnsupportedOperation, decision_values, predict_proba
from .data import ALState

KNOWN_KINDS = (
    "random", "entropy", "margin", "least_confident", "uncsamp", "kcenter",
    "hal_uniform", "hal_gaussian", "cbal", "fscore", "oracle", "np",
)


@dataclass
class StrategyConfig:
    kind: str
    p_explore: float = 0.5  # HAL
    delta: float = 10.0  # HAL Gaussian length scale
    lam: float = 1.0  # CBAL regularizer

    def __post_init__(self):
        if self.kind not in KNOWN_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if not 0.0 <= self.p_explore <= 1.0:
            raise ValueError("p_explore must be in [0, 1]")
        if self.delta <= 0 or self.lam < 0:
            raise ValueError("delta must be positive and lambda nonnegative")


def select_random(state: ALState, rng: np.random.Generator) -> int:
    if len(state.pool) == 0:
        raise ValueError("empty pool")
    return int(rng.integers(len(state.pool)))


def _entropy(p: np.ndarray) -> np.ndarray:
    safe = np.clip(p, 1e-300, None)
    return -np.sum(p * np.log(safe), axis=1)


def select_uncertainty(state: ALState, model: ClassifierModel, variant: str = "entropy") -> int:
    p = predict_proba(model, state.pool_features)
    if variant == "entropy":
        return int(np.argmax(_entropy(p)))
    if variant == "margin":
        part = np.sort(p, axis=1)
        return int(np.argmin(part[:, -1] - part[:, -2]))
    if variant == "least_confident":
        return int(np.argmin(np.max(p, axis=1)))
    raise ValueError(f"unknown uncertainty variant {variant!r}")


def _min_dist_to_annotated(state: ALState) -> np.ndarray:
    a = state.annotated_features
    p = state.pool_features
    d2 = (
        np.sum(p * p, axis=1)[:, None]
        + np.sum(a * a, axis=1)[None, :]
        - 2.0 * (p @ a.T)
    )
    return np.sqrt(np.maximum(d2.min(axis=1), 0.0))


def select_kcenter_greedy(state: ALState) -> int:
    """Farthest-first: pool point with max min-distance to the annotated set."""
    if len(state.annotated) == 0:
        raise ValueError("annotated set is empty")
    if len(state.pool) == 0:
        raise ValueError("empty pool")
    return int(np.argmax(_min_dist_to_annotated(state)))


def select_hal(state: ALState, model: ClassifierModel, scheme: str,
               cfg: StrategyConfig, rng: np.random.Generator) -> int:
    """Exploit by entropy with prob 1 - p_explore, else geometric exploration."""
    if scheme not in ("uniform", "gaussian"):
        raise ValueError(f"unknown HAL scheme {scheme!r}")
    if rng.random() >= cfg.p_explore:
        return select_uncertainty(state, model, "entropy")
    if scheme == "uniform":
        return int(rng.integers(len(state.pool)))
    d = _min_dist_to_annotated(state)
    logw = d / cfg.delta
    w = np.exp(logw - logw.max())
    return int(rng.choice(len(state.pool), p=w / w.sum()))


def select_cbal(state: ALState, model: ClassifierModel, cfg: StrategyConfig) -> int:
    """Entropy plus a class-balancing bonus toward under-covered classes."""
    p_pool = predict_proba(model, state.pool_features)
    p_annot = predict_proba(model, state.annotated_features)
    c = model.n_classes
    target = (len(state.annotated) + 1) / c
    deficit = np.maximum(0.0, target - p_annot.sum(axis=0))
    norm = max(float(np.abs(deficit).sum()), 1e-12)
    score = _entropy(p_pool) + cfg.lam * (p_pool @ deficit) / norm
    return int(np.argmax(score))


def select_fscore(state: ALState, model: ClassifierModel) -> int:
    """Pool point closest to any one-vs-rest SVM decision boundary."""
    vals = decision_values(model, state.pool_features)
    if vals.ndim == 1:
        return int(np.argmin(np.abs(vals)))
    return int(np.argmin(np.min(np.abs(vals), axis=1)))
