"""Scoring: class-weighted accuracy, AUAC, precision/recall, rank aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset


@dataclass
class AcquisitionTrace:
    """Per-step test scores of one strategy run; index 0 is pre-acquisition."""

    scores: list[float]
    strategy: str = ""
    setting: str = ""
    data_seed: int = 0
    run_seed: int = 0

    def __post_init__(self):
        if len(self.scores) < 2:
            raise ValueError("a trace needs at least 2 scores")
        if any(s < 0 or s > 1 for s in self.scores):
            raise ValueError("scores must lie in [0, 1]")

    @property
    def steps(self) -> int:
        return len(self.scores) - 1


def weighted_accuracy(model, test: Dataset) -> float:
    """Accuracy with each point weighted by its class weight from the test set."""
    if len(test) == 0:
        raise ValueError("empty test set")
    pred = model.predict(test.features)
    w = test.class_weights[test.labels]
    # Same reduction for numerator and denominator so an all-correct
    # prediction scores exactly 1.0.
    return float(np.sum(w * (pred == test.labels)) / np.sum(w))


def auac(trace: AcquisitionTrace) -> float:
    """Trapezoidal area under the acquisition curve, unit step spacing."""
    s = np.asarray(trace.scores, dtype=np.float64)
    return float(np.sum((s[:-1] + s[1:]) / 2.0))


def precision_recall(model, test: Dataset, cls: int) -> tuple[float, float]:
    """Precision and recall of the given class; precision 0 when nothing predicted."""
    labels = test.labels
    if not np.any(labels == cls):
        raise ValueError(f"class {cls} absent from test labels")
    pred = model.predict(test.features)
    tp = int(np.sum((pred == cls) & (labels == cls)))
    fp = int(np.sum((pred == cls) & (labels != cls)))
    fn = int(np.sum((pred != cls) & (labels == cls)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn)
    return precision, recall


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Rank 1 = largest value; ties share the average rank."""
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    pos = 1
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (pos + pos + (j - i)) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        pos += j - i + 1
        i = j + 1
    return ranks


def rank_strategies(results: dict[str, dict[str, float]]) -> dict[str, tuple[float, float]]:
    """Mean and stdev of per-dataset AUAC ranks (rank 1 = best) per strategy."""
    datasets = sorted(results)
    if not datasets:
        raise ValueError("no datasets to rank")
    strategies = sorted(results[datasets[0]])
    for d in datasets:
        if sorted(results[d]) != strategies:
            raise ValueError(f"dataset {d!r} scores a different strategy set")
    per_strategy = {s: [] for s in strategies}
    for d in datasets:
        vals = np.array([results[d][s] for s in strategies])
        ranks = _average_ranks(vals)
        for s, r in zip(strategies, ranks):
            per_strategy[s].append(r)
    return {
        s: (float(np.mean(r)), float(np.std(r)))
        for s, r in per_strategy.items()
    }
