"""Simulated AL scenarios: subsample the annotated set, label with the oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ALState, Dataset
from .oracle import oracle_scores


@dataclass
class SimulatedScenario:
    """One simulated AL problem over the real annotated set.

    ``s_annot`` and ``s_pool`` partition the annotated indices; ``targets``
    holds per-pool-point oracle improvements once labeled.
    """

    s_annot: np.ndarray
    s_pool: np.ndarray
    fraction: float
    targets: np.ndarray | None = None


def sample_scenarios(annot_indices, q_set, n_sim: int,
                     rng: np.random.Generator) -> list[SimulatedScenario]:
    """Draw n_sim random splits of the annotated indices by fractions from q_set."""
    annot = np.asarray(annot_indices, dtype=np.int64)
    if len(annot) < 2:
        raise ValueError("need at least 2 annotated points to simulate")
    q_set = list(q_set)
    if any(not 0.0 < q < 1.0 for q in q_set):
        raise ValueError("fractions must lie in (0, 1)")
    scenarios = []
    for _ in range(n_sim):
        q = q_set[int(rng.integers(len(q_set)))]
        n_annot = round(q * len(annot))
        if n_annot < 1 or n_annot >= len(annot):
            raise ValueError(f"fraction {q} gives an empty simulated annot or pool")
        perm = rng.permutation(len(annot))
        s_annot = np.sort(annot[perm[:n_annot]])
        s_pool = np.sort(annot[perm[n_annot:]])
        scenarios.append(SimulatedScenario(s_annot, s_pool, q))
    return scenarios


def label_scenarios(scenarios, dataset: Dataset, reward: Dataset, classifier_cfg,
                    sample_weights_for=None) -> list[SimulatedScenario]:
    """Fill scenario targets with oracle improvements scored on the reward set."""
    if len(reward) == 0:
        raise ValueError("empty reward set")
    labeled = []
    for i, sc in enumerate(scenarios):
        sim_state = ALState(dataset, sc.s_annot, sc.s_pool)
        try:
            scores = oracle_scores(sim_state, classifier_cfg, reward, sample_weights_for)
        except Exception as exc:
            raise RuntimeError(f"oracle labeling failed at scenario {i}") from exc
        labeled.append(SimulatedScenario(sc.s_annot, sc.s_pool, sc.fraction,
                                         scores.values.copy()))
    return labeled
