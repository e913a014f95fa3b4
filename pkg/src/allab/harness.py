"""Experiment orchestration: acquisition loops, seed sweeps, persistence."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import npmodel
from .classifiers import (
    FIT_COUNTER,
    LogisticConfig,
    SvmConfig,
    fit_logistic,
    fit_svm_rbf,
)
from .data import (
    ALState,
    DataError,
    Dataset,
    SplitSpec,
    generate_gaussian_mixture,
    load_table,
    make_imbalanced,
    normalize_features,
    split_dataset,
)
from .metrics import AcquisitionTrace, auac, precision_recall, weighted_accuracy
from .npmodel import NPConfig
from .oracle import oracle_scores, select_oracle
from .scenario import label_scenarios, sample_scenarios
from .strategies import (
    StrategyConfig,
    select_cbal,
    select_fscore,
    select_hal,
    select_kcenter_greedy,
    select_random,
    select_uncertainty,
)

SETTINGS = ("balanced", "imbalanced", "imbalanced_weighted")
RESULTS_SCHEMA = "strategy,setting,data_seed,run_seed,step,score"
SUMMARY_SCHEMA_VERSION = 1

PROBABILISTIC_KINDS = {"entropy", "margin", "least_confident", "uncsamp",
                       "hal_uniform", "hal_gaussian", "cbal"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    setting: str = "balanced"
    classifier: str = "logistic"
    strategies: list[StrategyConfig] = field(default_factory=lambda: [StrategyConfig("random")])
    steps: int = 10
    acquisitions_per_step: int = 1
    split: SplitSpec = field(default_factory=SplitSpec)
    data_seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    run_seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    imbalance_factor: float = 10.0
    rare_classes: list[int] | None = None
    np_cfg: NPConfig = field(default_factory=NPConfig)
    n_sim: int = 300
    q_set: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    logistic_cfg: LogisticConfig = field(default_factory=LogisticConfig)
    svm_cfg: SvmConfig = field(default_factory=SvmConfig)
    output_dir: str = "results"

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"unknown setting {self.setting!r}")
        if self.classifier not in ("logistic", "svm"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        if self.steps < 1 or not self.strategies:
            raise ConfigError("need steps >= 1 and at least one strategy")
        if not self.data_seeds or not self.run_seeds:
            raise ConfigError("seed lists must be nonempty")
        for s in self.strategies:
            self._check_compat(s)

    def _check_compat(self, s: StrategyConfig):
        if self.classifier == "svm" and s.kind in PROBABILISTIC_KINDS:
            raise ConfigError(f"strategy {s.kind!r} needs probabilities; incompatible with svm")
        if self.classifier != "svm" and s.kind == "fscore":
            raise ConfigError("fscore requires an svm classifier")

    @property
    def classifier_cfg(self):
        return self.svm_cfg if self.classifier == "svm" else self.logistic_cfg


@dataclass
class RunRecord:
    trace: AcquisitionTrace
    auac: float
    final_score: float
    rare_precision: float
    rare_recall: float
    wall_time: float
    fit_count: int
    np_loss_curves: list[list[float]] = field(default_factory=list)
    error: str | None = None


def training_sample_weights(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Inverse-relative-frequency weights over the classes actually present."""
    counts = np.bincount(labels, minlength=n_classes)
    present = counts > 0
    w = np.ones(n_classes)
    w[present] = len(labels) / (present.sum() * counts[present])
    return w[labels]


def build_dataset(cfg: ExperimentConfig, data_seed: int) -> Dataset:
    """Materialize the configured dataset and apply the setting's imbalancing."""
    spec = cfg.dataset
    kind = spec.get("type", "gaussian")
    if kind == "gaussian":
        ds = _build_gaussian(spec)
    elif kind in ("csv", "libsvm"):
        raw = load_table(spec["path"], kind, spec.get("n_features"))
        ds = normalize_features(raw)
    else:
        raise ConfigError(f"unknown dataset type {kind!r}")
    if cfg.setting != "balanced":
        rare = cfg.rare_classes
        if rare is None:
            # binary data undersamples the positive class; multiclass the
            # even-numbered classes
            if ds.n_classes == 2:
                rare = [1]
            else:
                rare = [c for c in range(ds.n_classes) if c % 2 == 0]
        ds = make_imbalanced(ds, cfg.imbalance_factor, rare, seed=data_seed)
    return ds


def _build_gaussian(spec: dict) -> Dataset:
    n_per_class = spec.get("n_per_class", [500, 500])
    k = int(spec.get("n_features", 21))
    stdev = float(spec.get("stdev", 1.0))
    seed = int(spec.get("seed", 0))
    if "means" in spec:
        means = np.asarray(spec["means"], dtype=np.float64)
    else:
        # antipodal means along the all-ones direction at the given separation
        sep = float(spec.get("separation", 2.0))
        direction = np.ones(k) / np.sqrt(k)
        means = np.vstack([-0.5 * sep * direction, 0.5 * sep * direction])
        if len(n_per_class) > 2:
            rng = np.random.default_rng(seed + 7919)
            extra = rng.standard_normal((len(n_per_class) - 2, k))
            extra = sep * extra / np.linalg.norm(extra, axis=1, keepdims=True)
            means = np.vstack([means, extra])
    return generate_gaussian_mixture(n_per_class, means, stdev, seed)


def _fit_current(state: ALState, cfg: ExperimentConfig):
    y = state.annotated_labels
    if cfg.setting == "imbalanced_weighted":
        weights = training_sample_weights(y, state.dataset.n_classes)
    else:
        weights = np.ones(len(y))
    if cfg.classifier == "svm":
        return fit_svm_rbf(state.annotated_features, y, weights, cfg.svm_cfg)
    return fit_logistic(state.annotated_features, y, weights, cfg.logistic_cfg)


def _weights_fn(cfg: ExperimentConfig, n_classes: int):
    if cfg.setting == "imbalanced_weighted":
        return lambda y: training_sample_weights(y, n_classes)
    return None


def _select(strategy: StrategyConfig, state: ALState, model, cfg: ExperimentConfig,
            test: Dataset, reward: Dataset, rng, aux: dict) -> int:
    kind = strategy.kind
    if kind == "random":
        return select_random(state, rng)
    if kind in ("entropy", "margin", "least_confident"):
        return select_uncertainty(state, model, kind)
    if kind == "uncsamp":
        return select_uncertainty(state, model, "entropy")
    if kind == "kcenter":
        return select_kcenter_greedy(state)
    if kind == "hal_uniform":
        return select_hal(state, model, "uniform", strategy, rng)
    if kind == "hal_gaussian":
        return select_hal(state, model, "gaussian", strategy, rng)
    if kind == "cbal":
        return select_cbal(state, model, strategy)
    if kind == "fscore":
        return select_fscore(state, model)
    if kind == "oracle":
        scores = oracle_scores(state, cfg.classifier_cfg, test,
                               _weights_fn(cfg, state.dataset.n_classes))
        return select_oracle(scores)
    if kind == "np":
        scenarios = sample_scenarios(state.annotated, cfg.q_set, cfg.n_sim, rng)
        labeled = label_scenarios(scenarios, state.dataset, reward,
                                  cfg.classifier_cfg,
                                  _weights_fn(cfg, state.dataset.n_classes))
        np_seed = int(rng.integers(2 ** 31))
        params, curve = npmodel.train_np(labeled, state.dataset, cfg.np_cfg, np_seed)
        aux.setdefault("np_loss_curves", []).append(curve)
        return npmodel.select_np(params, state)
    raise ConfigError(f"unknown strategy kind {kind!r}")


def active_learning_loop(state: ALState, strategy: StrategyConfig,
                         cfg: ExperimentConfig, test: Dataset, reward: Dataset,
                         rng: np.random.Generator,
                         aux: dict | None = None) -> AcquisitionTrace:
    """Run `cfg.steps` acquisition rounds; returns the per-step score trace."""
    cfg._check_compat(strategy)
    aux = aux if aux is not None else {}
    model = _fit_current(state, cfg)
    scores = [weighted_accuracy(model, test)]
    for _ in range(cfg.steps):
        for _ in range(cfg.acquisitions_per_step):
            pos = _select(strategy, state, model, cfg, test, reward, rng, aux)
            state = state.annotate(pos)
        model = _fit_current(state, cfg)
        scores.append(weighted_accuracy(model, test))
    aux["final_model"] = model
    aux["final_state"] = state
    return AcquisitionTrace(scores, strategy.kind)


def _run_one(cfg: ExperimentConfig, strategy: StrategyConfig, data_seed: int,
             run_seed: int, strategy_index: int) -> RunRecord:
    ds = build_dataset(cfg, data_seed)
    split = SplitSpec(cfg.split.n_test, cfg.split.n_reward,
                      cfg.split.n_init_annot, data_seed)
    state, test, reward = split_dataset(ds, split)
    rng = np.random.default_rng([run_seed, data_seed, strategy_index])
    fit_start = FIT_COUNTER.count
    t0 = time.perf_counter()
    aux: dict = {}
    trace = active_learning_loop(state, strategy, cfg, test, reward, rng, aux)
    wall = time.perf_counter() - t0
    trace.setting = cfg.setting
    trace.data_seed = data_seed
    trace.run_seed = run_seed
    rare = int(np.argmin(np.bincount(test.labels, minlength=test.n_classes)))
    prec, rec = precision_recall(aux["final_model"], test, rare)
    return RunRecord(
        trace=trace,
        auac=auac(trace),
        final_score=trace.scores[-1],
        rare_precision=prec,
        rare_recall=rec,
        wall_time=wall,
        fit_count=FIT_COUNTER.count - fit_start,
        np_loss_curves=aux.get("np_loss_curves", []),
    )


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Run the full strategy x data_seed x run_seed cross product and persist."""
    jobs = []
    for si, strategy in enumerate(cfg.strategies):
        for ds_seed in cfg.data_seeds:
            for r_seed in cfg.run_seeds:
                jobs.append((cfg, strategy, ds_seed, r_seed, si))
    workers = int(os.environ.get("ALLAB_WORKERS", "1"))
    records: list[RunRecord] = []
    failures = 0
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    for job, rec in zip(jobs, results):
        if rec.error is not None:
            failures += 1
        records.append(rec)
    records.sort(key=lambda r: (r.trace.strategy, r.trace.data_seed, r.trace.run_seed))
    persist_results(cfg, records)
    if failures:
        raise RuntimeError(f"{failures} of {len(records)} runs failed; results persisted")
    return records


def _run_job(job) -> RunRecord:
    cfg, strategy, ds_seed, r_seed, si = job
    try:
        return _run_one(cfg, strategy, ds_seed, r_seed, si)
    except Exception as exc:  # record and continue with the other runs
        trace = AcquisitionTrace([0.0, 0.0], strategy.kind, cfg.setting, ds_seed, r_seed)
        return RunRecord(trace, 0.0, 0.0, 0.0, 0.0, 0.0, 0,
                         error=f"{type(exc).__name__}: {exc}")


def _result_stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.name}_{cfg.setting}_{cfg.classifier}"


def persist_results(cfg: ExperimentConfig, records: list[RunRecord]):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _result_stem(cfg)
    lines = [RESULTS_SCHEMA]
    for rec in records:
        if rec.error is not None:
            continue
        t = rec.trace
        for step, score in enumerate(t.scores):
            lines.append(f"{t.strategy},{t.setting},{t.data_seed},{t.run_seed},{step},{score:.12f}")
    (out / f"results_{stem}.csv").write_text("\n".join(lines) + "\n")

    run_lines = ["strategy,setting,data_seed,run_seed,auac,final_score,"
                 "rare_precision,rare_recall,fit_count"]
    for rec in records:
        if rec.error is not None:
            continue
        t = rec.trace
        run_lines.append(
            f"{t.strategy},{t.setting},{t.data_seed},{t.run_seed},"
            f"{rec.auac:.12f},{rec.final_score:.12f},{rec.rare_precision:.12f},"
            f"{rec.rare_recall:.12f},{rec.fit_count}"
        )
    (out / f"runs_{stem}.csv").write_text("\n".join(run_lines) + "\n")

    summary = {"schema_version": SUMMARY_SCHEMA_VERSION, "name": cfg.name,
               "setting": cfg.setting, "classifier": cfg.classifier,
               "strategies": {}}
    by_strategy: dict[str, list[RunRecord]] = {}
    for rec in records:
        if rec.error is None:
            by_strategy.setdefault(rec.trace.strategy, []).append(rec)
    for name, recs in sorted(by_strategy.items()):
        auacs = np.array([r.auac for r in recs])
        finals = np.array([r.final_score for r in recs])
        summary["strategies"][name] = {
            "n_runs": len(recs),
            "auac_mean": float(auacs.mean()),
            "auac_stdev": float(auacs.std(ddof=1)) if len(recs) > 1 else 0.0,
            "final_score_mean": float(finals.mean()),
            "final_score_stdev": float(finals.std(ddof=1)) if len(recs) > 1 else 0.0,
            "wall_time_total": float(sum(r.wall_time for r in recs)),
        }
    errors = [
        {"strategy": r.trace.strategy, "data_seed": r.trace.data_seed,
         "run_seed": r.trace.run_seed, "error": r.error}
        for r in records if r.error is not None
    ]
    if errors:
        summary["errors"] = errors
    (out / f"summary_{stem}.json").write_text(json.dumps(summary, indent=2) + "\n")
