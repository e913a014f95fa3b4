"""Command line interface: run, oracle-scores, simulate, report.

Exit codes: 0 ok, 1 run failures, 2 config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .classifiers import LogisticConfig, SvmConfig
from .data import SplitSpec, split_dataset
from .harness import (
    ConfigError,
    ExperimentConfig,
    active_learning_loop,
    build_dataset,
    run_experiment,
    _weights_fn,
)
from .npmodel import NPConfig
from .oracle import oracle_scores
from .reporting import report
from .scenario import label_scenarios, sample_scenarios
from .strategies import StrategyConfig


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    try:
        strategies = [
            StrategyConfig(**s) if isinstance(s, dict) else StrategyConfig(s)
            for s in raw.get("strategies", ["random"])
        ]
        kwargs = dict(
            name=raw.get("name", Path(path).stem),
            dataset=raw.get("dataset", {}),
            setting=raw.get("setting", "balanced"),
            classifier=raw.get("classifier", "logistic"),
            strategies=strategies,
            steps=raw.get("steps", 10),
            acquisitions_per_step=raw.get("acquisitions_per_step", 1),
            split=SplitSpec(**raw.get("split", {})),
            data_seeds=raw.get("data_seeds", [0, 1, 2]),
            run_seeds=raw.get("run_seeds", [0, 1, 2]),
            imbalance_factor=raw.get("imbalance_factor", 10.0),
            rare_classes=raw.get("rare_classes"),
            np_cfg=NPConfig(**raw.get("np", {})),
            n_sim=raw.get("n_sim", 300),
            q_set=tuple(raw.get("q_set", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9))),
            logistic_cfg=LogisticConfig(**raw.get("logistic", {})),
            svm_cfg=SvmConfig(**raw.get("svm", {})),
            output_dir=raw.get("output_dir", "results"),
        )
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    try:
        run_experiment(cfg)
    except RuntimeError as exc:
        print(f"run finished with failures: {exc}", file=sys.stderr)
        return 1
    print(f"results written to {cfg.output_dir}")
    return 0


def _cmd_oracle_scores(args) -> int:
    cfg = load_config(args.config)
    ds = build_dataset(cfg, cfg.data_seeds[0])
    split = SplitSpec(cfg.split.n_test, cfg.split.n_reward,
                      cfg.split.n_init_annot, cfg.data_seeds[0])
    state, test, reward = split_dataset(ds, split)
    if args.step > 0:
        # advance the loop with the oracle strategy to the requested step
        step_cfg = ExperimentConfig(**{**cfg.__dict__, "steps": args.step,
                                       "strategies": [StrategyConfig("oracle")]})
        rng = np.random.default_rng([cfg.run_seeds[0], cfg.data_seeds[0], 0])
        aux: dict = {}
        active_learning_loop(state, StrategyConfig("oracle"), step_cfg, test,
                             reward, rng, aux)
        state = aux["final_state"]
    scores = oracle_scores(state, cfg.classifier_cfg, test,
                           _weights_fn(cfg, ds.n_classes))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["pool_index,improvement"]
    for idx, val in zip(state.pool, scores.values):
        lines.append(f"{idx},{val:.12f}")
    path = out / f"oracle_scores_step{args.step}.csv"
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} (base score {scores.base_score:.6f})")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    data_seed, run_seed = cfg.data_seeds[0], cfg.run_seeds[0]
    ds = build_dataset(cfg, data_seed)
    split = SplitSpec(cfg.split.n_test, cfg.split.n_reward,
                      cfg.split.n_init_annot, data_seed)
    state, _, reward = split_dataset(ds, split)
    rng = np.random.default_rng([run_seed, data_seed, 0])
    scenarios = sample_scenarios(state.annotated, cfg.q_set, cfg.n_sim, rng)
    labeled = label_scenarios(scenarios, ds, reward, cfg.classifier_cfg,
                              _weights_fn(cfg, ds.n_classes))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"scenarios_d{data_seed}_r{run_seed}_s0.json"
    payload = {
        "data_seed": data_seed,
        "run_seed": run_seed,
        "step": 0,
        "scenarios": [
            {
                "s_annot": sc.s_annot.tolist(),
                "s_pool": sc.s_pool.tolist(),
                "fraction": sc.fraction,
                "targets": sc.targets.tolist(),
            }
            for sc in labeled
        ],
    }
    path.write_text(json.dumps(payload) + "\n")
    print(f"wrote {len(labeled)} labeled scenarios to {path}")
    return 0


def _cmd_report(args) -> int:
    data = report(args.dir, args.out)
    for warning in data.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    print(f"report written under {args.out or Path(args.dir) / 'report'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="allab",
                                     description="Active learning laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the configured experiment sweep")
    p_run.add_argument("--config", required=True)
    p_or = sub.add_parser("oracle-scores", help="dump oracle improvement scores")
    p_or.add_argument("--config", required=True)
    p_or.add_argument("--step", type=int, default=0)
    p_sim = sub.add_parser("simulate", help="sample and label simulated scenarios")
    p_sim.add_argument("--config", required=True)
    p_rep = sub.add_parser("report", help="build tables/curves/ranks from results")
    p_rep.add_argument("--dir", required=True)
    p_rep.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "oracle-scores": _cmd_oracle_scores,
        "simulate": _cmd_simulate,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
