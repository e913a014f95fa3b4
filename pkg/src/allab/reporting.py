"""Report generation from persisted result CSVs: tables, relative curves, ranks."""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from .metrics import rank_strategies

EXCLUDED_FROM_AVERAGE = {"oracle", "random", "np"}


def read_results_csv(path) -> dict:
    """Parse a results CSV into {strategy: {(data_seed, run_seed): [scores]}}."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0]
    if header != "strategy,setting,data_seed,run_seed,step,score":
        raise ValueError(f"{path}: unexpected results schema {header!r}")
    out: dict[str, dict] = defaultdict(dict)
    for line in lines[1:]:
        strategy, setting, ds, rs, step, score = line.split(",")
        key = (int(ds), int(rs))
        out[strategy].setdefault(key, []).append((int(step), float(score)))
    parsed = {}
    for strategy, runs in out.items():
        parsed[strategy] = {
            key: [s for _, s in sorted(vals)] for key, vals in runs.items()
        }
    return dict(parsed)


def trace_auac(scores) -> float:
    s = np.asarray(scores)
    return float(np.sum((s[:-1] + s[1:]) / 2.0))


def summarize(parsed: dict) -> dict:
    """Per-strategy AUAC and final-score mean/stdev."""
    table = {}
    for strategy, runs in sorted(parsed.items()):
        auacs = np.array([trace_auac(s) for s in runs.values()])
        finals = np.array([s[-1] for s in runs.values()])
        table[strategy] = {
            "n_runs": len(runs),
            "auac_mean": float(auacs.mean()),
            "auac_stdev": float(auacs.std(ddof=1)) if len(auacs) > 1 else 0.0,
            "final_mean": float(finals.mean()),
            "final_stdev": float(finals.std(ddof=1)) if len(finals) > 1 else 0.0,
        }
    return table


def relative_curves(parsed: dict) -> dict[str, np.ndarray] | None:
    """Per-step curves of Random/Oracle/NP/Best minus the AL-strategy average.

    The AL average excludes oracle, random and np; Best is the post-hoc best
    remaining strategy by AUAC, chosen per seed. Differences are computed per
    seed, then averaged. Returns {curve: array of (step, mean, 2*stderr)}.
    """
    al_strategies = [s for s in parsed if s not in EXCLUDED_FROM_AVERAGE]
    if not al_strategies:
        return None
    seed_keys = sorted(set.intersection(*(set(parsed[s]) for s in parsed)))
    if not seed_keys:
        return None
    n_steps = len(next(iter(parsed[al_strategies[0]].values())))
    curves: dict[str, list] = defaultdict(list)
    for key in seed_keys:
        al_traces = np.array([parsed[s][key] for s in al_strategies])
        al_avg = al_traces.mean(axis=0)
        best_idx = int(np.argmax([trace_auac(tr) for tr in al_traces]))
        curves["best"].append(al_traces[best_idx] - al_avg)
        for name in ("random", "oracle", "np"):
            if name in parsed:
                curves[name].append(np.asarray(parsed[name][key]) - al_avg)
    out = {}
    for name, rows in curves.items():
        arr = np.array(rows)
        mean = arr.mean(axis=0)
        stderr = arr.std(axis=0, ddof=1) / np.sqrt(len(rows)) if len(rows) > 1 \
            else np.zeros(n_steps)
        out[name] = np.column_stack([np.arange(n_steps), mean, 2.0 * stderr])
    return out


def report(results_dir, out_dir=None) -> dict:
    """Emit summary tables, relative-curve plot data and rank aggregation."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir else results_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    csvs = sorted(results_dir.glob("results_*.csv"))
    if not csvs:
        raise ValueError(f"no results_*.csv files in {results_dir}")
    report_data: dict = {"groups": {}, "warnings": []}
    auac_by_group: dict[tuple, dict[str, dict[str, float]]] = defaultdict(dict)
    for path in csvs:
        stem = path.stem[len("results_"):]
        parsed = read_results_csv(path)
        table = summarize(parsed)
        report_data["groups"][stem] = {"summary": table}
        lines = ["strategy,n_runs,auac_mean,auac_stdev,final_mean,final_stdev"]
        for strategy, row in table.items():
            lines.append(
                f"{strategy},{row['n_runs']},{row['auac_mean']:.6f},"
                f"{row['auac_stdev']:.6f},{row['final_mean']:.6f},{row['final_stdev']:.6f}"
            )
        (out_dir / f"table_{stem}.csv").write_text("\n".join(lines) + "\n")

        curves = relative_curves(parsed)
        if curves is None:
            report_data["warnings"].append(
                f"{stem}: no AL strategies besides oracle/random/np; "
                "relative curves omitted"
            )
        else:
            for name, arr in curves.items():
                lines = ["step,mean,two_stderr"]
                for step, mean, err in arr:
                    lines.append(f"{int(step)},{mean:.6f},{err:.6f}")
                (out_dir / f"relative_{stem}_{name}.csv").write_text("\n".join(lines) + "\n")

        # group ranking across datasets by (setting, classifier) suffix
        name, setting, classifier = _split_stem(stem)
        auac_by_group[(setting, classifier)][name] = {
            s: row["auac_mean"] for s, row in table.items()
        }
    for (setting, classifier), per_dataset in auac_by_group.items():
        strategy_sets = {frozenset(d) for d in per_dataset.values()}
        if len(per_dataset) < 2 or len(strategy_sets) != 1:
            continue
        ranks = rank_strategies(per_dataset)
        lines = ["strategy,rank_mean,rank_stdev"]
        for strategy, (mean, stdev) in sorted(ranks.items()):
            lines.append(f"{strategy},{mean:.4f},{stdev:.4f}")
        (out_dir / f"ranks_{setting}_{classifier}.csv").write_text("\n".join(lines) + "\n")
        report_data.setdefault("ranks", {})[f"{setting}_{classifier}"] = {
            s: list(v) for s, v in ranks.items()
        }
    (out_dir / "report.json").write_text(json.dumps(report_data, indent=2) + "\n")
    return report_data


def _split_stem(stem: str) -> tuple[str, str, str]:
    # settings contain underscores (imbalanced_weighted); match known suffixes
    for setting in ("imbalanced_weighted", "imbalanced", "balanced"):
        for classifier in ("logistic", "svm"):
            suffix = f"_{setting}_{classifier}"
            if stem.endswith(suffix):
                return stem[: -len(suffix)], setting, classifier
    return stem, "unknown", "unknown"
