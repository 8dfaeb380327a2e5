"""Experiment orchestration: dataset generation, training grids, test-set
evaluation, and CSV analysis tables.

Run layout: ``results/<exp>/<label>/dataset-<k>/seed-<s>/report`` plus a
``test_fitness`` file per run once the test command has been executed, and
``results/<exp>/analysis/*.csv`` for the aggregate tables.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .config import AlgorithmConfig
from .errors import CLIError, ParameterError
from .evolution import RunReport, ard_fitness, reference_objectives, run_evolution
from .instances import Dataset, DatasetParams, generate_dataset, load_dataset
from .metrics import average_ranks, wilcoxon_rank_sum
from .trees import parse_sexpr

TEST_SCHEMA = 1


@dataclass
class ExperimentSpec:
    name: str
    datasets: list[int]
    algorithms: list[AlgorithmConfig]
    seeds: list[int]

    def __post_init__(self) -> None:
        if not self.datasets or not self.algorithms or not self.seeds:
            raise ParameterError("experiment needs datasets, algorithms and seeds")
        if len(set(self.seeds)) != len(self.seeds):
            raise ParameterError("seeds must be distinct")
        labels = [cfg.label() for cfg in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ParameterError(f"duplicate algorithm labels: {labels}")


def run_dir(results_root: str | Path, exp: str, label: str, dataset_id: int, seed: int) -> Path:
    return Path(results_root) / exp / label / f"dataset-{dataset_id}" / f"seed-{seed}"


def parse_algorithm_token(token: str, base: AlgorithmConfig) -> AlgorithmConfig:
    """Build a config from ``GP``, ``SGP_PC``, ``PGU_SGP`` or ``PGU_SGP:wp:wg``."""
    parts = token.split(":")
    name = parts[0]
    cfg = AlgorithmConfig(**{**base.snapshot(), "algorithm": name, "reference_rule": base.reference_rule})
    if len(parts) == 1:
        return cfg
    if name != "PGU_SGP" or len(parts) != 3:
        raise CLIError(f"bad algorithm token {token!r}; weights only apply as PGU_SGP:wp:wg")
    cfg.wp = float(parts[1])
    cfg.wg = float(parts[2])
    cfg.__post_init__()
    return cfg


# ---------------------------------------------------------------------------
# generate / train / test
# ---------------------------------------------------------------------------

def generate_datasets(
    out_dir: str | Path,
    num_datasets: int,
    seed: int,
    n_train: int = 50,
    n_test: int = 50,
    params: DatasetParams = DatasetParams(),
) -> list[Path]:
    if num_datasets < 1:
        raise ParameterError(f"num_datasets must be >= 1, got {num_datasets}")
    return [
        generate_dataset(out_dir, k, seed, n_train=n_train, n_test=n_test, params=params)
        for k in range(1, num_datasets + 1)
    ]


def train_experiment(
    spec: ExperimentSpec,
    data_root: str | Path,
    results_root: str | Path,
    echo=print,
) -> list[Path]:
    """Run the full (algorithm x dataset x seed) grid, saving one report each."""
    written: list[Path] = []
    datasets: dict[int, Dataset] = {k: load_dataset(data_root, k) for k in spec.datasets}
    for cfg in spec.algorithms:
        for k in spec.datasets:
            for seed in spec.seeds:
                report = run_evolution(cfg, datasets[k], seed)
                path = run_dir(results_root, spec.name, cfg.label(), k, seed) / "report"
                report.save(path)
                written.append(path)
                echo(
                    f"{cfg.label()} dataset-{k} seed-{seed}: best={report.best_fitness:.6f} "
                    f"sims={report.total_simulations} wall={report.wall_seconds:.1f}s"
                )
    return written


@dataclass
class RunRef:
    label: str
    dataset_id: int
    seed: int
    path: Path  # run directory
    report: RunReport | None = None

    def load_report(self) -> RunReport:
        if self.report is None:
            self.report = RunReport.load(self.path / "report")
        return self.report


def discover_runs(results_root: str | Path, exp: str) -> list[RunRef]:
    """All completed runs under an experiment, with grid-completeness checks."""
    root = Path(results_root) / exp
    if not root.is_dir():
        raise CLIError(f"experiment directory not found: {root}")
    runs: list[RunRef] = []
    for label_dir in sorted(p for p in root.iterdir() if p.is_dir() and p.name != "analysis"):
        for ds_dir in sorted(label_dir.glob("dataset-*"), key=lambda p: int(p.name.split("-")[1])):
            for seed_dir in sorted(ds_dir.glob("seed-*"), key=lambda p: int(p.name.split("-")[1])):
                if not (seed_dir / "report").is_file():
                    raise CLIError(f"missing report in {seed_dir}")
                runs.append(
                    RunRef(
                        label=label_dir.name,
                        dataset_id=int(ds_dir.name.split("-")[1]),
                        seed=int(seed_dir.name.split("-")[1]),
                        path=seed_dir,
                    )
                )
    if not runs:
        raise CLIError(f"no runs found under {root}")
    cells: dict[tuple[str, int], set[int]] = {}
    for run in runs:
        cells.setdefault((run.label, run.dataset_id), set()).add(run.seed)
    seed_sets = {frozenset(s) for s in cells.values()}
    if len(seed_sets) != 1:
        detail = {f"{label}/dataset-{k}": sorted(s) for (label, k), s in sorted(cells.items())}
        raise CLIError(f"incomplete grid; refusing to mix partial results: {detail}")
    return runs


def evaluate_heuristic(
    expression: str,
    instances,
    pf: float,
    reference_weights,
) -> tuple[float, list[float]]:
    """Mean fitness of a saved heuristic (or the literal ``reference``) on a split."""
    ref_objs = reference_objectives(instances, reference_weights)
    if expression.strip() == "reference":
        return 0.0, [0.0] * len(instances)  # zero deviation by definition, no size penalty
    code = parse_sexpr(expression)
    per_instance = []
    for instance, ref in zip(instances, ref_objs):
        per_instance.append(ard_fitness(code, [instance], [ref], pf))
    return float(np.mean(per_instance)), per_instance


def test_experiment(
    results_root: str | Path,
    exp: str,
    data_root: str | Path,
    echo=print,
) -> list[Path]:
    """Evaluate every run's best heuristic on its dataset's test split."""
    runs = discover_runs(results_root, exp)
    datasets: dict[int, Dataset] = {}
    written = []
    for run in runs:
        report = run.load_report()
        if run.dataset_id not in datasets:
            datasets[run.dataset_id] = load_dataset(data_root, run.dataset_id)
        cfg = report.config
        weights = _weights_from_config(cfg)
        mean, per_instance = evaluate_heuristic(
            report.best_expression, datasets[run.dataset_id].test, cfg["pf"], weights
        )
        payload = {
            "schema": TEST_SCHEMA,
            "mean_fitness": float(mean),
            "per_instance": [float(v) for v in per_instance],
            "expression": report.best_expression,
        }
        path = run.path / "test_fitness"
        path.write_text(yaml.safe_dump(payload, sort_keys=True))
        written.append(path)
        echo(f"{run.label} dataset-{run.dataset_id} seed-{run.seed}: test fitness {mean:.6f}")
    return written


def _weights_from_config(cfg: dict):
    from .config import ReferenceRuleWeights

    raw = cfg.get("reference_rule", {})
    return ReferenceRuleWeights(**raw)


def load_test_fitness(run: RunRef) -> dict:
    path = run.path / "test_fitness"
    if not path.is_file():
        raise CLIError(f"missing test_fitness in {run.path}; run the test command first")
    return yaml.safe_load(path.read_text())


# ---------------------------------------------------------------------------
# analysis tables
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def analyze_experiment(results_root: str | Path, exp: str, echo=print) -> Path:
    """Emit the aggregate CSV tables: training time, test fitness per budget
    mode with average ranks, pairwise rank-sum tests, surrogate correlation."""
    runs = discover_runs(results_root, exp)
    out = Path(results_root) / exp / "analysis"
    out.mkdir(parents=True, exist_ok=True)
    labels = sorted({r.label for r in runs})
    datasets = sorted({r.dataset_id for r in runs})

    by_cell: dict[tuple[str, int], list[RunRef]] = {}
    for run in runs:
        by_cell.setdefault((run.label, run.dataset_id), []).append(run)
    for cell in by_cell.values():
        cell.sort(key=lambda r: r.seed)

    # training time (minutes) -- wall-clock column, exempt from determinism
    rows = []
    for k in datasets:
        for label in labels:
            times = [r.load_report().wall_seconds / 60.0 for r in by_cell[(label, k)]]
            mean, std = _mean_std(times)
            rows.append([str(k), label, _fmt(mean), _fmt(std), str(len(times))])
    _write_csv(out / "training_time.csv",
               ["dataset", "algorithm", "mean_minutes", "std_minutes", "n"], rows)

    # test fitness per budget mode, plus average-rank rows
    modes: dict[str, list[RunRef]] = {"generations": [], "time": []}
    for run in runs:
        mode = "time" if run.load_report().config.get("wall_minutes") else "generations"
        modes[mode].append(run)
    for mode, mode_runs in modes.items():
        if not mode_runs:
            continue
        mode_labels = sorted({r.label for r in mode_runs})
        mode_datasets = sorted({r.dataset_id for r in mode_runs})
        table: dict[tuple[str, int], list[float]] = {}
        for run in mode_runs:
            values = table.setdefault((run.label, run.dataset_id), [])
            values.append(float(load_test_fitness(run)["mean_fitness"]))
        rows = []
        means_by_label: dict[str, list[float]] = {label: [] for label in mode_labels}
        for k in mode_datasets:
            for label in mode_labels:
                values = table.get((label, k))
                if values is None:
                    raise CLIError(f"no {mode}-budget runs for {label} on dataset-{k}")
                mean, std = _mean_std(values)
                means_by_label[label].append(mean)
                rows.append([str(k), label, _fmt(mean), _fmt(std), str(len(values))])
        ranks = average_ranks(means_by_label, larger_is_better=True)
        for label in mode_labels:
            rows.append(["rank", label, _fmt(ranks[label]), "", str(len(mode_datasets))])
        _write_csv(out / f"test_fitness_{mode}.csv",
                   ["dataset", "algorithm", "mean_fitness", "std_fitness", "n"], rows)

        # pairwise rank-sum tests on per-seed test fitness
        wrows = []
        for k in mode_datasets:
            for i, la in enumerate(mode_labels):
                for lb in mode_labels[i + 1 :]:
                    res = wilcoxon_rank_sum(table[(la, k)], table[(lb, k)])
                    wrows.append([
                        str(k), la, lb, _fmt(res.statistic), f"{res.pvalue:.9f}",
                        "yes" if res.pvalue < 0.05 else "no",
                    ])
        _write_csv(out / f"wilcoxon_{mode}.csv",
                   ["dataset", "algorithm_a", "algorithm_b", "statistic", "p_value",
                    "significant_0.05"], wrows)

    # surrogate quality: mean probe correlation per run, aggregated
    rows = []
    for k in datasets:
        for label in labels:
            per_run = []
            for run in by_cell[(label, k)]:
                rhos = [g.probe_rho for g in run.load_report().generations if g.probe_rho is not None]
                if rhos:
                    per_run.append(float(np.mean(rhos)))
            if per_run:
                mean, std = _mean_std(per_run)
                rows.append([str(k), label, _fmt(mean), _fmt(std), str(len(per_run))])
    if rows:
        _write_csv(out / "surrogate_correlation.csv",
                   ["dataset", "algorithm", "mean_rho", "std_rho", "n"], rows)

    echo(f"analysis written to {out}")
    return out


def curve_experiment(
    results_root: str | Path,
    exp: str,
    interval_seconds: float = 180.0,
    echo=print,
) -> Path:
    """Incumbent training fitness at fixed wall-clock boundaries (CSV)."""
    if interval_seconds <= 0:
        raise CLIError(f"interval must be positive, got {interval_seconds}")
    runs = discover_runs(results_root, exp)
    out = Path(results_root) / exp / "analysis" / "curve.csv"
    horizon = 0.0
    for run in runs:
        report = run.load_report()
        if report.generations:
            horizon = max(horizon, report.generations[-1].elapsed_seconds)
    boundaries = [i * interval_seconds for i in range(int(horizon / interval_seconds) + 2)]

    by_cell: dict[tuple[str, int], list[RunRef]] = {}
    for run in runs:
        by_cell.setdefault((run.label, run.dataset_id), []).append(run)
    rows = []
    for (label, k) in sorted(by_cell):
        cell = sorted(by_cell[(label, k)], key=lambda r: r.seed)
        for boundary in boundaries:
            incumbents = []
            for run in cell:
                report = run.load_report()
                done = [g for g in report.generations if g.elapsed_seconds <= boundary]
                if done:
                    incumbents.append(done[-1].best_fitness)
            if incumbents:
                mean, std = _mean_std(incumbents)
                rows.append([label, str(k), _fmt(boundary), _fmt(mean), _fmt(std),
                             str(len(incumbents))])
    _write_csv(out, ["algorithm", "dataset", "boundary_seconds", "mean_best_fitness",
                     "std_best_fitness", "n"], rows)
    echo(f"curve written to {out}")
    return out
