"""Command-line entry points: generate, train, test, analyze, curve."""

from __future__ import annotations

import argparse
import sys

from .config import AlgorithmConfig
from .errors import CLIError, ParameterError
from .experiments import (
    ExperimentSpec,
    analyze_experiment,
    curve_experiment,
    evaluate_heuristic,
    generate_datasets,
    parse_algorithm_token,
    test_experiment,
    train_experiment,
)
from .instances import DatasetParams, load_dataset


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--population", type=int, default=500)
    parser.add_argument("--generations", type=int, default=50)
    parser.add_argument("--tournament", type=int, default=5)
    parser.add_argument("--elites", type=int, default=10)
    parser.add_argument("--rates", type=float, nargs=3, default=[0.8, 0.15, 0.05],
                        metavar=("CX", "MUT", "REPRO"))
    parser.add_argument("--pf", type=float, default=1e-7)
    parser.add_argument("--pcs", type=int, default=40)
    parser.add_argument("--cap", type=int, default=10, help="candidate cap per decision situation")
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--init-depth", type=int, nargs=2, default=[2, 6], metavar=("MIN", "MAX"))
    parser.add_argument("--max-depth", type=int, default=10)
    parser.add_argument("--wall-minutes", type=float, default=None,
                        help="switch to a wall-clock training budget")
    parser.add_argument("--probe-interval", type=int, default=None,
                        help="true-evaluate the estimation group every N generations (metrics only)")
    parser.add_argument("--train-limit", type=int, default=None,
                        help="use only the first N training instances")


def _base_config(args: argparse.Namespace) -> AlgorithmConfig:
    return AlgorithmConfig(
        algorithm="GP",
        population_size=args.population,
        max_generations=args.generations,
        tournament_k=args.tournament,
        elites=args.elites,
        crossover_rate=args.rates[0],
        mutation_rate=args.rates[1],
        reproduction_rate=args.rates[2],
        pf=args.pf,
        pcs=args.pcs,
        candidate_cap=args.cap,
        delta=args.delta,
        init_min_depth=args.init_depth[0],
        init_max_depth=args.init_depth[1],
        max_depth=args.max_depth,
        wall_minutes=args.wall_minutes,
        probe_interval=args.probe_interval,
        train_limit=args.train_limit,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgusgp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="create dataset directories")
    p.add_argument("--out", default="data")
    p.add_argument("--datasets", type=int, default=4)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--train-instances", type=int, default=50)
    p.add_argument("--test-instances", type=int, default=50)
    p.add_argument("--num-qcs", type=int, default=2)
    p.add_argument("--tasks", type=int, default=40)
    p.add_argument("--yard-blocks", type=int, default=6)
    p.add_argument("--service-bounds", type=float, nargs=2, default=[60.0, 180.0],
                   metavar=("MIN", "MAX"))
    p.add_argument("--loading-ratio", type=float, nargs=2, default=[0.25, 0.75],
                   metavar=("LO", "HI"))
    p.add_argument("--trucks-per-qc", type=int, nargs=2, default=[5, 7], metavar=("LO", "HI"))

    p = sub.add_parser("train", help="run a training grid")
    p.add_argument("--data", default="data")
    p.add_argument("--out", default="results")
    p.add_argument("--exp", required=True)
    p.add_argument("--datasets", type=int, nargs="+", required=True)
    p.add_argument("--algorithms", nargs="+", required=True,
                   help="GP, SGP_PC, PGU_SGP or PGU_SGP:wp:wg")
    p.add_argument("--seeds", type=int, nargs="+", required=True)
    _add_config_flags(p)

    p = sub.add_parser("test", help="evaluate best heuristics on test splits")
    p.add_argument("--data", default="data")
    p.add_argument("--results", default="results")
    p.add_argument("--exp")
    p.add_argument("--heuristic", help="S-expression file or the literal 'reference'")
    p.add_argument("--dataset", type=int, help="dataset id for --heuristic mode")
    p.add_argument("--pf", type=float, default=1e-7)

    p = sub.add_parser("analyze", help="write aggregate CSV tables")
    p.add_argument("--results", default="results")
    p.add_argument("--exp", required=True)

    p = sub.add_parser("curve", help="time-vs-fitness CSV")
    p.add_argument("--results", default="results")
    p.add_argument("--exp", required=True)
    p.add_argument("--interval-seconds", type=float, default=180.0)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            params = DatasetParams(
                num_qcs=args.num_qcs,
                num_tasks=args.tasks,
                yard_blocks=args.yard_blocks,
                service_bounds=(args.service_bounds[0], args.service_bounds[1]),
                loading_ratio_range=(args.loading_ratio[0], args.loading_ratio[1]),
                trucks_per_qc_range=(args.trucks_per_qc[0], args.trucks_per_qc[1]),
            )
            paths = generate_datasets(
                args.out, args.datasets, args.seed,
                n_train=args.train_instances, n_test=args.test_instances, params=params,
            )
            for path in paths:
                print(f"wrote {path}")
        elif args.command == "train":
            base = _base_config(args)
            spec = ExperimentSpec(
                name=args.exp,
                datasets=args.datasets,
                algorithms=[parse_algorithm_token(tok, base) for tok in args.algorithms],
                seeds=args.seeds,
            )
            train_experiment(spec, args.data, args.out)
        elif args.command == "test":
            if args.heuristic:
                if args.dataset is None:
                    raise CLIError("--heuristic mode needs --dataset")
                dataset = load_dataset(args.data, args.dataset)
                if args.heuristic == "reference":
                    expression = "reference"
                else:
                    from pathlib import Path

                    expression = Path(args.heuristic).read_text().strip()
                from .config import DEFAULT_REFERENCE_RULE

                mean, _ = evaluate_heuristic(
                    expression, dataset.test, args.pf, DEFAULT_REFERENCE_RULE
                )
                print(f"mean test fitness: {mean:.6f}")
            else:
                if not args.exp:
                    raise CLIError("provide --exp (or --heuristic with --dataset)")
                test_experiment(args.results, args.exp, args.data)
        elif args.command == "analyze":
            analyze_experiment(args.results, args.exp)
        elif args.command == "curve":
            curve_experiment(args.results, args.exp, interval_seconds=args.interval_seconds)
    except (CLIError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
