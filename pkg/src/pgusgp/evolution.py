"""Fitness evaluation and the generational loop for all three algorithms.

Fitness is the mean relative objective deviation from the reference rule over
the training instances, minus a small tree-size penalty; larger is better.
The surrogate variants replace full evaluation with a three-stage step:
group the population, truly evaluate one representative per group, and
predict the rest from the 1-NN archive.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .config import AlgorithmConfig, PGUConfig, ReferenceRuleWeights, resolve_workers
from .errors import ContractError, DatasetError, ParameterError
from .instances import Dataset, Instance
from .metrics import pearson_fitness_correlation
from .operators import breed, init_population
from .simulator import reference_rule, run_simulation
from .surrogate import (
    ArchiveSample,
    SurrogateArchive,
    compute_gc,
    compute_normalizers,
    compute_pc,
    cluster_complete_linkage,
    pgu_matrix,
    sample_decision_situations,
    select_representative,
)
from .trees import Code, FitnessRecord, Individual, format_sexpr, tree_rule

REPORT_SCHEMA = 1


def reference_objectives(
    instances: list[Instance],
    weights: ReferenceRuleWeights,
) -> list[float]:
    """Throughput of the reference rule per instance; the fitness baseline."""
    rule = lambda f: reference_rule(f, weights)  # noqa: E731
    objectives = []
    for i, instance in enumerate(instances):
        value = run_simulation(instance, rule).objective
        if value <= 0.0:
            raise DatasetError(f"instance {i} has non-positive reference objective {value}")
        objectives.append(value)
    return objectives


def ard_fitness(
    ind: Individual | Code,
    instances: list[Instance],
    ref_objectives: list[float],
    pf: float,
) -> float:
    """Mean relative deviation from the reference minus pf * tree size."""
    code = ind.code if isinstance(ind, Individual) else ind
    if len(instances) != len(ref_objectives):
        raise ContractError("instances and reference objectives differ in length")
    rule = tree_rule(code)
    deviation = 0.0
    for instance, ref in zip(instances, ref_objectives):
        deviation += (run_simulation(instance, rule).objective - ref) / ref
    return deviation / len(instances) - pf * len(code)


# -- parallel true evaluation ------------------------------------------------

_WORKER_CTX: dict = {}


def _init_worker(instances: list[Instance], ref_objectives: list[float], pf: float) -> None:
    _WORKER_CTX["args"] = (instances, ref_objectives, pf)


def _worker_eval(code: Code) -> float:
    instances, ref_objectives, pf = _WORKER_CTX["args"]
    return ard_fitness(code, instances, ref_objectives, pf)


def evaluate_true_fitness(
    codes: list[Code],
    instances: list[Instance],
    ref_objectives: list[float],
    pf: float,
    workers: int = 1,
) -> list[float]:
    """Fitness per tree; results are ordered by input index, so the outcome is
    identical for any worker count."""
    if workers <= 1 or len(codes) <= 1:
        return [ard_fitness(code, instances, ref_objectives, pf) for code in codes]
    with ProcessPoolExecutor(
        max_workers=min(workers, len(codes)),
        initializer=_init_worker,
        initargs=(instances, ref_objectives, pf),
    ) as pool:
        return list(pool.map(_worker_eval, codes, chunksize=max(1, len(codes) // (workers * 4))))


# -- per-generation bookkeeping ----------------------------------------------

@dataclass
class GenerationStats:
    generation: int
    clusters: int | None
    true_evaluations: int
    estimated: int
    reused_true: int
    simulations: int
    best_fitness: float
    mean_fitness: float
    archive_size: int
    elapsed_seconds: float
    best_expression: str
    probe_rho: float | None = None
    probe_size: int | None = None
    probe_note: str | None = None
    crossover_children: int = 0
    mutation_children: int = 0
    reproduction_children: int = 0
    elite_copies: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    algorithm: str
    label: str
    dataset_id: int
    seed: int
    config: dict
    train_count: int
    reference_simulations: int
    total_simulations: int
    probe_simulations: int
    wall_seconds: float
    best_expression: str
    best_fitness: float
    generations: list[GenerationStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "algorithm": self.algorithm,
            "label": self.label,
            "dataset": self.dataset_id,
            "seed": self.seed,
            "config": self.config,
            "train_count": self.train_count,
            "reference_simulations": self.reference_simulations,
            "total_simulations": self.total_simulations,
            "probe_simulations": self.probe_simulations,
            "wall_seconds": self.wall_seconds,
            "best": {"expression": self.best_expression, "fitness": self.best_fitness},
            "generations": [g.to_dict() for g in self.generations],
        }

    def deterministic_dict(self) -> dict:
        """Report content with wall-time fields stripped, for equality checks."""
        data = self.to_dict()
        data.pop("wall_seconds")
        for row in data["generations"]:
            row.pop("elapsed_seconds")
        return data

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "RunReport":
        data = yaml.safe_load(Path(path).read_text())
        if not isinstance(data, dict) or data.get("schema") != REPORT_SCHEMA:
            raise ParameterError(f"{path}: not a run report")
        rows = [GenerationStats(**row) for row in data["generations"]]
        return cls(
            algorithm=data["algorithm"],
            label=data["label"],
            dataset_id=data["dataset"],
            seed=data["seed"],
            config=data["config"],
            train_count=data["train_count"],
            reference_simulations=data["reference_simulations"],
            total_simulations=data["total_simulations"],
            probe_simulations=data["probe_simulations"],
            wall_seconds=data["wall_seconds"],
            best_expression=data["best"]["expression"],
            best_fitness=data["best"]["fitness"],
            generations=rows,
        )


# -- the loop ------------------------------------------------------------------

class EvolutionRun:
    """Owns the state of one training run; see :func:`run_evolution`."""

    def __init__(self, cfg: AlgorithmConfig, dataset: Dataset, master_seed: int):
        self.cfg = cfg
        self.dataset = dataset
        self.master_seed = int(master_seed)
        self.train = dataset.train[: cfg.train_limit] if cfg.train_limit else dataset.train
        if not self.train:
            raise ParameterError("dataset has no training instances")
        self.workers = resolve_workers(cfg.workers)

        ss = np.random.SeedSequence(self.master_seed)
        init_ss, situations_ss, self._breed_ss = ss.spawn(3)
        self._init_rng = np.random.default_rng(init_ss)
        self._situations_rng = np.random.default_rng(situations_ss)

        self.ref_objectives = reference_objectives(self.train, cfg.reference_rule)
        self.reference_simulations = len(self.train)
        self.situations = None
        if cfg.uses_surrogate:
            self.situations = sample_decision_situations(
                self.train,
                lambda f: reference_rule(f, cfg.reference_rule),
                pcs=cfg.pcs,
                cap=cfg.candidate_cap,
                rng=self._situations_rng,
            )
            self.reference_simulations += len(self.train)
        self.archive = SurrogateArchive()
        self.probe_simulations = 0
        self.best_individual: Individual | None = None
        self.best_fitness = -np.inf

    # -- helpers -------------------------------------------------------------

    def _pgu_config(self) -> PGUConfig:
        if self.cfg.algorithm == "SGP_PC":
            return PGUConfig(wp=1.0, wg=0.0, delta=self.cfg.delta)
        return self.cfg.pgu()

    def _true_evaluate(self, individuals: list[Individual]) -> list[float]:
        values = evaluate_true_fitness(
            [ind.code for ind in individuals],
            self.train,
            self.ref_objectives,
            self.cfg.pf,
            workers=self.workers,
        )
        cost = len(self.train)
        for ind, value in zip(individuals, values):
            ind.fitness = FitnessRecord(value=value, kind="true", eval_simulations=cost)
            if value > self.best_fitness:
                self.best_fitness = value
                self.best_individual = ind.clone()
        return values

    def _group_population(
        self, population: list[Individual], pc_rows: np.ndarray, gc_rows: np.ndarray,
        normalizers,
    ) -> tuple[list[tuple[int, ...]], list[int]]:
        """Clusters plus one representative index per cluster."""
        sizes = [ind.size for ind in population]
        if self.cfg.algorithm == "SGP_PC":
            groups: dict[bytes, list[int]] = {}
            for i, pc in enumerate(pc_rows):
                groups.setdefault(pc.tobytes(), []).append(i)
            clusters = [tuple(members) for members in groups.values()]
            reps = [min(members, key=lambda i: (sizes[i], i)) for members in clusters]
            return clusters, reps
        matrix = pgu_matrix(pc_rows, gc_rows, self._pgu_config(), normalizers)
        clusters = cluster_complete_linkage(matrix, self.cfg.delta)
        reps = [select_representative(c, matrix, sizes) for c in clusters]
        return clusters, reps

    def _probe(self, predicted: list[Individual], predicted_values: list[float],
               stats: GenerationStats) -> None:
        """True-evaluate the estimation group for metrics only."""
        if len(predicted) < 2:
            stats.probe_note = "skipped: fewer than 2 predictions"
            return
        true_values = evaluate_true_fitness(
            [ind.code for ind in predicted],
            self.train,
            self.ref_objectives,
            self.cfg.pf,
            workers=self.workers,
        )
        self.probe_simulations += len(predicted) * len(self.train)
        stats.probe_size = len(predicted)
        if predicted_values == true_values:
            stats.probe_rho = 1.0  # perfect agreement; correlation formula would be 0/0
            return
        if len(set(predicted_values)) < 2 or len(set(true_values)) < 2:
            stats.probe_note = "skipped: zero variance"
            return
        stats.probe_rho = float(pearson_fitness_correlation(predicted_values, true_values))

    # -- generation steps ------------------------------------------------------

    def evaluate_generation(self, population: list[Individual], generation: int,
                            probe: bool = False) -> GenerationStats:
        if self.cfg.algorithm == "GP":
            self._true_evaluate(population)
            stats = GenerationStats(
                generation=generation,
                clusters=None,
                true_evaluations=len(population),
                estimated=0,
                reused_true=0,
                simulations=len(population) * len(self.train),
                best_fitness=self.best_fitness,
                mean_fitness=float(np.mean([ind.fitness.value for ind in population])),
                archive_size=0,
                elapsed_seconds=0.0,
                best_expression=format_sexpr(self.best_individual.code),
            )
            return stats
        return self._surrogate_generation(population, generation, probe)

    def _surrogate_generation(self, population: list[Individual], generation: int,
                              probe: bool) -> GenerationStats:
        cfg = self.cfg
        pgu_cfg = self._pgu_config()
        pc_rows = np.asarray([compute_pc(ind, self.situations) for ind in population], dtype=float)
        gc_rows = np.asarray([compute_gc(ind) for ind in population], dtype=float)

        if len(self.archive):
            union_pc = np.concatenate([pc_rows, self.archive.pc_rows()])
            union_gc = np.concatenate([gc_rows, self.archive.gc_rows()])
        else:
            union_pc, union_gc = pc_rows, gc_rows
        normalizers = compute_normalizers(union_pc, union_gc)

        clusters, rep_indices = self._group_population(population, pc_rows, gc_rows, normalizers)
        rep_set = set(rep_indices)
        representatives = [population[i] for i in rep_indices]

        self._true_evaluate(representatives)
        new_samples = [
            ArchiveSample(
                pc=pc_rows[i].astype(np.int64),
                gc=gc_rows[i],
                fitness=population[i].fitness.value,
                birth_gen=generation,
                expression=format_sexpr(population[i].code),
            )
            for i in rep_indices
        ]
        self.archive.update(new_samples, pgu_cfg, normalizers)

        if len(population) > len(rep_indices) and not len(self.archive):
            raise ContractError("archive empty although representatives were evaluated")

        predicted: list[Individual] = []
        predicted_values: list[float] = []
        reused = 0
        for i, ind in enumerate(population):
            if i in rep_set:
                continue
            if ind.fitness is not None and ind.fitness.kind == "true":
                reused += 1  # prior true fitness is kept, not re-predicted
                continue
            value, _ = self.archive.predict(pc_rows[i], gc_rows[i], pgu_cfg, normalizers)
            ind.fitness = FitnessRecord(value=value, kind="estimated", eval_simulations=0)
            predicted.append(ind)
            predicted_values.append(value)

        stats = GenerationStats(
            generation=generation,
            clusters=len(clusters),
            true_evaluations=len(representatives),
            estimated=len(predicted),
            reused_true=reused,
            simulations=len(representatives) * len(self.train),
            best_fitness=self.best_fitness,
            mean_fitness=float(np.mean([ind.fitness.value for ind in population])),
            archive_size=len(self.archive),
            elapsed_seconds=0.0,
            best_expression=format_sexpr(self.best_individual.code),
        )
        if probe:
            self._probe(predicted, predicted_values, stats)
        return stats

    # -- full run ---------------------------------------------------------------

    def run(self) -> RunReport:
        cfg = self.cfg
        start = time.monotonic()
        population = init_population(
            cfg.population_size, cfg.init_min_depth, cfg.init_max_depth,
            self._init_rng, birth_gen=0,
        )
        rows: list[GenerationStats] = []
        pending_breed = None
        generation = 0
        while True:
            probe = (
                cfg.probe_interval is not None
                and cfg.uses_surrogate
                and (generation + 1) % cfg.probe_interval == 0
            )
            stats = self.evaluate_generation(population, generation, probe=probe)
            if pending_breed is not None:
                stats.crossover_children = pending_breed.crossover_children
                stats.mutation_children = pending_breed.mutation_children
                stats.reproduction_children = pending_breed.reproduction_children
                stats.elite_copies = pending_breed.elite_copies
            stats.elapsed_seconds = time.monotonic() - start
            rows.append(stats)

            generation += 1
            if generation >= cfg.max_generations:
                break
            if cfg.wall_minutes is not None and (time.monotonic() - start) >= cfg.wall_minutes * 60.0:
                break
            population, pending_breed = breed(
                population,
                np.random.default_rng(self._breed_ss.spawn(1)[0]),
                next_gen=generation,
                population_size=cfg.population_size,
                elites=cfg.elites,
                tournament_k=cfg.tournament_k,
                crossover_rate=cfg.crossover_rate,
                mutation_rate=cfg.mutation_rate,
                max_depth=cfg.max_depth,
            )

        total = sum(r.simulations for r in rows) + self.reference_simulations
        return RunReport(
            algorithm=cfg.algorithm,
            label=cfg.label(),
            dataset_id=self.dataset.id,
            seed=self.master_seed,
            config=cfg.snapshot(),
            train_count=len(self.train),
            reference_simulations=self.reference_simulations,
            total_simulations=total,
            probe_simulations=self.probe_simulations,
            wall_seconds=time.monotonic() - start,
            best_expression=format_sexpr(self.best_individual.code),
            best_fitness=float(self.best_fitness),
            generations=rows,
        )


def run_evolution(cfg: AlgorithmConfig, dataset: Dataset, master_seed: int) -> RunReport:
    """Train one configuration on one dataset with one seed."""
    return EvolutionRun(cfg, dataset, master_seed).run()


def run_generation_pgu(
    population: list[Individual],
    archive: SurrogateArchive,
    situations,
    cfg: AlgorithmConfig,
    dataset: Dataset,
    master_seed: int = 0,
    generation: int = 0,
) -> tuple[list[Individual], SurrogateArchive, GenerationStats]:
    """One standalone surrogate evaluation step (mainly for tests and analysis)."""
    run = EvolutionRun(cfg, dataset, master_seed)
    run.archive = archive
    if situations is not None:
        run.situations = situations
    stats = run.evaluate_generation(population, generation)
    return population, run.archive, stats
