"""Population initialization, variation operators and selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ParameterError
from .trees import Code, Individual, full_tree, grow_tree, node_depths, subtree_span, tree_depth

MAX_TREE_DEPTH = 10
CROSSOVER_RETRIES = 10

RngLike = "np.random.Generator | int | np.random.SeedSequence"


def as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def init_population(
    size: int,
    min_depth: int,
    max_depth: int,
    rng: RngLike,
    birth_gen: int = 0,
) -> list[Individual]:
    """Ramped half-and-half: depth levels cycle, alternating grow and full."""
    if not 1 <= min_depth <= max_depth <= MAX_TREE_DEPTH:
        raise ParameterError(
            f"depth bounds must satisfy 1 <= min ({min_depth}) <= max ({max_depth}) <= {MAX_TREE_DEPTH}"
        )
    if size < 1:
        raise ParameterError(f"population size must be >= 1, got {size}")
    gen = as_rng(rng)
    combos = [
        (depth, method)
        for depth in range(min_depth, max_depth + 1)
        for method in ("grow", "full")
    ]
    population = []
    for i in range(size):
        depth, method = combos[i % len(combos)]
        if method == "grow":
            code = grow_tree(gen, min_depth, depth)
        else:
            code = full_tree(gen, depth)
        population.append(Individual(code=code, birth_gen=birth_gen))
    return population


def crossover(
    a: Individual,
    b: Individual,
    rng: RngLike,
    max_depth: int = MAX_TREE_DEPTH,
    retries: int = CROSSOVER_RETRIES,
) -> tuple[Individual, Individual]:
    """Subtree exchange at uniformly chosen nodes.

    Offspring deeper than ``max_depth`` trigger a fresh node pick; once the
    retry budget is spent the parents are passed through unchanged.
    """
    gen = as_rng(rng)
    for _ in range(retries + 1):
        i = int(gen.integers(len(a.code)))
        j = int(gen.integers(len(b.code)))
        ia, ib = subtree_span(a.code, i)
        ja, jb = subtree_span(b.code, j)
        child_a = a.code[:ia] + b.code[ja:jb] + a.code[ib:]
        child_b = b.code[:ja] + a.code[ia:ib] + b.code[jb:]
        if tree_depth(child_a) <= max_depth and tree_depth(child_b) <= max_depth:
            return (
                Individual(code=child_a, birth_gen=a.birth_gen),
                Individual(code=child_b, birth_gen=b.birth_gen),
            )
    return a.clone(), b.clone()


def mutate(
    a: Individual,
    rng: RngLike,
    max_depth: int = MAX_TREE_DEPTH,
) -> Individual:
    """Replace a uniformly chosen subtree with a grown one that fits the bound."""
    gen = as_rng(rng)
    i = int(gen.integers(len(a.code)))
    start, end = subtree_span(a.code, i)
    budget = max_depth - node_depths(a.code)[i]
    replacement = grow_tree(gen, 0, budget)
    code = a.code[:start] + replacement + a.code[end:]
    return Individual(code=code, birth_gen=a.birth_gen)


def tournament_select(
    population: list[Individual],
    k: int,
    rng: RngLike,
) -> Individual:
    """Best of ``k`` sampled with replacement; fitness is maximized.

    Ties resolve to the smaller tree, then the lower population index.
    """
    if k < 1:
        raise ParameterError(f"tournament size must be >= 1, got {k}")
    gen = as_rng(rng)
    picks = gen.integers(len(population), size=k)
    best_idx = -1
    best_key: tuple[float, int, int] | None = None
    for p in picks:
        ind = population[p]
        if ind.fitness is None:
            raise ContractError(f"tournament contestant {p} has no fitness")
        key = (ind.fitness.value, -ind.size, -int(p))
        if best_key is None or key > best_key:
            best_key = key
            best_idx = int(p)
    return population[best_idx]


@dataclass
class BreedStats:
    crossover_children: int = 0
    mutation_children: int = 0
    reproduction_children: int = 0
    elite_copies: int = 0


def select_elites(population: list[Individual], count: int) -> list[Individual]:
    """Top individuals among those with true fitness, best first."""
    ranked = sorted(
        (
            (idx, ind)
            for idx, ind in enumerate(population)
            if ind.fitness is not None and ind.fitness.kind == "true"
        ),
        key=lambda pair: (-pair[1].fitness.value, pair[1].size, pair[0]),
    )
    return [ind for _, ind in ranked[:count]]


def breed(
    population: list[Individual],
    rng: RngLike,
    next_gen: int,
    *,
    population_size: int | None = None,
    elites: int = 10,
    tournament_k: int = 5,
    crossover_rate: float = 0.8,
    mutation_rate: float = 0.15,
    max_depth: int = MAX_TREE_DEPTH,
) -> tuple[list[Individual], BreedStats]:
    """Produce the next generation: true-fitness elites plus rated offspring.

    One breeding event yields one child (crossover keeps its first offspring),
    so offspring counts follow the configured rates directly. Children whose
    tree equals a parent's inherit that parent's true fitness record.
    """
    gen = as_rng(rng)
    size = population_size if population_size is not None else len(population)
    stats = BreedStats()

    children: list[Individual] = [e.clone() for e in select_elites(population, elites)]
    stats.elite_copies = len(children)

    def inherit(child: Individual, *parents: Individual) -> Individual:
        if child.fitness is None:
            for parent in parents:
                if (
                    parent.fitness is not None
                    and parent.fitness.kind == "true"
                    and child.code == parent.code
                ):
                    child.fitness = parent.fitness
                    child.birth_gen = parent.birth_gen
                    break
        return child

    while len(children) < size:
        r = gen.random()
        if r < crossover_rate:
            p1 = tournament_select(population, tournament_k, gen)
            p2 = tournament_select(population, tournament_k, gen)
            child, _ = crossover(p1, p2, gen, max_depth=max_depth)
            child.birth_gen = next_gen
            child.fitness = None
            children.append(inherit(child, p1, p2))
            stats.crossover_children += 1
        elif r < crossover_rate + mutation_rate:
            p = tournament_select(population, tournament_k, gen)
            child = mutate(p, gen, max_depth=max_depth)
            child.birth_gen = next_gen
            child.fitness = None
            children.append(inherit(child, p))
            stats.mutation_children += 1
        else:
            p = tournament_select(population, tournament_k, gen)
            child = p.clone()
            if child.fitness is not None and child.fitness.kind != "true":
                child.fitness = None  # estimates are never carried forward
            children.append(child)
            stats.reproduction_children += 1
    return children, stats
