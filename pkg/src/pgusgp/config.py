"""Run configuration dataclasses and defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, asdict

from .errors import ParameterError

ALGORITHMS = ("GP", "SGP_PC", "PGU_SGP")

WORKERS_ENV_VAR = "PGUSGP_WORKERS"


@dataclass(frozen=True)
class ReferenceRuleWeights:
    """Coefficients of the fixed expert dispatching rule.

    score = travel*TT + waiting*SNWTN + bound*CTN + remaining*RTN, all on a
    seconds scale; lower scores win. Kept as named constants so result files
    are self-describing.
    """

    travel: float = 1.0
    waiting: float = 30.0
    bound: float = 10.0
    remaining: float = -5.0


DEFAULT_REFERENCE_RULE = ReferenceRuleWeights()


@dataclass(frozen=True)
class PGUConfig:
    """Weights and threshold of the unified distance."""

    wp: float = 0.5
    wg: float = 0.5
    delta: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 <= self.wp <= 1.0 and 0.0 <= self.wg <= 1.0):
            raise ParameterError(f"weights must lie in [0,1], got wp={self.wp} wg={self.wg}")
        if abs(self.wp + self.wg - 1.0) > 1e-12:
            raise ParameterError(f"weights must sum to 1, got {self.wp + self.wg}")
        if self.delta < 0.0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")


def resolve_workers(explicit: int | None = None) -> int:
    """Worker count for true-fitness evaluation; env override only."""
    if explicit is not None:
        return max(1, explicit)
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ParameterError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from exc


@dataclass
class AlgorithmConfig:
    """Everything a single evolution run needs to know."""

    algorithm: str = "PGU_SGP"
    wp: float = 0.5
    wg: float = 0.5
    delta: float = 0.1
    population_size: int = 500
    max_generations: int = 50
    tournament_k: int = 5
    elites: int = 10
    crossover_rate: float = 0.8
    mutation_rate: float = 0.15
    reproduction_rate: float = 0.05
    pf: float = 1e-7
    pcs: int = 40
    candidate_cap: int = 10
    init_min_depth: int = 2
    init_max_depth: int = 6
    max_depth: int = 10
    wall_minutes: float | None = None  # set -> time budget instead of generations
    probe_interval: int | None = None  # surrogate-quality probes every N generations
    train_limit: int | None = None  # evaluate on a prefix of the train split
    workers: int | None = None  # None -> env override / serial
    reference_rule: ReferenceRuleWeights = field(default_factory=ReferenceRuleWeights)

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        rates = self.crossover_rate + self.mutation_rate + self.reproduction_rate
        if abs(rates - 1.0) > 1e-9:
            raise ParameterError(f"operator rates must sum to 1, got {rates}")
        if min(self.crossover_rate, self.mutation_rate, self.reproduction_rate) < 0:
            raise ParameterError("operator rates must be nonnegative")
        if self.population_size < 1:
            raise ParameterError(f"population_size must be >= 1, got {self.population_size}")
        if self.max_generations < 1:
            raise ParameterError(f"max_generations must be >= 1, got {self.max_generations}")
        if self.elites < 0 or self.elites > self.population_size:
            raise ParameterError(f"elites must lie in [0, population_size], got {self.elites}")
        if self.tournament_k < 1:
            raise ParameterError(f"tournament_k must be >= 1, got {self.tournament_k}")
        if self.pcs < 1:
            raise ParameterError(f"pcs must be >= 1, got {self.pcs}")
        if self.candidate_cap < 2:
            raise ParameterError(f"candidate_cap must be >= 2, got {self.candidate_cap}")
        if not 1 <= self.init_min_depth <= self.init_max_depth <= self.max_depth:
            raise ParameterError("initial depth bounds must satisfy 1 <= min <= max <= max_depth")
        if self.wall_minutes is not None and self.wall_minutes <= 0:
            raise ParameterError(f"wall_minutes must be > 0, got {self.wall_minutes}")
        if self.probe_interval is not None and self.probe_interval < 1:
            raise ParameterError(f"probe_interval must be >= 1, got {self.probe_interval}")
        self.pgu()  # validates weights/delta

    def pgu(self) -> PGUConfig:
        return PGUConfig(wp=self.wp, wg=self.wg, delta=self.delta)

    @property
    def uses_surrogate(self) -> bool:
        return self.algorithm in ("SGP_PC", "PGU_SGP")

    def label(self) -> str:
        """Directory- and CSV-friendly identifier of this configuration."""
        if self.algorithm == "PGU_SGP":
            return f"PGU_SGP_{self.wp:g}_{self.wg:g}"
        return self.algorithm

    def snapshot(self) -> dict:
        """Plain-data view for result files."""
        data = asdict(self)
        data["reference_rule"] = asdict(self.reference_rule)
        return data
