"""Surrogate-assisted genetic programming for container-terminal truck dispatching."""

from .config import (
    ALGORITHMS,
    AlgorithmConfig,
    DEFAULT_REFERENCE_RULE,
    PGUConfig,
    ReferenceRuleWeights,
)
from .errors import (
    CLIError,
    ContractError,
    DatasetError,
    EmptyArchiveError,
    ParameterError,
    SimulationError,
    UndefinedCorrelationError,
)
from .evolution import (
    EvolutionRun,
    GenerationStats,
    RunReport,
    ard_fitness,
    reference_objectives,
    run_evolution,
    run_generation_pgu,
)
from .instances import (
    Dataset,
    DatasetParams,
    GeneratorParams,
    Instance,
    Task,
    TerminalMap,
    generate_dataset,
    generate_instance,
    load_dataset,
    load_instance,
    save_instance,
)
from .metrics import WilcoxonResult, average_ranks, pearson_fitness_correlation, wilcoxon_rank_sum
from .operators import crossover, init_population, mutate, tournament_select
from .simulator import FeatureVector, SimResult, Simulation, reference_rule, run_simulation
from .surrogate import (
    ArchiveSample,
    DecisionSituation,
    Normalizers,
    SurrogateArchive,
    cluster_complete_linkage,
    compute_gc,
    compute_normalizers,
    compute_pc,
    gd,
    pd,
    pgu_matrix,
    sample_decision_situations,
    select_representative,
)
from .trees import (
    FitnessRecord,
    Individual,
    SCORE_SENTINEL,
    evaluate_tree,
    format_sexpr,
    parse_sexpr,
    tree_rule,
)

__version__ = "0.1.0"
