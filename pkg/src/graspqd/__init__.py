"""Quality-diversity search for grasp repertoires with multiple behavior spaces."""

from .algorithms import (
    ALGORITHM_KINDS,
    AlgorithmConfig,
    RunAbortedError,
    run_algorithm,
    run_map_elites,
    run_ns_concat,
    run_nsmbs,
    run_random,
)
from .core import (
    BehaviorComponentSpec,
    BehaviorVector,
    Bounds,
    ConfigurationError,
    EvaluationBudgetLedger,
    EvaluationError,
    GenerationRecord,
    Genome,
    Individual,
    Repertoire,
    RngStream,
    RunHistory,
    generate_random_population,
)
from .cvt import CvtGrid, build_cvt, nearest_cell
from .grasp_env import EnvConfig, PlanarArmEnv
from .metrics import (
    coverage,
    first_success_generation,
    sample_efficiency,
    successful_run_rate,
)
from .novelty import NoveltyQueryIndex, component_distance, knn_novelty
from .selection import multi_bc_select, ns_select
from .variation import VariationConfig, crossover, make_offspring, mutate, select_parents

__version__ = "0.1.0"
