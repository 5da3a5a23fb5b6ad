"""The search loops: multi-space novelty search (with component-masking
ablations), single-space novelty search over the concatenated descriptor,
CVT MAP-Elites, and uniform random search.

All loops evaluate exactly mu + lambda * G genomes for equal configs, log a
per-generation history, and collect every successful individual into the
returned repertoire. Evaluation is a pure function of (genome, environment
config), so the parallel-evaluator degree never changes results.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    BehaviorVector,
    ConfigurationError,
    EvaluationError,
    GenerationRecord,
    Genome,
    Individual,
    Repertoire,
    RngStream,
    RunHistory,
    generate_random_population,
)
from .cvt import CvtGrid, build_cvt, nearest_cells
from .grasp_env import EnvConfig, PlanarArmEnv
from .novelty import (
    NoveltyQueryIndex,
    compute_novelties,
    concat_descriptor,
    concat_spec,
    normalized_concat,
)
from .selection import multi_bc_select, ns_select
from .variation import VariationConfig, make_offspring, select_parents

KIND_NSMBS = "nsmbs"
KIND_NSMBS_NO_BD2 = "nsmbs_no_bd2"
KIND_NSMBS_NO_BD3 = "nsmbs_no_bd3"
KIND_NS_CONCAT = "ns_concat"
KIND_MAP_ELITES = "map_elites"
KIND_RANDOM = "random"
ALGORITHM_KINDS = (
    KIND_NSMBS,
    KIND_NSMBS_NO_BD2,
    KIND_NSMBS_NO_BD3,
    KIND_NS_CONCAT,
    KIND_MAP_ELITES,
    KIND_RANDOM,
)

# Ablations mask one behavior component from eligibility (0-based indices:
# the mid-episode heading component and the touch-position component).
MASKED_COMPONENTS = {
    KIND_NSMBS_NO_BD2: frozenset({1}),
    KIND_NSMBS_NO_BD3: frozenset({2}),
}


@dataclass(frozen=True)
class AlgorithmConfig:
    kind: str = KIND_NSMBS
    mu: int = 100
    lam: int = 50
    generations: int = 1000
    k: int = 15
    archive_add_count: int = 6
    cvt_cells: int = 1000

    def __post_init__(self):
        if self.kind not in ALGORITHM_KINDS:
            raise ConfigurationError(f"unknown algorithm kind {self.kind!r}")
        if self.mu < 1 or self.lam < 1:
            raise ConfigurationError("mu and lambda must be >= 1")
        if self.generations < 0:
            raise ConfigurationError("generations must be >= 0")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.archive_add_count < 0:
            raise ConfigurationError("archive_add_count must be >= 0")
        if self.cvt_cells < 1:
            raise ConfigurationError("cvt_cells must be >= 1")

    @property
    def total_evaluations(self) -> int:
        return self.mu + self.lam * self.generations


class RunAbortedError(RuntimeError):
    """An evaluation failed mid-run; carries the partial outputs so the
    budget ledger and repertoire collected so far can still be flushed."""

    def __init__(self, repertoire, history, reason: str):
        super().__init__(reason)
        self.repertoire = repertoire
        self.history = history
        self.reason = reason


_WORKER_ENV = None


def _init_worker(env_cfg: EnvConfig):
    global _WORKER_ENV
    _WORKER_ENV = PlanarArmEnv(env_cfg)


def _worker_eval(params: np.ndarray):
    return _WORKER_ENV.evaluate(Genome(params))


class Evaluator:
    """Evaluates genome batches, assigning eval ids in submission order.

    With workers > 1 a process pool maps the batch; ordering (and therefore
    every downstream draw) is identical to the serial path.
    """

    def __init__(self, env: PlanarArmEnv, masked=frozenset(), workers: int = 1):
        self.env = env
        self.masked = frozenset(masked)
        self.next_eval_id = 0
        self._pool = None
        if workers > 1:
            self._pool = ProcessPoolExecutor(
                max_workers=workers, initializer=_init_worker, initargs=(env.cfg,)
            )

    def evaluate_batch(self, genomes, generation: int):
        """Returns (individuals, success_count)."""
        if self._pool is None:
            results = [self.env.evaluate(g) for g in genomes]
        else:
            chunk = max(1, len(genomes) // (self._pool._max_workers * 4))
            results = list(
                self._pool.map(_worker_eval, [g.params for g in genomes], chunksize=chunk)
            )
        individuals = []
        successes = 0
        for genome, (behavior, success, quality) in zip(genomes, results):
            if self.masked:
                behavior = BehaviorVector(
                    components=tuple(
                        None if i in self.masked else comp
                        for i, comp in enumerate(behavior.components)
                    )
                )
            # Fresh individuals carry +inf novelty on defined components (the
            # KNN value against an empty reference set) until recomputed.
            novelty = tuple(
                math.inf if comp is not None else None for comp in behavior.components
            )
            individuals.append(
                Individual(
                    genome=genome,
                    behavior=behavior,
                    novelty=novelty,
                    success=success,
                    quality=quality,
                    eval_id=self.next_eval_id,
                    generation_born=generation,
                )
            )
            self.next_eval_id += 1
            successes += int(success)
        return individuals, successes

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def _dedupe(individuals):
    seen = set()
    out = []
    for ind in individuals:
        if ind.eval_id not in seen:
            seen.add(ind.eval_id)
            out.append(ind)
    return out


class _RunState:
    """Bookkeeping shared by all loops: history plus retained individuals."""

    def __init__(self, specs):
        self.specs = specs
        self.history = RunHistory()
        self.retained = {}
        self.archive_ids = set()
        self.success_count = 0

    def record(self, generation, individuals, successes):
        for ind in individuals:
            if ind.success:
                self.retained[ind.eval_id] = ind
        self.success_count += successes
        self.history.append(
            GenerationRecord(
                generation=generation,
                evaluations=len(individuals),
                successes=successes,
                repertoire_size=self.success_count,
            )
        )

    def add_to_archive(self, individuals):
        for ind in individuals:
            self.retained[ind.eval_id] = ind
            self.archive_ids.add(ind.eval_id)

    def repertoire(self) -> Repertoire:
        inds = sorted(self.retained.values(), key=lambda ind: ind.eval_id)
        return Repertoire(
            component_specs=self.specs,
            individuals=inds,
            archived_ids=frozenset(self.archive_ids),
        )


def _run_novelty_loop(
    config: AlgorithmConfig,
    env: PlanarArmEnv,
    rng: RngStream,
    concat: bool,
    variation: VariationConfig,
    workers: int,
):
    masked = MASKED_COMPONENTS.get(config.kind, frozenset())
    evaluator = Evaluator(env, masked=masked, workers=workers)
    rng_init = rng.derive("init")
    rng_parents = rng.derive("parents")
    rng_variation = rng.derive("variation")
    rng_selection = rng.derive("selection")
    rng_archive = rng.derive("archive")
    specs = env.component_specs
    n_b = len(specs)
    cat_spec = concat_spec(specs)
    concat_cache: dict[int, np.ndarray] = {}

    def concat_of(ind):
        vec = concat_cache.get(ind.eval_id)
        if vec is None:
            vec = concat_descriptor(ind.behavior, specs)
            concat_cache[ind.eval_id] = vec
        return vec

    state = _RunState(specs)
    try:
        genomes = generate_random_population(config.mu, env.genome_bounds, rng_init)
        pop, successes = evaluator.evaluate_batch(genomes, generation=0)
        state.record(0, pop, successes)
        archive = []
        for gen in range(1, config.generations + 1):
            parents = select_parents(pop, config.lam, rng_parents)
            child_genomes = make_offspring(
                parents, config.lam, variation, env.genome_bounds, rng_variation
            )
            offspring, successes = evaluator.evaluate_batch(child_genomes, generation=gen)
            candidates = pop + offspring
            refset = _dedupe(candidates + archive)
            if concat:
                ids = np.fromiter((ind.eval_id for ind in refset), dtype=np.int64, count=len(refset))
                points = np.vstack([concat_of(ind) for ind in refset])
                index = NoveltyQueryIndex((cat_spec,), [ids], [points])
                q_ids = np.fromiter(
                    (ind.eval_id for ind in candidates), dtype=np.int64, count=len(candidates)
                )
                q_points = np.vstack([concat_of(ind) for ind in candidates])
                values = index.components[0].mean_knn(q_ids, q_points, config.k)
                for ind, value in zip(candidates, values):
                    ind.novelty = (float(value),)
            else:
                index = NoveltyQueryIndex.from_individuals(refset, specs)
                for ind, nov in zip(candidates, compute_novelties(candidates, index, config.k)):
                    ind.novelty = nov
            if config.archive_add_count > 0:
                take = min(config.archive_add_count, len(offspring))
                picks = rng_archive.choice(len(offspring), size=take, replace=False)
                sampled = [offspring[i] for i in picks]
                archive.extend(sampled)
                state.add_to_archive(sampled)
            if concat:
                pop = ns_select(candidates, config.mu)
            else:
                pop = multi_bc_select(candidates, config.mu, n_b, rng_selection)
            state.record(gen, offspring, successes)
    except EvaluationError as e:
        raise RunAbortedError(state.repertoire(), state.history, str(e)) from e
    finally:
        evaluator.close()
    return state.repertoire(), state.history


def run_nsmbs(
    config: AlgorithmConfig,
    env: PlanarArmEnv,
    rng: RngStream,
    variation: VariationConfig = VariationConfig(),
    workers: int = 1,
):
    """Multi-space novelty search (full or with a masked component)."""
    return _run_novelty_loop(config, env, rng, False, variation, workers)


def run_ns_concat(
    config: AlgorithmConfig,
    env: PlanarArmEnv,
    rng: RngStream,
    variation: VariationConfig = VariationConfig(),
    workers: int = 1,
):
    """Single-space novelty search over the zero-filled concatenation."""
    return _run_novelty_loop(config, env, rng, True, variation, workers)


def place_in_grid(grid: dict, individuals, cvt: CvtGrid, specs):
    """Nearest-centroid placement: a cell keeps the occupant with the higher
    quality; an incumbent survives ties."""
    if not individuals:
        return
    points = np.vstack([normalized_concat(ind.behavior, specs) for ind in individuals])
    cells = nearest_cells(points, cvt)
    for ind, cell in zip(individuals, cells):
        cell = int(cell)
        occupant = grid.get(cell)
        if occupant is None or ind.quality > occupant.quality:
            grid[cell] = ind


def run_map_elites(
    config: AlgorithmConfig,
    env: PlanarArmEnv,
    cvt: CvtGrid,
    rng: RngStream,
    variation: VariationConfig = VariationConfig(),
    workers: int = 1,
):
    """CVT MAP-Elites over the concatenated descriptor; each cell keeps the
    occupant with the higher energetic quality."""
    evaluator = Evaluator(env, workers=workers)
    rng_init = rng.derive("init")
    rng_parents = rng.derive("parents")
    rng_variation = rng.derive("variation")
    specs = env.component_specs
    state = _RunState(specs)
    grid: dict[int, Individual] = {}

    def place(individuals):
        place_in_grid(grid, individuals, cvt, specs)

    try:
        genomes = generate_random_population(config.mu, env.genome_bounds, rng_init)
        pop, successes = evaluator.evaluate_batch(genomes, generation=0)
        place(pop)
        state.record(0, pop, successes)
        for gen in range(1, config.generations + 1):
            cells = sorted(grid.keys())
            picks = rng_parents.integers(0, len(cells), size=config.lam)
            parents = [grid[cells[i]] for i in picks]
            child_genomes = make_offspring(
                parents, config.lam, variation, env.genome_bounds, rng_variation
            )
            offspring, successes = evaluator.evaluate_batch(child_genomes, generation=gen)
            place(offspring)
            state.record(gen, offspring, successes)
    except EvaluationError as e:
        raise RunAbortedError(state.repertoire(), state.history, str(e)) from e
    finally:
        evaluator.close()
    return state.repertoire(), state.history


def run_random(
    config: AlgorithmConfig,
    env: PlanarArmEnv,
    rng: RngStream,
    workers: int = 1,
):
    """Uniform random sampling of policy space at the same evaluation budget."""
    evaluator = Evaluator(env, workers=workers)
    rng_init = rng.derive("init")
    state = _RunState(env.component_specs)
    try:
        for gen in range(0, config.generations + 1):
            batch = config.mu if gen == 0 else config.lam
            genomes = generate_random_population(batch, env.genome_bounds, rng_init)
            individuals, successes = evaluator.evaluate_batch(genomes, generation=gen)
            state.record(gen, individuals, successes)
    except EvaluationError as e:
        raise RunAbortedError(state.repertoire(), state.history, str(e)) from e
    finally:
        evaluator.close()
    return state.repertoire(), state.history


def run_algorithm(
    config: AlgorithmConfig,
    env: PlanarArmEnv,
    rng: RngStream,
    variation: VariationConfig = VariationConfig(),
    workers: int = 1,
    cvt: CvtGrid | None = None,
):
    """Dispatch on config.kind. MAP-Elites builds its grid from the run's
    cvt stream unless one is supplied (campaigns share a cached grid)."""
    if config.kind in (KIND_NSMBS, KIND_NSMBS_NO_BD2, KIND_NSMBS_NO_BD3):
        return run_nsmbs(config, env, rng, variation, workers)
    if config.kind == KIND_NS_CONCAT:
        return run_ns_concat(config, env, rng, variation, workers)
    if config.kind == KIND_MAP_ELITES:
        if cvt is None:
            dim = sum(s.dim for s in env.component_specs)
            cvt = build_cvt(config.cvt_cells, dim, rng.derive("cvt"))
        return run_map_elites(config, env, cvt, rng, variation, workers)
    if config.kind == KIND_RANDOM:
        return run_random(config, env, rng, workers)
    raise ConfigurationError(f"unknown algorithm kind {config.kind!r}")
