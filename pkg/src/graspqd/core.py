"""Shared domain types: genomes, behavior vectors, individuals, run bookkeeping.

Behavior component values are stored in raw physical units; normalization to
[0, 1] per dimension happens inside distance and coverage computations using
the declared component bounds.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

MASK64 = (1 << 64) - 1

METRIC_EUCLIDEAN = "euclidean"
METRIC_WRAPPED_ANGLE = "wrapped-angle"


class ConfigurationError(ValueError):
    """Raised for invalid configuration values (bad bounds, dims, params)."""


class EvaluationError(RuntimeError):
    """Raised when a rollout cannot be evaluated (non-finite state)."""


def wrap_angle(theta):
    """Wrap an angle (or array of angles) to (-pi, pi]."""
    return -((-np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi)


class RngStream:
    """Deterministic, labeled random stream.

    The same (seed, label, call sequence) yields the same draws on every run
    and platform. Sub-streams derived with distinct labels are statistically
    independent, so adding draws in one subsystem never shifts another's
    sequence.
    """

    def __init__(self, seed: int, label: str = "root"):
        self.seed = int(seed) & MASK64
        self.label = label
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        entropy = [int.from_bytes(digest[i:i + 8], "little") for i in range(0, 32, 8)]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def derive(self, label: str) -> "RngStream":
        """Child stream addressed by an extended label path."""
        return RngStream(self.seed, f"{self.label}/{label}")

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        return getattr(self._gen, name)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"


@dataclass(frozen=True, eq=False)
class Bounds:
    """Per-coordinate closed intervals [lower_j, upper_j]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigurationError(f"bound arrays must be 1-D and same shape, got {lo.shape} / {hi.shape}")
        if not np.all(lo < hi):
            raise ConfigurationError("degenerate bounds: every lower must be < upper")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, lo: float, hi: float, dim: int) -> "Bounds":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, values) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))

    def clip(self, values) -> np.ndarray:
        return np.clip(np.asarray(values, dtype=float), self.lower, self.upper)

    def normalize(self, values) -> np.ndarray:
        """Map values into [0, 1] per dimension (input assumed within bounds)."""
        return (np.asarray(values, dtype=float) - self.lower) / self.span

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        """n i.i.d. uniform points, shape (n, dim)."""
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))


@dataclass(frozen=True, eq=False)
class Genome:
    """Flat real-valued policy parameter vector."""

    params: np.ndarray

    def __post_init__(self):
        p = np.array(self.params, dtype=float, copy=True)
        if p.ndim != 1:
            raise ConfigurationError(f"genome must be a flat vector, got shape {p.shape}")
        p.flags.writeable = False
        object.__setattr__(self, "params", p)

    def __len__(self):
        return self.params.size


@dataclass(frozen=True, eq=False)
class BehaviorComponentSpec:
    """Declaration of one behavior component space.

    bounds are used both for normalization inside distance computations and
    for coverage grids. The wrapped-angle metric is reserved for scalar
    orientation components.
    """

    index: int
    dim: int
    metric: str
    bounds: Bounds

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("component dim must be positive")
        if self.metric not in (METRIC_EUCLIDEAN, METRIC_WRAPPED_ANGLE):
            raise ConfigurationError(f"unknown metric {self.metric!r}")
        if self.metric == METRIC_WRAPPED_ANGLE and self.dim != 1:
            raise ConfigurationError("wrapped-angle metric only applies to scalar orientation components")
        if self.bounds.dim != self.dim:
            raise ConfigurationError("bounds dimension does not match component dim")


def validate_component_specs(specs) -> tuple[BehaviorComponentSpec, ...]:
    """Check that spec indices are dense and unique: 0..n_b-1."""
    specs = tuple(specs)
    if sorted(s.index for s in specs) != list(range(len(specs))):
        raise ConfigurationError("component indices must be dense and unique 0..n_b-1")
    return tuple(sorted(specs, key=lambda s: s.index))


@dataclass(frozen=True, eq=False)
class BehaviorVector:
    """Per-component behavior of one rollout; None marks an ineligible component."""

    components: tuple

    def __post_init__(self):
        comps = []
        for c in self.components:
            if c is None:
                comps.append(None)
            else:
                a = np.atleast_1d(np.asarray(c, dtype=float))
                a.flags.writeable = False
                comps.append(a)
        object.__setattr__(self, "components", tuple(comps))

    def defined(self, i: int) -> bool:
        return self.components[i] is not None

    @property
    def n_components(self) -> int:
        return len(self.components)


@dataclass(eq=False)
class Individual:
    """An evaluated policy: genome, behavior, per-component novelty, outcome flags.

    novelty[i] is None exactly when behavior component i is undefined; the
    tuple is reassigned whole each time novelty is recomputed. quality is the
    energetic criterion (negated joint displacement energy; higher is better)
    and is always filled so exports stay algorithm-agnostic.
    """

    genome: Genome
    behavior: BehaviorVector
    novelty: tuple
    success: bool
    quality: float
    eval_id: int
    generation_born: int

    def check_novelty_coupling(self):
        """Definedness coupling: novelty[i] is None iff component i is None."""
        if len(self.novelty) != self.behavior.n_components:
            return False
        return all(
            (n is None) == (c is None)
            for n, c in zip(self.novelty, self.behavior.components)
        )


@dataclass
class EvaluationBudgetLedger:
    """Counts of evaluations and successful grasps, per generation and total."""

    total_evaluations: int = 0
    successful_evaluations: int = 0
    per_generation: list = field(default_factory=list)

    def record(self, evaluations: int, successes: int):
        if successes > evaluations or evaluations < 0 or successes < 0:
            raise ValueError(f"inconsistent ledger entry: {successes} successes / {evaluations} evaluations")
        self.per_generation.append((evaluations, successes))
        self.total_evaluations += evaluations
        self.successful_evaluations += successes

    def consistent(self) -> bool:
        evals = sum(e for e, _ in self.per_generation)
        succ = sum(s for _, s in self.per_generation)
        return (
            evals == self.total_evaluations
            and succ == self.successful_evaluations
            and self.successful_evaluations <= self.total_evaluations
        )


@dataclass(frozen=True)
class GenerationRecord:
    """One per-generation event log entry. Generation 0 is the init batch."""

    generation: int
    evaluations: int
    successes: int
    repertoire_size: int


@dataclass
class RunHistory:
    """Per-generation event log of a single run; metrics are derived from it."""

    records: list = field(default_factory=list)

    def append(self, record: GenerationRecord):
        self.records.append(record)

    @property
    def ledger(self) -> EvaluationBudgetLedger:
        ledger = EvaluationBudgetLedger()
        for r in self.records:
            ledger.record(r.evaluations, r.successes)
        return ledger

    @property
    def total_evaluations(self) -> int:
        return sum(r.evaluations for r in self.records)

    @property
    def total_successes(self) -> int:
        return sum(r.successes for r in self.records)


@dataclass
class Repertoire:
    """Store of retained individuals; the successful subset is the deliverable.

    Holds every successful-grasp individual ever evaluated plus the novelty
    archive members, sorted by eval_id, without duplicates. archived_ids
    marks which eval_ids sit in the novelty archive.
    """

    component_specs: tuple
    individuals: list = field(default_factory=list)
    archived_ids: frozenset = frozenset()

    def successes(self) -> list:
        return [ind for ind in self.individuals if ind.success]

    def __len__(self):
        return len(self.individuals)


def generate_random_population(mu: int, bounds: Bounds, rng: RngStream) -> list:
    """mu genomes with coordinates drawn i.i.d. uniform within bounds."""
    if mu < 1:
        raise ConfigurationError(f"population size must be >= 1, got {mu}")
    samples = bounds.sample(rng, mu)
    return [Genome(samples[i]) for i in range(mu)]


def population_digest(individuals) -> str:
    """Order-sensitive digest of genomes; used for determinism checks."""
    h = hashlib.sha256()
    for ind in individuals:
        h.update(ind.genome.params.tobytes())
        h.update(ind.eval_id.to_bytes(8, "little", signed=True))
    return h.hexdigest()


def quality_from_joint_path(joint_path: np.ndarray) -> float:
    """Energetic criterion: negated sum of squared per-step joint displacements."""
    deltas = np.diff(np.asarray(joint_path, dtype=float), axis=0)
    return -float(np.sum(deltas * deltas))


def require_finite(values, what: str):
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"non-finite {what} encountered")
    return arr


def stable_spacing(values) -> float:
    # tiny helper kept local: smallest positive float step around |values| max
    return math.ulp(float(np.max(np.abs(values)))) if np.size(values) else 0.0
