"""Parent selection and real-coded genome variation operators.

Operators are genotype-only: they never read behavior or novelty fields, and
their outputs always stay within the declared coordinate bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bounds, ConfigurationError, Genome, RngStream


@dataclass(frozen=True)
class VariationConfig:
    """Knobs for the offspring pipeline.

    sigma is relative to each coordinate's range. p_mut of None means the
    1/n_g per-coordinate default. order selects whether mutation runs after
    or instead-of-following crossover.
    """

    sigma: float = 0.1
    p_mut: float | None = None
    p_cx: float = 0.5
    order: str = "cx_then_mut"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ConfigurationError("sigma must be > 0")
        if self.p_mut is not None and not (0.0 <= self.p_mut <= 1.0):
            raise ConfigurationError("p_mut must lie in [0, 1]")
        if not (0.0 <= self.p_cx <= 1.0):
            raise ConfigurationError("p_cx must lie in [0, 1]")
        if self.order not in ("cx_then_mut", "mut_then_cx"):
            raise ConfigurationError(f"unknown variation order {self.order!r}")

    def mutation_probability(self, n_g: int) -> float:
        return 1.0 / n_g if self.p_mut is None else self.p_mut


def select_parents(pop: list, lam: int, rng: RngStream) -> list:
    """lam individuals drawn uniformly with replacement from pop."""
    if not pop:
        raise ValueError("cannot select parents from an empty population")
    if lam < 1:
        raise ConfigurationError(f"offspring count must be >= 1, got {lam}")
    idx = rng.integers(0, len(pop), size=lam)
    return [pop[i] for i in idx]


def mutate(genome: Genome, sigma: float, p_mut: float, bounds: Bounds, rng: RngStream) -> Genome:
    """Gaussian bounded mutation.

    Each coordinate independently receives, with probability p_mut, additive
    noise N(0, (sigma * range_j)^2), then is clamped to its bounds.
    """
    if sigma <= 0:
        raise ConfigurationError("sigma must be > 0")
    if not (0.0 <= p_mut <= 1.0):
        raise ConfigurationError("p_mut must lie in [0, 1]")
    params = genome.params
    mask = rng.random(params.size) < p_mut
    noise = rng.normal(0.0, sigma * bounds.span)
    out = np.where(mask, params + noise, params)
    return Genome(bounds.clip(out))


def crossover(a: Genome, b: Genome, p_cx: float, rng: RngStream) -> tuple:
    """Uniform crossover: with probability p_cx, swap each coordinate pair
    independently with probability 0.5; otherwise return copies of the parents.
    """
    if len(a) != len(b):
        raise ValueError(f"genome length mismatch: {len(a)} vs {len(b)}")
    if rng.random() >= p_cx:
        return Genome(a.params), Genome(b.params)
    swap = rng.random(len(a)) < 0.5
    child_a = np.where(swap, b.params, a.params)
    child_b = np.where(swap, a.params, b.params)
    return Genome(child_a), Genome(child_b)


def make_offspring(parents: list, lam: int, cfg: VariationConfig, bounds: Bounds, rng: RngStream) -> list:
    """The operate() pipeline: pair consecutive parents, cross, mutate, truncate.

    An odd trailing parent is paired with itself. Exactly lam offspring genomes
    are returned, so at least lam parents are required.
    """
    if not parents:
        raise ValueError("cannot generate offspring without parents")
    if len(parents) < lam:
        raise ValueError(f"need at least lam={lam} parents, got {len(parents)}")
    genomes = [p.genome for p in parents]
    p_mut = cfg.mutation_probability(bounds.dim)
    children = []
    for i in range(0, len(genomes), 2):
        a = genomes[i]
        b = genomes[i + 1] if i + 1 < len(genomes) else genomes[i]
        if cfg.order == "cx_then_mut":
            c1, c2 = crossover(a, b, cfg.p_cx, rng)
            c1 = mutate(c1, cfg.sigma, p_mut, bounds, rng)
            c2 = mutate(c2, cfg.sigma, p_mut, bounds, rng)
        else:
            c1 = mutate(a, cfg.sigma, p_mut, bounds, rng)
            c2 = mutate(b, cfg.sigma, p_mut, bounds, rng)
            c1, c2 = crossover(c1, c2, cfg.p_cx, rng)
        children.extend((c1, c2))
        if len(children) >= lam:
            break
    return children[:lam]
