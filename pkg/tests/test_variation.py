import numpy as np
import pytest
from scipy.stats import chisquare

from graspqd.core import Bounds, Genome, RngStream
from graspqd.variation import (
    VariationConfig,
    crossover,
    make_offspring,
    mutate,
    select_parents,
)

from conftest import make_individual


def _pop(n):
    return [make_individual(i, [np.zeros(2)]) for i in range(n)]


class TestSelectParents:
    def test_singleton_population(self):
        pop = _pop(1)
        parents = select_parents(pop, 5, RngStream(0, "sel"))
        assert parents == [pop[0]] * 5

    def test_offspring_count_50(self):
        assert len(select_parents(_pop(100), 50, RngStream(1))) == 50

    def test_empty_population_rejected(self):
        with pytest.raises(ValueError):
            select_parents([], 3, RngStream(0))

    def test_uniformity_chi_square(self):
        # 1e5 draws over 100 individuals: frequencies consistent with uniform
        pop = _pop(100)
        parents = select_parents(pop, 10 ** 5, RngStream(5, "chi"))
        counts = np.bincount([p.eval_id for p in parents], minlength=100)
        # 5-sigma binomial guard on each count plus an aggregate chi-square
        sigma = np.sqrt(10 ** 5 * 0.01 * 0.99)
        assert np.all(np.abs(counts - 1000) < 5 * sigma)
        assert chisquare(counts).pvalue > 1e-6


class TestMutate:
    def setup_method(self):
        self.bounds = Bounds.uniform(0.0, 1.0, 8)
        self.g = Genome(np.full(8, 0.5))

    def test_zero_probability_is_identity(self):
        out = mutate(self.g, 0.1, 0.0, self.bounds, RngStream(0))
        assert np.array_equal(out.params, self.g.params)

    def test_outputs_clamped(self):
        rng = RngStream(3, "mut")
        for _ in range(200):
            out = mutate(self.g, 2.0, 1.0, self.bounds, rng)
            assert self.bounds.contains(out.params)

    def test_noise_scale_matches_sigma(self):
        # p_mut=1, sigma=0.1, bounds [0,1], 1e5 mid-range coordinates:
        # empirical std of the un-clamped deltas is 0.1 within 2%
        n = 10 ** 5
        bounds = Bounds.uniform(0.0, 1.0, n)
        g = Genome(np.full(n, 0.5))
        out = mutate(g, 0.1, 1.0, bounds, RngStream(7, "scale")).params
        unclamped = out[(out > 0.0) & (out < 1.0)]
        deltas = unclamped - 0.5
        assert abs(deltas.std() - 0.1) / 0.1 < 0.02


class TestCrossover:
    def test_identical_parents(self):
        a = Genome(np.full(6, 0.3))
        c1, c2 = crossover(a, Genome(a.params), 1.0, RngStream(0))
        assert np.array_equal(c1.params, a.params)
        assert np.array_equal(c2.params, a.params)

    def test_disabled_crossover_copies(self):
        a, b = Genome(np.zeros(4)), Genome(np.ones(4))
        c1, c2 = crossover(a, b, 0.0, RngStream(1))
        assert np.array_equal(c1.params, a.params)
        assert np.array_equal(c2.params, b.params)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            crossover(Genome(np.zeros(3)), Genome(np.zeros(4)), 0.5, RngStream(0))

    def test_swap_frequency_half(self):
        a, b = Genome(np.zeros(4)), Genome(np.ones(4))
        rng = RngStream(9, "cx")
        swapped = np.zeros(4)
        trials = 10 ** 4
        for _ in range(trials):
            c1, _ = crossover(a, b, 1.0, rng)
            swapped += c1.params  # coordinate is 1 where swapped in
        freq = swapped / trials
        assert np.all(np.abs(freq - 0.5) < 0.02)

    def test_children_complementary(self):
        a, b = Genome(np.zeros(5)), Genome(np.ones(5))
        rng = RngStream(2)
        for _ in range(50):
            c1, c2 = crossover(a, b, 1.0, rng)
            assert np.allclose(c1.params + c2.params, 1.0)


class TestOffspringPipeline:
    def test_exact_count_and_bounds(self):
        bounds = Bounds.uniform(-1.0, 1.0, 4)
        rng = RngStream(4)
        pop = [make_individual(i, [np.zeros(2)], genome_dim=4) for i in range(10)]
        for lam in (1, 2, 5, 9):
            children = make_offspring(pop[:lam], lam, VariationConfig(), bounds, rng)
            assert len(children) == lam
            assert all(bounds.contains(c.params) for c in children)

    def test_requires_enough_parents(self):
        bounds = Bounds.uniform(-1.0, 1.0, 4)
        pop = [make_individual(i, [np.zeros(2)], genome_dim=4) for i in range(3)]
        with pytest.raises(ValueError):
            make_offspring(pop, 9, VariationConfig(), bounds, RngStream(0))

    def test_variation_ignores_behavior_fields(self):
        # operators read only genomes: same rng, different behavior metadata
        bounds = Bounds.uniform(-1.0, 1.0, 4)
        pop_a = [make_individual(i, [np.zeros(2)], success=False, genome_dim=4) for i in range(6)]
        pop_b = [make_individual(i + 50, [None], success=True, genome_dim=4) for i in range(6)]
        out_a = make_offspring(pop_a, 6, VariationConfig(), bounds, RngStream(11))
        out_b = make_offspring(pop_b, 6, VariationConfig(), bounds, RngStream(11))
        for x, y in zip(out_a, out_b):
            assert np.array_equal(x.params, y.params)

    def test_both_orders_supported(self):
        bounds = Bounds.uniform(-1.0, 1.0, 4)
        pop = [make_individual(i, [np.zeros(2)], genome_dim=4) for i in range(4)]
        for order in ("cx_then_mut", "mut_then_cx"):
            cfg = VariationConfig(order=order)
            assert len(make_offspring(pop, 4, cfg, bounds, RngStream(0))) == 4
