from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ForcedStream, naive_cost
from gvcp.ga import (
    ConfigError,
    GaConfig,
    ScoredIndividual,
    compute_frozen_mask,
    decode,
    encode,
    fgts_select,
    fgts_select_index,
    fitness,
    generation_step_serial,
    init_population,
    local_search,
    mutate,
    one_point_crossover,
    sort_population,
)
from gvcp.ga_mr import initial_population
from gvcp.instance import evaluate, flip_delta, generate_instance
from gvcp.mapreduce import derive_rng_stream

bitstrings = st.integers(1, 40).flatmap(lambda n: st.tuples(*[st.text("01", min_size=n, max_size=n)] * 2))


@pytest.mark.parametrize(
    "chrom, members",
    [("0001", [False, False, False, True]), ("0000", [False] * 4), ("1111", [True] * 4)],
)
def test_decode(chrom, members):
    assert decode(chrom).tolist() == members
    assert encode(decode(chrom)) == chrom


@pytest.mark.parametrize("chrom, expected", [("1000", -150), ("0000", -190), ("0100", -180)])
def test_fitness_example1(example1, chrom, expected):
    assert fitness(example1, chrom) == expected


class TestConfig:
    def test_defaults(self):
        cfg = GaConfig()
        assert (cfg.population_size, cfg.elite_count, cfg.tournament_size, cfg.p_cross) == (150, 50, 5.4, 0.85)
        assert cfg.pair_count() == 50
        assert cfg.mutation_rates(100) == (0.01, 0.004)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(population_size=3, elite_count=1),
            dict(elite_count=0),
            dict(elite_count=150),
            dict(elite_count=49),
            dict(tournament_size=0.5),
            dict(p_cross=1.5),
            dict(worker_count=0),
            dict(max_generations=-1),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            GaConfig(**kwargs)


class TestInitPopulation:
    def test_special_individuals(self, example1):
        pop = init_population(example1, GaConfig(), derive_rng_stream(1, 0, "init", 0))
        assert len(pop) == 150
        assert all(len(c) == 4 and set(c) <= {"0", "1"} for c in pop)
        # local-search images of the extremes, traced with the enumeration oracle
        assert pop[:4] == ["0000", "1111", "1000", "1100"]

    def test_deterministic(self, example1):
        a = init_population(example1, GaConfig(), derive_rng_stream(9, 0, "init", 0))
        b = init_population(example1, GaConfig(), derive_rng_stream(9, 0, "init", 0))
        assert a == b

    def test_random_part_is_balanced(self):
        inst = generate_instance(100, 0.05, 10, 0)
        pop = init_population(inst, GaConfig(), derive_rng_stream(3, 0, "init", 0))
        bits = np.array([decode(c) for c in pop[4:]])
        assert bits.shape == (146, 100)
        freq = bits.mean(axis=0)
        assert freq.min() >= 0.35 and freq.max() <= 0.65


class RecordingStream:
    def __init__(self, rng):
        self.rng = rng
        self.sizes = []
        self.picked = []

    def random(self, *args):
        return self.rng.random(*args)

    def choice(self, a, size, replace):
        self.sizes.append(size)
        self.picked.append(self.rng.choice(a, size=size, replace=replace))
        return self.picked[-1]


def _population(costs):
    return [ScoredIndividual(format(i, "08b"), -c) for i, c in enumerate(costs)]


class TestFgts:
    def test_full_tournament_returns_best(self, rng):
        pop = _population([5, 3, 9, 1, 7])
        assert all(fgts_select(pop, 5, rng) == pop[3].chromosome for _ in range(200))

    def test_tie_goes_to_smaller_bitstring(self, rng):
        pop = [ScoredIndividual("110", -1.0), ScoredIndividual("011", -1.0), ScoredIndividual("000", -9.0)]
        assert all(fgts_select(pop, 3, rng) == "011" for _ in range(50))

    def test_size_one_is_uniform(self, rng):
        pop = _population(range(8))
        counts = np.bincount([fgts_select_index(pop, 1, rng) for _ in range(8000)], minlength=8)
        # each count is Binomial(8000, 1/8): sd ~ 29.6
        assert np.all(np.abs(counts - 1000) < 4 * 29.6)

    def test_empty_population(self, rng):
        with pytest.raises(ValueError, match="empty-population"):
            fgts_select([], 2, rng)

    def test_fractional_size_mix_and_rank_win_rates(self, rng):
        N, t, draws = 10, 5.4, 10_000
        pop = _population(range(N))  # index i has cost i, so index 0 is the best
        stream = RecordingStream(rng)
        wins = np.bincount([fgts_select_index(pop, t, stream) for _ in range(draws)], minlength=N)

        frac6 = np.mean(np.array(stream.sizes) == 6)
        assert set(stream.sizes) == {5, 6}
        assert abs(frac6 - 0.4) <= 3 * np.sqrt(0.4 * 0.6 / draws)

        # exact win probability: the winner is the best of k distinct contestants
        expected = np.array(
            [0.6 * comb(N - 1 - i, 4) / comb(N, 5) + 0.4 * comb(N - 1 - i, 5) / comb(N, 6) for i in range(N)]
        )
        assert expected.sum() == pytest.approx(1.0)
        sd = np.sqrt(draws * expected * (1 - expected))
        assert np.all(np.abs(wins - draws * expected) <= 3 * sd + 1e-9)
        positive = wins[expected > 0]
        assert np.all(np.diff(positive) < 0)  # strictly more wins for better ranks

    def test_winner_is_best_contestant(self):
        pop = _population([4, 2, 8, 6, 1, 3])
        stream = RecordingStream(derive_rng_stream(7, 0, "map", 0))
        for _ in range(100):
            winner = fgts_select_index(pop, 2.5, stream)
            assert winner == min(stream.picked[-1], key=lambda i: -pop[i].fitness)


class TestCrossover:
    def test_complementary_parents(self):
        assert one_point_crossover("0000", "1111", 2) == ("0011", "1100")

    def test_boundary_cuts(self):
        assert one_point_crossover("0101", "1100", 0) == ("1100", "0101")
        assert one_point_crossover("0101", "1100", 4) == ("0101", "1100")

    def test_identical_parents(self):
        assert one_point_crossover("0110", "0110", 1) == ("0110", "0110")

    def test_errors(self):
        with pytest.raises(ValueError, match="length-mismatch"):
            one_point_crossover("01", "011", 1)
        with pytest.raises(ValueError, match="cut-out-of-range"):
            one_point_crossover("01", "10", 3)

    @given(bitstrings, st.data())
    def test_gene_conservation(self, parents, data):
        p1, p2 = parents
        cut = data.draw(st.integers(0, len(p1)))
        c1, c2 = one_point_crossover(p1, p2, cut)
        for i in range(len(p1)):
            assert sorted(c1[i] + c2[i]) == sorted(p1[i] + p2[i])


class TestMutation:
    def test_always_flip(self):
        assert mutate("0110", np.zeros(4, bool), (0.5, 0.5), ForcedStream(0.0)) == "1001"

    def test_never_flip(self):
        assert mutate("0110", np.ones(4, bool), (0.5, 0.5), ForcedStream(0.999)) == "0110"

    def test_rate_depends_on_frozen_flag(self):
        mask = np.array([True, False, True, False])
        # draw 0.3 flips only where the rate exceeds it
        assert mutate("0000", mask, (0.5, 0.2), ForcedStream(0.3)) == "1010"

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError, match="length-mismatch"):
            mutate("0101", np.zeros(3, bool), (0.1, 0.1), rng)

    def test_empirical_rate(self, rng):
        n, reps = 100, 10_000
        rates = GaConfig().mutation_rates(n)
        mask = np.zeros(n, bool)
        flips = sum(mutate("0" * n, mask, rates, rng).count("1") for _ in range(reps))
        trials = n * reps
        assert abs(flips / trials - 0.004) <= 3 * np.sqrt(0.004 * 0.996 / trials)


class TestFrozenMask:
    @pytest.mark.parametrize(
        "pop, expected",
        [
            (["0011", "0011"], [True] * 4),
            (["01", "10"], [False, False]),
            (["110", "100", "100"], [True, False, True]),
        ],
    )
    def test_examples(self, pop, expected):
        assert compute_frozen_mask(pop).tolist() == expected

    def test_errors(self):
        with pytest.raises(ValueError, match="empty-population"):
            compute_frozen_mask([])
        with pytest.raises(ValueError, match="length-mismatch"):
            compute_frozen_mask(["01", "011"])


class TestLocalSearch:
    def test_example1_from_empty(self, example1):
        # from "1000", flipping vertex 2, 3 or 4 gives 150, 160, 190: none strictly better
        assert [naive_cost(example1, decode(c)) for c in ("1100", "1010", "1001")] == [150, 160, 190]
        assert local_search(example1, "0000") == "1000"

    def test_local_optimum_unchanged(self, example1):
        assert local_search(example1, "1000") == "1000"
        assert local_search(example1, "1100") == "1100"

    def test_random_instances(self, rng):
        for seed in range(100):
            inst = generate_instance(12, 0.4, 100, seed)
            start = "".join(rng.choice(["0", "1"], 12))
            out = local_search(inst, start)
            assert naive_cost(inst, decode(out)) <= naive_cost(inst, decode(start))
            members = decode(out)
            assert all(flip_delta(inst, members, v) >= 0 for v in range(12))
            assert local_search(inst, out) == out


def _serial_run(instance, config, generations):
    pop = initial_population(instance, config)
    history = [min(ind.cost for ind in pop)]
    for g in range(generations):
        pop = generation_step_serial(instance, pop, config, g)
        assert len(pop) == config.population_size
        assert all(ind.fitness == -evaluate(instance, decode(ind.chromosome)) for ind in pop)
        history.append(min(ind.cost for ind in pop))
    return pop, history


class TestSerialGeneration:
    def test_example1_reaches_optimum_in_first_generation(self, example1):
        for seed in range(10):
            pop, _ = _serial_run(example1, GaConfig(master_seed=seed), 1)
            assert min(ind.cost for ind in pop) == 150

    def test_population_size_random_configs(self, rng):
        inst = generate_instance(15, 0.3, 50, 2)
        for _ in range(20):
            Z = int(rng.integers(3, 30)) * 2
            E = int(rng.integers(1, Z // 2)) * 2
            cfg = GaConfig(population_size=Z, elite_count=E, tournament_size=float(rng.uniform(1, 6)), master_seed=int(rng.integers(1 << 30)))
            _serial_run(inst, cfg, 2)

    def test_best_cost_non_increasing(self):
        inst = generate_instance(25, 0.3, 100, 4)
        _, history = _serial_run(inst, GaConfig(population_size=40, elite_count=10, master_seed=3), 15)
        assert all(b <= a for a, b in zip(history, history[1:]))

    def test_elites_carried_forward(self):
        inst = generate_instance(20, 0.3, 100, 8)
        cfg = GaConfig(population_size=30, elite_count=6, master_seed=2)
        pop = initial_population(inst, cfg)
        nxt = generation_step_serial(inst, pop, cfg, 0)
        ranked = sort_population(pop)
        assert nxt[0].chromosome == local_search(inst, ranked[0].chromosome)
        assert [ind.chromosome for ind in nxt[1:6]] == [ind.chromosome for ind in ranked[1:6]]

    def test_wrong_population_size(self, example1):
        cfg = GaConfig()
        pop = initial_population(example1, cfg)[:-1]
        with pytest.raises(ValueError, match="wrong-population-size"):
            generation_step_serial(example1, pop, cfg, 0)
