"""Genetic operators for GVCP and a single-process reference generation step.

Chromosomes are strings over ``{'0', '1'}``; character ``k`` is ``'1'`` when
vertex ``k + 1`` is in the subset. Fitness is the negated objective, so a
higher fitness means a cheaper subset.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .instance import GvcpInstance, evaluate_bits, flip_delta
from .mapreduce import derive_rng_stream

Chromosome = str


class ConfigError(ValueError):
    pass


class ScoredIndividual(NamedTuple):
    chromosome: Chromosome
    fitness: float

    @property
    def cost(self) -> float:
        return -self.fitness


@dataclass(frozen=True)
class GaConfig:
    """GA parameters. Mutation rates of ``None`` mean ``1.0/n`` (frozen) and ``0.4/n``.

    ``stall_generations=0`` disables the stall stop. ``boundary_cuts`` allows
    crossover cut points 0 and n (plain copies); otherwise cuts are in [1, n-1].
    """

    population_size: int = 150
    elite_count: int = 50
    tournament_size: float = 5.4
    p_cross: float = 0.85
    mutation_rate_frozen: float | None = None
    mutation_rate_normal: float | None = None
    max_generations: int = 500
    stall_generations: int = 100
    master_seed: int = 0
    worker_count: int = 4
    boundary_cuts: bool = True

    def __post_init__(self) -> None:
        Z, E = self.population_size, self.elite_count
        if Z < 4:
            raise ConfigError(f"population-too-small: population_size must be >= 4, got {Z}")
        if not 1 <= E < Z:
            raise ConfigError(f"elite_count must satisfy 1 <= E < Z, got E={E}, Z={Z}")
        if (Z - E) % 2:
            raise ConfigError(f"population_size - elite_count must be even, got {Z - E}")
        if not self.tournament_size >= 1:
            raise ConfigError(f"tournament_size must be >= 1, got {self.tournament_size}")
        if not 0 <= self.p_cross <= 1:
            raise ConfigError(f"p_cross must be in [0, 1], got {self.p_cross}")
        for name in ("mutation_rate_frozen", "mutation_rate_normal"):
            rate = getattr(self, name)
            if rate is not None and not 0 <= rate <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {rate}")
        if self.max_generations < 0 or self.stall_generations < 0:
            raise ConfigError("generation limits must be non-negative")
        if self.worker_count < 1:
            raise ConfigError(f"worker_count must be >= 1, got {self.worker_count}")

    def mutation_rates(self, n: int) -> tuple[float, float]:
        """``(frozen, normal)`` per-gene flip probabilities for genome length ``n``."""
        frozen = self.mutation_rate_frozen if self.mutation_rate_frozen is not None else min(1.0, 1.0 / n)
        normal = self.mutation_rate_normal if self.mutation_rate_normal is not None else min(1.0, 0.4 / n)
        return frozen, normal

    def pair_count(self) -> int:
        return (self.population_size - self.elite_count) // 2

    def to_dict(self) -> dict:
        return asdict(self)


def encode(subset) -> Chromosome:
    return "".join("1" if b else "0" for b in subset)


def decode(chromosome: Chromosome) -> np.ndarray:
    """Boolean membership vector for a chromosome."""
    return np.frombuffer(chromosome.encode("ascii"), dtype=np.uint8) == ord("1")


def fitness(instance: GvcpInstance, chromosome: Chromosome) -> float:
    return -evaluate_bits(instance, chromosome)


def sort_population(population: Sequence[ScoredIndividual]) -> list[ScoredIndividual]:
    """Best first; ties by lexicographically smallest chromosome, then original index."""
    return sorted(population, key=lambda ind: (-ind.fitness, ind.chromosome))


def init_population(instance: GvcpInstance, config: GaConfig, rng: np.random.Generator) -> list[Chromosome]:
    """Four fixed individuals followed by ``Z - 4`` uniform random bitstrings.

    The fixed ones are all-zeros, all-ones and their local-search optima.
    """
    Z, n = config.population_size, instance.n
    if Z < 4:
        raise ConfigError(f"population-too-small: need at least 4 individuals, got {Z}")
    zeros, ones = "0" * n, "1" * n
    population = [zeros, ones, local_search(instance, zeros), local_search(instance, ones)]
    bits = rng.integers(0, 2, size=(Z - 4, n), dtype=np.uint8)
    table = np.frombuffer(b"01", dtype=np.uint8)
    population.extend(row.tobytes().decode("ascii") for row in table[bits])
    return population


def fgts_select(population: Sequence[ScoredIndividual], tournament_size: float, rng) -> Chromosome:
    """Fine-grained tournament selection.

    Each call holds one tournament of ``floor(t)`` or ``ceil(t)`` distinct
    contestants, the larger size with probability ``frac(t)``, so the mean
    tournament size is ``t``. The fittest contestant wins.
    """
    return population[fgts_select_index(population, tournament_size, rng)].chromosome


def fgts_select_index(population: Sequence[ScoredIndividual], tournament_size: float, rng) -> int:
    if not population:
        raise ValueError("empty-population")
    if tournament_size < 1:
        raise ValueError(f"tournament size must be >= 1, got {tournament_size}")
    base = math.floor(tournament_size)
    size = base + (1 if rng.random() < tournament_size - base else 0)
    size = min(size, len(population))
    contestants = rng.choice(len(population), size=size, replace=False)
    return min(contestants, key=lambda i: (-population[i].fitness, population[i].chromosome, i))


def one_point_crossover(p1: Chromosome, p2: Chromosome, cut: int) -> tuple[Chromosome, Chromosome]:
    if len(p1) != len(p2):
        raise ValueError(f"length-mismatch: {len(p1)} != {len(p2)}")
    if not 0 <= cut <= len(p1):
        raise ValueError(f"cut-out-of-range: {cut} not in [0, {len(p1)}]")
    return p1[:cut] + p2[cut:], p2[:cut] + p1[cut:]


def compute_frozen_mask(population: Sequence[Chromosome]) -> np.ndarray:
    """Positions where every individual carries the same allele."""
    if not population:
        raise ValueError("empty-population")
    n = len(population[0])
    if any(len(c) != n for c in population):
        raise ValueError("length-mismatch: chromosomes of different lengths")
    rows = np.frombuffer("".join(population).encode("ascii"), dtype=np.uint8).reshape(len(population), n)
    return np.all(rows == rows[0], axis=0)


def mutate(chromosome: Chromosome, frozen_mask, rates: tuple[float, float], rng) -> Chromosome:
    """Flip each gene independently: ``rates[0]`` if frozen, else ``rates[1]``.

    Consumes exactly one ``rng.random(n)`` block, gene ``k`` using draw ``k``.
    """
    n = len(chromosome)
    frozen = np.asarray(frozen_mask, dtype=bool)
    if frozen.shape != (n,):
        raise ValueError(f"length-mismatch: mask {frozen.shape} vs chromosome {n}")
    draws = np.asarray(rng.random(n))
    flips = draws < np.where(frozen, rates[0], rates[1])
    if not flips.any():
        return chromosome
    genes = np.frombuffer(chromosome.encode("ascii"), dtype=np.uint8) ^ flips.astype(np.uint8)
    return genes.tobytes().decode("ascii")


def local_search(instance: GvcpInstance, chromosome: Chromosome) -> Chromosome:
    """First-improvement add/remove search.

    Scans vertices in order and applies every strictly improving toggle at
    once; passes repeat until a whole pass changes nothing.
    """
    member = [ch == "1" for ch in chromosome]
    if len(member) != instance.n:
        raise ValueError(f"length-mismatch: chromosome {len(member)} vs n={instance.n}")
    improved = True
    while improved:
        improved = False
        for v in range(instance.n):
            if flip_delta(instance, member, v) < 0:
                member[v] = not member[v]
                improved = True
    return encode(member)


def mean_cost(population: Sequence[ScoredIndividual]) -> float:
    return -math.fsum(ind.fitness for ind in population) / len(population)


def prepare_parents(
    instance: GvcpInstance, population: Sequence[ScoredIndividual], config: GaConfig, generation: int
) -> tuple[list[ScoredIndividual], list[tuple[Chromosome, Chromosome]], np.ndarray]:
    """Selection side of a generation (what the map phase does).

    Returns the sorted population with the local-searched best in front, the
    ``(Z - E) / 2`` parent pairs, and the frozen mask of that population.
    """
    if len(population) != config.population_size:
        raise ValueError(
            f"wrong-population-size: expected {config.population_size}, got {len(population)}"
        )
    ranked = sort_population(population)
    best = local_search(instance, ranked[0].chromosome)
    if best != ranked[0].chromosome:
        ranked[0] = ScoredIndividual(best, fitness(instance, best))
    mask = compute_frozen_mask([ind.chromosome for ind in ranked])

    rng = derive_rng_stream(config.master_seed, generation, "map", 0)
    t = config.tournament_size
    pairs = [(fgts_select(ranked, t, rng), fgts_select(ranked, t, rng)) for _ in range(config.pair_count())]
    return ranked, pairs, mask


def breed_pair(
    instance: GvcpInstance,
    p1: Chromosome,
    p2: Chromosome,
    mask: np.ndarray,
    config: GaConfig,
    rng,
) -> tuple[ScoredIndividual, ScoredIndividual]:
    """Crossover with probability ``p_cross``, then mutate and score both children."""
    n = len(p1)
    c1, c2 = p1, p2
    if rng.random() < config.p_cross:
        lo, hi = (0, n) if config.boundary_cuts else (1, n - 1)
        if lo <= hi:
            c1, c2 = one_point_crossover(p1, p2, int(rng.integers(lo, hi + 1)))
    rates = config.mutation_rates(n)
    c1 = mutate(c1, mask, rates, rng)
    c2 = mutate(c2, mask, rates, rng)
    return ScoredIndividual(c1, fitness(instance, c1)), ScoredIndividual(c2, fitness(instance, c2))


def score_population(instance: GvcpInstance, chromosomes: Sequence[Chromosome]) -> list[ScoredIndividual]:
    return [ScoredIndividual(c, fitness(instance, c)) for c in chromosomes]


def generation_step_serial(
    instance: GvcpInstance, population: Sequence[ScoredIndividual], config: GaConfig, generation: int
) -> list[ScoredIndividual]:
    """One generation in a single process, drawing the same random streams as the map-reduce path.

    Output order: the ``E`` elites, then both children of each pair in pair order.
    """
    ranked, pairs, mask = prepare_parents(instance, population, config, generation)
    E = config.elite_count
    nxt = [ScoredIndividual(ind.chromosome, fitness(instance, ind.chromosome)) for ind in ranked[:E]]
    for j, (p1, p2) in enumerate(pairs):
        rng = derive_rng_stream(config.master_seed, generation, "reduce", E + j)
        nxt.extend(breed_pair(instance, p1, p2, mask, config, rng))
    return nxt
