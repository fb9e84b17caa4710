"""GA generations expressed as iterated map-reduce jobs.

Each job turns one generation into the next. The single map unit buffers the
``(solution, fitness)`` records, ranks them, improves the best one by local
search, emits the elites as passthrough pairs and the tournament-selected
parent pairs. Reducers do crossover, mutation and scoring.

Shuffle keys are pair ids, not chromosomes: with chromosome keys duplicate
individuals would collapse into one reduce group and be lost.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .ga import (
    Chromosome,
    GaConfig,
    ScoredIndividual,
    breed_pair,
    fitness,
    generation_step_serial,
    init_population,
    mean_cost,
    prepare_parents,
    score_population,
    sort_population,
)
from .instance import GvcpInstance
from .mapreduce import JobSpec, MapContext, MapReduceEngine, Record, derive_rng_stream


class PairRecord(NamedTuple):
    """Shuffle unit. ``parent2 is None`` marks an elite passthrough."""

    pair_id: int
    parent1: Chromosome
    parent2: Chromosome | None

    def to_record(self) -> Record:
        second = self.parent2.encode("ascii") if self.parent2 is not None else b""
        return Record(self.pair_id.to_bytes(8, "big"), self.parent1.encode("ascii") + b"\t" + second)

    @classmethod
    def from_record(cls, key: bytes, value: bytes) -> PairRecord:
        first, _, second = value.partition(b"\t")
        # an empty second chromosome is the "illegal chromosome" marker for elites
        return cls(int.from_bytes(key, "big"), first.decode("ascii"), second.decode("ascii") or None)


class GenerationStats(NamedTuple):
    generation: int
    best_cost: float
    mean_cost: float
    frozen_count: int
    elapsed_ms: float


@dataclass
class EvolveResult:
    best_chromosome: Chromosome
    best_cost: float
    generations_run: int
    history: list[GenerationStats] = field(default_factory=list)
    final_population: list[ScoredIndividual] = field(default_factory=list, repr=False)

    @property
    def best_vertices(self) -> list[int]:
        return [i + 1 for i, ch in enumerate(self.best_chromosome) if ch == "1"]


def individual_to_record(ind: ScoredIndividual) -> Record:
    return Record(ind.chromosome.encode("ascii"), repr(float(ind.fitness)).encode("ascii"))


def pair_partitioner(key: bytes, partitions: int) -> int:
    return int.from_bytes(key[:8], "big") % partitions


def gvcp_map(
    instance: GvcpInstance, population: Sequence[ScoredIndividual], config: GaConfig, generation: int
) -> tuple[list[PairRecord], dict[str, Any]]:
    """Elite passthroughs plus selected parent pairs, and the side data for reducers.

    Pair ids ``0..E-1`` are the elites in rank order; ``E..`` are the
    ``(Z - E) / 2`` parent pairs.
    """
    ranked, pairs, mask = prepare_parents(instance, population, config, generation)
    E = config.elite_count
    records = [PairRecord(i, ranked[i].chromosome, None) for i in range(E)]
    records.extend(PairRecord(E + j, p1, p2) for j, (p1, p2) in enumerate(pairs))
    side = {"generation": generation, "frozen_mask": mask}
    return records, side


def gvcp_reduce(
    instance: GvcpInstance, pair: PairRecord, job_config: Mapping[str, Any], config: GaConfig, rng=None
) -> list[ScoredIndividual]:
    """Elites pass through re-scored; real pairs yield two bred, scored children.

    ``rng`` defaults to the stream keyed by ``(seed, generation, reduce, pair_id)``.
    """
    if pair.parent2 is None:
        return [ScoredIndividual(pair.parent1, fitness(instance, pair.parent1))]
    if "frozen_mask" not in job_config or "generation" not in job_config:
        raise KeyError("missing-job-config: frozen_mask and generation must be published by the map phase")
    if rng is None:
        rng = derive_rng_stream(config.master_seed, job_config["generation"], "reduce", pair.pair_id)
    return list(breed_pair(instance, pair.parent1, pair.parent2, job_config["frozen_mask"], config, rng))


class GvcpMapper:
    """Stateful single map unit: buffers ``Z`` records, then emits all pairs."""

    def __init__(self, instance: GvcpInstance, config: GaConfig, generation: int):
        self.instance = instance
        self.config = config
        self.generation = generation
        self.buffer: list[ScoredIndividual] = []

    def __call__(self, record: Record, ctx: MapContext) -> Iterator[Record]:
        self.buffer.append(ScoredIndividual(record.key.decode("ascii"), float(record.value)))
        if len(self.buffer) == self.config.population_size:
            pairs, side = gvcp_map(self.instance, self.buffer, self.config, self.generation)
            self.buffer = []
            for name, value in side.items():
                ctx.publish(name, value)
            for pair in pairs:
                yield pair.to_record()

    def cleanup(self, ctx: MapContext) -> list[Record]:
        if self.buffer:
            raise ValueError(
                f"wrong-population-size: {len(self.buffer)} records left over, "
                f"expected a multiple of {self.config.population_size}"
            )
        return []


@dataclass(frozen=True)
class GvcpReducer:
    instance: GvcpInstance
    config: GaConfig

    def __call__(self, key: bytes, values: list[bytes], job_config: Mapping[str, Any]) -> Iterator[Record]:
        if len(values) != 1:
            raise ValueError(f"pair id collision: {len(values)} values for one key")
        pair = PairRecord.from_record(key, values[0])
        for child_index, ind in enumerate(gvcp_reduce(self.instance, pair, job_config, self.config)):
            yield Record(key + bytes([child_index]), ind.chromosome.encode("ascii") + b"\t" + repr(ind.fitness).encode())


def _decode_output(records: Sequence[Record]) -> list[ScoredIndividual]:
    out = []
    for rec in sorted(records, key=lambda r: r.key):
        chrom, _, fit = rec.value.partition(b"\t")
        out.append(ScoredIndividual(chrom.decode("ascii"), float(fit)))
    return out


def generation_step_mr(
    engine: MapReduceEngine,
    instance: GvcpInstance,
    population: Sequence[ScoredIndividual],
    config: GaConfig,
    generation: int,
) -> tuple[list[ScoredIndividual], int]:
    """Run one generation as a map-reduce job.

    Returns the next population in canonical order (elites, then children by
    pair id) and the number of frozen genes used for mutation.
    """
    mapper = GvcpMapper(instance, config, generation)
    spec = JobSpec(
        mapper=mapper,
        reducer=GvcpReducer(instance, config),
        partition_count=config.worker_count,
        partitioner=pair_partitioner,
        job_config={"master_seed": config.master_seed},
        map_cleanup=mapper.cleanup,
    )
    out = engine.run_job(spec, [individual_to_record(ind) for ind in population])
    nxt = _decode_output(out)
    if len(nxt) != config.population_size:
        raise RuntimeError(f"job produced {len(nxt)} individuals, expected {config.population_size}")
    return nxt, int(np.count_nonzero(engine.last_published["frozen_mask"]))


def initial_population(instance: GvcpInstance, config: GaConfig) -> list[ScoredIndividual]:
    rng = derive_rng_stream(config.master_seed, 0, "init", 0)
    return score_population(instance, init_population(instance, config, rng))


def evolve(
    instance: GvcpInstance,
    config: GaConfig,
    engine: MapReduceEngine | None = None,
    executor: str = "process",
    on_generation: Callable[[GenerationStats], None] | None = None,
) -> EvolveResult:
    """Iterate map-reduce generations until ``max_generations`` or a stall.

    The returned best is the best individual ever seen; with ``E >= 1`` it is
    also the best of the last generation.
    """
    own_engine = engine is None
    if engine is None:
        engine = MapReduceEngine(config.worker_count, executor)
    try:
        population = initial_population(instance, config)
        best = sort_population(population)[0]
        history: list[GenerationStats] = []
        stall = 0
        for g in range(config.max_generations):
            t0 = time.perf_counter()
            population, frozen = generation_step_mr(engine, instance, population, config, g)
            top = sort_population(population)[0]
            stats = GenerationStats(
                g + 1, top.cost, mean_cost(population), frozen, (time.perf_counter() - t0) * 1000.0
            )
            history.append(stats)
            if on_generation is not None:
                on_generation(stats)
            if top.fitness > best.fitness:
                best, stall = top, 0
            else:
                stall += 1
                if config.stall_generations and stall >= config.stall_generations:
                    break
    finally:
        if own_engine:
            engine.close()
    return EvolveResult(best.chromosome, best.cost, len(history), history, population)


def serial_parallel_equivalence(
    instance: GvcpInstance,
    config: GaConfig,
    generations: int = 20,
    engine: MapReduceEngine | None = None,
    serial_seed: int | None = None,
) -> bool:
    """Run the serial reference and the map-reduce path side by side.

    True iff both populations are identical, order and stored fitness
    included, after every generation. ``serial_seed`` lets a test perturb one
    side.
    """
    serial_config = config if serial_seed is None else _with_seed(config, serial_seed)
    own_engine = engine is None
    if engine is None:
        engine = MapReduceEngine(config.worker_count, "process")
    try:
        start = initial_population(instance, config)
        serial, parallel = list(start), list(start)
        for g in range(generations):
            serial = generation_step_serial(instance, serial, serial_config, g)
            parallel, _ = generation_step_mr(engine, instance, parallel, config, g)
            if serial != parallel:
                return False
        return True
    finally:
        if own_engine:
            engine.close()


def _with_seed(config: GaConfig, seed: int) -> GaConfig:
    values = config.to_dict()
    values["master_seed"] = seed
    return GaConfig(**values)

