"""Generalized vertex cover: instances, an exact oracle, and a genetic algorithm on map-reduce."""

from .exact import ExactResult, InstanceTooLarge, solve_exact
from .ga import GaConfig, ScoredIndividual, decode, encode, fitness, local_search
from .ga_mr import EvolveResult, evolve, serial_parallel_equivalence
from .instance import (
    EXAMPLE_1,
    GvcpInstance,
    InstanceError,
    evaluate,
    evaluate_bits,
    flip_delta,
    generate_instance,
    parse_instance,
    write_instance,
)
from .mapreduce import JobSpec, MapReduceEngine, Record, derive_rng_stream, run_job

__version__ = "0.1.0"
