"""A small deterministic in-process map-reduce engine.

The engine reproduces the programming model rather than the infrastructure:
one map unit runs sequentially over the input, emitted records are routed to
``R`` partitions, each partition groups its values by key (keys in ascending
byte order, values in emission order) and the reducer runs once per group.
Partitions may be reduced concurrently; results are stitched back together in
partition order, so the output never depends on the worker count.

Example (word count)::

    def mapper(record, ctx):
        for word in record.value.split():
            yield Record(word, b"1")

    def reducer(key, values, config):
        yield Record(key, str(len(values)).encode())

    with MapReduceEngine() as engine:
        out = engine.run_job(JobSpec(mapper, reducer), [Record(b"0", b"a b a")])
"""

from __future__ import annotations

import time
import zlib
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Iterable, Mapping, NamedTuple, Sequence, TextIO

import numpy as np


class Record(NamedTuple):
    key: bytes
    value: bytes


class JobError(RuntimeError):
    """A mapper or reducer raised; carries the phase, partition and key."""

    def __init__(self, phase: str, partition: int | None, key: bytes | None, cause: str):
        self.phase = phase
        self.partition = partition
        self.key = key
        self.cause = cause
        super().__init__(f"{phase}-failure (partition={partition}, key={key!r}): {cause}")

    def __reduce__(self):
        return (JobError, (self.phase, self.partition, self.key, self.cause))


class MapContext:
    """What the single map unit sees: read-only job config plus a publish channel.

    Values published during the map phase are merged into the config that the
    reducers receive. This is how population-wide data (e.g. the frozen-gene
    mask) reaches the reduce phase.
    """

    def __init__(self, config: Mapping[str, Any]):
        self.config = config
        self.published: dict[str, Any] = {}

    def publish(self, name: str, value: Any) -> None:
        self.published[name] = value


def crc_partitioner(key: bytes, partitions: int) -> int:
    # builtin hash() is salted per process, so it cannot route records deterministically
    return zlib.crc32(key) % partitions


Mapper = Callable[[Record, MapContext], Iterable[Record]]
Reducer = Callable[[bytes, list, Mapping[str, Any]], Iterable[Record]]


@dataclass(frozen=True)
class JobSpec:
    """A map-reduce job.

    ``mapper(record, ctx)`` runs once per input record; ``map_cleanup(ctx)``,
    when given, runs once after the last record (Hadoop's ``cleanup`` hook) and
    may emit more records. ``reducer(key, values, config)`` runs once per key
    group. With a process pool the reducer and partitioner must be picklable.
    """

    mapper: Mapper
    reducer: Reducer
    partition_count: int = 1
    partitioner: Callable[[bytes, int], int] = crc_partitioner
    job_config: Mapping[str, Any] = field(default_factory=dict)
    map_cleanup: Callable[[MapContext], Iterable[Record]] | None = None

    def __post_init__(self) -> None:
        if self.partition_count < 1:
            raise ValueError(f"partition_count must be >= 1, got {self.partition_count}")


def _check_record(rec: Any, phase: str) -> Record:
    if type(rec) is Record and type(rec[0]) is bytes and rec[0] and type(rec[1]) is bytes:
        return rec
    if not isinstance(rec, tuple) or len(rec) != 2:
        raise TypeError(f"{phase} emitted {rec!r}, expected a (key, value) record")
    key, value = rec
    if not isinstance(key, bytes) or not key:
        raise TypeError(f"{phase} emitted key {key!r}; keys must be non-empty bytes")
    if not isinstance(value, bytes):
        raise TypeError(f"{phase} emitted value {value!r}; values must be bytes")
    return Record(key, value)


def _reduce_partition(
    reducer: Reducer, index: int, groups: list[tuple[bytes, list[bytes]]], config: Mapping[str, Any]
) -> list[Record]:
    out: list[Record] = []
    for key, values in groups:
        try:
            for rec in reducer(key, values, config):
                out.append(_check_record(rec, "reducer"))
        except JobError:
            raise
        except Exception as exc:
            raise JobError("reducer", index, key, f"{type(exc).__name__}: {exc}") from exc
    return out


class MapReduceEngine:
    """Runs jobs with ``workers`` reduce workers (threads or processes).

    ``workers=1`` reduces inline. The pool is created lazily and reused across
    jobs; use the engine as a context manager or call :meth:`close`.
    """

    def __init__(self, workers: int = 1, executor: str = "process", trace: TextIO | None = None):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        if executor not in ("process", "thread"):
            raise ValueError(f"executor must be 'process' or 'thread', got {executor!r}")
        self.workers = workers
        self.executor = executor
        self.trace = trace
        self._pool: Executor | None = None
        self.last_published: Mapping[str, Any] = MappingProxyType({})

    def __enter__(self) -> MapReduceEngine:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _get_pool(self) -> Executor:
        if self._pool is None:
            cls = ProcessPoolExecutor if self.executor == "process" else ThreadPoolExecutor
            self._pool = cls(max_workers=self.workers)
        return self._pool

    def _log(self, phase: str, n_in: int, n_out: int, sizes: Sequence[int], started: float) -> None:
        if self.trace is not None:
            ms = (time.perf_counter() - started) * 1000.0
            self.trace.write(f"{phase}\t{n_in}\t{n_out}\t{','.join(map(str, sizes))}\t{ms:.3f}\n")

    def run_job(self, spec: JobSpec, records: Iterable[Record]) -> list[Record]:
        R = spec.partition_count
        base_config = MappingProxyType(dict(spec.job_config))
        ctx = MapContext(base_config)

        t0 = time.perf_counter()
        n_in = 0
        partitions: list[dict[bytes, list[bytes]]] = [{} for _ in range(R)]
        emitted = 0

        def route(recs: Iterable[Record] | None, key: bytes | None) -> None:
            nonlocal emitted
            if recs is None:
                return
            try:
                for rec in recs:
                    rec = _check_record(rec, "mapper")
                    p = spec.partitioner(rec.key, R)
                    if not 0 <= p < R:
                        raise ValueError(f"partitioner returned {p}, outside [0, {R})")
                    partitions[p].setdefault(rec.key, []).append(rec.value)
                    emitted += 1
            except Exception as exc:
                raise JobError("mapper", None, key, f"{type(exc).__name__}: {exc}") from exc

        for rec in records:
            rec = _check_record(rec, "input")
            n_in += 1
            route(spec.mapper(rec, ctx), rec.key)
        if spec.map_cleanup is not None:
            route(spec.map_cleanup(ctx), None)
        sizes = [sum(len(v) for v in part.values()) for part in partitions]
        self._log("map", n_in, emitted, sizes, t0)

        reduce_config = MappingProxyType({**base_config, **ctx.published})
        self.last_published = MappingProxyType(dict(ctx.published))
        work = [sorted(part.items()) for part in partitions]

        t1 = time.perf_counter()
        if self.workers == 1 or R == 1:
            results = [_reduce_partition(spec.reducer, i, groups, reduce_config) for i, groups in enumerate(work)]
        else:
            pool = self._get_pool()
            # MappingProxyType does not pickle; ship a plain dict
            cfg = dict(reduce_config) if self.executor == "process" else reduce_config
            futures = [
                pool.submit(_reduce_partition, spec.reducer, i, groups, cfg)
                for i, groups in enumerate(work)
                if groups
            ]
            done = iter(f.result() for f in futures)
            results = [next(done) if groups else [] for groups in work]
        out = [rec for part in results for rec in part]
        self._log("reduce", emitted, len(out), [len(r) for r in results], t1)
        return out


def run_job(spec: JobSpec, records: Iterable[Record], workers: int = 1, executor: str = "process") -> list[Record]:
    """One-shot convenience wrapper around :class:`MapReduceEngine`."""
    with MapReduceEngine(workers, executor) as engine:
        return engine.run_job(spec, records)


ROLES = {"map": 0, "reduce": 1, "init": 2}


def derive_rng_stream(master_seed: int, generation: int, role: str, unit_index: int) -> np.random.Generator:
    """Counter-based random stream for one unit of work.

    The Philox key is the master seed; the upper counter words hold
    ``(unit_index, generation, role)`` and the low word advances as numbers
    are drawn, so distinct tuples never share counter blocks. The stream is a
    pure function of the tuple, whichever worker consumes it.
    """
    role_code = ROLES[role]
    mask = 0xFFFFFFFFFFFFFFFF
    bitgen = np.random.Philox(
        counter=[0, int(unit_index) & mask, int(generation) & mask, role_code],
        key=[int(master_seed) & mask, 0x9E3779B97F4A7C15],
    )
    return np.random.Generator(bitgen)
