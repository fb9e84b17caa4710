"""Command-line interface: ``gvcp gen | solve | verify | bench``.

Exit codes: 0 success, 1 verify below the required hit rate, 2 bad
arguments or unreadable/invalid input, 3 instance too large for the exact
solver, 4 internal job failure, 5 bench outputs diverged across worker counts.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import random
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .exact import MAX_EXACT_N, InstanceTooLarge, solve_exact
from .ga import ConfigError, GaConfig
from .ga_mr import EvolveResult, evolve
from .instance import InstanceError, generate_instance, parse_instance, write_instance
from .mapreduce import JobError, MapReduceEngine

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_TOO_LARGE = 3
EXIT_JOB_FAILURE = 4
EXIT_DIVERGED = 5

HISTORY_COLUMNS = ("generation", "best_cost", "mean_cost", "frozen_count", "elapsed_ms")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_ga_flags(p: argparse.ArgumentParser, pop: int = 150, elite: int = 50, gens: int = 500) -> None:
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--pop", type=int, default=pop, help="population size Z")
    g.add_argument("--elite", type=int, default=elite, help="elite count E")
    g.add_argument("--tsize", type=float, default=5.4, help="mean tournament size")
    g.add_argument("--pcross", type=float, default=0.85, help="crossover probability")
    g.add_argument("--gens", type=int, default=gens, help="maximum generations")
    g.add_argument("--stall", type=int, default=100, help="stop after this many generations without improvement (0 = never)")
    g.add_argument("--seed", type=int, default=1, help="master seed")
    g.add_argument("--workers", type=int, default=4, help="reduce workers / partitions")
    g.add_argument("--executor", choices=("process", "thread"), default="process")
    g.add_argument("--interior-cuts", action="store_true", help="draw crossover cuts from [1, n-1] instead of [0, n]")


def _ga_config(args: argparse.Namespace, **overrides) -> GaConfig:
    values = dict(
        population_size=args.pop,
        elite_count=args.elite,
        tournament_size=args.tsize,
        p_cross=args.pcross,
        max_generations=args.gens,
        stall_generations=args.stall,
        master_seed=args.seed,
        worker_count=args.workers,
        boundary_cuts=not args.interior_cuts,
    )
    values.update(overrides)
    try:
        return GaConfig(**values)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _read_instance(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_instance(data), hashlib.sha256(data).hexdigest()
    except (InstanceError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvcp", description="Generalized vertex cover solver")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random instance file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=float, required=True, help="edge probability")
    gen.add_argument("--cost-max", type=int, default=100)
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--out", required=True)

    solve = sub.add_parser("solve", help="solve an instance file")
    solve.add_argument("--algo", choices=("ga", "exact"), default="ga")
    solve.add_argument("--in", dest="input", required=True)
    solve.add_argument("--out", help="write the full report here")
    solve.add_argument("--format", choices=("json", "csv"), default="json")
    _add_ga_flags(solve)

    verify = sub.add_parser("verify", help="compare the GA against the exact optimum on generated instances")
    verify.add_argument("--count", type=int, default=100)
    verify.add_argument("--n-min", type=int, default=6)
    verify.add_argument("--n-max", type=int, default=14)
    verify.add_argument("--p-list", type=_float_list, default=[0.3, 0.6], help="edge probabilities, cycled")
    verify.add_argument("--cost-max", type=int, default=100)
    verify.add_argument("--min-hit-rate", type=float, default=0.95)
    _add_ga_flags(verify)

    bench = sub.add_parser("bench", help="time the GA across reduce-worker counts")
    bench.add_argument("--in", dest="input")
    bench.add_argument("--n", type=int, default=2000)
    bench.add_argument("--p", type=float, default=0.01)
    bench.add_argument("--cost-max", type=int, default=100)
    bench.add_argument("--workers-list", type=_int_list, default=[1, 2, 4, 8])
    _add_ga_flags(bench, pop=512, gens=20)
    return parser


def _history_csv(result: EvolveResult | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for row in result.history if result is not None else ():
        writer.writerow([row.generation, repr(row.best_cost), repr(row.mean_cost), row.frozen_count, f"{row.elapsed_ms:.3f}"])
    return buf.getvalue()


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        instance = generate_instance(args.n, args.p, args.cost_max, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        Path(args.out).write_bytes(write_instance(instance))
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
    print(f"n={instance.n} m={instance.m}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    instance, digest = _read_instance(args.input)
    config = _ga_config(args) if args.algo == "ga" else None
    t0 = time.perf_counter()
    result = None
    if args.algo == "exact":
        try:
            exact = solve_exact(instance)
        except InstanceTooLarge as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_TOO_LARGE
        best_cost, bits, generations = exact.best_cost, exact.bitstring, 0
    else:
        try:
            result = evolve(instance, config, executor=args.executor)
        except (JobError, RuntimeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_JOB_FAILURE
        best_cost, bits, generations = result.best_cost, result.best_chromosome, result.generations_run
    wall_ms = (time.perf_counter() - t0) * 1000.0

    vertices = [i + 1 for i, ch in enumerate(bits) if ch == "1"]
    report = {
        "instance_path": str(args.input),
        "instance_sha256": digest,
        "algorithm": args.algo,
        "config": config.to_dict() if config is not None else {"max_n": MAX_EXACT_N},
        "best_cost": best_cost,
        "best_vertices": vertices,
        "best_bitstring": bits,
        "generations_run": generations,
        "wall_time_ms": round(wall_ms, 3),
        "history": [row._asdict() for row in result.history] if result is not None else [],
        "workers": config.worker_count if config is not None else 1,
        "master_seed": config.master_seed if config is not None else None,
    }
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
        sys.stdout.write(text)
    else:
        text = _history_csv(result)
        print(f"best_cost {best_cost:g}")
        print("vertices " + " ".join(map(str, vertices)))
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_OK


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index]).generate_state(1, np.uint64)[0])


def cmd_verify(args: argparse.Namespace) -> int:
    if args.count < 1:
        raise UsageError(f"invalid-parameter: --count must be >= 1, got {args.count}")
    if not 1 <= args.n_min <= args.n_max <= MAX_EXACT_N:
        raise UsageError(f"invalid-parameter: need 1 <= n-min <= n-max <= {MAX_EXACT_N}")
    if not args.p_list:
        raise UsageError("invalid-parameter: --p-list is empty")
    _ga_config(args)  # validate flags before doing any work

    picker = random.Random(args.seed)
    hits = 0
    print("index\tn\tm\tp\toptimum\tga_best\tgap")
    with MapReduceEngine(args.workers, args.executor) as engine:
        for i in range(args.count):
            n = picker.randint(args.n_min, args.n_max)
            p = args.p_list[i % len(args.p_list)]
            inst_seed = _derived_seed(args.seed, i)
            try:
                instance = generate_instance(n, p, args.cost_max, inst_seed)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            optimum = solve_exact(instance).best_cost
            result = evolve(instance, _ga_config(args, master_seed=inst_seed), engine=engine)
            gap = result.best_cost - optimum
            hits += gap == 0
            print(f"{i}\t{n}\t{instance.m}\t{p:g}\t{optimum:g}\t{result.best_cost:g}\t{gap:g}")
    rate = hits / args.count
    print(f"hit_rate\t{hits}/{args.count}\t{rate:.4f}")
    return EXIT_OK if rate >= args.min_hit_rate else EXIT_VERIFY_FAILED


def _signature(result: EvolveResult) -> tuple:
    return (
        result.best_chromosome,
        result.best_cost,
        result.generations_run,
        [(h.best_cost, h.mean_cost, h.frozen_count) for h in result.history],
        result.final_population,
    )


def cmd_bench(args: argparse.Namespace) -> int:
    if args.input:
        instance, _ = _read_instance(args.input)
    else:
        try:
            instance = generate_instance(args.n, args.p, args.cost_max, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    rows = []
    reference = None
    for workers in args.workers_list:
        config = _ga_config(args, worker_count=workers, stall_generations=0)
        with MapReduceEngine(workers, args.executor) as engine:
            t0 = time.perf_counter()
            result = evolve(instance, config, engine=engine)
            total_ms = (time.perf_counter() - t0) * 1000.0
        sig = _signature(result)
        if reference is None:
            reference = sig
        elif sig != reference:
            print(f"error: output-divergence-across-workers at workers={workers}", file=sys.stderr)
            return EXIT_DIVERGED
        per_gen = float(np.mean([h.elapsed_ms for h in result.history])) if result.history else 0.0
        rows.append((workers, result.generations_run, total_ms, per_gen, result.best_cost))

    base = rows[0][3]
    print("workers\tgenerations\ttotal_ms\tper_gen_ms\tratio_vs_first\tbest_cost")
    for workers, gens, total_ms, per_gen, best in rows:
        ratio = per_gen / base if base else float("nan")
        print(f"{workers}\t{gens}\t{total_ms:.1f}\t{per_gen:.3f}\t{ratio:.3f}\t{best:g}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "verify": cmd_verify, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
