"""Exhaustive optimum for small instances, used as the reference oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instance import GvcpInstance, evaluate, flip_delta

MAX_EXACT_N = 26


class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ExactResult:
    best_subset: np.ndarray
    best_cost: float
    subsets_examined: int

    @property
    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.best_subset)

    @property
    def vertices(self) -> list[int]:
        """1-based vertex labels of the optimum."""
        return [i + 1 for i, b in enumerate(self.best_subset) if b]


def _lex_key(mask: int, n: int) -> str:
    # bit 0 is the first character, so lexicographic order == bit-reversed integer order
    return "".join("1" if mask >> k & 1 else "0" for k in range(n))


def solve_exact(instance: GvcpInstance, max_n: int = MAX_EXACT_N) -> ExactResult:
    """Enumerate all ``2**n`` subsets in Gray-code order.

    Each step toggles one vertex and applies :func:`flip_delta`. Ties on cost
    go to the lexicographically smallest bitstring (vertex 1 first); since
    distinct subsets have distinct bitstrings the order is total.
    """
    n = instance.n
    if n > max_n:
        raise InstanceTooLarge(f"instance-too-large: n={n} exceeds the exact-solver cap of {max_n}")

    member = [False] * n
    mask = 0
    cost = evaluate(instance, member)
    best_cost, best_mask = cost, 0
    total = 1 << n
    for i in range(1, total):
        v = (i & -i).bit_length() - 1  # lowest set bit of i: the Gray-code flip position
        cost += flip_delta(instance, member, v)
        member[v] = not member[v]
        mask ^= 1 << v
        if cost < best_cost or (cost == best_cost and _lex_key(mask, n) < _lex_key(best_mask, n)):
            best_cost, best_mask = cost, mask

    subset = np.array([bool(best_mask >> k & 1) for k in range(n)])
    # recompute from scratch so accumulated float error never leaks into the result
    return ExactResult(subset, evaluate(instance, subset), total)
