from itertools import product

import numpy as np
import pytest

from gvcp.instance import EXAMPLE_1, parse_instance


def naive_cost(instance, members):
    """Objective by explicit edge classification into E(S), E(S, S^c), E(S^c)."""
    S = {v for v in range(instance.n) if members[v]}
    inside = [e for e in instance.edges if e.u in S and e.v in S]
    crossing = [e for e in instance.edges if (e.u in S) != (e.v in S)]
    outside = [e for e in instance.edges if e.u not in S and e.v not in S]
    assert len(inside) + len(crossing) + len(outside) == instance.m
    return (
        sum(instance.vertex_costs[v] for v in S)
        + sum(e.d2 for e in inside)
        + sum(e.d1 for e in crossing)
        + sum(e.d0 for e in outside)
    )


def brute_force(instance):
    """(best cost, all optimal bitstrings) by enumerating every subset."""
    best, winners = None, []
    for bits in product((0, 1), repeat=instance.n):
        cost = naive_cost(instance, bits)
        chrom = "".join(map(str, bits))
        if best is None or cost < best:
            best, winners = cost, [chrom]
        elif cost == best:
            winners.append(chrom)
    return best, winners


@pytest.fixture
def example1():
    return parse_instance(EXAMPLE_1)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


class ForcedStream:
    """Stand-in RNG whose draws are fixed; ``random`` returns ``value`` everywhere."""

    def __init__(self, value, cut=None):
        self.value = value
        self.cut = cut

    def random(self, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def integers(self, lo, hi=None, size=None):
        return self.cut


ACCEPTANCE_LINES = []


def record_criterion(label, ok, detail=""):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
