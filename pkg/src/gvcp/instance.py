"""GVCP instances: model, objective evaluation, file I/O and random generation.

An instance is an undirected graph where every vertex ``v`` carries a cost
``c(v)`` and every edge carries three costs ``d0 >= d1 >= d2 >= 0``. For a
vertex subset ``S`` an edge pays ``d2`` when both endpoints are in ``S``,
``d1`` when exactly one is, and ``d0`` when neither is. The objective is
``c(S)`` plus the sum of edge payments.

File format (vertices are 1-based on disk, 0-based in memory)::

    # comment
    n m
    c1 c2 ... cn
    u v d0 d1 d2      (m lines)
"""

from __future__ import annotations

import hashlib
import math
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class InstanceError(ValueError):
    """Invalid instance data. ``kind`` names the violation, ``line`` is 1-based when known."""

    def __init__(self, kind: str, message: str, line: int | None = None):
        self.kind = kind
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{kind}: {message}")


class Edge(NamedTuple):
    u: int
    v: int
    d0: float
    d1: float
    d2: float


class GvcpInstance:
    """Immutable GVCP instance; safe to share between workers.

    Costs live in flat float64 arrays. The tuple views (``vertex_costs``,
    ``edges``, ``adjacency``) are built on first use, so pickling an instance
    to a worker process only ships the arrays.
    """

    def __init__(self, n: int, vertex_costs: Sequence[float], edges: Iterable[Sequence[float]]):
        edge_list = [Edge(int(e[0]), int(e[1]), float(e[2]), float(e[3]), float(e[4])) for e in edges]
        costs = [float(c) for c in vertex_costs]
        _validate(n, costs, edge_list)
        m = len(edge_list)
        self._init_arrays(
            n,
            np.asarray(costs, dtype=np.float64),
            np.fromiter((e.u for e in edge_list), dtype=np.intp, count=m),
            np.fromiter((e.v for e in edge_list), dtype=np.intp, count=m),
            np.array([(e.d0, e.d1, e.d2) for e in edge_list], dtype=np.float64).reshape(m, 3),
        )
        self.__dict__["vertex_costs"] = tuple(costs)
        self.__dict__["edges"] = tuple(edge_list)

    def _init_arrays(self, n, costs, u, v, table) -> None:
        for arr in (costs, u, v, table):
            arr.flags.writeable = False
        d = self.__dict__
        d["n"], d["_cost_arr"], d["_u"], d["_v"], d["_edge_table"] = int(n), costs, u, v, table
        d["_edge_flat"] = table.ravel()
        d["_edge_base"] = np.arange(len(u)) * 3

    def __setattr__(self, name, value):
        raise AttributeError("GvcpInstance is immutable")

    def __reduce__(self):
        return (_from_arrays, (self.n, self._cost_arr, self._u, self._v, self._edge_table))

    @cached_property
    def vertex_costs(self) -> tuple[float, ...]:
        return tuple(self._cost_arr.tolist())

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(
            Edge(u, v, *d) for u, v, d in zip(self._u.tolist(), self._v.tolist(), self._edge_table.tolist())
        )

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex, ``(neighbour, edge index)`` for every incident edge."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for idx, (u, v) in enumerate(zip(self._u.tolist(), self._v.tolist())):
            adj[u].append((v, idx))
            adj[v].append((u, idx))
        return tuple(tuple(a) for a in adj)

    @property
    def m(self) -> int:
        return len(self._u)

    def __repr__(self) -> str:
        return f"GvcpInstance(n={self.n}, m={self.m})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GvcpInstance):
            return NotImplemented
        return self.n == other.n and self.vertex_costs == other.vertex_costs and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.vertex_costs, self.edges))


def _from_arrays(n, costs, u, v, table) -> GvcpInstance:
    inst = object.__new__(GvcpInstance)
    inst._init_arrays(n, costs, u, v, table)
    return inst


def _validate(n: int, costs: Sequence[float], edges: Sequence[Edge], lines: Sequence[int] | None = None) -> None:
    if n < 1:
        raise InstanceError("malformed-line", f"vertex count must be >= 1, got {n}")
    if len(costs) != n:
        raise InstanceError("malformed-line", f"expected {n} vertex costs, got {len(costs)}")
    for i, c in enumerate(costs):
        if not (c >= 0 and math.isfinite(c)):
            raise InstanceError("cost-ordering-violation", f"vertex {i + 1} has cost {c}")
    seen: dict[tuple[int, int], int] = {}
    for idx, e in enumerate(edges):
        line = lines[idx] if lines is not None else None
        if not (0 <= e.u < n and 0 <= e.v < n):
            raise InstanceError("vertex-out-of-range", f"edge ({e.u + 1}, {e.v + 1}) with n={n}", line)
        if e.u == e.v:
            raise InstanceError("self-loop", f"vertex {e.u + 1}", line)
        if not all(math.isfinite(d) for d in (e.d0, e.d1, e.d2)) or not (e.d0 >= e.d1 >= e.d2 >= 0):
            raise InstanceError(
                "cost-ordering-violation", f"need d0 >= d1 >= d2 >= 0, got ({e.d0}, {e.d1}, {e.d2})", line
            )
        key = (min(e.u, e.v), max(e.u, e.v))
        if key in seen:
            raise InstanceError("duplicate-edge", f"edge ({e.u + 1}, {e.v + 1}) repeated", line)
        seen[key] = idx


def parse_instance(text: str | bytes) -> GvcpInstance:
    """Parse the instance file format; every error carries its line number."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))
    if not rows:
        raise InstanceError("malformed-line", "empty instance file", 1)

    header_line, header = rows[0]
    if len(header) != 2:
        raise InstanceError("malformed-line", "header must be 'n m'", header_line)
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise InstanceError("malformed-line", "header must hold two integers", header_line) from None
    if n < 1 or m < 0:
        raise InstanceError("malformed-line", f"invalid header n={n} m={m}", header_line)
    if len(rows) < 2:
        raise InstanceError("malformed-line", "missing vertex cost line", header_line + 1)

    cost_line, cost_tokens = rows[1]
    if len(cost_tokens) != n:
        raise InstanceError("malformed-line", f"expected {n} vertex costs, got {len(cost_tokens)}", cost_line)
    costs = [_number(tok, cost_line) for tok in cost_tokens]
    for c in costs:
        if c < 0:
            raise InstanceError("cost-ordering-violation", f"negative vertex cost {c}", cost_line)

    edge_rows = rows[2:]
    if len(edge_rows) != m:
        where = edge_rows[m][0] if len(edge_rows) > m else (edge_rows[-1][0] if edge_rows else cost_line)
        raise InstanceError("malformed-line", f"expected {m} edge lines, got {len(edge_rows)}", where)
    edges = []
    lines = []
    for lineno, toks in edge_rows:
        if len(toks) != 5:
            raise InstanceError("malformed-line", "edge line must be 'u v d0 d1 d2'", lineno)
        try:
            u, v = int(toks[0]) - 1, int(toks[1]) - 1
        except ValueError:
            raise InstanceError("malformed-line", "vertex ids must be integers", lineno) from None
        d0, d1, d2 = (_number(t, lineno) for t in toks[2:])
        edges.append(Edge(u, v, d0, d1, d2))
        lines.append(lineno)

    _validate(n, costs, edges, lines)
    return GvcpInstance(n, tuple(costs), tuple(edges))


def _number(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise InstanceError("malformed-line", f"not a number: {token!r}", line) from None
    if not math.isfinite(value):
        raise InstanceError("malformed-line", f"not a finite number: {token!r}", line)
    return value


def _fmt(x: float) -> str:
    return str(int(x)) if x.is_integer() else repr(x)


def write_instance(instance: GvcpInstance) -> bytes:
    """Serialise to the canonical file format (UTF-8, LF, trailing newline)."""
    out = [f"{instance.n} {instance.m}", " ".join(_fmt(c) for c in instance.vertex_costs)]
    for e in instance.edges:
        out.append(f"{e.u + 1} {e.v + 1} {_fmt(e.d0)} {_fmt(e.d1)} {_fmt(e.d2)}")
    return ("\n".join(out) + "\n").encode("utf-8")


def content_hash(instance: GvcpInstance) -> str:
    return hashlib.sha256(write_instance(instance)).hexdigest()


_VECTOR_MIN_EDGES = 256


def _membership(instance: GvcpInstance, s) -> np.ndarray:
    x = np.asarray(s).astype(bool, copy=False)
    if x.shape != (instance.n,):
        raise ValueError(f"length-mismatch: subset has shape {x.shape}, instance has n={instance.n}")
    return x


def _evaluate_small(instance: GvcpInstance, member: list) -> float:
    # plain loops beat numpy's per-call overhead on small instances
    total = math.fsum(c for c, b in zip(instance.vertex_costs, member) if b)
    return total + math.fsum(e[2 + member[e.u] + member[e.v]] for e in instance.edges)


def evaluate_bits(instance: GvcpInstance, bits: str) -> float:
    """:func:`evaluate` for a ``'0'/'1'`` string (character k is vertex k)."""
    if len(bits) != instance.n:
        raise ValueError(f"length-mismatch: {len(bits)} characters, instance has n={instance.n}")
    if instance.m < _VECTOR_MIN_EDGES:
        return _evaluate_small(instance, [ch == "1" for ch in bits])
    return evaluate(instance, np.frombuffer(bits.encode("ascii"), dtype=np.uint8) == 49)


def evaluate(instance: GvcpInstance, s) -> float:
    """Objective ``c(S) + d2(E(S)) + d1(E(S, S^c)) + d0(E(S^c))``.

    ``s`` is a length-``n`` 0/1 (or boolean) membership vector.
    """
    x = _membership(instance, s)
    if instance.m < _VECTOR_MIN_EDGES:
        return _evaluate_small(instance, x.tolist())
    total = float(instance._cost_arr[x].sum())
    if instance.m:
        # row-major (m, 3) table: entry for edge i with k endpoints inside is flat[3i + k]
        total += float(np.take(instance._edge_flat, instance._edge_base + x[instance._u] + x[instance._v]).sum())
    return total


def cost_breakdown(instance: GvcpInstance, s) -> dict[str, float]:
    """Per-term decomposition of the objective."""
    x = _membership(instance, s)
    terms = {"vertex": float(instance._cost_arr[x].sum()), "d2_inside": 0.0, "d1_crossing": 0.0, "d0_outside": 0.0}
    names = ("d0_outside", "d1_crossing", "d2_inside")
    for e in instance.edges:
        k = int(x[e.u]) + int(x[e.v])
        terms[names[k]] += (e.d0, e.d1, e.d2)[k]
    terms["total"] = terms["vertex"] + terms["d2_inside"] + terms["d1_crossing"] + terms["d0_outside"]
    return terms


def flip_delta(instance: GvcpInstance, s, v: int) -> float:
    """Change of the objective when vertex ``v`` is toggled in ``s``; O(deg v).

    ``s`` must support integer indexing with truthy membership values.
    """
    if not 0 <= v < instance.n:
        raise ValueError(f"vertex-out-of-range: {v} not in [0, {instance.n})")
    edges = instance.edges
    a = 1 if s[v] else 0
    delta = -instance.vertex_costs[v] if a else instance.vertex_costs[v]
    for nbr, idx in instance.adjacency[v]:
        e = edges[idx]
        b = 1 if s[nbr] else 0
        # k = endpoints inside S before the flip; after the flip it moves by +-1
        if b:
            delta += (e.d1 - e.d2) if a else (e.d2 - e.d1)
        else:
            delta += (e.d0 - e.d1) if a else (e.d1 - e.d0)
    return delta


def generate_instance(n: int, edge_prob: float, cost_max: int, seed: int) -> GvcpInstance:
    """Random G(n, p) instance with integer costs drawn uniformly from ``[0, cost_max]``.

    Edge triples are three uniform draws sorted descending.
    """
    if n < 1:
        raise ValueError(f"invalid-parameter: n must be >= 1, got {n}")
    if not 0 < edge_prob <= 1:
        raise ValueError(f"invalid-parameter: edge_prob must be in (0, 1], got {edge_prob}")
    if cost_max < 1 or int(cost_max) != cost_max:
        raise ValueError(f"invalid-parameter: cost_max must be a positive integer, got {cost_max}")

    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    costs = rng.integers(0, cost_max + 1, size=n)
    iu, iv = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < edge_prob
    iu, iv = iu[keep], iv[keep]
    triples = -np.sort(-rng.integers(0, cost_max + 1, size=(iu.size, 3)), axis=1)
    edges = tuple(
        Edge(int(u), int(v), float(t[0]), float(t[1]), float(t[2])) for u, v, t in zip(iu, iv, triples)
    )
    return GvcpInstance(n, tuple(float(c) for c in costs), edges)


def instance_from_edges(costs: Iterable[float], edges: Iterable[tuple[int, int, float, float, float]]) -> GvcpInstance:
    """Build from 0-based edge tuples ``(u, v, d0, d1, d2)``."""
    costs = tuple(costs)
    return GvcpInstance(len(costs), costs, tuple(Edge(*e) for e in edges))


EXAMPLE_1 = b"""4 5
10 20 30 40
1 2 50 30 20
1 3 40 40 30
1 4 50 20 20
2 3 30 20 10
3 4 20 20 20
"""
