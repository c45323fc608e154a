"""Instances of unit-job scheduling with precedences.

An instance is ``n`` unit jobs (ids ``1..n``), ``m`` identical machines and a
set of precedence pairs ``(u, v)`` meaning ``u`` must finish before ``v``
starts.  Two encodings are supported:

* the line format::

      p sched <n> <m>
      e <u> <v>
      c free-form comment

* a JSON mirror ``{"n": .., "m": .., "prec": [[u, v], ...]}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Sequence

__all__ = [
    "Instance",
    "PrecRelation",
    "InstanceError",
    "MalformedInstance",
    "JobIdOutOfRange",
    "CycleDetected",
    "SplitMix64",
    "parse_instance",
    "serialize_instance",
    "instance_from_json",
    "instance_to_json",
    "transitive_closure",
    "generate",
    "longest_chain",
]


class InstanceError(ValueError):
    """Base class for rejected instance input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedInstance(InstanceError):
    pass


class JobIdOutOfRange(InstanceError):
    pass


class CycleDetected(InstanceError):
    pass


@dataclass(frozen=True)
class PrecRelation:
    """Transitive closure of a precedence DAG, stored as bitmasks.

    Bit ``v`` of ``succ[u]`` is set iff ``u`` strictly precedes ``v``.
    Index 0 is unused so job ids index directly.
    """

    n: int
    succ: tuple[int, ...]
    pred: tuple[int, ...]

    def __contains__(self, pair: tuple[int, int]) -> bool:
        u, v = pair
        return bool(self.succ[u] >> v & 1)

    def precedes(self, u: int, v: int) -> bool:
        return bool(self.succ[u] >> v & 1)

    def pairs(self) -> Iterator[tuple[int, int]]:
        for u in range(1, self.n + 1):
            mask = self.succ[u]
            v = 0
            while mask:
                if mask & 1:
                    yield (u, v)
                mask >>= 1
                v += 1

    def __len__(self) -> int:
        return sum(bin(s).count("1") for s in self.succ)

    def successors(self, u: int) -> list[int]:
        return _bits(self.succ[u])

    def predecessors(self, v: int) -> list[int]:
        return _bits(self.pred[v])

    def topological_order(self) -> list[int]:
        # u < v in the order implies pred(u) is a strict subset of pred(v)
        return sorted(range(1, self.n + 1), key=lambda j: (bin(self.pred[j]).count("1"), j))


def _bits(mask: int) -> list[int]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


@dataclass(frozen=True)
class Instance:
    n: int
    m: int
    prec: frozenset[tuple[int, int]] = frozenset()
    # padding jobs added to round the horizon up; excluded from reports
    dummies: frozenset[int] = field(default=frozenset(), compare=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise MalformedInstance(f"job count must be positive, got {self.n}")
        if self.m < 1:
            raise MalformedInstance(f"machine count must be positive, got {self.m}")
        object.__setattr__(self, "prec", frozenset((int(u), int(v)) for u, v in self.prec))
        for u, v in self.prec:
            if not (1 <= u <= self.n and 1 <= v <= self.n):
                raise JobIdOutOfRange(f"edge ({u}, {v}) outside [1, {self.n}]")
            if u == v:
                raise CycleDetected(f"self-precedence on job {u}")
        # touching the closure validates acyclicity
        self.closure

    @property
    def jobs(self) -> range:
        return range(1, self.n + 1)

    @cached_property
    def closure(self) -> PrecRelation:
        return _close(self.n, self.prec)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.prec)


def _close(n: int, prec: Iterable[tuple[int, int]], lines: dict | None = None) -> PrecRelation:
    direct = [0] * (n + 1)
    indeg = [0] * (n + 1)
    for u, v in prec:
        if not direct[u] >> v & 1:
            direct[u] |= 1 << v
            indeg[v] += 1
    # Kahn's algorithm; leftover jobs sit on a cycle
    order = []
    ready = [j for j in range(1, n + 1) if indeg[j] == 0]
    while ready:
        u = ready.pop()
        order.append(u)
        for v in _bits(direct[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if len(order) < n:
        stuck = {j for j in range(1, n + 1) if indeg[j] > 0}
        line = None
        if lines:
            on_cycle = [ln for (u, v), ln in lines.items() if u in stuck and v in stuck]
            line = max(on_cycle) if on_cycle else None
        raise CycleDetected("cycle detected among jobs " + ",".join(map(str, sorted(stuck))), line)
    succ = [0] * (n + 1)
    for u in reversed(order):
        acc = direct[u]
        for v in _bits(direct[u]):
            acc |= succ[v]
        succ[u] = acc
    pred = [0] * (n + 1)
    for u in range(1, n + 1):
        for v in _bits(succ[u]):
            pred[v] |= 1 << u
    return PrecRelation(n, tuple(succ), tuple(pred))


def transitive_closure(inst: Instance) -> PrecRelation:
    return inst.closure


def parse_instance(text: str) -> Instance:
    """Parse the line format; JSON input (leading ``{``) is accepted too."""
    if text.lstrip().startswith("{"):
        return instance_from_json(text)
    header: tuple[int, int] | None = None
    edges: dict[tuple[int, int], int] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        if parts[0] == "p":
            if header is not None:
                raise MalformedInstance("duplicate header", lineno)
            if len(parts) != 4 or parts[1] != "sched":
                raise MalformedInstance(f"malformed header {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise MalformedInstance(f"malformed header {line!r}", lineno) from None
            if n < 1 or m < 1:
                raise MalformedInstance(f"malformed header {line!r}", lineno)
            header = (n, m)
        elif parts[0] == "e":
            if header is None:
                raise MalformedInstance("edge before header", lineno)
            if len(parts) != 3:
                raise MalformedInstance(f"malformed edge {line!r}", lineno)
            try:
                u, v = int(parts[1]), int(parts[2])
            except ValueError:
                raise MalformedInstance(f"malformed edge {line!r}", lineno) from None
            n = header[0]
            if not (1 <= u <= n and 1 <= v <= n):
                raise JobIdOutOfRange(f"job id outside [1, {n}] in {line!r}", lineno)
            if u == v:
                raise CycleDetected(f"self-precedence on job {u}", lineno)
            edges.setdefault((u, v), lineno)
        else:
            raise MalformedInstance(f"unknown line type {parts[0]!r}", lineno)
    if header is None:
        raise MalformedInstance("missing 'p sched <n> <m>' header", 1)
    n, m = header
    _close(n, edges, edges)
    return Instance(n, m, frozenset(edges))


def serialize_instance(inst: Instance) -> str:
    lines = [f"p sched {inst.n} {inst.m}"]
    lines += [f"e {u} {v}" for u, v in inst.sorted_edges()]
    return "\n".join(lines) + "\n"


def instance_to_json(inst: Instance) -> dict:
    return {"n": inst.n, "m": inst.m, "prec": [[u, v] for u, v in inst.sorted_edges()]}


def instance_from_json(data: str | dict) -> Instance:
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise MalformedInstance(f"invalid JSON: {exc.msg}", exc.lineno) from None
    try:
        n, m = int(data["n"]), int(data["m"])
        prec = [(int(u), int(v)) for u, v in data.get("prec", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInstance(f"bad JSON instance: {exc}") from None
    return Instance(n, m, frozenset(prec))


class SplitMix64:
    """SplitMix64 (Steele, Lea, Flood 2014): the seeded stream behind ``generate``.

    Chosen because it is a dozen lines in any language, so generated corpora
    can be reproduced bit-for-bit elsewhere.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def bernoulli(self, p: Fraction) -> bool:
        # top 53 bits as a uniform draw in [0, 1); exact rational comparison
        return (self.next_u64() >> 11) < p * (1 << 53)


def generate(model: str, n: int, m: int, param: Fraction | int | str | None = None, seed: int = 0) -> Instance:
    """Deterministic instance generator; edges always run from lower to higher id.

    ``gnp`` draws each pair ``u < v`` (lexicographic order) with probability
    ``param``; ``chain`` ignores ``param``; ``layered`` splits the jobs into
    ``param`` consecutive layers (earlier layers one larger when uneven) and
    makes every job of a layer precede every job of the next.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    edges: set[tuple[int, int]] = set()
    if model == "chain":
        edges = {(j, j + 1) for j in range(1, n)}
    elif model == "gnp":
        if param is None:
            raise ValueError("gnp needs an edge probability")
        p = Fraction(param)
        if not 0 <= p <= 1:
            raise ValueError(f"edge probability {p} outside [0, 1]")
        rng = SplitMix64(seed)
        for u in range(1, n + 1):
            for v in range(u + 1, n + 1):
                if rng.bernoulli(p):
                    edges.add((u, v))
    elif model == "layered":
        if param is None:
            raise ValueError("layered needs a layer count")
        layers = Fraction(param)
        if layers.denominator != 1 or not 1 <= layers <= n:
            raise ValueError(f"layer count must be an integer in [1, {n}], got {param}")
        count = int(layers)
        sizes = [n // count + (1 if i < n % count else 0) for i in range(count)]
        groups, start = [], 1
        for size in sizes:
            groups.append(range(start, start + size))
            start += size
        for lo, hi in zip(groups, groups[1:]):
            edges.update((u, v) for u in lo for v in hi)
    else:
        raise ValueError(f"unknown model {model!r}")
    return Instance(n, m, frozenset(edges))


def longest_chain(rel: PrecRelation, subset: Iterable[int]) -> list[int]:
    """Maximum chain inside ``subset``; among equals, the lexicographically smallest."""
    members = set(subset)
    if not members:
        return []
    order = [j for j in rel.topological_order() if j in members]
    best: dict[int, tuple[int, ...]] = {}
    for j in reversed(order):
        tail: tuple[int, ...] = ()
        for i in rel.successors(j):
            cand = best.get(i)
            if cand is None:
                continue
            if len(cand) > len(tail) or (len(cand) == len(tail) and cand < tail):
                tail = cand
        best[j] = (j,) + tail
    top = max(best.values(), key=lambda seq: (len(seq), _neg(seq)))
    return list(top)


def _neg(seq: Sequence[int]) -> tuple[int, ...]:
    return tuple(-x for x in seq)
