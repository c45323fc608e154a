"""Exact optimum makespan by breadth-first search over downsets."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

from .instance import Instance

__all__ = [
    "Schedule",
    "Violation",
    "ValidationReport",
    "OracleTooLarge",
    "ORACLE_CAP",
    "exact_makespan",
    "naive_makespan",
    "validate",
]

ORACLE_CAP = 24


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=True)
class Schedule:
    """Job -> 1-based slot map, plus the jobs a partial schedule gave up on."""

    slots: Mapping[int, int]
    discarded: frozenset[int] = frozenset()

    @property
    def makespan(self) -> int:
        return max(self.slots.values(), default=0)

    def jobs_at(self, t: int) -> list[int]:
        return sorted(j for j, s in self.slots.items() if s == t)

    def by_slot(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for j in sorted(self.slots):
            out.setdefault(self.slots[j], []).append(j)
        return dict(sorted(out.items()))

    def without(self, jobs) -> "Schedule":
        jobs = set(jobs)
        return Schedule(
            {j: t for j, t in self.slots.items() if j not in jobs},
            frozenset(self.discarded - jobs),
        )

    def to_json(self) -> dict:
        return {
            "slots": {str(j): t for j, t in sorted(self.slots.items())},
            "discarded": sorted(self.discarded),
            "makespan": self.makespan,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Schedule":
        return cls(
            {int(j): int(t) for j, t in data["slots"].items()},
            frozenset(int(j) for j in data.get("discarded", [])),
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # "capacity" | "precedence" | "coverage" | "slot"
    detail: str
    jobs: tuple[int, ...] = ()
    slot: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(inst: Instance, sched: Schedule, scope=None) -> ValidationReport:
    """Check capacity, precedence and coverage; report every violation found.

    ``scope`` restricts the coverage check to a subset of jobs (used for
    sub-schedules produced inside the recursion).
    """
    found: list[Violation] = []
    jobs = set(inst.jobs) if scope is None else set(scope)
    for j, t in sched.slots.items():
        if not 1 <= j <= inst.n:
            found.append(Violation("coverage", f"unknown job {j}", (j,)))
        if t < 1:
            found.append(Violation("slot", f"job {j} at non-positive slot {t}", (j,), t))
    for t, js in sched.by_slot().items():
        if len(js) > inst.m:
            found.append(Violation("capacity", f"{len(js)} jobs at slot {t} with m={inst.m}", tuple(js), t))
    rel = inst.closure
    for u, v in rel.pairs():
        if u in sched.slots and v in sched.slots and sched.slots[u] >= sched.slots[v]:
            found.append(
                Violation(
                    "precedence",
                    f"({u},{v}) at slots {sched.slots[u]} >= {sched.slots[v]}",
                    (u, v),
                    sched.slots[v],
                )
            )
    both = set(sched.slots) & set(sched.discarded)
    for j in sorted(both):
        found.append(Violation("coverage", f"job {j} both scheduled and discarded", (j,)))
    missing = jobs - set(sched.slots) - set(sched.discarded)
    for j in sorted(missing):
        found.append(Violation("coverage", f"job {j} neither scheduled nor discarded", (j,)))
    return ValidationReport(tuple(found))


def _masks(inst: Instance) -> list[int]:
    # bit (j-1) per job; pred masks over the closure
    rel = inst.closure
    return [rel.pred[j] >> 1 for j in inst.jobs]


def exact_makespan(inst: Instance, prune: bool = True) -> tuple[int, Schedule]:
    """Minimum makespan and a witness schedule.

    States are completed-job sets. With ``prune`` each slot schedules exactly
    ``min(m, #available)`` jobs: moving an available job into an idle machine
    never hurts unit jobs, so some optimal schedule has that form.
    """
    n, m = inst.n, inst.m
    if n > ORACLE_CAP:
        raise OracleTooLarge(f"exact oracle capped at n <= {ORACLE_CAP}, got n={n}")
    preds = _masks(inst)
    full = (1 << n) - 1
    parent: dict[int, tuple[int, int]] = {0: (-1, 0)}
    frontier = [0]
    depth = 0
    while full not in parent:
        depth += 1
        nxt = []
        for done in frontier:
            avail = [j for j in range(n) if not done >> j & 1 and preds[j] & ~done == 0]
            if prune:
                sizes = [min(m, len(avail))]
            else:
                sizes = range(1, min(m, len(avail)) + 1)
            for size in sizes:
                for combo in combinations(avail, size):
                    step = 0
                    for j in combo:
                        step |= 1 << j
                    state = done | step
                    if state not in parent:
                        parent[state] = (done, step)
                        nxt.append(state)
        frontier = nxt
    slots: dict[int, int] = {}
    state, t = full, depth
    while state:
        prev, step = parent[state]
        for j in range(n):
            if step >> j & 1:
                slots[j + 1] = t
        state, t = prev, t - 1
    return depth, Schedule(slots)


def naive_makespan(inst: Instance) -> int:
    """Depth-first enumeration over every per-slot subset of available jobs.

    No downset memo and no fullness pruning; only a best-so-far cut-off.
    Intended as an independent check for small ``n``.
    """
    n, m = inst.n, inst.m
    preds = _masks(inst)
    full = (1 << n) - 1
    best = n

    def dfs(done: int, used: int) -> None:
        nonlocal best
        if done == full:
            best = min(best, used)
            return
        if used + 1 >= best:
            return
        avail = [j for j in range(n) if not done >> j & 1 and preds[j] & ~done == 0]
        for size in range(min(m, len(avail)), 0, -1):
            for combo in combinations(avail, size):
                step = sum(1 << j for j in combo)
                dfs(done | step, used + 1)

    dfs(0, 0)
    return best
