"""Placing top jobs into the free slots of a bottom schedule.

Each top job gets a window of whole level-``qk`` intervals, cut from its
support interval by dropping the first and last interval it touches.  Jobs
are then matched to free machine slots inside their windows, and a greedy
pass restores precedence among the matched jobs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

from .instance import PrecRelation
from .laminar import Interval, JobWindows, LaminarFamily, midpoint
from .oracle import Schedule

__all__ = [
    "Window",
    "ext",
    "compute_windows",
    "slot_capacity",
    "capacitated_matching",
    "hall_deficiency",
    "InsertResult",
    "insert_top_jobs",
    "condition3_violations",
    "monotonicity_violations",
    "TopPlacementError",
]


class TopPlacementError(AssertionError):
    """Raised when an upstream guarantee about windows does not hold."""


@dataclass(frozen=True)
class Window:
    r: int
    d: int
    empty: bool = False
    # 1-based level-qk interval indices covered, when not empty
    first: int | None = None
    last: int | None = None

    def slots(self) -> range:
        return range(0) if self.empty else range(self.r, self.d + 1)

    def __contains__(self, t: int) -> bool:
        return not self.empty and self.r <= t <= self.d

    def to_json(self) -> dict:
        return {"r": self.r, "d": self.d, "empty": self.empty}


def ext(first: int, last: int, count: int) -> tuple[int, int]:
    """Grow a run of interval indices by one on each side, clipped to ``[1, count]``."""
    if not 1 <= first <= last <= count:
        raise ValueError(f"bad run {first}..{last} of {count}")
    return max(1, first - 1), min(count, last + 1)


def compute_windows(windows: JobWindows, top: Sequence[int], level: int) -> dict[int, Window]:
    fam: LaminarFamily = windows.fam
    if level > fam.depth:
        raise ValueError(f"level {level} is below the single-slot level {fam.depth}")
    out = {}
    for j in sorted(top):
        lo, hi = windows.S[j]
        tr, td = fam.index_of(level, lo), fam.index_of(level, hi)
        if td <= tr + 1:
            mj = midpoint(windows.assigned[j])
            out[j] = Window(mj, mj, empty=True)
        else:
            a, b = tr + 1, td - 1
            out[j] = Window(fam.interval(level, a)[0], fam.interval(level, b)[1], False, a, b)
    return out


def slot_capacity(sigma: Schedule, node: Interval, m: int) -> dict[int, int]:
    counts: dict[int, int] = {}
    for t in sigma.slots.values():
        counts[t] = counts.get(t, 0) + 1
    caps = {t: m - counts.get(t, 0) for t in range(node[0], node[1] + 1)}
    if any(c < 0 for c in caps.values()):
        raise TopPlacementError("bottom schedule over capacity")
    return caps


def capacitated_matching(
    allowed: Mapping[int, Sequence[int]], caps: Mapping[int, int]
) -> tuple[dict[int, int], set[int]]:
    """Maximum assignment of jobs to slots, slot ``t`` used at most ``caps[t]`` times.

    Augmenting paths in job-id order; a slot with spare capacity ends a path.
    """
    holders: dict[int, list[int]] = {t: [] for t in caps}
    where: dict[int, int] = {}

    def augment(j: int, seen: set[int]) -> bool:
        for t in allowed.get(j, ()):
            if t in seen or caps.get(t, 0) <= 0:
                continue
            seen.add(t)
            if len(holders[t]) < caps[t]:
                holders[t].append(j)
                where[j] = t
                return True
            for other in list(holders[t]):
                if augment(other, seen):
                    holders[t].remove(other)
                    holders[t].append(j)
                    where[j] = t
                    return True
        return False

    unmatched = set()
    for j in sorted(allowed):
        if not augment(j, set()):
            unmatched.add(j)
    return dict(sorted(where.items())), unmatched


def hall_deficiency(allowed: Mapping[int, Sequence[int]], caps: Mapping[int, int]) -> int:
    """``max_J |J| - cap(N(J))`` over all job subsets, by enumeration."""
    jobs = sorted(allowed)
    best = 0
    for r in range(1, len(jobs) + 1):
        for group in combinations(jobs, r):
            nbhd = set().union(*(allowed[j] for j in group))
            best = max(best, r - sum(max(caps.get(t, 0), 0) for t in nbhd))
    return best


def condition3_violations(
    sigma: Schedule, wins: Mapping[int, Window], rel: PrecRelation
) -> list[tuple[int, int]]:
    """Cross pairs whose bottom job sits inside the top job's window."""
    bad = []
    for j, w in sorted(wins.items()):
        if w.empty:
            continue
        for i in rel.predecessors(j) + rel.successors(j):
            if i in sigma.slots and sigma.slots[i] in w:
                bad.append((j, i))
    return bad


def monotonicity_violations(wins: Mapping[int, Window], rel: PrecRelation) -> list[tuple[int, int]]:
    bad = []
    for j, wj in sorted(wins.items()):
        for i in rel.successors(j):
            wi = wins.get(i)
            if wi is None or wj.empty or wi.empty:
                continue
            if not (wj.r <= wi.r and wj.d <= wi.d):
                bad.append((j, i))
    return bad


@dataclass
class InsertResult:
    schedule: Schedule
    discarded_empty: set[int] = field(default_factory=set)
    discarded_unmatched: set[int] = field(default_factory=set)
    discarded_repair: set[int] = field(default_factory=set)

    @property
    def discarded(self) -> set[int]:
        return self.discarded_empty | self.discarded_unmatched | self.discarded_repair


def insert_top_jobs(
    sigma: Schedule,
    top: Sequence[int],
    wins: Mapping[int, Window],
    caps: Mapping[int, int],
    rel: PrecRelation,
) -> InsertResult:
    """Extend ``sigma`` by the top jobs; returns the schedule and the three discard sets.

    Phase A drops jobs with an empty window, phase B drops jobs a maximum
    matching leaves out, and phase C re-places the matched jobs by deadline
    so that top-to-top precedences hold.
    """
    bad = condition3_violations(sigma, {j: wins[j] for j in top}, rel)
    if bad:
        raise TopPlacementError(f"bottom jobs inside top windows: {bad}")
    res = InsertResult(sigma)
    live = []
    for j in sorted(top):
        if wins[j].empty:
            res.discarded_empty.add(j)
        else:
            live.append(j)
    allowed = {j: list(wins[j].slots()) for j in live}
    matched, res.discarded_unmatched = capacitated_matching(allowed, caps)

    spare = dict(caps)
    placed: dict[int, int] = {}
    # predecessor count sits before the id so equal windows are taken in precedence order
    for j in sorted(matched, key=lambda j: (wins[j].d, wins[j].r, len(rel.predecessors(j)), j)):
        after = max((placed[p] for p in rel.predecessors(j) if p in placed), default=0)
        before = min((placed[s] for s in rel.successors(j) if s in placed), default=None)
        slot = None
        for t in wins[j].slots():
            if t <= after or (before is not None and t >= before):
                continue
            if spare.get(t, 0) > 0:
                slot = t
                break
        if slot is None:
            res.discarded_repair.add(j)
            continue
        spare[slot] -= 1
        placed[j] = slot
    merged = dict(sigma.slots)
    merged.update(placed)
    res.schedule = Schedule(merged, sigma.discarded | frozenset(res.discarded))
    return res
