"""Dyadic interval family, per-job support intervals, and batches.

Intervals are inclusive slot ranges ``(lo, hi)``.  A :class:`LaminarFamily`
may be rooted at any aligned sub-range of the horizon; levels are counted
from that root.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .instance import Instance

__all__ = [
    "Interval",
    "LaminarFamily",
    "JobWindows",
    "BatchView",
    "pad_to_power_of_two",
    "assign_jobs",
    "update_support_intervals",
    "is_good_batch",
    "contains",
]

Interval = tuple[int, int]


def contains(outer: Interval, inner: Interval) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def _is_pow2(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class LaminarFamily:
    """Binary splits of ``[lo, lo + T - 1]`` down to single slots."""

    T: int
    lo: int = 1

    def __post_init__(self) -> None:
        if not _is_pow2(self.T):
            raise ValueError(f"T={self.T} is not a power of two")

    @property
    def root(self) -> Interval:
        return (self.lo, self.lo + self.T - 1)

    @property
    def depth(self) -> int:
        """Index of the single-slot level."""
        return self.T.bit_length() - 1

    def length(self, level: int) -> int:
        return self.T >> level

    def interval(self, level: int, p: int) -> Interval:
        if not 0 <= level <= self.depth or not 1 <= p <= 1 << level:
            raise IndexError(f"no interval ({level}, {p})")
        size = self.T >> level
        start = self.lo + (p - 1) * size
        return (start, start + size - 1)

    def level_intervals(self, level: int) -> list[Interval]:
        return [self.interval(level, p) for p in range(1, (1 << level) + 1)]

    def index_of(self, level: int, t: int) -> int:
        """1-based index of the level-``level`` interval holding slot ``t``."""
        return (t - self.lo) // (self.T >> level) + 1

    def level_of(self, iv: Interval) -> int:
        size = iv[1] - iv[0] + 1
        level = self.depth - (size.bit_length() - 1)
        if not _is_pow2(size) or self.interval(level, self.index_of(level, iv[0])) != iv:
            raise ValueError(f"{iv} is not in the family rooted at {self.root}")
        return level

    def children(self, iv: Interval) -> tuple[Interval, Interval]:
        lo, hi = iv
        if lo == hi:
            raise ValueError("a single slot has no children")
        mid = midpoint(iv)
        return (lo, mid), (mid + 1, hi)

    def minimal_containing(self, s: Interval) -> Interval:
        """Descend from the root while a child still contains ``s``."""
        if not contains(self.root, s):
            raise ValueError(f"{s} is outside {self.root}")
        iv = self.root
        while iv[0] < iv[1]:
            left, right = self.children(iv)
            if contains(left, s):
                iv = left
            elif contains(right, s):
                iv = right
            else:
                break
        return iv

    def subtree(self, iv: Interval, level: int) -> Iterator[Interval]:
        """Intervals of ``level`` lying inside ``iv``."""
        for p in range(self.index_of(level, iv[0]), self.index_of(level, iv[1]) + 1):
            yield self.interval(level, p)


def midpoint(iv: Interval) -> int:
    """Right boundary of the left half."""
    return iv[0] + (iv[1] - iv[0] + 1) // 2 - 1


def pad_to_power_of_two(inst: Instance, T: int) -> tuple[Instance, int]:
    """Append ``m * (T' - T)`` dummy jobs that succeed every original job."""
    if T < 1:
        raise ValueError("T must be positive")
    Tp = 1 << (T - 1).bit_length()
    extra = inst.m * (Tp - T)
    if not extra:
        return inst, Tp
    dummies = range(inst.n + 1, inst.n + extra + 1)
    prec = set(inst.prec) | {(u, d) for u in inst.jobs if u not in inst.dummies for d in dummies}
    return Instance(inst.n + extra, inst.m, frozenset(prec), frozenset(inst.dummies) | frozenset(dummies)), Tp


@dataclass
class JobWindows:
    """Support intervals ``S_j``, current fractional supports ``F_j`` and assignments."""

    fam: LaminarFamily
    S: dict[int, Interval]
    F: dict[int, Interval]
    original: dict[int, Interval] = field(default_factory=dict)
    assigned: dict[int, Interval] = field(default_factory=dict)

    @classmethod
    def start(cls, fam: LaminarFamily, F: dict[int, Interval]) -> "JobWindows":
        w = cls(fam, dict(F), dict(F), dict(F))
        assign_jobs(w)
        return w

    def copy(self, jobs: Iterable[int] | None = None, fam: LaminarFamily | None = None) -> "JobWindows":
        keep = set(self.S) if jobs is None else set(jobs)
        w = JobWindows(
            fam or self.fam,
            {j: v for j, v in self.S.items() if j in keep},
            {j: v for j, v in self.F.items() if j in keep},
            {j: v for j, v in self.original.items() if j in keep},
        )
        assign_jobs(w)
        return w

    def level(self, j: int) -> int:
        return self.fam.level_of(self.assigned[j])

    def jobs_at(self, iv: Interval) -> list[int]:
        return sorted(j for j, a in self.assigned.items() if a == iv)

    def jobs_within(self, iv: Interval) -> list[int]:
        return sorted(j for j, a in self.assigned.items() if contains(iv, a))

    def problems(self) -> list[str]:
        """Every broken nesting ``F_j <= S_j <= F_j^(r)`` and assignment."""
        out = []
        for j, s in self.S.items():
            if not contains(s, self.F[j]):
                out.append(f"job {j}: F={self.F[j]} not inside S={s}")
            if j in self.original and not contains(self.original[j], s):
                out.append(f"job {j}: S={s} not inside F^(r)={self.original[j]}")
            if self.assigned.get(j) != self.fam.minimal_containing(s):
                out.append(f"job {j}: assigned {self.assigned.get(j)} is not minimal for {s}")
        return out


def assign_jobs(windows: JobWindows) -> dict[int, Interval]:
    fam = windows.fam
    windows.assigned = {j: fam.minimal_containing(s) for j, s in sorted(windows.S.items())}
    return windows.assigned


def update_support_intervals(
    windows: JobWindows,
    level: int,
    snapshot: dict[int, Interval],
    fresh_F: dict[int, Interval],
) -> JobWindows:
    """Recompute ``S_j`` after a conditioning at ``level``.

    ``snapshot`` holds each job's assigned interval at the start of the
    current level iteration.  Jobs pinned above ``level`` keep their interval:
    their new support is stretched to reach across its midpoint.
    """
    fam = windows.fam
    for j, F in fresh_F.items():
        windows.F[j] = F
        old = snapshot[j]
        if fam.level_of(old) < level:
            mj = midpoint(old)
            left, right = fam.children(old)
            if contains(left, F):
                windows.S[j] = (F[0], mj + 1)
            elif contains(right, F):
                windows.S[j] = (mj, F[1])
            else:
                windows.S[j] = F
        else:
            windows.S[j] = F
    assign_jobs(windows)
    return windows


@dataclass(frozen=True)
class BatchView:
    """Per-batch job counts; batch ``p`` covers levels ``pk .. (p+1)k - 1``."""

    k: int
    counts: tuple[int, ...]

    @classmethod
    def of(cls, windows: JobWindows, k: int, batches: int) -> "BatchView":
        counts = [0] * batches
        for j in windows.assigned:
            p = windows.level(j) // k
            if p < batches:
                counts[p] += 1
        return cls(k, tuple(counts))

    def levels(self, p: int) -> range:
        return range(p * self.k, (p + 1) * self.k)

    def before(self, p: int) -> int:
        return sum(self.counts[:p])


def is_good_batch(view: BatchView, p: int, epsilon: Fraction, m: int) -> bool:
    if p < 1:
        raise ValueError("goodness is defined for p >= 1")
    return view.counts[p] <= Fraction(epsilon) / (4 * m) * view.before(p)
