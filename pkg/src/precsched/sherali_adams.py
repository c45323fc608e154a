"""Sherali-Adams lifts of 0/1 LPs, lifted solutions, and conditioning.

A lifted variable is indexed by a :data:`SubsetKey`, a strictly increasing
tuple of ground variable indices.  The empty key plays the role of the
constant 1.  Solutions store only non-zero entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Iterator, Mapping

from .instance import Instance
from .oracle import ORACLE_CAP, Schedule, exact_makespan
from .lp_core import (
    EQ,
    LE,
    Feasible,
    Infeasible,
    LinearProgram,
    TimeIndex,
    build_time_indexed_lp,
    fmt_rational,
    lp_min_makespan,
    solve_feasibility,
)

__all__ = [
    "SubsetKey",
    "SaLift",
    "SaSolution",
    "LiftTooLarge",
    "ConditioningError",
    "DEFAULT_LIFT_CAP",
    "lifted_varcount",
    "lift_rows",
    "build_sa_lift",
    "solve_sa",
    "sa_min_makespan",
    "check_sa",
    "product_solution",
    "mixture_solution",
    "condition_on_var",
    "condition_on_event",
    "fractional_support",
    "restrict_level",
    "MomentSolution",
    "moment_solution",
    "schedule_point",
]

SubsetKey = tuple[int, ...]
DEFAULT_LIFT_CAP = 200_000


class LiftTooLarge(ValueError):
    pass


class ConditioningError(ValueError):
    pass


def key(*items: int) -> SubsetKey:
    return tuple(sorted(set(items)))


def _union(a: SubsetKey, b: Iterable[int]) -> SubsetKey:
    return tuple(sorted(set(a).union(b)))


def lifted_varcount(ground: int, s: int) -> int:
    return sum(comb(ground, i) for i in range(s + 2))


@dataclass
class SaLift:
    level: int
    base: LinearProgram
    lifted: LinearProgram
    keys: list[SubsetKey]
    keyindex: dict[SubsetKey, int]


@dataclass(frozen=True)
class SaSolution:
    level: int
    values: Mapping[SubsetKey, Fraction]
    timeindex: TimeIndex | None = field(default=None, compare=False)

    def __getitem__(self, k: SubsetKey) -> Fraction:
        return self.values.get(k, Fraction(0))

    def var(self, i: int) -> Fraction:
        return self.values.get((i,), Fraction(0))

    def job_mass(self, j: int, slots: Iterable[int]) -> Fraction:
        idx = self._idx()
        return sum((self.var(idx.var(j, t)) for t in slots), Fraction(0))

    def _idx(self) -> TimeIndex:
        if self.timeindex is None:
            raise ConditioningError("solution carries no time index")
        return self.timeindex

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "values": {",".join(map(str, k)) or "{}": fmt_rational(v) for k, v in sorted(self.values.items())},
        }


def _subsets(items: SubsetKey) -> Iterator[tuple[SubsetKey, int]]:
    for r in range(len(items) + 1):
        for sub in combinations(items, r):
            yield sub, (-1) ** r


def lift_rows(base: LinearProgram, s: int) -> Iterator[tuple[dict[SubsetKey, Fraction], str, Fraction]]:
    """Yield the level-``s`` lifted rows in key space.

    Every base row is first rewritten as ``<=`` rows; for each disjoint pair
    ``(S, T)`` with ``|S| + |T| <= s`` the row multiplied by
    ``prod_S y * prod_T (1 - y)`` is linearised.  The normalisation
    ``y_() = 1`` comes last.
    """
    N = base.varcount
    pairs: list[tuple[SubsetKey, SubsetKey]] = []
    for a in range(s + 1):
        for S in combinations(range(N), a):
            rest = [i for i in range(N) if i not in S]
            for b in range(s - a + 1):
                for T in combinations(rest, b):
                    pairs.append((S, T))
    for con in base.constraints:
        for row in con.as_le():
            for S, T in pairs:
                coeffs: dict[SubsetKey, Fraction] = {}
                for Tp, sign in _subsets(T):
                    U = _union(S, Tp)
                    for i, a in row.coeffs.items():
                        k = U if i in U else _union(U, (i,))
                        coeffs[k] = coeffs.get(k, 0) + sign * a
                    if row.rhs:
                        coeffs[U] = coeffs.get(U, 0) - sign * row.rhs
                yield {k: v for k, v in coeffs.items() if v != 0}, LE, 0
    yield {(): 1}, EQ, 1


def _all_keys(N: int, s: int) -> list[SubsetKey]:
    return [k for r in range(s + 2) for k in combinations(range(N), r)]


def build_sa_lift(base: LinearProgram, s: int, cap: int = DEFAULT_LIFT_CAP) -> SaLift:
    if s < 0:
        raise ValueError("lift level must be non-negative")
    count = lifted_varcount(base.varcount, s)
    if count > cap:
        raise LiftTooLarge(f"level-{s} lift of {base.varcount} variables needs {count} > {cap} lifted variables")
    keys = _all_keys(base.varcount, s)
    keyindex = {k: n for n, k in enumerate(keys)}
    lifted = LinearProgram(len(keys))
    for coeffs, rel, rhs in lift_rows(base, s):
        lifted.constraints.append(_indexed(coeffs, rel, rhs, keyindex))
    return SaLift(s, base, lifted, keys, keyindex)


def _indexed(coeffs, rel, rhs, keyindex):
    from .lp_core import Constraint

    return Constraint({keyindex[k]: a for k, a in coeffs.items()}, rel, rhs)


def check_sa(sol: SaSolution, base: LinearProgram, s: int | None = None) -> list[str]:
    """Every way ``sol`` fails to be a level-``s`` lifted solution (empty if none)."""
    s = sol.level if s is None else s
    problems = []
    if sol[()] != 1:
        problems.append(f"y_() = {sol[()]}")
    for k, v in sol.values.items():
        if len(k) > s + 1:
            if v != 0:
                problems.append(f"key {k} beyond level {s}")
        elif not 0 <= v <= 1:
            problems.append(f"y_{k} = {v} outside [0, 1]")
    for coeffs, rel, rhs in lift_rows(base, s):
        lhs = sum((a * sol[k] for k, a in coeffs.items()), Fraction(0))
        if (rel == LE and lhs > rhs) or (rel == EQ and lhs != rhs):
            problems.append(f"row {coeffs} {rel} {rhs} has activity {lhs}")
    return problems


def solve_sa(inst: Instance, T: int, s: int, cap: int = DEFAULT_LIFT_CAP) -> Feasible | Infeasible:
    """Level-``s`` lift of the time-indexed LP at horizon ``T``; Feasible carries an SaSolution."""
    base, idx = build_time_indexed_lp(inst, T)
    lift = build_sa_lift(base, s, cap)
    res = solve_feasibility(lift.lifted)
    if not res:
        return res
    values = {lift.keys[i]: v for i, v in res.point.values.items() if v != 0}
    return Feasible(SaSolution(s, values, idx))


def sa_min_makespan(
    inst: Instance,
    s: int,
    cap: int = DEFAULT_LIFT_CAP,
    start: int | None = None,
    upper: tuple[int, Schedule] | None = None,
) -> int:
    """Smallest horizon whose level-``s`` lift is feasible.

    The lift projects onto the time-indexed LP, so no horizon below
    ``lp_min_makespan`` can work and the scan starts there.  Any integral
    schedule of makespan ``U`` gives a feasible lift at every horizon ``>= U``
    (its product solution), so only horizons below ``U`` need the solver.
    ``upper`` defaults to the exact optimum and its witness.
    """
    lo = lp_min_makespan(inst) if start is None else start
    if upper is None:
        if inst.n > ORACLE_CAP:
            from .baseline import list_schedule

            sched = list_schedule(inst)
            upper = (sched.makespan, sched)
        else:
            upper = exact_makespan(inst)
    for T in range(lo, upper[0]):
        if solve_sa(inst, T, s, cap):
            return T
    return max(lo, upper[0])


def schedule_point(sched: Schedule, idx: TimeIndex) -> dict[int, int]:
    """0/1 point of the time-indexed LP at ``idx.T`` encoding ``sched``."""
    return {idx.var(j, t): 1 for j, t in sched.slots.items()}


def product_solution(point: Mapping[int, int], s: int, idx: TimeIndex | None = None) -> SaSolution:
    """Lifted solution ``y_S = prod_{i in S} y_i`` of a 0/1 point."""
    ones = tuple(sorted(i for i, v in point.items() if v == 1))
    values = {k: Fraction(1) for r in range(s + 2) for k in combinations(ones, r)}
    return SaSolution(s, values, idx)


def mixture_solution(points: Iterable[tuple[Fraction, Mapping[int, int]]], s: int, idx: TimeIndex | None = None) -> SaSolution:
    """Moment solution of a distribution over 0/1 points: ``y_S = P[all of S are 1]``."""
    values: dict[SubsetKey, Fraction] = {}
    total = Fraction(0)
    for w, point in points:
        w = Fraction(w)
        total += w
        ones = tuple(sorted(i for i, v in point.items() if v == 1))
        for r in range(s + 2):
            for k in combinations(ones, r):
                values[k] = values.get(k, Fraction(0)) + w
    if total != 1:
        raise ValueError(f"weights sum to {total}")
    return SaSolution(s, {k: v for k, v in values.items() if v != 0}, idx)


def restrict_level(sol: SaSolution, s: int) -> SaSolution:
    if s > sol.level:
        raise ValueError("cannot raise the level of a solution")
    return SaSolution(s, {k: v for k, v in sol.values.items() if len(k) <= s + 1}, sol.timeindex)


def condition_on_var(sol, i: int):
    """Condition on ``y_i = 1``: ``z_S = y_{S + i} / y_i``, one level down."""
    if isinstance(sol, MomentSolution):
        return sol.condition(lambda ones: i in ones, f"variable {i}")
    if sol.level < 1:
        raise ConditioningError("no lift level left to condition on")
    mass = sol.var(i)
    if mass <= 0:
        raise ConditioningError(f"variable {i} has zero mass")
    return SaSolution(sol.level - 1, _conditioned(sol, [(i, Fraction(1))], mass), sol.timeindex)


def condition_on_event(sol, j: int, slots: Iterable[int]):
    """Condition on job ``j`` running in one of ``slots``.

    The result is the mass-weighted mixture of conditioning on each
    ``y_{j,t} = 1`` with ``t`` in ``slots``; each summand is feasible one
    level down and the lifted polytope is convex.
    """
    slots = sorted(set(slots))
    if isinstance(sol, MomentSolution):
        idx = sol._idx()
        wanted = {idx.var(j, t) for t in slots if 1 <= t <= idx.T}
        return sol.condition(lambda ones: not wanted.isdisjoint(ones), f"job {j} on slots {slots}")
    if sol.level < 1:
        raise ConditioningError("no lift level left to condition on")
    idx = sol._idx()
    terms = [(idx.var(j, t), Fraction(1)) for t in slots if 1 <= t <= idx.T and sol.var(idx.var(j, t)) > 0]
    mass = sum((sol.var(v) for v, _ in terms), Fraction(0))
    if mass <= 0:
        raise ConditioningError(f"job {j} has zero mass on slots {slots}")
    return SaSolution(sol.level - 1, _conditioned(sol, terms, mass), sol.timeindex)


def _conditioned(sol: SaSolution, terms, mass: Fraction) -> dict[SubsetKey, Fraction]:
    # z_S = sum_v y_{S + v} / mass over |S| <= level, using the stored sparse keys
    top = sol.level
    out: dict[SubsetKey, Fraction] = {}
    wanted = {v for v, _ in terms}
    for k, y in sol.values.items():
        hits = wanted.intersection(k)
        for v in hits:
            rest = tuple(x for x in k if x != v)
            # S = k - v always maps here; S = k maps here too when it fits
            out[rest] = out.get(rest, Fraction(0)) + y
            if len(k) <= top:
                out[k] = out.get(k, Fraction(0)) + y
    return {k: v / mass for k, v in out.items() if v != 0 and len(k) <= top}


def fractional_support(sol, j: int) -> tuple[list[int], tuple[int, int]]:
    idx = sol._idx()
    supp = [t for t in range(1, idx.T + 1) if sol.var(idx.var(j, t)) > 0]
    if not supp:
        raise ConditioningError(f"job {j} has empty support")
    return supp, (supp[0], supp[-1])


@dataclass(frozen=True)
class MomentSolution:
    """Lifted solution given implicitly by a distribution over 0/1 points.

    ``y_S`` is the probability that every variable of ``S`` is 1.  Such a
    vector satisfies the lift of every level when each point satisfies the
    base LP, so ``level`` is only a budget: each conditioning spends one.
    Conditioning is Bayesian filtering of the distribution, which agrees with
    ``z_S = y_{S + i} / y_i`` entry by entry.
    """

    level: int
    points: tuple[tuple[Fraction, frozenset[int]], ...]
    timeindex: TimeIndex | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        total = sum((w for w, _ in self.points), Fraction(0))
        if total != 1:
            raise ValueError(f"weights sum to {total}")
        if any(w <= 0 for w, _ in self.points):
            raise ValueError("weights must be positive")

    def __getitem__(self, k: SubsetKey) -> Fraction:
        return sum((w for w, ones in self.points if ones.issuperset(k)), Fraction(0))

    def var(self, i: int) -> Fraction:
        return self._marginals().get(i, Fraction(0))

    def _marginals(self) -> dict[int, Fraction]:
        cached = self.__dict__.get("_marg")
        if cached is None:
            cached = {}
            for w, ones in self.points:
                for i in ones:
                    cached[i] = cached.get(i, Fraction(0)) + w
            object.__setattr__(self, "_marg", cached)
        return cached

    def job_mass(self, j: int, slots: Iterable[int]) -> Fraction:
        idx = self._idx()
        return sum((self.var(idx.var(j, t)) for t in slots), Fraction(0))

    def _idx(self) -> TimeIndex:
        if self.timeindex is None:
            raise ConditioningError("solution carries no time index")
        return self.timeindex

    @property
    def values(self) -> dict[SubsetKey, Fraction]:
        """Explicit table of every non-zero entry up to level + 1 (small cases only)."""
        out: dict[SubsetKey, Fraction] = {}
        for w, ones in self.points:
            items = tuple(sorted(ones))
            for r in range(self.level + 2):
                for k in combinations(items, r):
                    out[k] = out.get(k, Fraction(0)) + w
        return out

    def explicit(self) -> SaSolution:
        return SaSolution(self.level, self.values, self.timeindex)

    def condition(self, event, what: str) -> "MomentSolution":
        if self.level < 1:
            raise ConditioningError("no lift level left to condition on")
        kept = [(w, ones) for w, ones in self.points if event(ones)]
        mass = sum((w for w, _ in kept), Fraction(0))
        if mass <= 0:
            raise ConditioningError(f"{what} has zero mass")
        return MomentSolution(self.level - 1, tuple((w / mass, ones) for w, ones in kept), self.timeindex)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "points": [{"weight": fmt_rational(w), "ones": sorted(ones)} for w, ones in self.points],
        }


def moment_solution(
    schedules: Iterable[tuple[Fraction, Schedule]], idx: TimeIndex, level: int
) -> MomentSolution:
    """Moment solution of a weighted family of schedules within ``[1, idx.T]``.

    Equal schedules are merged, keeping the order of first appearance.
    """
    merged: dict[frozenset[int], Fraction] = {}
    for w, sched in schedules:
        if sched.makespan > idx.T:
            raise ValueError(f"schedule of makespan {sched.makespan} exceeds T={idx.T}")
        ones = frozenset(schedule_point(sched, idx))
        merged[ones] = merged.get(ones, Fraction(0)) + Fraction(w)
    return MomentSolution(level, tuple((w, ones) for ones, w in merged.items()), idx)
