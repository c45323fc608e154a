"""Recursive rounding of a lifted solution into a schedule with few discards.

The recursion works on a node interval of the horizon.  Step 1 conditions
the lifted solution until no interval in the top levels holds a long chain
of assigned jobs, stopping at the first sparse ("good") batch of levels.
Step 2 either drops the sparse batch, recurses below it and matches the
jobs above it into the free slots (type 1), or drops the topmost batches
and recurses below them (type 2).  Small nodes are rounded by conditioning
on single variables until integral.  Discarded jobs are finally inserted
one per fresh slot.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any

from .baseline import list_schedule
from .instance import Instance, PrecRelation, SplitMix64, longest_chain
from .laminar import (
    BatchView,
    Interval,
    JobWindows,
    LaminarFamily,
    contains,
    is_good_batch,
    pad_to_power_of_two,
    update_support_intervals,
)
from .lp_core import TimeIndex, build_time_indexed_lp, fmt_rational, lp_min_makespan
from .oracle import ORACLE_CAP, Schedule, exact_makespan, validate
from .sherali_adams import (
    ConditioningError,
    condition_on_event,
    condition_on_var,
    fractional_support,
    moment_solution,
    solve_sa,
)
from .top_matching import (
    TopPlacementError,
    compute_windows,
    insert_top_jobs,
    monotonicity_violations,
    slot_capacity,
)

__all__ = [
    "Params",
    "DiscardLedger",
    "NodeTrace",
    "QptasResult",
    "BudgetExhausted",
    "InvariantViolation",
    "schedule_qptas",
    "run_qptas",
    "base_case_integralize",
    "repair_discarded",
    "sample_schedules",
    "initial_solution",
]


class BudgetExhausted(RuntimeError):
    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class InvariantViolation(AssertionError):
    pass


def _check(ok: bool, message: str) -> None:
    if not ok:
        raise InvariantViolation(message)


@dataclass(frozen=True)
class Params:
    m: int
    epsilon: Fraction
    k: int
    C: int
    delta: Fraction
    budget: int
    mode: str = "desk"
    base_threshold: int = 8

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", Fraction(self.epsilon))
        object.__setattr__(self, "delta", Fraction(self.delta))
        if self.mode not in ("paper", "desk"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.m < 1 or self.k < 1 or self.budget < 0 or self.base_threshold < 1:
            raise ValueError("m, k, base_threshold must be positive and budget non-negative")
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("epsilon and delta must be positive")
        if self.C <= self.retained:
            raise ValueError(
                f"C={self.C} must exceed (4m/eps)^2 rounded up = {self.retained} "
                f"(m={self.m}, eps={self.epsilon})"
            )

    @property
    def eps_prime(self) -> Fraction:
        return self.epsilon / (4 * self.m)

    @property
    def retained(self) -> int:
        """Batches kept by a type-2 recursion: ``(4m/eps)^2`` rounded up."""
        x = (4 * self.m / self.epsilon) ** 2
        return math.ceil(x)

    @property
    def step_levels(self) -> int:
        return self.C * self.k

    def is_base(self, length: int) -> bool:
        # Step 1 needs Ck levels of intervals of length >= 2 below the node
        return length <= self.base_threshold or length < 1 << self.step_levels

    @classmethod
    def paper(cls, m: int, epsilon: Fraction, n: int, budget: int | None = None) -> "Params":
        epsilon = Fraction(epsilon)
        logn = Fraction(max(math.log2(max(n, 2)), 1.0))
        R = math.ceil((4 * m / epsilon) ** 2)
        C = 2 * R + 1
        k = math.ceil(math.log2(float(32 * m / epsilon * logn)))
        delta = epsilon / (8 * m * C * k * (1 << (C * k)) * logn)
        if budget is None:
            budget = 10**9
        return cls(m, epsilon, k, C, delta, budget, "paper", 1 << (C * k))

    @classmethod
    def desk(
        cls,
        m: int,
        epsilon: Fraction,
        k: int,
        C: int,
        delta: Fraction,
        budget: int = 10_000,
        base_threshold: int = 8,
    ) -> "Params":
        return cls(m, Fraction(epsilon), k, C, Fraction(delta), budget, "desk", base_threshold)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "epsilon": fmt_rational(self.epsilon),
            "k": self.k,
            "C": self.C,
            "delta": fmt_rational(self.delta),
            "budget": self.budget,
            "mode": self.mode,
            "base_threshold": self.base_threshold,
        }


@dataclass
class DiscardLedger:
    type1: dict[int, int] = field(default_factory=dict)
    type2: dict[int, int] = field(default_factory=dict)
    charges: dict[int, int] = field(default_factory=dict)
    charged_at: dict[int, int] = field(default_factory=dict)
    type2_nodes: set[int] = field(default_factory=set)

    def discard(self, job: int, node: int, kind: int) -> None:
        _check(job not in self.type1 and job not in self.type2, f"job {job} discarded twice")
        (self.type1 if kind == 1 else self.type2)[job] = node

    def charge(self, job: int, node: int) -> None:
        _check(node in self.type2_nodes, f"charge at node {node} without a type-2 event")
        self.charges[job] = self.charges.get(job, 0) + 1
        self.charged_at[job] = node
        _check(self.charges[job] == 1, f"job {job} charged twice")

    @property
    def discarded(self) -> set[int]:
        return set(self.type1) | set(self.type2)

    def to_json(self) -> dict:
        return {
            "type1": {str(j): n for j, n in sorted(self.type1.items())},
            "type2": {str(j): n for j, n in sorted(self.type2.items())},
            "charges": {str(j): c for j, c in sorted(self.charges.items())},
        }


@dataclass
class NodeTrace:
    node: int
    parent: int | None
    interval: Interval
    kind: str  # "step" | "base"
    scope: list[int]
    conditionings: int = 0
    max_per_interval: int = 0
    q: int | None = None
    case: str | None = None
    batch_counts: list[int] = field(default_factory=list)
    top: list[int] = field(default_factory=list)
    middle: list[int] = field(default_factory=list)
    matching: dict[str, list[int]] = field(default_factory=dict)
    type2_discards: list[int] = field(default_factory=list)
    charged: list[int] = field(default_factory=list)
    checks: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["interval"] = list(self.interval)
        return _jsonable(out)


def _jsonable(x):
    if isinstance(x, Fraction):
        return fmt_rational(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set)):
        items = sorted(x) if isinstance(x, set) else x
        return [_jsonable(v) for v in items]
    return x


def _interval_of(sol, j: int) -> Interval:
    return fractional_support(sol, j)[1]


def _log2n(n: int) -> Fraction:
    return Fraction(max(math.log2(max(n, 2)), 1.0))


class _Run:
    def __init__(self, inst: Instance, params: Params):
        self.inst = inst
        self.rel: PrecRelation = inst.closure
        self.p = params
        self.ledger = DiscardLedger()
        self.trace: list[NodeTrace] = []

    def new_node(self, parent, interval, kind, scope) -> NodeTrace:
        nt = NodeTrace(len(self.trace), parent, interval, kind, sorted(scope))
        self.trace.append(nt)
        return nt

    def spend(self, path_used: int) -> None:
        if path_used >= self.p.budget:
            raise BudgetExhausted(
                f"round budget {self.p.budget} exhausted along a recursion path", self.trace
            )

    # -- recursion ---------------------------------------------------------

    def schedule(self, sol, windows: JobWindows, parent: int | None, path_used: int) -> Schedule:
        fam = windows.fam
        scope = sorted(windows.S)
        if self.p.is_base(fam.T):
            nt = self.new_node(parent, fam.root, "base", scope)
            sched, used = base_case_integralize(sol, fam.root, scope, self.inst.m, self.p.budget - path_used)
            nt.conditionings = used
            rep = validate(self.inst, sched, scope)
            _check(rep.ok, f"base case at {fam.root} invalid: {rep.violations}")
            return sched
        nt = self.new_node(parent, fam.root, "step", scope)
        sol, q, case = self.step1(sol, windows, nt, path_used)
        path_used += nt.conditionings
        if case == "a":
            return self.type1(sol, windows, nt, q, path_used)
        return self.type2(sol, windows, nt, path_used)

    def step1(self, sol, windows: JobWindows, nt: NodeTrace, path_used: int):
        p, fam, rel = self.p, windows.fam, self.rel
        per_interval: Counter = Counter()
        cap_interval = self.inst.m / p.delta
        cap_node = (1 << p.step_levels) * self.inst.m / p.delta
        scope = sorted(windows.S)
        for level in range(p.step_levels):
            snapshot = dict(windows.assigned)
            for iv in fam.level_intervals(level):
                size = iv[1] - iv[0] + 1
                while True:
                    chain = longest_chain(rel, windows.jobs_at(iv))
                    if len(chain) <= p.delta * size:
                        break
                    j = chain[0]
                    right = fam.children(iv)[1]
                    supp, _ = fractional_support(sol, j)
                    event = [t for t in supp if right[0] <= t <= right[1]]
                    _check(bool(event), f"chain head {j} has no support in {right}")
                    self.spend(path_used + nt.conditionings)
                    sol = condition_on_event(sol, j, event)
                    nt.conditionings += 1
                    per_interval[iv] += 1
                    _check(per_interval[iv] <= cap_interval, f"interval {iv} conditioned {per_interval[iv]} > m/delta times")
                    _check(nt.conditionings <= cap_node, f"node conditioned {nt.conditionings} > 2^(Ck) m/delta times")
                    fresh = {i: _interval_of(sol, i) for i in scope}
                    update_support_intervals(windows, level, snapshot, fresh)
                    # jobs pinned above this level must stay where they were
                    for i, a in snapshot.items():
                        if fam.level_of(a) < level:
                            _check(windows.assigned[i] == a, f"job {i} left its interval {a}")
            if (level + 1) % p.k == 0:
                b = (level + 1) // p.k - 1
                view = BatchView.of(windows, p.k, p.C)
                nt.batch_counts = list(view.counts)
                if b >= 1 and is_good_batch(view, b, p.epsilon, self.inst.m):
                    nt.max_per_interval = max(per_interval.values(), default=0)
                    nt.q, nt.case = b + 1, "a"
                    return sol, b + 1, "a"
        nt.max_per_interval = max(per_interval.values(), default=0)
        nt.q, nt.case = p.C, "b"
        return sol, p.C, "b"

    def _children(self, sol, windows: JobWindows, level: int, nt: NodeTrace, path_used: int) -> Schedule:
        fam = windows.fam
        slots: dict[int, int] = {}
        discarded: set[int] = set()
        for c in fam.level_intervals(level):
            jobs = windows.jobs_within(c)
            if not jobs:
                continue
            child = windows.copy(jobs, LaminarFamily(c[1] - c[0] + 1, c[0]))
            sub = self.schedule(sol, child, nt.node, path_used)
            slots.update(sub.slots)
            discarded |= sub.discarded
        return Schedule(slots, frozenset(discarded))

    def type1(self, sol, windows: JobWindows, nt: NodeTrace, q: int, path_used: int) -> Schedule:
        p, fam, rel, m = self.p, windows.fam, self.rel, self.inst.m
        k = p.k
        levels = {j: windows.level(j) for j in windows.assigned}
        top = sorted(j for j, lv in levels.items() if lv < (q - 1) * k)
        middle = sorted(j for j, lv in levels.items() if (q - 1) * k <= lv < q * k)
        nt.top, nt.middle = top, middle
        bound = p.eps_prime * len(top)
        nt.checks["middle_bound"] = {"middle": len(middle), "bound": bound, "holds": len(middle) <= bound}
        _check(len(middle) <= bound, f"good batch too heavy: {len(middle)} > {bound}")
        chain = len(longest_chain(rel, top))
        chain_cap = p.C * p.k * p.delta * fam.T
        nt.checks["top_chain_cap"] = {"chain": chain, "cap": chain_cap}
        _check(chain <= chain_cap, f"top chain {chain} exceeds {chain_cap}")
        self._check_nesting(windows, nt)
        for j in middle:
            self.ledger.discard(j, nt.node, 1)

        sigma = self._children(sol, windows, q * k, nt, path_used)

        wins = compute_windows(windows, top, q * k)
        bad = monotonicity_violations(wins, rel)
        _check(not bad, f"windows not monotone along {bad}")
        self._check_runs(windows, wins, top, q * k)
        caps = slot_capacity(sigma, fam.root, m)
        try:
            res = insert_top_jobs(sigma, top, wins, caps, rel)
        except TopPlacementError as err:
            raise InvariantViolation(str(err)) from err
        for j in sorted(res.discarded):
            self.ledger.discard(j, nt.node, 1)
        nt.matching = {
            "empty": sorted(res.discarded_empty),
            "unmatched": sorted(res.discarded_unmatched),
            "repair": sorted(res.discarded_repair),
        }
        total = len(middle) + len(res.discarded)
        nt.checks["top_discard_bound"] = {
            "discards": total,
            "bound": p.eps_prime * len(top) + p.epsilon * fam.T / (4 * _log2n(self.inst.n)),
        }
        nt.checks["matching_bound"] = {
            "discards": len(res.discarded),
            "bound": Fraction(4 * m * fam.T, 1 << k) + (1 << (q * k)) * m * chain_cap,
        }
        out = res.schedule
        for j in middle:
            out = Schedule(out.slots, out.discarded | {j})
        rep = validate(self.inst, out, windows.S)
        _check(rep.ok, f"type-1 node {fam.root} invalid: {rep.violations}")
        return out

    def type2(self, sol, windows: JobWindows, nt: NodeTrace, path_used: int) -> Schedule:
        p = self.p
        cut = p.C - p.retained
        levels = {j: windows.level(j) for j in windows.assigned}
        dropped = sorted(j for j, lv in levels.items() if lv < cut * p.k)
        kept = sorted(j for j, lv in levels.items() if cut * p.k <= lv < p.C * p.k)
        self.ledger.type2_nodes.add(nt.node)
        bound = p.eps_prime * len(kept)
        nt.checks["type2_bound"] = {"discarded": len(dropped), "bound": bound, "holds": len(dropped) <= bound}
        _check(len(dropped) <= bound, f"type-2 discards {len(dropped)} exceed {bound}")
        for j in dropped:
            self.ledger.discard(j, nt.node, 2)
        for j in kept:
            self.ledger.charge(j, nt.node)
        nt.type2_discards, nt.charged = dropped, kept
        sigma = self._children(sol, windows, cut * p.k, nt, path_used)
        out = Schedule(sigma.slots, sigma.discarded | frozenset(dropped))
        rep = validate(self.inst, out, windows.S)
        _check(rep.ok, f"type-2 node {windows.fam.root} invalid: {rep.violations}")
        return out

    # -- runtime checks ----------------------------------------------------

    def _check_nesting(self, windows: JobWindows, nt: NodeTrace) -> None:
        probs = windows.problems()
        _check(not probs, f"support bookkeeping broken: {probs[:3]}")
        fam = windows.fam
        for j, i in self.rel.pairs():
            if j not in windows.assigned or i not in windows.assigned:
                continue
            Ij, Ii = windows.assigned[j], windows.assigned[i]
            if Ij[0] < Ij[1]:
                _check(not contains(fam.children(Ij)[0], Ii), f"{i} below the left half of I({j}) although {j} precedes it")
            if Ii[0] < Ii[1]:
                _check(not contains(fam.children(Ii)[1], Ij), f"{j} below the right half of I({i}) although it precedes {i}")
        nt.checks["nesting"] = True

    def _check_runs(self, windows: JobWindows, wins, top, level) -> None:
        groups: dict[Interval, list] = {}
        for j in top:
            if not wins[j].empty:
                groups.setdefault(windows.assigned[j], []).append(wins[j])
        for iv, ws in groups.items():
            covered = sorted(set().union(*(set(w.slots()) for w in ws)))
            _check(covered == list(range(covered[0], covered[-1] + 1)), f"windows of jobs at {iv} are not one run")


def base_case_integralize(sol, interval: Interval, jobs, m: int, budget: int | None = None) -> tuple[Schedule, int]:
    """Condition on the smallest fractional ``(j, t)`` until the scoped jobs are integral."""
    idx: TimeIndex = sol._idx()
    jobs = sorted(jobs)
    limit = m * (interval[1] - interval[0] + 1)
    used = 0
    while True:
        pick = None
        for j in jobs:
            for t in range(1, idx.T + 1):
                v = sol.var(idx.var(j, t))
                if 0 < v < 1:
                    pick = idx.var(j, t)
                    break
            if pick is not None:
                break
        if pick is None:
            break
        if budget is not None and used >= budget:
            raise BudgetExhausted("round budget exhausted in a base case")
        sol = condition_on_var(sol, pick)
        used += 1
        _check(used <= limit, f"base case at {interval} needed more than {limit} conditionings")
    slots = {}
    for j in jobs:
        supp, _ = fractional_support(sol, j)
        _check(len(supp) == 1, f"job {j} still fractional")
        _check(interval[0] <= supp[0] <= interval[1], f"job {j} left the interval {interval}")
        slots[j] = supp[0]
    return Schedule(slots), used


def repair_discarded(partial: Schedule, inst: Instance) -> Schedule:
    """Give each discarded job a fresh slot of its own, in topological order."""
    rel = inst.closure
    slots = dict(partial.slots)
    for j in [j for j in rel.topological_order() if j in partial.discarded]:
        t = max((slots[p] for p in rel.predecessors(j) if p in slots), default=0)
        slots = {i: s + 1 if s > t else s for i, s in slots.items()}
        slots[j] = t + 1
    return Schedule(slots)


def _list_by_priority(inst: Instance, prio: dict[int, int], backward: bool) -> Schedule:
    rel = inst.closure
    before = rel.successors if backward else rel.predecessors
    slots: dict[int, int] = {}
    remaining = set(inst.jobs)
    t = 0
    while remaining:
        t += 1
        avail = sorted((j for j in remaining if all(slots.get(p, t) < t for p in before(j))), key=lambda j: (prio[j], j))
        for j in avail[: inst.m]:
            slots[j] = t
            remaining.discard(j)
    if backward:
        return Schedule({j: t + 1 - s for j, s in slots.items()}), t
    return Schedule(slots), t


def sample_schedules(inst: Instance, T: int, count: int = 16, seed: int = 0, witness: Schedule | None = None) -> list[Schedule]:
    """Distinct feasible schedules within ``[1, T]`` from seeded random priorities.

    Odd draws schedule the reversed order and align it to end at ``T``, which
    spreads the supports across the horizon.
    """
    rng = SplitMix64(seed)
    found: list[Schedule] = []
    seen = set()

    def keep(s: Schedule) -> None:
        key = tuple(sorted(s.slots.items()))
        if s.makespan <= T and key not in seen:
            seen.add(key)
            found.append(s)

    if witness is not None:
        keep(witness)
    for draw in range(count):
        prio = {j: rng.next_u64() for j in inst.jobs}
        sched, length = _list_by_priority(inst, prio, backward=bool(draw % 2))
        if draw % 2:
            sched = Schedule({j: s + T - length for j, s in sched.slots.items()}) if length <= T else sched
        keep(sched)
    return found


def initial_solution(
    inst: Instance, T: int, params: Params, source: str = "mixture", seed: int = 0, witness: Schedule | None = None
):
    """Starting lifted solution at horizon ``T``.

    ``lift`` solves the level-``budget`` lift explicitly.  ``mixture`` takes
    the uniform distribution over sampled schedules of makespan at most
    ``T``; its moment vector is feasible for every level, so the budget is
    the only limit on how often it can be conditioned.
    """
    _, idx = build_time_indexed_lp(inst, T)
    if source == "lift":
        res = solve_sa(inst, T, params.budget)
        if not res:
            raise ConditioningError(f"level-{params.budget} lift infeasible at T={T}")
        return res.point
    if source != "mixture":
        raise ValueError(f"unknown solution source {source!r}")
    scheds = sample_schedules(inst, T, seed=seed, witness=witness)
    if not scheds:
        raise ConditioningError(f"no sampled schedule fits in T={T}")
    w = Fraction(1, len(scheds))
    return moment_solution([(w, s) for s in scheds], idx, params.budget)


def schedule_qptas(inst: Instance, T: int, params: Params, sol) -> tuple[Schedule, DiscardLedger, list[NodeTrace]]:
    """Partial schedule within ``[1, T]`` of every job, plus discard ledger and node trace."""
    if T & (T - 1):
        raise ValueError(f"T={T} must be a power of two")
    run = _Run(inst, params)
    F = {j: _interval_of(sol, j) for j in inst.jobs}
    windows = JobWindows.start(LaminarFamily(T), F)
    partial = run.schedule(sol, windows, None, 0)
    _check(set(partial.discarded) == run.ledger.discarded, "ledger and schedule disagree on discards")
    rep = validate(inst, partial)
    _check(rep.ok, f"partial schedule invalid: {rep.violations}")
    _check(partial.makespan <= T, "partial schedule leaves the horizon")
    return partial, run.ledger, run.trace


@dataclass
class QptasResult:
    T: int
    padded: Instance
    partial: Schedule
    final: Schedule
    ledger: DiscardLedger
    trace: list[NodeTrace]
    params: Params

    @property
    def conditionings(self) -> int:
        return sum(nt.conditionings for nt in self.trace)

    def to_json(self) -> dict:
        dummies = self.padded.dummies
        real = lambda js: sorted(j for j in js if j not in dummies)  # noqa: E731
        return {
            "T": self.T,
            "params": self.params.to_json(),
            "makespan_partial": self.partial.makespan,
            "discards_type1": real(self.ledger.type1),
            "discards_type2": real(self.ledger.type2),
            "dummy_discards": sorted(self.ledger.discarded & set(dummies)),
            "makespan_final": self.final.makespan,
            "makespan_final_real": max((t for j, t in self.final.slots.items() if j not in dummies), default=0),
            "conditionings": self.conditionings,
            "schedule": Schedule({j: t for j, t in self.final.slots.items() if j not in dummies}).to_json(),
            "trace": [nt.to_json() for nt in self.trace],
        }


def run_qptas(
    inst: Instance, params: Params, T: int | None = None, source: str = "mixture", seed: int = 0
) -> QptasResult:
    """Pad to a power of two, build a starting solution, round it, repair discards."""
    witness = None
    if T is None:
        if inst.n > ORACLE_CAP:
            T = lp_min_makespan(inst)
            witness = list_schedule(inst)
            if witness.makespan > T:
                witness = None
        else:
            T, witness = exact_makespan(inst)
    padded, Tp = pad_to_power_of_two(inst, T)
    if witness is not None and Tp > T:
        extra = sorted(padded.dummies - inst.dummies)
        slots = dict(witness.slots)
        for n, d in enumerate(extra):
            slots[d] = T + 1 + n // inst.m
        witness = Schedule(slots)
    sol = initial_solution(padded, Tp, params, source, seed, witness)
    partial, ledger, trace = schedule_qptas(padded, Tp, params, sol)
    final = repair_discarded(partial, padded)
    rep = validate(padded, final)
    _check(rep.ok and not final.discarded, f"repaired schedule invalid: {rep.violations}")
    _check(final.makespan <= partial.makespan + len(partial.discarded), "repair added too many slots")
    return QptasResult(Tp, padded, partial, final, ledger, trace, params)
