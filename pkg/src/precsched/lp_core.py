"""Time-indexed LP and an exact rational feasibility solver.

All arithmetic is over ``fractions.Fraction`` (plain ``int`` where a value is
integral).  Every variable of a :class:`LinearProgram` lives in ``[0, 1]``;
builders emit the box explicitly as rows, and the solver also enforces it
natively, which lets the presolve drop rows the box already implies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

from flint import fmpq

from .instance import Instance
from .oracle import Schedule

__all__ = [
    "LE",
    "EQ",
    "GE",
    "Constraint",
    "LinearProgram",
    "TimeIndex",
    "LpPoint",
    "Feasible",
    "Infeasible",
    "build_time_indexed_lp",
    "solve_feasibility",
    "check_point",
    "lp_feasible_at",
    "lp_min_makespan",
    "decode_schedule",
    "fmt_rational",
]

LE, EQ, GE = "<=", "=", ">="


def fmt_rational(x: Rational) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[int, Rational]
    rel: str
    rhs: Rational

    def activity(self, values: Mapping[int, Rational]) -> Rational:
        return sum((a * values.get(i, 0) for i, a in self.coeffs.items()), 0)

    def holds(self, values: Mapping[int, Rational]) -> bool:
        lhs = self.activity(values)
        if self.rel == LE:
            return lhs <= self.rhs
        if self.rel == GE:
            return lhs >= self.rhs
        return lhs == self.rhs

    def as_le(self) -> list["Constraint"]:
        """Equivalent list of ``<=`` rows (an equality becomes two)."""
        neg = {i: -a for i, a in self.coeffs.items()}
        if self.rel == LE:
            return [self]
        if self.rel == GE:
            return [Constraint(neg, LE, -self.rhs)]
        return [Constraint(self.coeffs, LE, self.rhs), Constraint(neg, LE, -self.rhs)]


@dataclass
class LinearProgram:
    varcount: int
    constraints: list[Constraint] = field(default_factory=list)

    def add(self, coeffs: Mapping[int, Rational], rel: str, rhs: Rational) -> None:
        coeffs = {i: a for i, a in coeffs.items() if a != 0}
        for i in coeffs:
            if not 0 <= i < self.varcount:
                raise IndexError(f"variable {i} outside [0, {self.varcount})")
        self.constraints.append(Constraint(coeffs, rel, rhs))

    def add_box(self, variables: Iterable[int] | None = None) -> None:
        for i in range(self.varcount) if variables is None else variables:
            self.add({i: 1}, GE, 0)
            self.add({i: 1}, LE, 1)


@dataclass(frozen=True)
class TimeIndex:
    """Bijection (job, slot) <-> ground variable index, for slots 1..T."""

    n: int
    T: int

    def var(self, j: int, t: int) -> int:
        return (j - 1) * self.T + (t - 1)

    def job_slot(self, var: int) -> tuple[int, int]:
        j, t = divmod(var, self.T)
        return j + 1, t + 1

    @property
    def size(self) -> int:
        return self.n * self.T

    def job_vars(self, j: int) -> range:
        start = (j - 1) * self.T
        return range(start, start + self.T)


@dataclass(frozen=True)
class LpPoint:
    values: Mapping[int, Fraction]

    def __getitem__(self, i: int) -> Fraction:
        return self.values.get(i, Fraction(0))

    def to_json(self) -> dict:
        return {str(i): fmt_rational(v) for i, v in sorted(self.values.items()) if v != 0}


@dataclass(frozen=True)
class Feasible:
    point: LpPoint

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Infeasible:
    reason: str = ""

    def __bool__(self) -> bool:
        return False


def build_time_indexed_lp(inst: Instance, T: int) -> tuple[LinearProgram, TimeIndex]:
    """The time-indexed relaxation for makespan guess ``T``.

    Precedence rows run over ``t = 0 .. T-1`` and over every pair of the
    transitive closure; at ``t = 0`` the left side is empty, which pins every
    successor away from slot 1.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    idx = TimeIndex(inst.n, T)
    lp = LinearProgram(idx.size)
    for j in inst.jobs:
        lp.add({idx.var(j, t): 1 for t in range(1, T + 1)}, EQ, 1)
    for t in range(1, T + 1):
        lp.add({idx.var(j, t): 1 for j in inst.jobs}, LE, inst.m)
    for j, i in sorted(inst.closure.pairs()):
        for t in range(0, T):
            row: dict[int, int] = {}
            for tp in range(1, t + 1):
                row[idx.var(j, tp)] = 1
            for tp in range(1, t + 2):
                row[idx.var(i, tp)] = -1
            lp.add(row, GE, 0)
    lp.add_box()
    return lp, idx


def check_point(lp: LinearProgram, values: Mapping[int, Rational]) -> list[int]:
    """Indices of rows (and box bounds, as -1 - var) violated by ``values``."""
    bad = [k for k, c in enumerate(lp.constraints) if not c.holds(values)]
    bad += [-1 - i for i, v in values.items() if not 0 <= v <= 1]
    return bad


def decode_schedule(point: LpPoint | Mapping[int, Rational], idx: TimeIndex) -> Schedule:
    """Read an integral point as a schedule (each job at its unique unit slot)."""
    values = point.values if isinstance(point, LpPoint) else point
    slots: dict[int, int] = {}
    for var, v in values.items():
        if v == 1:
            j, t = idx.job_slot(var)
            if j in slots:
                raise ValueError(f"job {j} placed twice")
            slots[j] = t
        elif v != 0:
            raise ValueError(f"fractional value {v} at variable {var}")
    return Schedule(slots)


def lp_feasible_at(inst: Instance, T: int) -> Feasible | Infeasible:
    lp, _ = build_time_indexed_lp(inst, T)
    return solve_feasibility(lp)


def lp_min_makespan(inst: Instance) -> int:
    """Smallest horizon with a feasible time-indexed LP.

    The scan starts at the larger of ``ceil(n/m)`` and the longest chain: the
    capacity rows force the first and the precedence rows push the ``k``-th
    job of a chain to slots ``>= k``, so nothing below is feasible.
    """
    from .baseline import lower_bounds

    for T in range(max(lower_bounds(inst)), inst.n + 1):
        if lp_feasible_at(inst, T):
            return T
    raise AssertionError("LP infeasible at T = n; the serial schedule is a feasible point")


# --------------------------------------------------------------------------
# exact solver


def solve_feasibility(lp: LinearProgram) -> Feasible | Infeasible:
    """Exact phase-1 simplex (Bland's rule) after an exact presolve.

    The returned point is re-checked against every row; a failure there is an
    internal error, never a tolerance question.
    """
    pre = _Presolve(lp)
    if pre.infeasible:
        return Infeasible(pre.infeasible)
    values = dict(pre.fixed)
    if pre.rows:
        sol = _phase_one(pre)
        if sol is None:
            return Infeasible("phase 1 optimum is positive")
        values.update(sol)
    for i in range(lp.varcount):
        values.setdefault(i, Fraction(0))
    clean = {i: Fraction(v) for i, v in values.items()}
    bad = check_point(lp, clean)
    if bad:
        raise AssertionError(f"solver returned a point violating rows {bad[:10]}")
    return Feasible(LpPoint({i: v for i, v in clean.items() if v != 0}))


class _Presolve:
    """Fix forced variables, tighten singleton bounds, drop implied rows.

    Rows are kept as ``sum a_i x_i (<= | =) b`` over the still-free variables.
    """

    def __init__(self, lp: LinearProgram):
        self.lo: dict[int, Rational] = {}
        self.hi: dict[int, Rational] = {}
        self.fixed: dict[int, Rational] = {}
        self.infeasible = ""
        rows: dict[tuple, tuple[dict[int, Rational], str, Rational]] = {}
        for c in lp.constraints:
            if c.rel == GE:
                coeffs, rel, rhs = {i: -a for i, a in c.coeffs.items()}, LE, -c.rhs
            else:
                coeffs, rel, rhs = dict(c.coeffs), c.rel, c.rhs
            rows[_row_key(coeffs, rel, rhs)] = (coeffs, rel, rhs)
        work = list(rows.values())
        for i in range(lp.varcount):
            self.lo[i], self.hi[i] = 0, 1
        changed = True
        while changed and not self.infeasible:
            changed = False
            kept = {}
            for coeffs, rel, rhs in work:
                res = self._reduce(coeffs, rel, rhs)
                if res is None:
                    changed = True
                    continue
                if res is False:
                    return
                coeffs, rel, rhs, touched = res
                changed |= touched
                kept.setdefault(_row_key(coeffs, rel, rhs), (coeffs, rel, rhs))
            if len(kept) < len(work):
                changed = True
            work = list(kept.values())
        free = sorted({i for coeffs, _, _ in work for i in coeffs})
        for i in range(lp.varcount):
            if i not in free and i not in self.fixed:
                self.fixed[i] = self.lo[i]
        self.free = free
        self.rows = work

    def _fix(self, i: int, v: Rational) -> bool:
        if not self.lo[i] <= v <= self.hi[i]:
            self.infeasible = f"variable {i} forced to {v} outside its bounds"
            return False
        self.fixed[i] = v
        self.lo[i] = self.hi[i] = v
        return True

    def _reduce(self, coeffs, rel, rhs):
        """Simplify one row. None = row dropped, False = infeasible."""
        touched = False
        live = {}
        for i, a in coeffs.items():
            if i in self.fixed:
                rhs -= a * self.fixed[i]
                touched = True
            else:
                live[i] = a
        lo_act = sum((a * (self.lo[i] if a > 0 else self.hi[i]) for i, a in live.items()), 0)
        hi_act = sum((a * (self.hi[i] if a > 0 else self.lo[i]) for i, a in live.items()), 0)
        if lo_act > rhs or (rel == EQ and hi_act < rhs):
            self.infeasible = f"row {_show(live, rel, rhs)} cannot be met within bounds"
            return False
        if rel == LE and hi_act <= rhs:
            return None
        if lo_act == rhs:
            for i, a in live.items():
                if not self._fix(i, self.lo[i] if a > 0 else self.hi[i]):
                    return False
            return None
        if rel == EQ and hi_act == rhs:
            for i, a in live.items():
                if not self._fix(i, self.hi[i] if a > 0 else self.lo[i]):
                    return False
            return None
        if len(live) == 1:
            (i, a), = live.items()
            bound = Fraction(rhs) / a
            if rel == EQ:
                return None if self._fix(i, bound) else False
            if a > 0 and bound < self.hi[i]:
                self.hi[i] = bound
            elif a < 0 and bound > self.lo[i]:
                self.lo[i] = bound
            if self.lo[i] > self.hi[i]:
                self.infeasible = f"bounds of variable {i} crossed"
                return False
            if self.lo[i] == self.hi[i]:
                self._fix(i, self.lo[i])
            return None
        return live, rel, rhs, touched


def _row_key(coeffs, rel, rhs) -> tuple:
    items = sorted(coeffs.items())
    if items:
        scale = abs(Fraction(items[0][1]))
        if scale != 1:
            items = [(i, a / scale) for i, a in items]
            rhs = rhs / scale
    return (rel, tuple(items), rhs)


def _show(coeffs, rel, rhs) -> str:
    terms = " + ".join(f"{fmt_rational(a)}*x{i}" for i, a in sorted(coeffs.items())) or "0"
    return f"{terms} {rel} {fmt_rational(rhs)}"


def _phase_one(pre: _Presolve) -> dict[int, Fraction] | None:
    """Bounded-variable primal simplex minimising the sum of artificials.

    Columns: structural (shifted to lower bound 0), then one slack per ``<=``
    row, then artificials.  Entering and leaving choices follow Bland's rule
    on column index.  Returns structural values, or None when infeasible.
    """
    col_of = {v: c for c, v in enumerate(pre.free)}
    ncols = len(pre.free)
    upper: list[fmpq | None] = [_q(pre.hi[v] - pre.lo[v]) for v in pre.free]
    rows: list[dict[int, Rational]] = []
    basic: list[int] = []
    value: list[Rational] = []
    artificial: set[int] = set()
    for coeffs, rel, rhs in pre.rows:
        row = {}
        rhs = _q(rhs)
        for v, a in coeffs.items():
            row[col_of[v]] = _q(a)
            rhs -= _q(a * pre.lo[v])
        if rel == LE:
            slack = ncols
            ncols += 1
            upper.append(None)
            if rhs >= 0:
                rows.append(row)
                basic.append(slack)
                value.append(rhs)
                continue
            row = {c: -a for c, a in row.items()}
            row[slack] = fmpq(-1)
            rhs = -rhs
        elif rhs < 0:
            row = {c: -a for c, a in row.items()}
            rhs = -rhs
        art = ncols
        ncols += 1
        upper.append(None)
        artificial.add(art)
        rows.append(row)
        basic.append(art)
        value.append(rhs)
    where = {b: r for r, b in enumerate(basic)}
    colrows: dict[int, set[int]] = {}
    for r, row in enumerate(rows):
        for c in row:
            colrows.setdefault(c, set()).add(r)
    # reduced costs of the phase-1 objective (sum of artificials)
    cost: dict[int, Rational] = {}
    for r, b in enumerate(basic):
        if b in artificial:
            for c, a in rows[r].items():
                cost[c] = cost.get(c, 0) - a
    cost = {c: d for c, d in cost.items() if d != 0}
    at_upper: set[int] = set()

    while True:
        enter = None
        for c in sorted(cost):
            d = cost[c]
            if (d < 0 and c not in at_upper) or (d > 0 and c in at_upper):
                enter = c
                break
        if enter is None:
            break
        sign = 1 if enter not in at_upper else -1
        # ratio test over (step, column index) with Bland tie-break
        best_step = upper[enter]
        best_col = enter
        best_row = None
        for r in colrows.get(enter, ()):
            alpha = rows[r][enter]
            rate = -alpha * sign
            b = basic[r]
            if rate < 0:
                step = value[r] / -rate
            elif upper[b] is not None:
                step = (upper[b] - value[r]) / rate
            else:
                continue
            if best_step is None or step < best_step or (step == best_step and b < best_col):
                best_step, best_col, best_row = step, b, r
        if best_step is None:
            raise AssertionError("phase 1 objective unbounded")
        delta = sign * best_step
        if delta != 0:
            for r in colrows.get(enter, ()):
                value[r] -= rows[r][enter] * delta
        if best_row is None:
            # entering column runs into its own opposite bound
            at_upper.symmetric_difference_update({enter})
            continue
        r = best_row
        leave = basic[r]
        entered_from = upper[enter] if enter in at_upper else 0
        at_upper.discard(enter)
        leave_at_upper = upper[leave] is not None and value[r] == upper[leave]
        pivot = rows[r].pop(enter)
        new_row = {c: a / pivot for c, a in rows[r].items()}
        drop_leave = leave in artificial
        if not drop_leave:
            new_row[leave] = 1 / pivot
            if leave_at_upper:
                at_upper.add(leave)
        for c in rows[r]:
            colrows[c].discard(r)
        colrows[enter].discard(r)
        rows[r] = new_row
        for c in new_row:
            colrows.setdefault(c, set()).add(r)
        for i in list(colrows[enter]):
            row_i = rows[i]
            f = row_i.pop(enter)
            for c, a in new_row.items():
                v = row_i.get(c, 0) - f * a
                if v == 0:
                    if c in row_i:
                        del row_i[c]
                        colrows[c].discard(i)
                else:
                    if c not in row_i:
                        colrows.setdefault(c, set()).add(i)
                    row_i[c] = v
        colrows[enter] = set()
        d_q = cost.pop(enter, 0)
        for c, a in new_row.items():
            v = cost.get(c, 0) - d_q * a
            if v == 0:
                cost.pop(c, None)
            else:
                cost[c] = v
        if drop_leave:
            colrows.pop(leave, None)
            cost.pop(leave, None)
        basic[r] = enter
        value[r] = entered_from + delta
        del where[leave]
        where[enter] = r

    total = sum((value[r] for r, b in enumerate(basic) if b in artificial), 0)
    if total > 0:
        return None
    out: dict[int, Fraction] = {}
    for v, c in col_of.items():
        if c in where:
            x = value[where[c]]
        elif c in at_upper:
            x = upper[c]
        else:
            x = 0
        out[v] = pre.lo[v] + _frac(x)
    return out


def _q(x) -> fmpq:
    x = Fraction(x)
    return fmpq(x.numerator, x.denominator)


def _frac(x) -> Fraction:
    if isinstance(x, fmpq):
        return Fraction(int(x.p), int(x.q))
    return Fraction(x)
