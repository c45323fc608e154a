from __future__ import annotations

from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from precsched.baseline import list_schedule
from precsched.instance import Instance, generate
from precsched.lp_core import EQ, LE, LinearProgram, build_time_indexed_lp, check_point, lp_min_makespan
from precsched.oracle import exact_makespan
from precsched.qptas import sample_schedules
from precsched.sherali_adams import (
    ConditioningError,
    LiftTooLarge,
    MomentSolution,
    SaSolution,
    build_sa_lift,
    check_sa,
    condition_on_event,
    condition_on_var,
    fractional_support,
    lifted_varcount,
    mixture_solution,
    moment_solution,
    product_solution,
    restrict_level,
    sa_min_makespan,
    solve_sa,
)


def test_lift_sizes():
    lp = LinearProgram(4)
    assert lifted_varcount(4, 1) == 11
    assert len(build_sa_lift(lp, 1).keys) == 11
    with pytest.raises(LiftTooLarge):
        build_sa_lift(LinearProgram(30), 2, cap=1000)


def test_level_zero_is_the_base_lp():
    lp = LinearProgram(2)
    lp.add({0: 1, 1: 1}, LE, 1)
    lift = build_sa_lift(lp, 0)
    assert lift.keys == [(), (0,), (1,)]
    rows = [(dict(c.coeffs), c.rel, c.rhs) for c in lift.lifted.constraints]
    assert rows == [({1: 1, 2: 1, 0: -1}, LE, 0), ({0: 1}, EQ, 1)]


def test_lifted_upper_bound_row():
    lp = LinearProgram(2)
    lp.add({0: 1}, LE, 1)
    lift = build_sa_lift(lp, 1)
    ki = lift.keyindex
    want = {ki[(0, 1)]: 1, ki[(1,)]: -1}
    assert any(dict(c.coeffs) == want and c.rel == LE and c.rhs == 0 for c in lift.lifted.constraints)


def _tiny_lp():
    lp = LinearProgram(3)
    lp.add({0: 1, 1: 1, 2: 1}, LE, 2)
    lp.add({0: 1, 1: -1}, LE, 0)
    lp.add_box()
    return lp


def test_product_solutions_of_integral_points_are_feasible():
    lp = _tiny_lp()
    for pt in product((0, 1), repeat=3):
        point = dict(enumerate(pt))
        if check_point(lp, point):
            continue
        for s in range(3):
            assert check_sa(product_solution(point, s), lp, s) == []


def test_solve_sa_examples():
    inst = generate("chain", 2, 1)
    assert not solve_sa(inst, 1, 1)
    k33 = generate("layered", 6, 2, 2)
    assert not solve_sa(k33, 3, 1)
    res = solve_sa(generate("chain", 3, 1), 3, 1)
    assert res and check_sa(res.point, build_time_indexed_lp(generate("chain", 3, 1), 3)[0], 1) == []


def test_sa_min_sits_between_lp_and_opt():
    k33 = generate("layered", 6, 2, 2)
    assert lp_min_makespan(k33) == 3
    assert sa_min_makespan(k33, 0) == 3
    assert sa_min_makespan(k33, 1) == exact_makespan(k33)[0] == 4


def test_conditioning_examples():
    inst = generate("layered", 4, 2, 2)
    lp, idx = build_time_indexed_lp(inst, 2)
    res = solve_sa(inst, 2, 1)
    sol = res.point
    z = condition_on_var(sol, idx.var(1, 1))
    assert z.level == 0 and z[()] == 1 and z.var(idx.var(1, 1)) == 1
    assert check_sa(z, lp, 0) == []
    with pytest.raises(ConditioningError):
        condition_on_var(z, idx.var(1, 1))
    with pytest.raises(ConditioningError):
        condition_on_var(sol, idx.var(3, 1))


def test_fractional_support_examples():
    idx = build_time_indexed_lp(Instance(1, 1), 5)[1]
    sol = SaSolution(1, {(): 1, (idx.var(1, 2),): Fraction(1, 3), (idx.var(1, 5),): Fraction(2, 3)}, idx)
    assert fractional_support(sol, 1) == ([2, 5], (2, 5))
    z = condition_on_event(sol, 1, [5])
    assert fractional_support(z, 1) == ([5], (5, 5))


def _mixture(inst, T, level, seed=0):
    scheds = sample_schedules(inst, T, count=12, seed=seed)
    idx = build_time_indexed_lp(inst, T)[1]
    w = Fraction(1, len(scheds))
    return moment_solution([(w, s) for s in scheds], idx, level)


def test_moment_solution_matches_explicit_table():
    inst = generate("layered", 5, 2, 2)
    lp, idx = build_time_indexed_lp(inst, 4)
    ms = _mixture(inst, 4, 2)
    explicit = ms.explicit()
    assert check_sa(explicit, lp, 2) == []
    i = next(v for v in sorted(explicit.values) if len(v) == 1 and 0 < explicit[v] < 1)[0]
    a = condition_on_var(ms, i).explicit()
    b = condition_on_var(explicit, i)
    assert a.values == b.values
    j, _ = idx.job_slot(i)
    supp, _ = fractional_support(ms, j)
    a = condition_on_event(ms, j, supp[1:]).explicit()
    b = condition_on_event(explicit, j, supp[1:])
    assert a.values == b.values


def test_mixture_solution_equals_moment_table():
    inst = generate("chain", 3, 2)
    idx = build_time_indexed_lp(inst, 4)[1]
    s1, s2 = list_schedule(inst), exact_makespan(inst)[1]
    pts = [(Fraction(1, 2), {idx.var(j, t): 1 for j, t in s.slots.items()}) for s in (s1, s2)]
    assert mixture_solution(pts, 2, idx).values == moment_solution([(Fraction(1, 2), s1), (Fraction(1, 2), s2)], idx, 2).values


def test_moment_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        MomentSolution(1, ((Fraction(1, 2), frozenset()),))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(3, 5), st.sampled_from([1, 2]))
def test_conditioning_keeps_feasibility_and_shrinks_support(seed, n, level):
    inst = generate("gnp", n, 2, Fraction(1, 3), seed)
    T = exact_makespan(inst)[0] + 1
    lp, idx = build_time_indexed_lp(inst, T)
    sol = _mixture(inst, T, level, seed).explicit()
    assert check_sa(sol, lp, level) == []
    # projection consistency
    for s in range(level + 1):
        assert check_sa(restrict_level(sol, s), lp, s) == []
    fractional = sorted(k[0] for k, v in sol.values.items() if len(k) == 1 and 0 < v < 1)
    i = fractional[seed % len(fractional)] if fractional else idx.var(1, exact_makespan(inst)[1].slots[1])
    z = condition_on_var(sol, i)
    assert z[()] == 1 and z.var(i) == 1
    assert check_sa(z, lp, level - 1) == []
    for j in inst.jobs:
        assert set(fractional_support(z, j)[0]) <= set(fractional_support(sol, j)[0])
