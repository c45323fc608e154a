from __future__ import annotations

from fractions import Fraction

from hypothesis import given, settings

from conftest import instances
from precsched.baseline import busy_accounting, list_schedule, lower_bounds
from precsched.instance import Instance, generate
from precsched.oracle import exact_makespan, validate

DIAMOND = Instance(4, 2, frozenset({(1, 2), (1, 3), (2, 4), (3, 4)}))
GRAHAM6 = Instance(6, 2, frozenset({(4, 5), (5, 6)}))


def test_list_examples():
    assert list_schedule(DIAMOND).slots == {1: 1, 2: 2, 3: 2, 4: 3}
    s = list_schedule(GRAHAM6)
    assert s.slots == {1: 1, 2: 1, 3: 2, 4: 2, 5: 3, 6: 4}
    assert s.makespan == 4 and exact_makespan(GRAHAM6)[0] == 3
    assert list_schedule(Instance(5, 2)).makespan == 3


def test_lower_bound_examples():
    assert lower_bounds(generate("chain", 4, 2)) == (2, 4)
    assert lower_bounds(Instance(4, 2)) == (2, 1)
    assert lower_bounds(DIAMOND) == (2, 3)


@settings(max_examples=150, deadline=None)
@given(instances(n_max=9, m_max=3))
def test_graham_bound_and_accounting(inst):
    s = list_schedule(inst)
    assert validate(inst, s).ok
    opt = exact_makespan(inst)[0]
    assert s.makespan <= (2 - Fraction(1, inst.m)) * opt
    acct = busy_accounting(inst, s)
    assert acct.holds and acct.busy + acct.idle == s.makespan
