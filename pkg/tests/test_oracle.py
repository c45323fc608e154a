from __future__ import annotations

import pytest
from hypothesis import given, settings

from conftest import instances
from precsched.instance import Instance, generate, longest_chain
from precsched.oracle import OracleTooLarge, Schedule, exact_makespan, naive_makespan, validate

DIAMOND = Instance(4, 2, frozenset({(1, 2), (1, 3), (2, 4), (3, 4)}))


def test_examples():
    assert exact_makespan(generate("chain", 3, 2))[0] == 3
    assert exact_makespan(Instance(4, 2))[0] == 2
    opt, witness = exact_makespan(DIAMOND)
    assert opt == 3 and validate(DIAMOND, witness).ok


def test_validate_examples():
    assert validate(DIAMOND, Schedule({1: 1, 2: 2, 3: 2, 4: 3})).ok
    rep = validate(Instance(2, 1, frozenset({(1, 2)})), Schedule({1: 1, 2: 1}))
    assert sorted(v.kind for v in rep.violations) == ["capacity", "precedence"]
    rep = validate(Instance(3, 2), Schedule({1: 1, 2: 1, 3: 1}))
    assert [v.kind for v in rep.violations] == ["capacity"]


def test_validate_reports_coverage_and_slots():
    inst = Instance(3, 2)
    kinds = {v.kind for v in validate(inst, Schedule({1: 0, 2: 1}, frozenset({2}))).violations}
    assert kinds == {"slot", "coverage"}
    assert validate(inst, Schedule({1: 1}, frozenset({2, 3}))).ok
    assert not validate(inst, Schedule({1: 1})).ok
    assert validate(inst, Schedule({1: 1}), scope=[1]).ok


def test_schedule_json_roundtrip():
    s = Schedule({1: 1, 3: 2}, frozenset({2}))
    assert Schedule.from_json(s.to_json()) == s
    assert s.makespan == 2 and Schedule({}).makespan == 0


def test_cap():
    with pytest.raises(OracleTooLarge):
        exact_makespan(Instance(25, 2))


@settings(max_examples=150, deadline=None)
@given(instances(n_max=8, m_max=3))
def test_pruned_search_matches_naive(inst):
    opt, witness = exact_makespan(inst)
    assert opt == naive_makespan(inst) == exact_makespan(inst, prune=False)[0]
    assert validate(inst, witness).ok and witness.makespan == opt
    assert max(-(-inst.n // inst.m), len(longest_chain(inst.closure, inst.jobs))) <= opt <= inst.n
