from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from precsched.instance import Instance
from precsched.laminar import JobWindows, LaminarFamily
from precsched.oracle import Schedule, validate
from precsched.top_matching import (
    TopPlacementError,
    Window,
    capacitated_matching,
    compute_windows,
    ext,
    hall_deficiency,
    insert_top_jobs,
    slot_capacity,
)


def test_ext_examples():
    assert ext(2, 3, 8) == (1, 4)
    assert ext(1, 1, 8) == (1, 2)
    assert ext(1, 8, 8) == (1, 8)


def test_window_examples():
    fam = LaminarFamily(16)
    w = JobWindows.start(fam, {1: (3, 10), 2: (5, 6), 3: (3, 6)})
    wins = compute_windows(w, [1, 2, 3], 3)
    assert wins[1] == Window(5, 8, False, 3, 4)
    assert wins[2].empty and wins[2].r == wins[2].d == 5
    assert wins[3].empty


def test_matching_examples():
    matched, unmatched = capacitated_matching({1: [1], 2: [1]}, {1: 1})
    assert len(matched) == 1 and len(unmatched) == 1
    matched, unmatched = capacitated_matching({1: [1], 2: [2], 3: [3]}, {1: 1, 2: 1, 3: 2})
    assert matched == {1: 1, 2: 2, 3: 3} and not unmatched


def test_capacity_accounting():
    sigma = Schedule({1: 1, 2: 1, 3: 3})
    caps = slot_capacity(sigma, (1, 4), 2)
    assert caps == {1: 0, 2: 2, 3: 1, 4: 2}
    assert sum(caps.values()) + len(sigma.slots) == 2 * 4


@st.composite
def systems(draw):
    nj = draw(st.integers(0, 8))
    ns = draw(st.integers(1, 8))
    caps = {t: draw(st.integers(0, 2)) for t in range(1, ns + 1)}
    allowed = {j: sorted(draw(st.sets(st.integers(1, ns), max_size=ns))) for j in range(1, nj + 1)}
    return allowed, caps


@settings(max_examples=300, deadline=None)
@given(systems())
def test_matching_leaves_exactly_the_deficiency(system):
    allowed, caps = system
    matched, unmatched = capacitated_matching(allowed, caps)
    assert len(unmatched) == hall_deficiency(allowed, caps)
    used = {}
    for j, t in matched.items():
        assert t in allowed[j]
        used[t] = used.get(t, 0) + 1
    assert all(c <= caps[t] for t, c in used.items())


def test_insert_nothing():
    sigma = Schedule({1: 1})
    res = insert_top_jobs(sigma, [], {}, {1: 1}, Instance(1, 2).closure)
    assert res.schedule == sigma and not res.discarded


def test_insert_independent_jobs():
    inst = Instance(3, 2)
    wins = {j: Window(1, 4) for j in (1, 2, 3)}
    res = insert_top_jobs(Schedule({}), [1, 2, 3], wins, {t: 2 for t in range(1, 5)}, inst.closure)
    assert not res.discarded and validate(inst, res.schedule).ok


def test_phase_c_orders_a_chain():
    # ids run against the precedence: 2 before 1
    inst = Instance(2, 1, frozenset({(2, 1)}))
    wins = {1: Window(1, 2), 2: Window(1, 2)}
    res = insert_top_jobs(Schedule({}), [1, 2], wins, {1: 1, 2: 1}, inst.closure)
    assert res.schedule.slots == {2: 1, 1: 2} and not res.discarded
    assert validate(inst, res.schedule).ok


def test_phase_c_discards_when_no_room_after_predecessor():
    inst = Instance(2, 2, frozenset({(1, 2)}))
    wins = {1: Window(1, 1), 2: Window(1, 1)}
    res = insert_top_jobs(Schedule({}), [1, 2], wins, {1: 2}, inst.closure)
    assert res.discarded_repair == {2} and res.schedule.slots == {1: 1}


def test_empty_windows_are_discarded_first():
    inst = Instance(2, 1)
    wins = {1: Window(2, 2, empty=True), 2: Window(1, 2)}
    res = insert_top_jobs(Schedule({}), [1, 2], wins, {1: 1, 2: 1}, inst.closure)
    assert res.discarded_empty == {1} and 2 in res.schedule.slots


def test_condition3_violation_aborts():
    inst = Instance(2, 1, frozenset({(1, 2)}))
    with pytest.raises(TopPlacementError):
        insert_top_jobs(Schedule({2: 2}), [1], {1: Window(1, 2)}, {1: 1, 2: 0}, inst.closure)
