"""Acceptance criteria; each test prints one PASS/FAIL line."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from conftest import corpus
from precsched.baseline import list_schedule
from precsched.harness import GNP_PROBS, gap_search, sample_instance
from precsched.instance import SplitMix64, generate
from precsched.lp_core import build_time_indexed_lp, lp_min_makespan
from precsched.oracle import exact_makespan, naive_makespan, validate
from precsched.qptas import InvariantViolation, Params, run_qptas, sample_schedules
from precsched.sherali_adams import (
    check_sa,
    condition_on_event,
    condition_on_var,
    fractional_support,
    moment_solution,
    sa_min_makespan,
    solve_sa,
)
from precsched.top_matching import capacitated_matching, hall_deficiency

CORPUS = Path(__file__).parent / "corpus"


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    return emit


def test_criterion_1_graham_bound(report):
    bad, total = [], 0
    for m in (2, 3):
        for n in range(6, 13):
            for seed in range(200):
                inst = generate("gnp", n, m, GNP_PROBS[seed % len(GNP_PROBS)], seed)
                opt = exact_makespan(inst)[0]
                got = list_schedule(inst).makespan
                total += 1
                if got * m > (2 * m - 1) * opt:
                    bad.append((m, n, seed))
    graham = corpus()["graham6"]
    gap = list_schedule(graham).makespan > exact_makespan(graham)[0]
    detail = f"{total} instances, {len(bad)} over the bound, graham6 list > opt: {gap}"
    report(1, not bad and gap, detail)


def test_criterion_2_relaxation_ordering(report):
    broken = []
    rng = SplitMix64(2024)
    for trial in range(60):
        inst, _ = sample_instance(rng, 2 + trial % 2, 3, 7)
        opt = exact_makespan(inst)
        lp = lp_min_makespan(inst)
        sa = sa_min_makespan(inst, 1, start=lp, upper=opt)
        if not lp <= sa <= opt[0]:
            broken.append((trial, lp, sa, opt[0]))
    reports = [gap_search(m, 10, 250, seed=7 + m) for m in (2, 3)]
    witnesses = sum(len(r.witnesses) for r in reports)
    ratio = max(r.max_ratio for r in reports)
    detail = f"ordering violations {len(broken)}, gap witnesses {witnesses} in 500 trials, max opt/lp ratio {ratio}"
    report(2, not broken and witnesses >= 1, detail)


def test_criterion_3_one_round_exact_for_two_machines(report):
    rng = SplitMix64(77)
    mismatches, tested = [], 0
    while tested < 100:
        inst, how = sample_instance(rng, 2, 3, 7)
        opt = exact_makespan(inst)
        if opt[0] > 7:
            continue
        tested += 1
        # scan every horizon from the LP bound; no upper shortcut
        lo = lp_min_makespan(inst)
        sa = next((T for T in range(lo, opt[0]) if solve_sa(inst, T, 1)), opt[0])
        if sa != opt[0]:
            mismatches.append((how, sa, opt[0]))
    report(3, not mismatches, f"{tested} instances, {len(mismatches)} with one-round optimum below opt")


def _pool(rng: SplitMix64):
    """Feasible lifted solutions with at most 20 ground variables."""
    while True:
        n = 2 + rng.next_u64() % 3
        m = 1 + rng.next_u64() % 2
        inst = generate("gnp", n, m, GNP_PROBS[rng.next_u64() % 9], rng.next_u64())
        opt = exact_makespan(inst)
        T = min(opt[0] + rng.next_u64() % 2, 20 // n)
        if T < opt[0]:
            continue
        level = 1 + rng.next_u64() % 2
        lp, idx = build_time_indexed_lp(inst, T)
        if rng.next_u64() % 3 == 0:
            res = solve_sa(inst, T, level)
            if not res:
                continue
            yield inst, lp, idx, res.point
        else:
            scheds = sample_schedules(inst, T, count=8, seed=rng.next_u64(), witness=opt[1])
            w = Fraction(1, len(scheds))
            yield inst, lp, idx, moment_solution([(w, s) for s in scheds], idx, level).explicit()


def test_criterion_4_conditioning_invariants(report):
    rng = SplitMix64(4)
    pool = _pool(rng)
    steps, problems = 0, []
    while steps < 1000:
        inst, lp, idx, sol = next(pool)
        while sol.level >= 1 and steps < 1000:
            supports = {j: fractional_support(sol, j)[0] for j in inst.jobs}
            if rng.next_u64() % 2:
                cand = [i for i in range(idx.size) if 0 < sol.var(i)]
                i = cand[rng.next_u64() % len(cand)]
                z = condition_on_var(sol, i)
                fixed = z.var(i) == 1
            else:
                j = inst.jobs[rng.next_u64() % inst.n]
                supp = supports[j]
                keep = [t for t in supp if rng.next_u64() % 2] or supp[:1]
                z = condition_on_event(sol, j, keep)
                fixed = sum(z.var(idx.var(j, t)) for t in keep) == 1
            steps += 1
            errs = check_sa(z, lp, sol.level - 1)
            grew = [j for j in inst.jobs if not set(fractional_support(z, j)[0]) <= set(supports[j])]
            mass = [sum(z.var(idx.var(j, t)) for t in range(1, idx.T + 1)) for j in inst.jobs]
            if errs or grew or z[()] != 1 or not fixed or any(x != 1 for x in mass):
                problems.append((steps, errs[:2], grew))
            sol = z
    report(4, not problems, f"{steps} conditioning steps, {len(problems)} violations")


def _qptas_configs(m: int) -> list[Params]:
    eps = Fraction(4 * m)
    out = [
        Params.desk(m, eps, 1, C, delta, base_threshold=th)
        for C in (2, 3)
        for delta in (Fraction(1, 4), Fraction(1, 2))
        for th in (1, 2)
    ]
    half = Fraction(1, 2)
    out.append(Params.desk(m, half, 1, Params.desk(m, half, 1, 10**6, half).retained + 1, Fraction(1, 4)))
    return out


def test_criterion_5_rounding_end_to_end(report):
    rng = SplitMix64(5)
    runs, failures, fired = 0, [], {"type1": 0, "type2": 0}
    for trial in range(100):
        m = 2 + trial % 2
        inst, how = sample_instance(rng, m, 3, 10)
        for params in _qptas_configs(m):
            runs += 1
            try:
                res = run_qptas(inst, params, seed=trial)
            except InvariantViolation as err:
                failures.append((trial, how, params.to_json(), str(err)))
                continue
            ok = validate(res.padded, res.partial).ok and res.partial.makespan <= res.T
            ok = ok and res.final.makespan <= res.T + len(res.partial.discarded)
            for nt in res.trace:
                for key in ("middle_bound", "type2_bound"):
                    if key in nt.checks:
                        ok = ok and nt.checks[key]["holds"]
                fired["type1"] += nt.case == "a"
                fired["type2"] += nt.case == "b"
            if not ok:
                failures.append((trial, how, params.to_json(), "bound"))
    detail = f"{runs} runs, {len(failures)} failures, type-1 nodes {fired['type1']}, type-2 nodes {fired['type2']}"
    report(5, not failures and fired["type1"] > 0 and fired["type2"] > 0, detail)


def test_criterion_6_matching_equals_hall_deficiency(report):
    rng = SplitMix64(6)
    bad = 0
    for _ in range(300):
        nj, ns = rng.next_u64() % 13, 1 + rng.next_u64() % 12
        caps = {t: rng.next_u64() % 3 for t in range(1, ns + 1)}
        allowed = {j: [t for t in caps if rng.next_u64() % 4 == 0] for j in range(1, nj + 1)}
        matched, unmatched = capacitated_matching(allowed, caps)
        used: dict[int, int] = {}
        for j, t in matched.items():
            used[t] = used.get(t, 0) + 1
        legal = all(t in allowed[j] for j, t in matched.items()) and all(used[t] <= caps[t] for t in used)
        if not legal or len(unmatched) != hall_deficiency(allowed, caps):
            bad += 1
    report(6, bad == 0, f"300 systems, {bad} disagreements")


def test_criterion_7_oracle_self_check(report):
    named = {k: v for k, v in corpus().items() if v.n <= 8}
    seeded = [generate("gnp", n, m, GNP_PROBS[s % 9], s) for s in range(30) for n, m in ((6, 2), (8, 3))]
    bad = [k for k, v in named.items() if exact_makespan(v)[0] != naive_makespan(v)]
    bad += [i for i, v in enumerate(seeded) if exact_makespan(v)[0] != naive_makespan(v)]
    report(7, not bad, f"{len(named)} corpus and {len(seeded)} seeded instances, {len(bad)} mismatches")
