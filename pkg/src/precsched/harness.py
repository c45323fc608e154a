"""Experiment drivers: seeded instance samplers, gap search, method comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .baseline import list_schedule
from .instance import Instance, SplitMix64, generate, instance_to_json
from .lp_core import fmt_rational, lp_feasible_at, lp_min_makespan
from .oracle import ORACLE_CAP, exact_makespan
from .qptas import Params, run_qptas
from .sherali_adams import DEFAULT_LIFT_CAP, LiftTooLarge, sa_min_makespan

__all__ = ["sample_instance", "gap_search", "GapReport", "compare_row"]

GNP_PROBS = tuple(Fraction(i, 10) for i in range(1, 10))


def sample_instance(rng: SplitMix64, m: int, n_min: int, n_max: int) -> tuple[Instance, dict]:
    """Draw one instance: layered or gnp with equal odds, n uniform in range.

    Pure gnp graphs almost never show an LP gap at these sizes, so the
    layered model (complete bipartite joins between consecutive layers)
    is mixed in.
    """
    n = n_min + rng.next_u64() % (n_max - n_min + 1)
    seed = rng.next_u64()
    if rng.next_u64() % 2 and n >= 3:
        layers = 2 + rng.next_u64() % (n - 2)
        return generate("layered", n, m, layers), {"model": "layered", "n": n, "m": m, "param": layers}
    p = GNP_PROBS[rng.next_u64() % len(GNP_PROBS)]
    return generate("gnp", n, m, p, seed), {
        "model": "gnp",
        "n": n,
        "m": m,
        "param": fmt_rational(p),
        "seed": seed,
    }


@dataclass
class GapReport:
    trials: int
    witnesses: list[dict] = field(default_factory=list)
    max_ratio: Fraction = Fraction(1)
    sa_rounds: int | None = None
    sa_witnesses: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "trials": self.trials,
            "witness_count": len(self.witnesses),
            "max_ratio": fmt_rational(self.max_ratio),
            "witnesses": self.witnesses,
        }
        if self.sa_rounds is not None:
            out["sa_rounds"] = self.sa_rounds
            out["sa_witness_count"] = len(self.sa_witnesses)
            out["sa_witnesses"] = self.sa_witnesses
        return out


def gap_search(
    m: int,
    n_max: int,
    trials: int,
    seed: int,
    sa_rounds: int | None = None,
    n_min: int = 3,
    cap: int = DEFAULT_LIFT_CAP,
) -> GapReport:
    """Record every sampled instance whose LP optimum is below the true optimum.

    Each witness is re-verified: the LP is feasible at its reported value and
    the exact optimum exceeds it.  With ``sa_rounds`` the witnesses are also
    checked against the lifted relaxation.
    """
    if n_max > ORACLE_CAP:
        raise ValueError(f"n_max={n_max} exceeds the oracle cap {ORACLE_CAP}")
    rng = SplitMix64(seed)
    report = GapReport(trials, sa_rounds=sa_rounds)
    for trial in range(trials):
        inst, how = sample_instance(rng, m, min(n_min, n_max), n_max)
        lp = lp_min_makespan(inst)
        opt, witness = exact_makespan(inst)
        if lp >= opt:
            continue
        if not lp_feasible_at(inst, lp) or exact_makespan(inst, prune=False)[0] != opt:
            raise AssertionError(f"gap witness at trial {trial} failed re-verification")
        entry = {"trial": trial, "generator": how, "instance": instance_to_json(inst), "opt": opt, "lp": lp}
        report.witnesses.append(entry)
        report.max_ratio = max(report.max_ratio, Fraction(opt, lp))
        if sa_rounds is not None:
            sa = sa_min_makespan(inst, sa_rounds, cap, start=lp, upper=(opt, witness))
            entry["sa"] = sa
            if sa < opt:
                report.sa_witnesses.append(entry)
    return report


def compare_row(inst: Instance, params: Params | None, params_error: str | None = None, seed: int = 0) -> dict:
    """Optimum, list schedule, LP, one-round lift and the rounding result for one instance."""
    row: dict = {}
    upper = None
    if inst.n <= ORACLE_CAP:
        upper = exact_makespan(inst)
        row["opt"] = upper[0]
    else:
        row["opt"] = {"error": f"n={inst.n} exceeds the oracle cap {ORACLE_CAP}"}
    row["list"] = list_schedule(inst).makespan
    row["lp"] = lp_min_makespan(inst)
    try:
        row["sa1"] = sa_min_makespan(inst, 1, start=row["lp"], upper=upper)
    except LiftTooLarge as err:
        row["sa1"] = {"error": str(err)}
    if params is None:
        row["qptas_final"] = {"error": params_error or "no parameters"}
    else:
        res = run_qptas(inst, params, T=upper[0] if upper else None, seed=seed)
        row["qptas_final"] = res.final.makespan
        row["qptas_discards"] = len(res.ledger.discarded)
    return row
