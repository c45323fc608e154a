"""Command-line front end; every subcommand prints one JSON document."""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Sequence

from .baseline import busy_accounting, list_schedule, lower_bounds
from .harness import compare_row, gap_search
from .instance import InstanceError, generate, instance_to_json, parse_instance, serialize_instance
from .lp_core import build_time_indexed_lp, decode_schedule, lp_feasible_at, lp_min_makespan
from .oracle import OracleTooLarge, exact_makespan
from .qptas import BudgetExhausted, Params, run_qptas
from .sherali_adams import DEFAULT_LIFT_CAP, ConditioningError, LiftTooLarge, sa_min_makespan, solve_sa

SCHEMA = "precsched/1"


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="precsched", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="inp", help="instance file (line format or JSON)")
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--out", help="write JSON here instead of standard output")

    g = sub.add_parser("gen", parents=[common], help="generate a seeded instance")
    g.add_argument("--model", choices=["gnp", "chain", "layered"], default="gnp")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--param", help="edge probability (gnp) or layer count (layered)")

    sub.add_parser("exact", parents=[common], help="exact optimum by downset search")
    sub.add_parser("list", parents=[common], help="list schedule and lower bounds")

    lp = sub.add_parser("lp", parents=[common], help="time-indexed LP")
    lp.add_argument("--T", type=int, help="test feasibility at this horizon instead of minimising")

    sa = sub.add_parser("sa", parents=[common], help="Sherali-Adams lift of the LP")
    sa.add_argument("--rounds", type=int, default=1)
    sa.add_argument("--T", type=int)
    sa.add_argument("--cap", type=int, default=DEFAULT_LIFT_CAP, help="maximum lifted variable count")

    for name in ("qptas", "compare"):
        q = sub.add_parser(name, parents=[common])
        q.add_argument("--epsilon", type=_rational, default=Fraction(1, 2))
        q.add_argument("--mode", choices=["paper", "desk"], default="desk")
        q.add_argument("--k", type=int, default=1)
        q.add_argument("--C", type=int, default=None, help="batch count; default is the smallest allowed")
        q.add_argument("--delta", type=_rational, default=Fraction(1, 4))
        q.add_argument("--base-threshold", type=int, default=8)
        q.add_argument("--budget", type=int, default=10_000)
        q.add_argument("--T", type=int)
        q.add_argument("--source", choices=["mixture", "lift"], default="mixture")

    gs = sub.add_parser("gap-search", parents=[common], help="look for instances with an LP gap")
    gs.add_argument("--m", type=int, required=True)
    gs.add_argument("--n-max", type=int, required=True)
    gs.add_argument("--trials", type=int, required=True)
    gs.add_argument("--sa-rounds", type=int)
    return ap


def _load(args) -> object:
    if not args.inp:
        raise UsageError("--in is required")
    with open(args.inp, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def _params(args, inst) -> Params:
    if args.mode == "paper":
        return Params.paper(inst.m, args.epsilon, inst.n, args.budget)
    C = args.C
    if C is None:
        C = math.ceil((4 * inst.m / args.epsilon) ** 2) + 1
    return Params.desk(inst.m, args.epsilon, args.k, C, args.delta, args.budget, args.base_threshold)


def _run(args) -> dict:
    cmd = args.command
    if cmd == "gen":
        param = args.param
        if args.model == "layered" and param is not None:
            param = int(param)
        inst = generate(args.model, args.n, args.m, param, args.seed)
        return {"instance": instance_to_json(inst), "text": serialize_instance(inst)}
    if cmd == "gap-search":
        return gap_search(args.m, args.n_max, args.trials, args.seed, args.sa_rounds).to_json()
    inst = _load(args)
    if cmd == "exact":
        opt, sched = exact_makespan(inst)
        return {"opt": opt, "schedule": sched.to_json()}
    if cmd == "list":
        sched = list_schedule(inst)
        acct = busy_accounting(inst, sched)
        load, chain = lower_bounds(inst)
        return {
            "makespan": sched.makespan,
            "schedule": sched.to_json(),
            "lower_bounds": {"load": load, "chain": chain},
            "busy": acct.busy,
            "idle": acct.idle,
        }
    if cmd == "lp":
        if args.T is None:
            return {"lp_min": lp_min_makespan(inst)}
        res = lp_feasible_at(inst, args.T)
        out: dict = {"T": args.T, "feasible": bool(res)}
        if res:
            out["point"] = res.point.to_json()
            _, idx = build_time_indexed_lp(inst, args.T)
            try:
                out["integral_schedule"] = decode_schedule(res.point, idx).to_json()
            except ValueError:
                pass
        return out
    if cmd == "sa":
        if args.T is None:
            return {"rounds": args.rounds, "sa_min": sa_min_makespan(inst, args.rounds, args.cap)}
        res = solve_sa(inst, args.T, args.rounds, args.cap)
        out = {"rounds": args.rounds, "T": args.T, "feasible": bool(res)}
        if res:
            out["solution"] = res.point.to_json()
        return out
    if cmd == "qptas":
        params = _params(args, inst)
        return run_qptas(inst, params, args.T, args.source, args.seed).to_json()
    if cmd == "compare":
        try:
            params, err = _params(args, inst), None
        except ValueError as exc:
            params, err = None, str(exc)
        return compare_row(inst, params, err, args.seed)
    raise UsageError(f"unknown command {cmd}")


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv: Sequence[str] | None = None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    try:
        body = _run(args)
        code = 0
    except UsageError as exc:
        ap.error(str(exc))
    except (InstanceError, OracleTooLarge, LiftTooLarge, BudgetExhausted, ConditioningError, ValueError, OSError) as exc:
        body = {"error": str(exc), "kind": type(exc).__name__}
        if isinstance(exc, InstanceError) and exc.line is not None:
            body["line"] = exc.line
        code = 1
    _emit({"schema": SCHEMA, "command": args.command, **body}, args.out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
