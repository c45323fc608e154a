"""Graham list scheduling and the two classical lower bounds."""

from __future__ import annotations

from dataclasses import dataclass

from .instance import Instance, longest_chain
from .oracle import Schedule

__all__ = ["list_schedule", "lower_bounds", "BusyAccounting", "busy_accounting"]


def list_schedule(inst: Instance) -> Schedule:
    """Fill each slot with available jobs, lowest id first."""
    rel = inst.closure
    slots: dict[int, int] = {}
    remaining = set(inst.jobs)
    t = 0
    while remaining:
        t += 1
        # available: every predecessor finished strictly before t
        avail = sorted(j for j in remaining if all(slots.get(p, t) < t for p in rel.predecessors(j)))
        for j in avail[: inst.m]:
            slots[j] = t
            remaining.discard(j)
    return Schedule(slots)


def lower_bounds(inst: Instance) -> tuple[int, int]:
    load = -(-inst.n // inst.m)
    chain = len(longest_chain(inst.closure, inst.jobs))
    return load, chain


@dataclass(frozen=True)
class BusyAccounting:
    busy: int
    idle: int
    load_bound: int
    chain_bound: int

    @property
    def holds(self) -> bool:
        return self.busy <= self.load_bound and self.idle <= self.chain_bound


def busy_accounting(inst: Instance, sched: Schedule) -> BusyAccounting:
    """Split the slots of ``sched`` into full (all m machines used) and the rest."""
    load, chain = lower_bounds(inst)
    counts = {t: len(js) for t, js in sched.by_slot().items()}
    busy = sum(1 for t in range(1, sched.makespan + 1) if counts.get(t, 0) == inst.m)
    return BusyAccounting(busy, sched.makespan - busy, load, chain)
