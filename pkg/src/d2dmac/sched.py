"""Greedy concurrent schedulers: the joint access/backhaul scheduler and the FDMAC-E baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .model import Flow, Link, Schedule, ScheduledLink, Stage, hop_weight, node_count, path_links
from .pathsel import PathChoice

Feasibility = Callable[[Sequence[Link]], bool]


class SchedulingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SchedulingInstance:
    """Flows with chosen paths. Flows without demand are ignored.

    ``feasible`` is the per-stage SINR oracle (None: every node-disjoint stage
    passes). ``aps`` is only needed by the FDMAC-E phase split.
    """

    flows: tuple[Flow, ...]
    choices: Mapping[int, PathChoice]
    n: int
    feasible: Feasibility | None = None
    aps: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(sorted(self.flows, key=lambda f: f.id)))

    @classmethod
    def build(cls, flows, choices, n=None, feasible=None, aps=()):
        flows = tuple(flows)
        return cls(flows, dict(choices), node_count(flows) if n is None else n, feasible, frozenset(aps))

    def paths(self) -> dict[int, tuple[ScheduledLink, ...]]:
        out = {}
        for f in self.flows:
            if f.demand <= 0:
                continue
            direct = self.choices[f.id] is PathChoice.DIRECT
            hops = path_links(f, direct)
            if not hops or any(h.link.rate <= 0 for h in hops):
                raise SchedulingError(f"flow {f.id}: chosen path is blocked")
            out[f.id] = hops
        return out

    def demand(self, flow_id: int) -> int:
        return next(f.demand for f in self.flows if f.id == flow_id)


def _weights(inst: SchedulingInstance, paths) -> dict[int, list[int]]:
    demand = {f.id: f.demand for f in inst.flows}
    return {fid: [hop_weight(demand[fid], h.link.rate) for h in hops] for fid, hops in paths.items()}


def d2dmac_schedule(inst: SchedulingInstance) -> Schedule:
    """Stage-by-stage greedy over the first unscheduled hop of every path.

    Within a stage, candidate hops are tried in non-increasing weight order
    (ties: lower flow id). A hop enters if it shares no node with the stage and
    the stage still passes the SINR oracle; either way its path is done for
    this stage. A stage closes when every path has been tried or it holds
    floor(n/2) links.
    """
    paths = inst.paths()
    weights = _weights(inst, paths)
    first = {fid: 0 for fid in paths}
    remaining = sum(len(h) for h in paths.values())
    cap = inst.n // 2
    if remaining and cap < 1:
        raise SchedulingError("need at least two nodes to schedule a link")
    stages = []
    while remaining:
        # weights of first unscheduled hops do not change during a stage,
        # so the largest-weight pick reduces to one sorted sweep
        order = sorted((fid for fid in paths if first[fid] < len(paths[fid])),
                       key=lambda fid: (-weights[fid][first[fid]], fid))
        chosen: list[ScheduledLink] = []
        busy: set[int] = set()
        delta = 0
        for fid in order:
            if len(chosen) >= cap:
                break
            hop = paths[fid][first[fid]]
            if hop.link.tx in busy or hop.link.rx in busy:
                continue
            chosen.append(hop)
            if inst.feasible is not None and not inst.feasible([h.link for h in chosen]):
                chosen.pop()
                continue
            busy.update(hop.link.nodes)
            delta = max(delta, weights[fid][first[fid]])
            first[fid] += 1
            remaining -= 1
        if not chosen:
            raise SchedulingError("no pending hop can be scheduled, even alone")
        stages.append(Stage(tuple(chosen), delta))
    return Schedule(tuple(stages))


def greedy_coloring(items: Sequence[tuple[ScheduledLink, int]], n: int,
                    feasible: Feasibility | None = None) -> list[Stage]:
    """Greedy stage filling over a flat set of (link, weight) pairs with no hop ordering."""
    cap = n // 2
    pending = sorted(range(len(items)), key=lambda i: (-items[i][1], i))
    stages = []
    while pending:
        chosen, busy, delta, left = [], set(), 0, []
        for i in pending:
            sl, w = items[i]
            if len(chosen) >= cap or sl.link.tx in busy or sl.link.rx in busy:
                left.append(i)
                continue
            chosen.append(sl)
            if feasible is not None and not feasible([x.link for x in chosen]):
                chosen.pop()
                left.append(i)
                continue
            busy.update(sl.link.nodes)
            delta = max(delta, w)
        if not chosen:
            raise SchedulingError("no pending link can be scheduled, even alone")
        stages.append(Stage(tuple(chosen), delta))
        pending = left
    return stages


def fdmac_e_schedule(inst: SchedulingInstance) -> Schedule:
    """Access and backhaul scheduled separately: GC on WN-transmitted links (uplink access and
    device-to-device), serial TDMA on AP-to-AP links, then GC on AP-to-WN links."""
    paths = inst.paths()
    weights = _weights(inst, paths)
    aps = inst.aps
    up, backhaul, down = [], [], []
    for fid in sorted(paths):
        phases = []
        for j, hop in enumerate(paths[fid]):
            item = (hop, weights[fid][j])
            if hop.link.tx not in aps:
                up.append(item)
                phases.append(0)
            elif hop.link.rx in aps:
                backhaul.append(item)
                phases.append(1)
            else:
                down.append(item)
                phases.append(2)
        # GC phases ignore hop order, so a path may visit each of them at most once
        if any(b < a or (a == b and a != 1) for a, b in zip(phases, phases[1:])):
            raise SchedulingError(f"flow {fid}: path does not follow the uplink/backhaul/downlink order")
    stages = greedy_coloring(up, inst.n, inst.feasible)
    stages += [Stage((hop,), w) for hop, w in backhaul]
    stages += greedy_coloring(down, inst.n, inst.feasible)
    return Schedule(tuple(stages))


SCHEDULERS = {"d2dmac": d2dmac_schedule, "fdmac_e": fdmac_e_schedule}
