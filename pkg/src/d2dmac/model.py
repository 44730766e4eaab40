"""Core domain types: nodes, directional links, flows and stage-based schedules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class NodeKind(enum.Enum):
    AP = "ap"
    WN = "wn"
    GATEWAY = "gateway"


class LinkKind(enum.Enum):
    ACCESS = "access"
    BACKHAUL = "backhaul"
    DIRECT = "direct"


class UnavailableLinkError(ValueError):
    """Raised when a link with rate 0 is asked to carry traffic."""


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    position: tuple[float, float] = (0.0, 0.0)
    associated_ap: int | None = None
    name: str | None = None

    @property
    def is_ap(self) -> bool:
        # the gateway is an AP with a wired uplink
        return self.kind is not NodeKind.WN

    @property
    def label(self) -> str:
        return self.name if self.name is not None else f"{self.kind.value}{self.id}"


@dataclass(frozen=True)
class Link:
    """Directional link ``tx -> rx`` carrying ``rate`` packets per slot."""

    tx: int
    rx: int
    rate: int
    kind: LinkKind = LinkKind.ACCESS

    def __post_init__(self):
        if self.tx == self.rx:
            raise ValueError(f"link endpoints must differ, got {self.tx}->{self.rx}")
        if self.rate < 0:
            raise ValueError(f"negative rate {self.rate}")

    @property
    def nodes(self) -> tuple[int, int]:
        return (self.tx, self.rx)

    @property
    def available(self) -> bool:
        return self.rate > 0


@dataclass(frozen=True)
class Flow:
    """A unicast flow with an ordinary (AP-relayed) path and an optional direct link.

    An empty ordinary path means the flow can only use its direct link; its hop
    count is then 1.
    """

    id: int
    src: int
    dst: int
    ordinary_path: tuple[Link, ...] = ()
    direct_link: Link | None = None
    demand: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ordinary_path", tuple(self.ordinary_path))
        for a, b in zip(self.ordinary_path, self.ordinary_path[1:]):
            if a.rx != b.tx:
                raise ValueError(f"flow {self.id}: ordinary path is not chained at {a} -> {b}")
        if self.demand < 0:
            raise ValueError(f"flow {self.id}: negative demand")

    @property
    def hop_count(self) -> int:
        return max(1, len(self.ordinary_path))

    @property
    def has_ordinary(self) -> bool:
        return bool(self.ordinary_path) and all(h.available for h in self.ordinary_path)

    @property
    def has_direct(self) -> bool:
        return self.direct_link is not None and self.direct_link.available

    def with_demand(self, demand: int) -> Flow:
        return Flow(self.id, self.src, self.dst, self.ordinary_path, self.direct_link, demand)


@dataclass(frozen=True)
class ScheduledLink:
    """One activation inside a stage; ``hop`` is the 0-based ordinary hop, or None for the direct link."""

    flow: int
    hop: int | None
    link: Link

    @property
    def is_direct(self) -> bool:
        return self.hop is None


@dataclass(frozen=True)
class Stage:
    links: tuple[ScheduledLink, ...]
    slots: int

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        if self.slots < 0:
            raise ValueError("stage slot count must be non-negative")


@dataclass(frozen=True)
class Schedule:
    stages: tuple[Stage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def total_slots(self) -> int:
        return sum(s.slots for s in self.stages)

    def __len__(self):
        return len(self.stages)

    def dump(self, labels: Mapping[int, str] | None = None) -> str:
        """Plain-text rendering, one line per stage."""
        def name(n):
            return labels.get(n, str(n)) if labels else str(n)

        lines = []
        for k, stage in enumerate(self.stages, 1):
            parts = []
            for sl in stage.links:
                hop = "d" if sl.hop is None else str(sl.hop + 1)
                parts.append(f"f{sl.flow}/{hop}:{name(sl.link.tx)}->{name(sl.link.rx)}")
            lines.append(f"stage {k} delta={stage.slots} " + " ".join(parts))
        lines.append(f"total={self.total_slots}")
        return "\n".join(lines)


def hop_weight(demand: int, rate: int) -> int:
    """Slots needed to push ``demand`` packets over a link of ``rate`` packets/slot."""
    if rate <= 0:
        raise UnavailableLinkError("rate 0 link cannot carry traffic")
    if demand < 0:
        raise ValueError("negative demand")
    return -(-demand // rate)


def are_adjacent(a: Link, b: Link) -> bool:
    return bool({a.tx, a.rx} & {b.tx, b.rx})


def path_links(flow: Flow, direct: bool) -> tuple[ScheduledLink, ...]:
    """Scheduled-link skeleton of a flow's chosen path."""
    if direct:
        if flow.direct_link is None:
            raise UnavailableLinkError(f"flow {flow.id} has no direct link")
        return (ScheduledLink(flow.id, None, flow.direct_link),)
    return tuple(ScheduledLink(flow.id, j, l) for j, l in enumerate(flow.ordinary_path))


@dataclass
class ValidationReport:
    violations: list[tuple[str, str]] = field(default_factory=list)

    def add(self, kind: str, msg: str) -> None:
        self.violations.append((kind, msg))

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {k for k, _ in self.violations}

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(f"[{k}] {m}" for k, m in self.violations)


def validate_schedule(schedule: Schedule, flows: Iterable[Flow], n: int | None = None) -> ValidationReport:
    """Check a schedule against the structural constraints of the scheduling problem.

    Reported kinds: ``unknown`` (link not on the flow), ``demand``, ``activation``,
    ``mixed_path``, ``adjacency``, ``same_path``, ``ordering``, ``stage_size``.
    """
    report = ValidationReport()
    flows = {f.id: f for f in flows}
    # (flow, hop) -> (stage index, slots)
    placed: dict[tuple[int, int | None], list[tuple[int, int]]] = {}

    for k, stage in enumerate(schedule.stages):
        if n is not None and len(stage.links) > n // 2:
            report.add("stage_size", f"stage {k + 1} has {len(stage.links)} links > floor({n}/2)")
        for sl in stage.links:
            f = flows.get(sl.flow)
            if f is None:
                report.add("unknown", f"stage {k + 1}: flow {sl.flow} does not exist")
                continue
            expected = f.direct_link if sl.hop is None else (
                f.ordinary_path[sl.hop] if 0 <= sl.hop < len(f.ordinary_path) else None)
            if expected is None or (expected.tx, expected.rx) != (sl.link.tx, sl.link.rx):
                report.add("unknown", f"stage {k + 1}: {sl} is not a link of flow {f.id}")
                continue
            placed.setdefault((sl.flow, sl.hop), []).append((k, stage.slots))

        links = stage.links
        for x in range(len(links)):
            for y in range(x + 1, len(links)):
                a, b = links[x], links[y]
                if a.flow == b.flow:
                    report.add("same_path", f"stage {k + 1}: two hops of flow {a.flow}")
                if are_adjacent(a.link, b.link):
                    report.add("adjacency", f"stage {k + 1}: {a.link.tx}->{a.link.rx} "
                                            f"and {b.link.tx}->{b.link.rx} share a node")

    for key, where in placed.items():
        if len(where) > 1:
            report.add("activation", f"flow {key[0]} hop {key[1]} activated {len(where)} times")

    for f in flows.values():
        direct = (f.id, None) in placed
        hops = [(f.id, j) in placed for j in range(len(f.ordinary_path))]
        if f.demand == 0:
            if direct or any(hops):
                report.add("demand", f"flow {f.id} has no demand but is scheduled")
            continue
        if direct and any(hops):
            report.add("mixed_path", f"flow {f.id} uses both its direct link and ordinary hops")
        if direct:
            k, slots = placed[(f.id, None)][0]
            if slots * f.direct_link.rate < f.demand:
                report.add("demand", f"flow {f.id}: direct link carries {slots * f.direct_link.rate} < {f.demand}")
            continue
        if not f.ordinary_path or not all(hops):
            missing = [j + 1 for j, h in enumerate(hops) if not h] or ["direct"]
            report.add("demand", f"flow {f.id}: unscheduled hops {missing}")
            continue
        for j, hop in enumerate(f.ordinary_path):
            k, slots = placed[(f.id, j)][0]
            if slots * hop.rate < f.demand:
                report.add("demand", f"flow {f.id} hop {j + 1}: carries {slots * hop.rate} < {f.demand}")
            if j > 0 and placed[(f.id, j - 1)][0][0] >= k:
                report.add("ordering", f"flow {f.id}: hop {j + 1} not after hop {j}")
    return report


def node_count(flows: Sequence[Flow]) -> int:
    nodes = set()
    for f in flows:
        for l in f.ordinary_path:
            nodes.update(l.nodes)
        if f.direct_link is not None:
            nodes.update(f.direct_link.nodes)
    return len(nodes)
