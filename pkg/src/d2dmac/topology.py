"""Deployments, WN-to-AP association, backhaul routing and rate assignment."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .model import Flow, Link, LinkKind, Node, NodeKind


class ConfigurationError(ValueError):
    pass


class RoutingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RatePolicy:
    """Distance-to-rate mapping in packets per slot (1 packet/slot = 2 Gbps)."""

    breakpoints: tuple[tuple[float, int], ...] = ((10.0, 3), (25.0, 2))
    far_rate: int = 1
    backhaul_rate: int = 3

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple((float(d), int(r)) for d, r in self.breakpoints))
        dists = [d for d, _ in self.breakpoints]
        rates = [r for _, r in self.breakpoints] + [self.far_rate]
        if dists != sorted(dists):
            raise ConfigurationError("rate breakpoints must be sorted by distance")
        if any(a < b for a, b in zip(rates, rates[1:])):
            raise ConfigurationError("rates must not increase with distance")

    def rate_for(self, distance: float) -> int:
        for limit, rate in self.breakpoints:
            if distance <= limit:
                return rate
        return self.far_rate


@dataclass(frozen=True)
class Deployment:
    area_side: float
    nodes: tuple[Node, ...]
    backhaul_edges: tuple[tuple[int, int], ...]
    gateway: int
    name: str = ""
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "area_side", float(self.area_side))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "backhaul_edges",
                           tuple(sorted((min(a, b), max(a, b)) for a, b in self.backhaul_edges)))
        object.__setattr__(self, "_index", {n.id: n for n in self.nodes})
        gateways = [n for n in self.nodes if n.kind is NodeKind.GATEWAY]
        if len(gateways) != 1 or gateways[0].id != self.gateway:
            raise ConfigurationError("deployment needs exactly one gateway node")

    def node(self, node_id: int) -> Node:
        return self._index[node_id]

    @property
    def aps(self) -> list[Node]:
        return [n for n in self.nodes if n.is_ap]

    @property
    def wns(self) -> list[Node]:
        return [n for n in self.nodes if n.kind is NodeKind.WN]

    def positions(self) -> dict[int, tuple[float, float]]:
        return {n.id: n.position for n in self.nodes}

    def distance(self, a: int, b: int) -> float:
        (x1, y1), (x2, y2) = self.node(a).position, self.node(b).position
        return math.hypot(x1 - x2, y1 - y2)

    def neighbors(self, ap: int) -> list[int]:
        out = [b for a, b in self.backhaul_edges if a == ap] + [a for a, b in self.backhaul_edges if b == ap]
        return sorted(out)

    def serving_ap(self, node_id: int) -> int:
        node = self.node(node_id)
        if node.is_ap:
            return node.id
        if node.associated_ap is None:
            raise ConfigurationError(f"WN {node_id} is not associated")
        return node.associated_ap


def _grid_edges(side: int, ap_ids: list[int]) -> list[tuple[int, int]]:
    edges = []
    for r in range(side):
        for c in range(side):
            i = r * side + c
            if c + 1 < side:
                edges.append((ap_ids[i], ap_ids[i + 1]))
            if r + 1 < side:
                edges.append((ap_ids[i], ap_ids[i + side]))
    return edges


def generate_deployment(ap_grid: int, wn_count: int, area_side: float, seed: int,
                        backhaul: str = "grid") -> Deployment:
    """APs on a regular grid (cell centres), WNs uniform in the square, each WN on its nearest AP.

    The AP nearest the area centre is the gateway. ``backhaul`` is ``grid``
    (4-neighbour) or ``star`` (every AP wired wirelessly to the gateway).
    """
    side = math.isqrt(ap_grid)
    if ap_grid < 1 or side * side != ap_grid:
        raise ConfigurationError(f"ap_grid must be a positive perfect square, got {ap_grid}")
    if wn_count < 0:
        raise ConfigurationError("wn_count must be >= 0")
    pitch = area_side / side
    centre = area_side / 2
    coords = [((c + 0.5) * pitch, (r + 0.5) * pitch) for r in range(side) for c in range(side)]
    gw = min(range(ap_grid), key=lambda i: (math.hypot(coords[i][0] - centre, coords[i][1] - centre), i))
    nodes = [Node(i, NodeKind.GATEWAY if i == gw else NodeKind.AP, coords[i]) for i in range(ap_grid)]

    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, area_side, size=(wn_count, 2))
    nodes += [Node(ap_grid + k, NodeKind.WN, (float(x), float(y))) for k, (x, y) in enumerate(xy)]

    ap_ids = list(range(ap_grid))
    if backhaul == "grid":
        edges = _grid_edges(side, ap_ids)
    elif backhaul == "star":
        edges = [(gw, a) for a in ap_ids if a != gw]
    else:
        raise ConfigurationError(f"unknown backhaul topology {backhaul!r}")
    return associate(Deployment(area_side, tuple(nodes), tuple(edges), gw))


def associate(d: Deployment) -> Deployment:
    """Attach every WN to its nearest AP (lowest AP id on ties)."""
    aps = sorted(d.aps, key=lambda n: n.id)
    if not aps:
        raise ConfigurationError("no AP to associate with")
    nodes = []
    for n in d.nodes:
        if n.kind is NodeKind.WN:
            best = min(aps, key=lambda a: (math.hypot(a.position[0] - n.position[0],
                                                      a.position[1] - n.position[1]), a.id))
            n = replace(n, associated_ap=best.id)
        nodes.append(n)
    return replace(d, nodes=tuple(nodes))


def backhaul_route(d: Deployment, src_ap: int, dst_ap: int, rate: int = 3) -> list[Link]:
    """Minimum-hop backhaul path; ties go to the lexicographically smallest node sequence."""
    for ap in (src_ap, dst_ap):
        if not d.node(ap).is_ap:
            raise RoutingError(f"node {ap} is not an AP")
    if src_ap == dst_ap:
        return []
    # hop distance to the destination, then walk greedily from the source
    dist = {dst_ap: 0}
    queue = deque([dst_ap])
    while queue:
        u = queue.popleft()
        for v in d.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    if src_ap not in dist:
        raise RoutingError(f"AP {dst_ap} unreachable from AP {src_ap}")
    path, u = [], src_ap
    while u != dst_ap:
        v = min(w for w in d.neighbors(u) if dist.get(w) == dist[u] - 1)
        path.append(Link(u, v, rate, LinkKind.BACKHAUL))
        u = v
    return path


def build_flow(d: Deployment, policy: RatePolicy, src: int, dst: int,
               flow_id: int = 0, demand: int = 0) -> Flow:
    """Assemble a flow's ordinary path (access up, backhaul, access down) and its direct link.

    A one-hop ordinary path coincides with the direct link, so it is dropped
    and the flow keeps the direct link only.
    """
    if src == dst:
        raise ValueError("flow endpoints must differ")
    src_ap, dst_ap = d.serving_ap(src), d.serving_ap(dst)
    path: list[Link] = []
    if not d.node(src).is_ap:
        path.append(Link(src, src_ap, policy.rate_for(d.distance(src, src_ap)), LinkKind.ACCESS))
    path += backhaul_route(d, src_ap, dst_ap, policy.backhaul_rate)
    if not d.node(dst).is_ap:
        path.append(Link(dst_ap, dst, policy.rate_for(d.distance(dst_ap, dst)), LinkKind.ACCESS))

    if len(path) == 1:
        return Flow(flow_id, src, dst, (), path[0], demand)
    direct_kind = LinkKind.BACKHAUL if d.node(src).is_ap and d.node(dst).is_ap else LinkKind.DIRECT
    direct = Link(src, dst, policy.rate_for(d.distance(src, dst)), direct_kind)
    return Flow(flow_id, src, dst, tuple(path), direct, demand)


# --- fixtures ---------------------------------------------------------------

def _link_to_json(l: Link) -> list:
    return [l.tx, l.rx, l.rate, l.kind.value]


def _link_from_json(v) -> Link:
    tx, rx, rate = v[:3]
    kind = LinkKind(v[3]) if len(v) > 3 else LinkKind.ACCESS
    return Link(int(tx), int(rx), int(rate), kind)


def fixture_to_dict(d: Deployment, flows: Iterable[Flow]) -> dict:
    nodes = []
    for n in d.nodes:
        entry = {"id": n.id, "kind": n.kind.value, "position": list(n.position)}
        if n.name is not None:
            entry["name"] = n.name
        if n.associated_ap is not None:
            entry["associated_ap"] = n.associated_ap
        nodes.append(entry)
    out_flows = []
    for f in flows:
        entry = {"id": f.id, "src": f.src, "dst": f.dst, "demand": f.demand,
                 "ordinary": [_link_to_json(l) for l in f.ordinary_path]}
        if f.direct_link is not None:
            entry["direct"] = _link_to_json(f.direct_link)
        out_flows.append(entry)
    return {"name": d.name, "area_side": d.area_side, "gateway": d.gateway,
            "nodes": nodes, "backhaul_edges": [list(e) for e in d.backhaul_edges],
            "flows": out_flows}


def fixture_from_dict(data: dict) -> tuple[Deployment, list[Flow]]:
    nodes = tuple(Node(int(n["id"]), NodeKind(n["kind"]), tuple(float(c) for c in n["position"]),
                       n.get("associated_ap"), n.get("name"))
                  for n in data["nodes"])
    d = Deployment(float(data["area_side"]), nodes,
                   tuple(tuple(e) for e in data.get("backhaul_edges", [])),
                   int(data["gateway"]), data.get("name", ""))
    for n in d.wns:
        if n.associated_ap is None or not d.node(n.associated_ap).is_ap:
            raise ConfigurationError(f"WN {n.id} must reference an AP in associated_ap")
    flows = []
    for f in data.get("flows", []):
        direct = _link_from_json(f["direct"]) if f.get("direct") is not None else None
        ordinary = tuple(_link_from_json(l) for l in f.get("ordinary", []))
        flows.append(Flow(int(f["id"]), int(f["src"]), int(f["dst"]), ordinary, direct, int(f.get("demand", 0))))
    return d, flows


def load_fixture(path) -> tuple[Deployment, list[Flow]]:
    return fixture_from_dict(json.loads(Path(path).read_text()))


def save_fixture(path, d: Deployment, flows: Iterable[Flow]) -> None:
    Path(path).write_text(dumps_fixture(d, flows))


def dumps_fixture(d: Deployment, flows: Iterable[Flow]) -> str:
    return json.dumps(fixture_to_dict(d, flows), indent=1, sort_keys=True) + "\n"


def builtin_fixture(name: str) -> Path:
    path = Path(__file__).parent / "data" / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(f"no built-in fixture named {name!r}")
    return path
