"""Frame-based simulation: poll queues, choose paths, schedule, then play the stages out.

Packets of a flow move in FIFO order. Because each frame's schedule carries
the whole polled demand end to end, no packet is left mid-path between frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .model import Flow, Schedule
from .optimal import InstanceTooLarge, Limits, solve_exact
from .pathsel import AlwaysOrdinary, Beta, PathPolicy, RandomPerFlow, select_all
from .sched import SchedulingInstance, d2dmac_schedule, fdmac_e_schedule
from .topology import Deployment, RatePolicy, build_flow, generate_deployment
from .traffic import TrafficSpec, generate_arrivals

# per-frame budget for the exact scheduler; it falls back to the best schedule found
OPTIMAL_LIMITS = Limits(max_flows=10, max_total_hops=40, time_budget=2.0)


@dataclass(frozen=True)
class FrameConfig:
    slot_seconds: float = 5e-6
    overhead_slots: int = 3
    delay_threshold: int = 10_000
    sim_length: float = 0.5

    def __post_init__(self):
        if self.slot_seconds <= 0 or self.overhead_slots < 0 or self.delay_threshold < 0 or self.sim_length < 0:
            raise ValueError("frame parameters must be non-negative (slot length positive)")

    @property
    def horizon(self) -> int:
        return int(round(self.sim_length / self.slot_seconds))


@dataclass(frozen=True)
class Protocol:
    name: str
    policy: PathPolicy
    scheduler: str = "d2dmac"     # d2dmac | fdmac_e | optimal

    @classmethod
    def named(cls, name: str, beta: float = 2.0, seed: int = 0) -> Protocol:
        if name == "d2dmac":
            return cls(name, Beta(beta))
        if name == "odmac":
            return cls(name, AlwaysOrdinary())
        if name == "rpdmac":
            return cls(name, RandomPerFlow(seed))
        if name == "fdmac_e":
            return cls(name, Beta(2.0), "fdmac_e")
        if name == "optimal":
            return cls(name, Beta(beta), "optimal")
        raise ValueError(f"unknown protocol {name!r}")


@dataclass(frozen=True)
class PacketRecord:
    flow: int
    arrival_slot: int
    delivery_slot: int | None
    discarded: bool


@dataclass
class PacketLog:
    """Per-flow packet arrays; ``delivery`` is -1 while undelivered."""

    arrival: dict[int, np.ndarray] = field(default_factory=dict)
    delivery: dict[int, np.ndarray] = field(default_factory=dict)
    discarded: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord]) -> PacketLog:
        by_flow: dict[int, list[PacketRecord]] = {}
        for r in records:
            by_flow.setdefault(r.flow, []).append(r)
        out = cls()
        for fid, rs in by_flow.items():
            out.arrival[fid] = np.array([r.arrival_slot for r in rs], dtype=np.int64)
            out.delivery[fid] = np.array([-1 if r.delivery_slot is None else r.delivery_slot for r in rs],
                                         dtype=np.int64)
            out.discarded[fid] = np.array([r.discarded for r in rs], dtype=bool)
        return out

    def records(self) -> list[PacketRecord]:
        out = []
        for fid in sorted(self.arrival):
            for a, d, x in zip(self.arrival[fid], self.delivery[fid], self.discarded[fid]):
                out.append(PacketRecord(fid, int(a), None if d < 0 else int(d), bool(x)))
        return out


@dataclass
class MetricsReport:
    avg_delay: float | None
    network_throughput: int
    flow_delay_bw: float | None
    flow_delay_in: float | None
    flow_throughput_bw: float | None
    flow_throughput_in: float | None
    arrivals: int = 0
    delivered: int = 0
    discarded: int = 0
    queued: int = 0


def _mean(total, count):
    return total / count if count else None


def compute_metrics(log: PacketLog | Iterable[PacketRecord], flows: Sequence[Flow], threshold: int,
                    gateway: int | None = None) -> MetricsReport:
    """Delay is averaged over every delivered packet; throughput counts deliveries within ``threshold``.

    Flows touching ``gateway`` form the Internet class, the rest are WN-to-WN.
    """
    if not isinstance(log, PacketLog):
        log = PacketLog.from_records(log)
    totals = {"bw": [0, 0, 0], "in": [0, 0, 0]}    # delay sum, delivered, successful
    n_class = {"bw": 0, "in": 0}
    arrivals = delivered = discarded = 0
    for f in flows:
        cls = "in" if gateway is not None and gateway in (f.src, f.dst) else "bw"
        n_class[cls] += 1
        if f.id not in log.arrival:
            continue
        arr, dlv = log.arrival[f.id], log.delivery[f.id]
        ok = dlv >= 0
        delays = dlv[ok] - arr[ok]
        t = totals[cls]
        t[0] += int(delays.sum())
        t[1] += int(ok.sum())
        t[2] += int((delays <= threshold).sum())
        arrivals += len(arr)
        delivered += int(ok.sum())
        discarded += int(log.discarded[f.id].sum())
    bw, inet = totals["bw"], totals["in"]
    return MetricsReport(
        avg_delay=_mean(bw[0] + inet[0], bw[1] + inet[1]),
        network_throughput=bw[2] + inet[2],
        flow_delay_bw=_mean(bw[0], bw[1]),
        flow_delay_in=_mean(inet[0], inet[1]),
        flow_throughput_bw=_mean(bw[2], n_class["bw"]),
        flow_throughput_in=_mean(inet[2], n_class["in"]),
        arrivals=arrivals, delivered=delivered, discarded=discarded,
        queued=arrivals - delivered - discarded,
    )


@dataclass
class SimResult:
    report: MetricsReport
    log: PacketLog
    frames: int
    schedules: int


def _schedule_frame(protocol: Protocol, flows, n, aps, feasible, rng):
    choices = select_all(flows, protocol.policy, rng)
    if protocol.scheduler == "optimal":
        try:
            return solve_exact(flows, n=n, feasible=feasible, limits=OPTIMAL_LIMITS).schedule
        except InstanceTooLarge:
            pass  # frame too big for the exact search: use the heuristic
    inst = SchedulingInstance(tuple(flows), choices, n, feasible, aps)
    if protocol.scheduler == "fdmac_e":
        return fdmac_e_schedule(inst)
    return d2dmac_schedule(inst)


def run_simulation(deployment: Deployment, flows: Sequence[Flow], protocol: Protocol,
                   traffic: TrafficSpec | None, frame: FrameConfig, seed: int, *,
                   arrivals: Sequence[np.ndarray] | None = None, feasible=None,
                   on_schedule: Callable[[Schedule, list[Flow]], None] | None = None) -> SimResult:
    """Run one scenario for ``frame.sim_length`` seconds.

    ``arrivals`` (per-flow sorted slot arrays, aligned with ``flows``) overrides
    the traffic generator. ``on_schedule`` sees every frame's schedule together
    with the demand-stamped flows it was computed for.
    """
    flows = sorted(flows, key=lambda f: f.id)
    horizon = frame.horizon
    if arrivals is None:
        arrivals = generate_arrivals(traffic, horizon, frame.slot_seconds, seed) if flows else []
    arr = {f.id: np.asarray(a, dtype=np.int64) for f, a in zip(flows, arrivals)}
    dlv = {fid: np.full(len(a), -1, dtype=np.int64) for fid, a in arr.items()}
    disc = {fid: np.zeros(len(a), dtype=bool) for fid, a in arr.items()}
    head = {fid: 0 for fid in arr}
    by_id = {f.id: f for f in flows}
    n = len(deployment.nodes)
    aps = frozenset(a.id for a in deployment.aps)
    frame_rng = np.random.default_rng(np.random.SeedSequence([seed, 7]))
    ov, th = frame.overhead_slots, frame.delay_threshold

    clock, frames, schedules = 0, 0, 0
    while clock < horizon and flows:
        frames += 1
        pending = []
        for fid, a in arr.items():
            h = head[fid]
            upto = int(np.searchsorted(a, clock, side="right"))
            # drop packets already older than the threshold
            stale = int(np.searchsorted(a, clock - th, side="left"))
            if stale > h:
                disc[fid][h:stale] = True
                h = head[fid] = stale
            if upto > h:
                pending.append(by_id[fid].with_demand(upto - h))
        if not pending:
            nxt = [a[head[fid]] for fid, a in arr.items() if head[fid] < len(a)]
            if not nxt:
                break
            gap = max(int(min(nxt)) - clock, 1)
            clock += gap if ov == 0 else ov * (-(-gap // ov))
            continue

        schedule = _schedule_frame(protocol, pending, n, aps, feasible, frame_rng)
        schedules += 1
        if on_schedule is not None:
            on_schedule(schedule, pending)
        demand = {f.id: f.demand for f in pending}
        t = clock + ov
        for stage in schedule.stages:
            for sl in stage.links:
                f = by_id[sl.flow]
                final = sl.hop is None or sl.hop == len(f.ordinary_path) - 1
                if not final:
                    continue
                d = demand[sl.flow]
                h = head[sl.flow]
                stamps = t + np.arange(d, dtype=np.int64) // sl.link.rate + 1
                # deliveries after the horizon are not observed
                stamps[stamps > horizon] = -1
                dlv[sl.flow][h:h + d] = stamps
            t += stage.slots
        for fid, d in demand.items():
            head[fid] += d
        clock = t
    packets = PacketLog(arr, dlv, disc)
    return SimResult(compute_metrics(packets, flows, th, deployment.gateway), packets, frames, schedules)


# --- scenario construction ------------------------------------------------------------

def _subseed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def make_flows(d: Deployment, policy: RatePolicy, count: int, internet_fraction: float, seed: int) -> list[Flow]:
    """``count`` flows: a share of Internet flows (random WN, random direction), the rest random WN pairs."""
    wns = [n.id for n in d.wns]
    rng = np.random.default_rng(seed)
    n_inet = int(round(count * internet_fraction))
    flows = []
    for k in range(count):
        if k < n_inet or len(wns) < 2:
            if not wns:
                break
            w = int(rng.choice(wns))
            src, dst = (w, d.gateway) if rng.random() < 0.5 else (d.gateway, w)
        else:
            src, dst = (int(x) for x in rng.choice(wns, size=2, replace=False))
        flows.append(build_flow(d, policy, src, dst, flow_id=k + 1))
    return flows


@dataclass(frozen=True)
class ScenarioParams:
    ap_grid: int = 9
    wn_count: int = 30
    area_side: float = 50.0
    backhaul: str = "grid"
    flow_count: int | None = None        # default: one flow per WN
    internet_fraction: float = 0.5


def build_scenario(params: ScenarioParams, policy: RatePolicy, seed: int) -> tuple[Deployment, list[Flow]]:
    d = generate_deployment(params.ap_grid, params.wn_count, params.area_side, _subseed(seed, 1), params.backhaul)
    count = params.wn_count if params.flow_count is None else params.flow_count
    flows = make_flows(d, policy, count, params.internet_fraction, _subseed(seed, 2))
    return d, flows


def traffic_seed(seed: int) -> int:
    return _subseed(seed, 3)
