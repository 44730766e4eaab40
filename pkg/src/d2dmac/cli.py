"""Command line entry point: sweeps, golden checks, LP/fixture export, radius tables, exact solves."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ConfigError, ScenarioConfig, load_config
from .engine import FrameConfig, Protocol, build_scenario, run_simulation, traffic_seed
from .model import Schedule, validate_schedule
from .optimal import build_milp, export_lp, solve_exact
from .pathsel import Beta, PathChoice, select_all
from .radio import MsTable, RadioParams, interference_radius
from .sched import SchedulingInstance, d2dmac_schedule, fdmac_e_schedule
from .topology import builtin_fixture, dumps_fixture, load_fixture
from .traffic import traffic_for_load

RESULT_COLUMNS = ["protocol", "beta", "load", "traffic_mode", "wn_count", "seed", "avg_delay_slots",
                  "network_throughput", "flow_delay_bw", "flow_delay_in", "flow_tp_bw", "flow_tp_in"]
METRIC_COLUMNS = RESULT_COLUMNS[6:]
DATA_DIR = Path(__file__).parent / "data"


# --- sweep ------------------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    protocol: int       # index into config.protocols
    load: float
    wn_count: int
    seed: int


def sweep_cells(cfg: ScenarioConfig) -> list[Cell]:
    """Cells in canonical order: protocol, load, WN count, seed."""
    return [Cell(p, load, wn, seed)
            for p in range(len(cfg.protocols))
            for load in cfg.traffic.loads
            for wn in cfg.deployment.wn_counts
            for seed in cfg.seeds]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def run_cell(cfg: ScenarioConfig, cell: Cell) -> dict:
    pcfg = cfg.protocols[cell.protocol]
    policy = cfg.rate_policy.build()
    deployment, flows = build_scenario(cfg.deployment.params(cell.wn_count), policy, cell.seed)
    t = cfg.traffic
    traffic = traffic_for_load(t.mode, cell.load, max(len(flows), 1), ratio=t.ipp_ratio, p1=t.ipp_p1,
                               packet_bits=t.packet_bits, reference_rate=t.reference_rate,
                               burst_max=t.burst_max)
    feasible = cfg.radio.feasibility(deployment.positions()) if cfg.radio.sinr_mode != "always_pass" else None
    n = len(deployment.nodes)
    hook = None
    if cfg.validate_schedules:
        def hook(schedule: Schedule, pending):
            report = validate_schedule(schedule, pending, n)
            if not report.ok:
                raise RuntimeError(f"invalid schedule in cell {cell}: {report}")
    result = run_simulation(deployment, flows, pcfg.build(cell.seed), traffic, cfg.frame.build(),
                            traffic_seed(cell.seed), feasible=feasible, on_schedule=hook)
    if cfg.output.packet_log_dir:
        out = Path(cfg.output.packet_log_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = f"{pcfg.name}_b{pcfg.beta:g}_l{cell.load:g}_w{cell.wn_count}_s{cell.seed}.csv"
        write_packet_log(out / name, result.log)
    r = result.report
    return {"protocol": pcfg.name, "beta": pcfg.beta, "load": cell.load, "traffic_mode": t.mode,
            "wn_count": cell.wn_count, "seed": cell.seed, "avg_delay_slots": r.avg_delay,
            "network_throughput": r.network_throughput, "flow_delay_bw": r.flow_delay_bw,
            "flow_delay_in": r.flow_delay_in, "flow_tp_bw": r.flow_throughput_bw,
            "flow_tp_in": r.flow_throughput_in}


def write_packet_log(path, log) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["flow", "arrival_slot", "delivery_slot", "discarded"])
        for rec in log.records():
            w.writerow([rec.flow, rec.arrival_slot, "" if rec.delivery_slot is None else rec.delivery_slot,
                        int(rec.discarded)])


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(cfg: ScenarioConfig, workers: int | None = None) -> list[dict]:
    cells = sweep_cells(cfg)
    workers = cfg.workers if workers is None else workers
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(cfg, c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so rows come back in canonical order
        return list(pool.map(_run_cell_args, [(cfg, c) for c in cells]))


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def summarize(rows: list[dict]) -> str:
    """Per-cell means across seeds; absent values are skipped."""
    keys, groups = [], {}
    for r in rows:
        k = (r["protocol"], r["beta"], r["load"], r["traffic_mode"], r["wn_count"])
        if k not in groups:
            keys.append(k)
            groups[k] = []
        groups[k].append(r)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS[:5] + ["seeds"] + METRIC_COLUMNS)
    for k in keys:
        out = list(k) + [len(groups[k])]
        for c in METRIC_COLUMNS:
            vals = [g[c] for g in groups[k] if g[c] is not None]
            out.append(float(np.mean(vals)) if vals else None)
        w.writerow([_fmt(v) for v in out])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    overrides = {}
    for item in args.set or []:
        key, _, value = item.partition("=")
        try:
            overrides[key] = json.loads(value)
        except json.JSONDecodeError:
            overrides[key] = value
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return 2
    rows = run_sweep(cfg, args.workers)
    Path(cfg.output.results_csv).write_text(rows_to_csv(rows))
    Path(cfg.output.summary_csv).write_text(summarize(rows))
    print(f"{len(rows)} runs -> {cfg.output.results_csv}, {cfg.output.summary_csv}")
    return 0


# --- golden checks ----------------------------------------------------------------------

Check = tuple[str, bool, str]

SEC3_CHOICES = {1: PathChoice.ORDINARY, 2: PathChoice.DIRECT, 3: PathChoice.DIRECT, 4: PathChoice.DIRECT}
# (tx, rx) pairs per stage, each stage lasting 3 slots
SEC3_STAGES = [{(4, 2), (5, 6), (7, 1)}, {(1, 5), (2, 3)}, {(3, 5)}]


def _sec3():
    return load_fixture(builtin_fixture("sec3_example"))


def golden_sec3() -> list[Check]:
    d, flows = _sec3()
    checks = []
    choices = select_all(flows, Beta(2.0))
    checks.append(("path choices (beta=2)", choices == SEC3_CHOICES,
                   ", ".join(f"{k}:{v.value}" for k, v in sorted(choices.items()))))
    n = len(d.nodes)
    sched = d2dmac_schedule(SchedulingInstance.build(flows, choices, n=n))
    layout = [{(sl.link.tx, sl.link.rx) for sl in st.links} for st in sched.stages]
    ok = layout == SEC3_STAGES and [st.slots for st in sched.stages] == [3, 3, 3]
    labels = {x.id: x.label for x in d.nodes}
    checks.append(("d2dmac schedule = 3 stages x 3 slots", ok, sched.dump(labels).replace("\n", "; ")))
    report = validate_schedule(sched, flows, n)
    checks.append(("d2dmac schedule valid", report.ok, str(report) or "ok"))
    exact = solve_exact(flows, n=n)
    checks.append(("exact optimum = 9", exact.total_slots == 9 and exact.optimal, f"got {exact.total_slots}"))
    checks.append(("exact path choices", exact.choices == SEC3_CHOICES,
                   ", ".join(f"{k}:{v.value}" for k, v in sorted(exact.choices.items()))))
    # one frame without overhead carries all 26 packets inside the 9-slot schedule
    arrivals = [np.zeros(f.demand, dtype=np.int64) for f in sorted(flows, key=lambda f: f.id)]
    frame = FrameConfig(overhead_slots=0, sim_length=9 * 5e-6)
    res = run_simulation(d, flows, Protocol.named("d2dmac"), None, frame, 0, arrivals=arrivals)
    delivered = sum(int((v > 0).sum()) for v in res.log.delivery.values())
    latest = max(int(v.max()) for v in res.log.delivery.values())
    checks.append(("engine delivers 26 packets within 9 slots", delivered == 26 and latest <= 9,
                   f"delivered {delivered}, last at slot {latest}"))
    lp = export_lp(build_milp(flows, name="sec3_example"))
    golden = (DATA_DIR / "sec3_example.lp").read_text()
    checks.append(("LP export matches golden file", lp == golden, f"{len(lp)} vs {len(golden)} bytes"))
    return checks


def golden_fdmac_e() -> list[Check]:
    d, flows = _sec3()
    n = len(d.nodes)
    inst = SchedulingInstance.build(flows, select_all(flows, Beta(2.0)), n=n, aps=[a.id for a in d.aps])
    sched = fdmac_e_schedule(inst)
    report = validate_schedule(sched, flows, n)
    return [("fdmac-e total = 11", sched.total_slots == 11, f"got {sched.total_slots}"),
            ("fdmac-e schedule valid", report.ok, str(report) or "ok")]


def radius_table(link_len=2.0, rate=3, max_f=10, p: RadioParams | None = None, ms: MsTable | None = None):
    p = p or RadioParams()
    ms = ms or MsTable()
    return [(f, interference_radius(link_len, rate, f, p, ms)) for f in range(1, max_f + 1)]


def _increasing(xs):
    return all(a < b for a, b in zip(xs, xs[1:]))


def golden_radius() -> list[Check]:
    base = RadioParams()
    ms = MsTable.from_db({1: 5.0, 2: 8.0, 3: 10.0})
    r = lambda F=4, rate=3, l=2.0, **kw: interference_radius(l, rate, F, RadioParams(**kw) if kw else base, ms)
    by_f = [r(F=f) for f in range(1, 11)]
    by_ms = [r(rate=c) for c in (1, 2, 3)]
    by_gamma = [r(gamma=g) for g in (2.0, 2.5, 3.0, 3.5, 4.0)]
    by_pt = [r(tx_power_mw=x) for x in (0.05, 0.1, 0.2, 0.5, 1.0)]
    by_l = [r(l=x) for x in (1.0, 1.5, 2.0, 2.5, 3.0)]
    doubling = max(abs(r(F=f * 4) / (2 * r(F=f)) - 1) for f in range(1, 11))
    return [("radius increasing in F", _increasing(by_f), f"{by_f[0]:.3f}..{by_f[-1]:.3f} m"),
            ("radius increasing in MS", _increasing(by_ms), " ".join(f"{x:.3f}" for x in by_ms)),
            ("radius decreasing in gamma", _increasing(by_gamma[::-1]), " ".join(f"{x:.3f}" for x in by_gamma)),
            ("radius decreasing in Pt", _increasing(by_pt[::-1]), " ".join(f"{x:.4f}" for x in by_pt)),
            ("radius increasing in link length", _increasing(by_l), " ".join(f"{x:.3f}" for x in by_l)),
            ("radius(4F) = 2 radius(F) at gamma=2", doubling < 1e-9, f"max rel err {doubling:.2e}")]


GOLDEN: dict[str, Callable[[], list[Check]]] = {
    "sec3-example": golden_sec3,
    "fdmac-e-example": golden_fdmac_e,
    "radius-sweep": golden_radius,
}


def cmd_golden(args) -> int:
    names = list(GOLDEN) if args.name == "all" else [args.name]
    failed = 0
    for name in names:
        for label, ok, detail in GOLDEN[name]():
            failed += not ok
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {label} ({detail})")
    return 1 if failed else 0


# --- export / radius / optimal ---------------------------------------------------------

def _resolve_fixture(ref: str):
    path = Path(ref)
    if not path.exists():
        path = builtin_fixture(ref.replace("-", "_"))
    return load_fixture(path)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_export(args) -> int:
    if args.fixture == "empty":
        if args.format != "lp":
            print("the empty instance only exports as lp", file=sys.stderr)
            return 2
        _emit(export_lp(build_milp([], name="empty")), args.output)
        return 0
    d, flows = _resolve_fixture(args.fixture)
    if args.format == "lp":
        _emit(export_lp(build_milp(flows, K=args.stages, name=d.name.replace("-", "_") or "p1")), args.output)
    else:
        _emit(dumps_fixture(d, flows), args.output)
    return 0


def cmd_radius(args) -> int:
    p = RadioParams(tx_power_mw=args.tx_power_mw, gamma=args.gamma)
    ms = MsTable.from_db({args.rate: args.ms_db}) if args.ms_db is not None else MsTable()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["F", "radius_m"])
    for f, rad in radius_table(args.link_length, args.rate, args.max_f, p, ms):
        w.writerow([f, "inf" if math.isinf(rad) else f"{rad:.6f}"])
    _emit(buf.getvalue(), args.output)
    return 0


def cmd_optimal(args) -> int:
    d, flows = _resolve_fixture(args.instance)
    sol = solve_exact(flows, n=len(d.nodes))
    labels = {x.id: x.label for x in d.nodes}
    print(f"optimum={sol.total_slots} proven={'yes' if sol.optimal else 'no'}")
    print("paths: " + ", ".join(f"{k}:{v.value}" for k, v in sorted(sol.choices.items())))
    print(sol.schedule.dump(labels))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="d2dmac", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run protocol x load x WN count x seed cells")
    s.add_argument("--config", help="JSON scenario config (defaults if omitted)")
    s.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. frame.sim_length=0.1 (value parsed as JSON)")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    g = sub.add_parser("golden", help="check the built-in worked examples")
    g.add_argument("name", choices=[*GOLDEN, "all"], nargs="?", default="all")
    g.set_defaults(func=cmd_golden)

    e = sub.add_parser("export", help="export an instance as LP text or a canonical fixture")
    e.add_argument("--fixture", default="sec3-example", help="built-in name, fixture path, or 'empty'")
    e.add_argument("--format", choices=["lp", "fixture"], default="lp")
    e.add_argument("--stages", type=int, default=None, help="stage count K (default: total hop count)")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_export)

    r = sub.add_parser("radius", help="interference radius versus interferer count, as CSV")
    r.add_argument("--link-length", type=float, default=2.0)
    r.add_argument("--rate", type=int, default=3, choices=[1, 2, 3])
    r.add_argument("--ms-db", type=float, default=None, help="override the MS threshold of --rate")
    r.add_argument("--gamma", type=float, default=2.0)
    r.add_argument("--tx-power-mw", type=float, default=0.1)
    r.add_argument("--max-f", type=int, default=10)
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_radius)

    o = sub.add_parser("optimal", help="exact minimum-slot schedule of a small instance")
    o.add_argument("--instance", default="sec3-example")
    o.set_defaults(func=cmd_optimal)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
