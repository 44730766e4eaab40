"""Exact joint path/stage scheduling: MILP model with LP-text export, and a branch-and-bound solver.

The MILP minimises the total number of slots. Bilinear terms ``delta_k * b``
are replaced by substitution variables bounded with the bound-factor products
of ``0 <= delta_k <= delta_max`` and ``0 <= b <= 1``.
"""

from __future__ import annotations

import itertools
import math
import re
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .model import Flow, Link, Schedule, ScheduledLink, Stage, are_adjacent, hop_weight, node_count, path_links
from .pathsel import AlwaysOrdinary, Beta, PathChoice, available_choices, select_all
from .radio import BeamModel, MsTable, RadioParams
from .sched import SchedulingError, SchedulingInstance, d2dmac_schedule

# --- model ------------------------------------------------------------------------

BINARY, INTEGER, CONTINUOUS = "binary", "integer", "continuous"


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str
    rhs: float


@dataclass
class MilpModel:
    name: str = "p1"
    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)

    def add_var(self, name, kind=CONTINUOUS, lb=0.0, ub=math.inf) -> str:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name}")
        self.variables[name] = Variable(name, kind, float(lb), float(ub))
        return name

    def add(self, name, terms, sense, rhs) -> None:
        terms = tuple((v, float(c)) for v, c in terms if c != 0)
        for v, _ in terms:
            if v not in self.variables:
                raise KeyError(f"constraint {name} uses unknown variable {v}")
        self.constraints.append(Constraint(name, terms, sense, float(rhs)))

    def counts(self) -> dict[str, int]:
        out = {"variables": len(self.variables), "constraints": len(self.constraints)}
        for kind in (BINARY, INTEGER, CONTINUOUS):
            out[kind] = sum(v.kind == kind for v in self.variables.values())
        return out

    def evaluate(self, values: Mapping[str, float], tol: float = 1e-9) -> list[str]:
        """Names of constraints (and variable bounds) violated by ``values``."""
        bad = []
        for v in self.variables.values():
            x = values.get(v.name, 0.0)
            if x < v.lb - tol or x > v.ub + tol:
                bad.append(f"bound:{v.name}")
            if v.kind != CONTINUOUS and abs(x - round(x)) > tol:
                bad.append(f"integrality:{v.name}")
        for c in self.constraints:
            lhs = sum(coef * values.get(v, 0.0) for v, coef in c.terms)
            if ((c.sense == "<=" and lhs > c.rhs + tol) or (c.sense == ">=" and lhs < c.rhs - tol)
                    or (c.sense == "=" and abs(lhs - c.rhs) > tol)):
                bad.append(c.name)
        return bad

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(v, 0.0) for v, c in self.objective.items())


@dataclass(frozen=True)
class SinrContext:
    """Geometry and link budget for the SINR rows; omitted rows mean every f is 0."""

    beam: BeamModel
    params: RadioParams
    ms: MsTable
    positions: Mapping[int, tuple[float, float]]


def _active(flows: Sequence[Flow]) -> list[Flow]:
    return [f for f in sorted(flows, key=lambda f: f.id) if f.demand > 0 and available_choices(f)]


def default_stage_count(flows: Sequence[Flow]) -> int:
    """Hops of every flow's longer path option: one link per stage always fits."""
    total = sum(max(len(f.ordinary_path) if f.has_ordinary else 1, 1) for f in _active(flows))
    return max(total, 1)


def delta_max(flows: Sequence[Flow]) -> int:
    best = 0
    for f in _active(flows):
        rates = [h.rate for h in f.ordinary_path if h.rate > 0]
        if f.has_direct:
            rates.append(f.direct_link.rate)
        best = max([best] + [hop_weight(f.demand, c) for c in rates])
    return best


def build_milp(flows: Sequence[Flow], K: int | None = None, sinr: SinrContext | None = None,
               name: str = "p1") -> MilpModel:
    """Linearised scheduling MILP over ``K`` stages.

    Variables: ``b_i_j_k`` (hop j of flow i in stage k), ``a_i_k`` (direct link),
    ``delta_k`` (stage length, integer), ``u_i_j_k = delta_k*b_i_j_k``,
    ``v_i_k = delta_k*a_i_k`` and, with ``sinr``, products ``w_<x>_<y>_k`` of
    two activation binaries.
    """
    K = default_stage_count(flows) if K is None else K
    if K < 1:
        raise ValueError("need at least one stage")
    active = _active(flows)
    dmax = delta_max(flows)
    stages = range(1, K + 1)
    m = MilpModel(name)

    for k in stages:
        m.add_var(f"delta_{k}", INTEGER, 0, dmax)
    m.objective = {f"delta_{k}": 1.0 for k in stages}

    # activation keys: ("b", i, j) for ordinary hops (1-based j), ("a", i) for direct links
    links: dict[tuple, Link] = {}
    for f in active:
        if f.has_ordinary:
            for j, hop in enumerate(f.ordinary_path, 1):
                links[("b", f.id, j)] = hop
        if f.has_direct:
            links[("a", f.id)] = f.direct_link

    def var(key, k):
        return "_".join(map(str, key)) + f"_{k}"

    def sub(key, k):
        return ("u" if key[0] == "b" else "v") + var(key, k)[1:]

    for key in links:
        for k in stages:
            m.add_var(var(key, k), BINARY, 0, 1)
    for key in links:
        for k in stages:
            m.add_var(sub(key, k), CONTINUOUS, 0, dmax)

    for f in active:
        direct = ("a", f.id) if ("a", f.id) in links else None
        for j in range(1, f.hop_count + 1):
            hop = ("b", f.id, j) if ("b", f.id, j) in links else None
            demand_terms, once_terms = [], []
            for k in stages:
                if hop:
                    demand_terms.append((sub(hop, k), links[hop].rate))
                    once_terms.append((var(hop, k), 1))
                if direct:
                    demand_terms.append((sub(direct, k), f.direct_link.rate))
                    once_terms.append((var(direct, k), 1))
            m.add(f"demand_{f.id}_{j}", demand_terms, ">=", f.demand)
            m.add(f"once_{f.id}_{j}", once_terms, "=", 1)

    keys = list(links)
    for x, y in itertools.combinations(keys, 2):
        if not are_adjacent(links[x], links[y]):
            continue
        tag = {("b", "b"): "adjbb", ("a", "a"): "adjaa"}.get((x[0], y[0]), "adjab")
        for k in stages:
            m.add(f"{tag}_{var(x, k)}_{var(y, k)}", [(var(x, k), 1), (var(y, k), 1)], "<=", 1)

    for f in active:
        hops = [("b", f.id, j) for j in range(1, f.hop_count + 1) if ("b", f.id, j) in links]
        if len(hops) > 1:
            for k in stages:
                m.add(f"path_{f.id}_{k}", [(var(h, k), 1) for h in hops], "<=", 1)
            for j in range(len(hops) - 1):
                for kstar in stages:
                    terms = [(var(hops[j], k), 1) for k in range(1, kstar + 1)]
                    terms += [(var(hops[j + 1], k), -1) for k in range(1, kstar + 1)]
                    m.add(f"order_{f.id}_{j + 1}_{kstar}", terms, ">=", 0)

    for key in keys:
        for k in stages:
            b, u, d = var(key, k), sub(key, k), f"delta_{k}"
            m.add(f"rlt1_{u}", [(b, dmax), (u, -1)], ">=", 0)
            m.add(f"rlt2_{u}", [(d, 1), (u, -1)], ">=", 0)
            m.add(f"rlt3_{u}", [(u, 1), (d, -1), (b, -dmax)], ">=", -dmax)

    if sinr is not None:
        _add_sinr_rows(m, links, stages, sinr, var)
    return m


def _add_sinr_rows(m: MilpModel, links, stages, ctx: SinrContext, var) -> None:
    p = ctx.params
    noise = p.noise_w / (p.k0 * p.tx_power_w)

    def gain(tx, rx):
        (x1, y1), (x2, y2) = ctx.positions[tx], ctx.positions[rx]
        return math.hypot(x1 - x2, y1 - y2) ** (-p.gamma)

    for key, link in links.items():
        ms = ctx.ms(link.rate)
        own = gain(link.tx, link.rx)
        interferers = [o for o, ol in links.items()
                       if o != key and not are_adjacent(ol, link) and ctx.beam(ol, link, ctx.positions)]
        for k in stages:
            x = var(key, k)
            terms = [(x, own - ms * noise)]
            for o in interferers:
                y = var(o, k)
                w = f"w_{x[:-len(str(k)) - 1]}_{y}"
                m.add_var(w, CONTINUOUS, 0, 1)
                m.add(f"prod1_{w}", [(w, 1), (x, -1)], "<=", 0)
                m.add(f"prod2_{w}", [(w, 1), (y, -1)], "<=", 0)
                m.add(f"prod3_{w}", [(w, 1), (x, -1), (y, -1)], ">=", -1)
                terms.append((w, -ms * p.rho * gain(links[o].tx, link.rx)))
            if len(terms) > 1:
                m.add(f"sinr_{x}", terms, ">=", 0)


def assignment_values(flows: Sequence[Flow], schedule: Schedule, K: int | None = None) -> dict[str, float]:
    """MILP variable values encoding ``schedule`` (stages beyond its length get delta 0)."""
    K = default_stage_count(flows) if K is None else K
    if len(schedule) > K:
        raise ValueError("schedule has more stages than the model")
    vals = {}
    for k, stage in enumerate(schedule.stages, 1):
        vals[f"delta_{k}"] = float(stage.slots)
        for sl in stage.links:
            stem = f"a_{sl.flow}" if sl.hop is None else f"b_{sl.flow}_{sl.hop + 1}"
            vals[f"{stem}_{k}"] = 1.0
            vals["u" + stem[1:] + f"_{k}" if sl.hop is not None else "v" + stem[1:] + f"_{k}"] = float(stage.slots)
    return vals


# --- LP text -----------------------------------------------------------------------

def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _natural(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def _expr(terms, per_line: int = 8) -> str:
    parts = []
    for i, (v, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_num(abs(c))} {v}")
    lines = [" ".join(parts[i:i + per_line]) for i in range(0, len(parts), per_line)]
    return "\n   ".join(lines) if lines else "0"


def export_lp(m: MilpModel) -> str:
    """CPLEX-LP text. Output depends only on the model, so it is byte-stable."""
    out = [f"\\ {m.name}", "Minimize"]
    obj = [(v, m.objective[v]) for v in sorted(m.objective, key=_natural)]
    out.append(f" obj: {_expr(obj)}")
    out.append("Subject To")
    for c in m.constraints:
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        out.append(f" {c.name}: {_expr(c.terms)} {sense} {_num(c.rhs)}")
    names = sorted(m.variables, key=_natural)
    out.append("Bounds")
    for n in names:
        v = m.variables[n]
        if v.kind == BINARY:
            continue
        ub = "+inf" if math.isinf(v.ub) else _num(v.ub)
        out.append(f" {_num(v.lb)} <= {n} <= {ub}")
    generals = [n for n in names if m.variables[n].kind == INTEGER]
    binaries = [n for n in names if m.variables[n].kind == BINARY]
    if generals:
        out.append("Generals")
        out.extend(f" {n}" for n in generals)
    if binaries:
        out.append("Binaries")
        out.extend(f" {n}" for n in binaries)
    out.append("End")
    return "\n".join(out) + "\n"


_TERM = re.compile(r"([+-])\s*([0-9.eE+-]+)\s+([A-Za-z_][\w.]*)")


def _parse_terms(text: str) -> tuple[tuple[str, float], ...]:
    text = text.strip()
    if text == "0":
        return ()
    terms = []
    pos = 0
    for mt in _TERM.finditer(text):
        if text[pos:mt.start()].strip():
            raise ValueError(f"cannot parse LP expression near {text[pos:mt.start()]!r}")
        sign, coef, name = mt.groups()
        terms.append((name, float(coef) * (-1 if sign == "-" else 1)))
        pos = mt.end()
    if text[pos:].strip():
        raise ValueError(f"trailing LP text {text[pos:]!r}")
    return tuple(terms)


def parse_lp(text: str) -> MilpModel:
    """Read back the subset of CPLEX-LP written by :func:`export_lp`."""
    lines = text.splitlines()
    name = lines[0][2:].strip() if lines and lines[0].startswith("\\") else "p1"
    # join continuation lines (leading indentation deeper than one space)
    logical, section = [], None
    for raw in lines[1:]:
        if raw.startswith("   ") and logical:
            logical[-1] += " " + raw.strip()
        else:
            logical.append(raw.rstrip())
    m = MilpModel(name)
    pending_constraints, bounds, kinds = [], {}, {}
    objective = ()
    for line in logical:
        s = line.strip()
        if s in ("Minimize", "Subject To", "Bounds", "Generals", "Binaries", "End"):
            section = s
            continue
        if not s:
            continue
        if section == "Minimize":
            objective = _parse_terms(s.split(":", 1)[1])
        elif section == "Subject To":
            cname, body = s.split(":", 1)
            mt = re.match(r"(.*?)\s*(<=|>=|=)\s*(\S+)$", body)
            lhs, sense, rhs = mt.groups()
            pending_constraints.append((cname.strip(), _parse_terms(lhs), sense, float(rhs)))
        elif section == "Bounds":
            lo, vname, hi = [t.strip() for t in s.split("<=")]
            bounds[vname] = (float(lo), math.inf if hi == "+inf" else float(hi))
        elif section == "Generals":
            kinds[s] = INTEGER
        elif section == "Binaries":
            kinds[s] = BINARY
    for vname in sorted(set(bounds) | set(kinds), key=_natural):
        kind = kinds.get(vname, CONTINUOUS)
        lb, ub = (0.0, 1.0) if kind == BINARY else bounds.get(vname, (0.0, math.inf))
        m.add_var(vname, kind, lb, ub)
    m.objective = dict(objective)
    for cname, terms, sense, rhs in pending_constraints:
        m.add(cname, terms, sense, rhs)
    return m


# --- branch and bound ---------------------------------------------------------------

class InstanceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Limits:
    max_flows: int = 6
    max_total_hops: int = 18
    time_budget: float = 60.0


@dataclass
class ExactSolution:
    total_slots: int
    schedule: Schedule
    choices: dict[int, PathChoice]
    optimal: bool
    stats: dict[str, int] = field(default_factory=dict)


class _Timeout(Exception):
    pass


class _AssignmentSearch:
    """Memoised depth-first search over per-flow progress vectors for one path assignment.

    Every stage of a valid schedule holds at most one hop per flow, and that
    hop must be the flow's first unscheduled one, so states are progress
    vectors and moves are node-disjoint subsets of the currently available hops.
    """

    def __init__(self, paths, weights, cap, feasible, deadline, stats):
        self.fids = sorted(paths)
        self.paths = [paths[f] for f in self.fids]
        self.weights = [weights[f] for f in self.fids]
        self.cap = cap
        self.feasible = feasible
        self.deadline = deadline
        self.stats = stats
        self.memo: dict[tuple, tuple[float, bool]] = {}
        self.moves: dict[tuple, tuple[int, ...]] = {}

    def bound(self, state) -> int:
        chain = 0
        load: dict[int, int] = {}
        for i, pos in enumerate(state):
            w = self.weights[i]
            chain = max(chain, sum(w[pos:]))
            for j in range(pos, len(w)):
                for node in self.paths[i][j].link.nodes:
                    load[node] = load.get(node, 0) + w[j]
        return max([chain] + list(load.values()))

    def candidate_moves(self, state):
        avail = [i for i, pos in enumerate(state) if pos < len(self.paths[i])]
        avail.sort(key=lambda i: (-self.weights[i][state[i]], i))
        links = {i: self.paths[i][state[i]].link for i in avail}
        out = []

        def extend(idx, chosen, busy):
            if idx == len(avail):
                if chosen:
                    out.append(tuple(chosen))
                return
            i = avail[idx]
            l = links[i]
            if len(chosen) < self.cap and l.tx not in busy and l.rx not in busy:
                chosen.append(i)
                if self.feasible is None or self.feasible([links[c] for c in chosen]):
                    extend(idx + 1, chosen, busy | {l.tx, l.rx})
                chosen.pop()
            extend(idx + 1, chosen, busy)

        extend(0, [], frozenset())
        moves = []
        for mv in out:
            top = max(self.weights[i][state[i]] for i in mv)
            # adding a hop that is no heavier than the stage costs nothing and never hurts
            dominated = False
            if len(mv) < self.cap:
                busy = {n for i in mv for n in links[i].nodes}
                for i in avail:
                    if i in mv or self.weights[i][state[i]] > top:
                        continue
                    l = links[i]
                    if l.tx in busy or l.rx in busy:
                        continue
                    if self.feasible is None or self.feasible([links[c] for c in mv] + [l]):
                        dominated = True
                        break
            if not dominated:
                moves.append((top, mv))
        moves.sort(key=lambda t: (-len(t[1]), t[0]))
        return moves

    def search(self, state, budget):
        """Exact cost-to-go if it is below ``budget``; otherwise some value >= budget."""
        if all(pos == len(self.paths[i]) for i, pos in enumerate(state)):
            return 0
        self.stats["nodes"] = self.stats.get("nodes", 0) + 1
        if self.stats["nodes"] % 256 == 0 and time.monotonic() > self.deadline:
            raise _Timeout
        lb = self.bound(state)
        known = self.memo.get(state)
        if known is not None:
            val, exact = known
            if exact:
                return val
            lb = max(lb, val)
        if lb >= budget:
            return lb
        best, best_move = math.inf, None
        for cost, mv in self.candidate_moves(state):
            limit = min(budget, best)
            nxt = list(state)
            for i in mv:
                nxt[i] += 1
            nxt = tuple(nxt)
            if cost + self.bound(nxt) >= limit:
                self.stats["pruned"] = self.stats.get("pruned", 0) + 1
                continue
            rest = self.search(nxt, limit - cost)
            if cost + rest < limit:
                best, best_move = cost + rest, mv
        if best < budget:
            self.memo[state] = (best, True)
            self.moves[state] = best_move
            return best
        self.memo[state] = (max(lb, budget), False)
        return max(lb, budget)

    def schedule(self, start) -> Schedule:
        stages, state = [], start
        while state in self.moves:
            mv = self.moves[state]
            stages.append(Stage(tuple(self.paths[i][state[i]] for i in mv),
                                max(self.weights[i][state[i]] for i in mv)))
            nxt = list(state)
            for i in mv:
                nxt[i] += 1
            state = tuple(nxt)
        return Schedule(tuple(stages))


def _paths_for(active, choices):
    paths, weights = {}, {}
    for f in active:
        hops = path_links(f, choices[f.id] is PathChoice.DIRECT)
        paths[f.id] = hops
        weights[f.id] = [hop_weight(f.demand, h.link.rate) for h in hops]
    return paths, weights


def _seed_options(active, choices):
    if choices is not None:
        return [dict(choices)]
    out = [select_all(active, Beta(2.0)), select_all(active, AlwaysOrdinary())]
    out.append({f.id: available_choices(f)[0] for f in active})
    return out


def solve_exact(flows: Sequence[Flow], n: int | None = None, feasible=None,
                limits: Limits = Limits(), choices: Mapping[int, PathChoice] | None = None
                ) -> ExactSolution:
    """Minimum total slots over path assignments and stage compositions.

    Path assignments are visited in order of their lower bound; each one is
    solved by :class:`_AssignmentSearch` under the incumbent as the cut-off.
    With ``choices`` only that assignment is searched.
    """
    active = _active(flows)
    n = node_count(flows) if n is None else n
    if len(active) > limits.max_flows:
        raise InstanceTooLarge(f"{len(active)} flows exceed the limit of {limits.max_flows}")
    hops = default_stage_count(active) if active else 0
    if hops > limits.max_total_hops:
        raise InstanceTooLarge(f"{hops} hops exceed the limit of {limits.max_total_hops}")
    if not active:
        return ExactSolution(0, Schedule(()), {}, True, {"nodes": 0})
    cap = n // 2
    deadline = time.monotonic() + limits.time_budget
    stats = {"nodes": 0, "pruned": 0, "assignments": 0, "assignments_pruned": 0}

    if choices is not None:
        options = [tuple(choices[f.id] for f in active)]
    else:
        options = list(itertools.product(*[available_choices(f) for f in active]))

    scored = []
    for opt in options:
        ch = {f.id: c for f, c in zip(active, opt)}
        paths, weights = _paths_for(active, ch)
        probe = _AssignmentSearch(paths, weights, cap, feasible, deadline, stats)
        start = tuple(0 for _ in probe.fids)
        scored.append((probe.bound(start), opt, ch, probe, start))
    scored.sort(key=lambda t: t[0])

    best_total, best_sched, best_choices = math.inf, None, None
    for opt in _seed_options(active, choices):
        try:
            sched = d2dmac_schedule(SchedulingInstance.build(active, opt, n=n, feasible=feasible))
        except SchedulingError:
            continue
        if sched.total_slots < best_total:
            best_total, best_sched, best_choices = sched.total_slots, sched, opt
    optimal = True
    try:
        for lb, _, ch, search, start in scored:
            if lb >= best_total:
                stats["assignments_pruned"] += 1
                continue
            if time.monotonic() > deadline:
                raise _Timeout
            stats["assignments"] += 1
            val = search.search(start, best_total)
            if val < best_total:
                best_total, best_sched, best_choices = val, search.schedule(start), ch
    except _Timeout:
        optimal = False
    if best_sched is None:
        if optimal:
            raise SchedulingError("no feasible schedule: some hop fails the stage oracle on every path choice")
        raise RuntimeError("time budget exhausted before any schedule was found")
    return ExactSolution(int(best_total), best_sched, best_choices, optimal, stats)
