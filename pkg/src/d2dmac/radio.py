"""Propagation, SINR and concurrent-transmission conditions for directional links.

Powers are in watts and SINR values are linear ratios; dB appears only in the
constructors that take dB inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import Link, are_adjacent

Positions = Mapping[int, tuple[float, float]]


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class RadioParams:
    """Link-budget constants.

    ``path_loss_db`` is the reference loss PL(d0) at d0 = 1 m; the scaling
    factor applied to the transmit power is ``k0 = 10**(-PL/10)``.
    ``noise_psd`` is the one-sided noise density in W/Hz (default -134 dBm/MHz).
    """

    tx_power_mw: float = 0.1
    path_loss_db: float = 68.0
    gamma: float = 2.0
    rho: float = 1.0
    bandwidth_hz: float = 1760e6
    noise_psd: float = 10 ** ((-134.0 - 30.0) / 10) / 1e6

    def __post_init__(self):
        for name in ("tx_power_mw", "gamma", "rho", "bandwidth_hz", "noise_psd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def k0(self) -> float:
        return 10.0 ** (-self.path_loss_db / 10.0)

    @property
    def tx_power_w(self) -> float:
        return self.tx_power_mw * 1e-3

    @property
    def noise_w(self) -> float:
        return self.bandwidth_hz * self.noise_psd


@dataclass(frozen=True)
class MsTable:
    """Minimum SINR (linear) needed to sustain each rate (packets/slot)."""

    thresholds: Mapping[int, float] = field(default_factory=lambda: {1: db_to_linear(5.0),
                                                                     2: db_to_linear(8.0),
                                                                     3: db_to_linear(10.0)})

    def __post_init__(self):
        items = sorted(self.thresholds.items())
        if any(b[1] < a[1] for a, b in zip(items, items[1:])):
            raise ValueError("minimum SINR must not decrease with rate")
        object.__setattr__(self, "thresholds", dict(items))

    @classmethod
    def from_db(cls, table: Mapping[int, float]) -> MsTable:
        return cls({int(r): db_to_linear(v) for r, v in table.items()})

    def __call__(self, rate: int) -> float:
        try:
            return self.thresholds[rate]
        except KeyError:
            raise KeyError(f"no minimum-SINR entry for rate {rate}") from None


# --- beam indicator models ------------------------------------------------------

class NoBeamInterference:
    """f = 0 for every pair of non-adjacent links."""

    def __call__(self, interferer: Link, victim: Link, positions: Positions) -> int:
        return 0


def _angle_between(origin, toward, other) -> float:
    ax, ay = toward[0] - origin[0], toward[1] - origin[1]
    bx, by = other[0] - origin[0], other[1] - origin[1]
    na, nb = math.hypot(ax, ay), math.hypot(bx, by)
    if na == 0 or nb == 0:
        return 0.0
    c = max(-1.0, min(1.0, (ax * bx + ay * by) / (na * nb)))
    return math.degrees(math.acos(c))


@dataclass(frozen=True)
class GeometricBeam:
    """f = 1 iff the victim receiver sits inside the interferer's main lobe.

    The lobe is a cone of ``half_angle_deg`` around the interferer's own
    tx->rx direction. With ``rx_side`` the interferer's transmitter must also
    fall inside the victim receiver's lobe aimed at its own transmitter.
    """

    half_angle_deg: float = 15.0
    rx_side: bool = False

    def __call__(self, interferer: Link, victim: Link, positions: Positions) -> int:
        s, r = positions[interferer.tx], positions[interferer.rx]
        vr = positions[victim.rx]
        if _angle_between(s, r, vr) > self.half_angle_deg:
            return 0
        if self.rx_side and _angle_between(vr, positions[victim.tx], s) > self.half_angle_deg:
            return 0
        return 1


BeamModel = Callable[[Link, Link, Positions], int]


# --- link budget -----------------------------------------------------------------

def _dist(positions: Positions, a: int, b: int) -> float:
    (x1, y1), (x2, y2) = positions[a], positions[b]
    return math.hypot(x1 - x2, y1 - y2)


def received_power(dist: float, p: RadioParams, f: int = 1) -> float:
    """Power (W) at distance ``dist`` metres; zero when beams are not aligned."""
    if dist <= 0:
        raise ValueError("received power is singular at zero distance")
    if not f:
        return 0.0
    return p.k0 * p.tx_power_w * dist ** (-p.gamma)


def sinr(link: Link, interferers: Sequence[Link], beam: BeamModel, p: RadioParams,
         positions: Positions) -> float:
    signal = received_power(_dist(positions, link.tx, link.rx), p)
    interference = 0.0
    for other in interferers:
        if other == link:
            continue
        f = beam(other, link, positions)
        if f:
            interference += received_power(_dist(positions, other.tx, link.rx), p, f)
    return signal / (p.noise_w + p.rho * interference)


def stage_feasible(links: Sequence[Link], beam: BeamModel, p: RadioParams, ms: MsTable,
                   positions: Positions) -> bool:
    """True iff every link reaches the minimum SINR of its rate under the others' interference."""
    links = list(links)
    for i, link in enumerate(links):
        others = links[:i] + links[i + 1:]
        if sinr(link, others, beam, p, positions) < ms(link.rate):
            return False
    return True


def _isolation_margin(link_len: float, rate: int, p: RadioParams, ms: MsTable) -> float:
    # k0*Pt*l^-gamma/MS - W*N0
    return p.k0 * p.tx_power_w * link_len ** (-p.gamma) / ms(rate) - p.noise_w


def interference_radius(link_len: float, rate: int, interferers: int, p: RadioParams,
                        ms: MsTable) -> float:
    """Distance every one of ``interferers`` aligned transmitters must keep from the receiver.

    Returns ``math.inf`` when the link cannot sustain its rate even without interference.
    """
    margin = _isolation_margin(link_len, rate, p, ms)
    if margin <= 0:
        return math.inf
    return (p.rho * p.k0 * p.tx_power_w * interferers) ** (1 / p.gamma) / margin ** (1 / p.gamma)


def spatial_reuse_budget(link_len: float, rate: int, p: RadioParams, ms: MsTable) -> float:
    """Upper bound on the sum of f * l**-gamma over interferers; negative when infeasible alone."""
    return _isolation_margin(link_len, rate, p, ms) / (p.rho * p.k0 * p.tx_power_w)


def admissible(link_len: float, rate: int, interferer_distances: Sequence[float], p: RadioParams,
               ms: MsTable, f: Sequence[int] | None = None) -> bool:
    if f is None:
        f = [1] * len(interferer_distances)
    load = sum(fi * d ** (-p.gamma) for fi, d in zip(f, interferer_distances) if fi)
    return load <= spatial_reuse_budget(link_len, rate, p, ms)


def reuse_probability(link_len: float, rate: int, interferers: int, p: RadioParams, ms: MsTable,
                      disk_radius: float, samples: int = 100_000, seed: int = 0) -> float:
    """Monte-Carlo probability that ``interferers`` aligned transmitters dropped uniformly in a
    disk around the receiver leave the link admissible."""
    budget = spatial_reuse_budget(link_len, rate, p, ms)
    if interferers == 0:
        return float(budget >= 0)
    rng = np.random.default_rng(seed)
    # uniform in the disk: radial density 2x/R^2
    d = disk_radius * np.sqrt(rng.uniform(size=(samples, interferers)))
    d = np.maximum(d, 1e-9)
    load = np.sum(d ** (-p.gamma), axis=1)
    return float(np.mean(load <= budget))


def make_feasibility(mode: str, p: RadioParams | None = None, ms: MsTable | None = None,
                     positions: Positions | None = None, beam: BeamModel | None = None):
    """Stage oracle for the schedulers: None under ``always_pass``, else a callable on link lists."""
    if mode == "always_pass":
        return None
    if mode != "geometric":
        raise ValueError(f"unknown sinr mode {mode!r}")
    if positions is None:
        raise ValueError("geometric SINR checks need node positions")
    p = p or RadioParams()
    ms = ms or MsTable()
    beam = beam or GeometricBeam()

    def feasible(links: Sequence[Link]) -> bool:
        return stage_feasible(links, beam, p, ms, positions)

    return feasible


def pairwise_nonadjacent(links: Sequence[Link]) -> bool:
    return all(not are_adjacent(a, b) for i, a in enumerate(links) for b in links[i + 1:])
