"""Packet arrival processes (Poisson and two-phase hyper-exponential) and load conversions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PACKET_BITS = 8000          # 1000-byte packets
REFERENCE_RATE = 2e9        # bits/s, the rate that moves one packet per slot


@dataclass(frozen=True)
class Poisson:
    rate: float             # packets/s per flow


@dataclass(frozen=True)
class Ipp:
    """Renewal process whose inter-arrival times are a p1/p2 mixture of exponentials."""

    rate1: float
    rate2: float
    p1: float = 0.5
    p2: float = 0.5

    def __post_init__(self):
        if abs(self.p1 + self.p2 - 1.0) > 1e-12:
            raise ValueError("phase probabilities must sum to 1")
        if self.rate1 <= 0 or self.rate2 <= 0:
            raise ValueError("phase rates must be positive")


@dataclass(frozen=True)
class TrafficSpec:
    mode: Poisson | Ipp
    flows: int
    packet_bits: int = PACKET_BITS
    reference_rate: float = REFERENCE_RATE
    burst_max: int = 5


def poisson_rate_for_load(load: float, packet_bits: float, flows: int, reference_rate: float) -> float:
    """Per-flow arrival rate giving total offered load ``load`` (in units of ``reference_rate``)."""
    return load * reference_rate / (packet_bits * flows)


def ipp_mean_interval(rate1: float, rate2: float, p1: float, p2: float) -> float:
    return p1 / rate1 + p2 / rate2


def ipp_scale_for_load(load: float, ratio: float, p1: float, p2: float, packet_bits: float,
                       flows: int, reference_rate: float) -> tuple[float, float]:
    """Phase rates (rate1, rate2) with rate1/rate2 = ``ratio`` and the requested load.

    The load definition ties it to the mean interval: load = L*N / (E[X]*R).
    """
    mean = packet_bits * flows / (load * reference_rate)
    # E[X] = (p1/ratio + p2) / rate2
    rate2 = (p1 / ratio + p2) / mean
    return ratio * rate2, rate2


def traffic_for_load(mode: str, load: float, flows: int, *, ratio: float = 10.0, p1: float = 0.5,
                     packet_bits: int = PACKET_BITS, reference_rate: float = REFERENCE_RATE,
                     burst_max: int = 5) -> TrafficSpec:
    if mode == "poisson":
        proc = Poisson(poisson_rate_for_load(load, packet_bits, flows, reference_rate))
    elif mode == "ipp":
        r1, r2 = ipp_scale_for_load(load, ratio, p1, 1 - p1, packet_bits, flows, reference_rate)
        proc = Ipp(r1, r2, p1, 1 - p1)
    else:
        raise ValueError(f"unknown traffic mode {mode!r}")
    return TrafficSpec(proc, flows, packet_bits, reference_rate, burst_max)


def _intervals(mode, rng: np.random.Generator, size: int) -> np.ndarray:
    # unit exponentials scaled by the phase mean: a larger rate shrinks every
    # interval of the same draw, so arrivals grow monotonically with load
    e = rng.standard_exponential(size)
    if isinstance(mode, Poisson):
        return e / mode.rate
    phase1 = rng.random(size) < mode.p1
    return np.where(phase1, e / mode.rate1, e / mode.rate2)


def arrival_times(mode, horizon_s: float, rng: np.random.Generator) -> np.ndarray:
    """Arrival instants (seconds) in ``[0, horizon_s)`` of one flow."""
    if isinstance(mode, Poisson) and mode.rate <= 0:
        return np.empty(0)
    # fixed chunk size: the k-th interval always comes from the same draws
    chunk = 8192
    out, t0 = [], 0.0
    while True:
        times = t0 + np.cumsum(_intervals(mode, rng, chunk))
        out.append(times[times < horizon_s])
        if times[-1] >= horizon_s:
            break
        t0 = times[-1]
    return np.concatenate(out)


def generate_arrivals(spec: TrafficSpec, horizon: int, slot_seconds: float, seed: int) -> list[np.ndarray]:
    """Per-flow sorted arrival slots over ``horizon`` slots.

    Each flow starts with uniform(0..burst_max) packets at slot 0; later
    arrivals are floored to their slot. Flow f uses its own child stream of
    ``seed`` for the burst and another for the process.
    """
    streams = np.random.SeedSequence(seed).spawn(spec.flows)
    out = []
    for ss in streams:
        burst_ss, proc_ss = ss.spawn(2)
        burst = int(np.random.default_rng(burst_ss).integers(0, spec.burst_max + 1)) if spec.burst_max > 0 else 0
        times = arrival_times(spec.mode, horizon * slot_seconds, np.random.default_rng(proc_ss))
        slots = np.floor(times / slot_seconds).astype(np.int64)
        slots = slots[slots < horizon]
        out.append(np.concatenate([np.zeros(burst, dtype=np.int64), slots]))
    return out
