"""Per-flow choice between the direct link and the ordinary AP-relayed path."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import Flow


class PathChoice(enum.Enum):
    DIRECT = "direct"
    ORDINARY = "ordinary"


class BlockedPathError(ValueError):
    pass


class UnschedulableFlowError(ValueError):
    pass


@dataclass(frozen=True)
class Beta:
    beta: float = 2.0

    def __post_init__(self):
        if self.beta < 1:
            raise ValueError("path selection parameter must be >= 1")


@dataclass(frozen=True)
class AlwaysOrdinary:
    pass


@dataclass(frozen=True)
class RandomPerFlow:
    seed: int = 0


PathPolicy = Beta | AlwaysOrdinary | RandomPerFlow


def capability(rates: Sequence[int]) -> float:
    """Harmonic aggregate 1 / sum(1/c) of per-hop rates."""
    if not rates:
        raise BlockedPathError("empty path")
    if any(c <= 0 for c in rates):
        raise BlockedPathError(f"path has a blocked hop: {list(rates)}")
    return 1.0 / sum(1.0 / c for c in rates)


def available_choices(flow: Flow) -> list[PathChoice]:
    out = []
    if flow.has_direct:
        out.append(PathChoice.DIRECT)
    if flow.has_ordinary:
        out.append(PathChoice.ORDINARY)
    return out


def select_path(flow: Flow, beta: float) -> PathChoice:
    choices = available_choices(flow)
    if not choices:
        raise UnschedulableFlowError(f"flow {flow.id} has no unblocked path")
    if len(choices) == 1:
        return choices[0]
    direct = capability([flow.direct_link.rate])
    ordinary = capability([h.rate for h in flow.ordinary_path])
    return PathChoice.DIRECT if direct / ordinary >= beta else PathChoice.ORDINARY


def select_all(flows: Iterable[Flow], policy: PathPolicy, rng: np.random.Generator | None = None
               ) -> dict[int, PathChoice]:
    """Path choice for every flow.

    ``RandomPerFlow`` draws from ``rng`` when given (the simulator passes a
    per-frame stream), otherwise from a generator seeded with the policy seed.
    """
    flows = sorted(flows, key=lambda f: f.id)
    if isinstance(policy, Beta):
        return {f.id: select_path(f, policy.beta) for f in flows}
    out = {}
    if isinstance(policy, AlwaysOrdinary):
        for f in flows:
            choices = available_choices(f)
            if not choices:
                raise UnschedulableFlowError(f"flow {f.id} has no unblocked path")
            out[f.id] = PathChoice.ORDINARY if PathChoice.ORDINARY in choices else choices[0]
        return out
    if isinstance(policy, RandomPerFlow):
        rng = rng if rng is not None else np.random.default_rng(policy.seed)
        for f in flows:
            choices = available_choices(f)
            if not choices:
                raise UnschedulableFlowError(f"flow {f.id} has no unblocked path")
            # one draw per flow keeps streams aligned regardless of availability
            u = rng.random()
            out[f.id] = choices[int(u * len(choices))]
        return out
    raise TypeError(f"unknown path policy {policy!r}")
