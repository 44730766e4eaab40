"""Joint access/backhaul link scheduling with device-to-device paths for mmWave small cells."""

from .model import (Flow, Link, LinkKind, Node, NodeKind, Schedule, ScheduledLink, Stage,
                    ValidationReport, validate_schedule)
from .pathsel import AlwaysOrdinary, Beta, PathChoice, RandomPerFlow, select_all, select_path
from .sched import SchedulingInstance, d2dmac_schedule, fdmac_e_schedule
from .optimal import build_milp, export_lp, parse_lp, solve_exact
from .engine import FrameConfig, Protocol, compute_metrics, run_simulation

__version__ = "0.1.0"
