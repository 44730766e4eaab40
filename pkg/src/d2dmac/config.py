"""Scenario configuration schema (JSON) with defaults matching the reference evaluation setup."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .engine import FrameConfig, Protocol, ScenarioParams
from .radio import GeometricBeam, MsTable, RadioParams, make_feasibility
from .topology import RatePolicy


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DeploymentCfg(_Strict):
    ap_grid: int = Field(9, ge=1)
    wn_counts: list[int] = [30]
    area_side: float = Field(50.0, gt=0)
    backhaul: Literal["grid", "star"] = "grid"
    flow_count: int | None = Field(None, ge=0)
    internet_fraction: float = Field(0.5, ge=0, le=1)

    @field_validator("wn_counts")
    @classmethod
    def _nonneg(cls, v):
        if any(w < 0 for w in v):
            raise ValueError("WN counts must be non-negative")
        return v

    def params(self, wn_count: int) -> ScenarioParams:
        return ScenarioParams(self.ap_grid, wn_count, self.area_side, self.backhaul,
                              self.flow_count, self.internet_fraction)


class RatePolicyCfg(_Strict):
    breakpoints: list[tuple[float, int]] = [(10.0, 3), (25.0, 2)]
    far_rate: int = Field(1, ge=0)
    backhaul_rate: int = Field(3, ge=1)

    def build(self) -> RatePolicy:
        return RatePolicy(tuple(self.breakpoints), self.far_rate, self.backhaul_rate)


class RadioCfg(_Strict):
    tx_power_mw: float = Field(0.1, gt=0)
    path_loss_db: float = 68.0
    gamma: float = Field(2.0, gt=0)
    rho: float = Field(1.0, gt=0)
    bandwidth_hz: float = Field(1760e6, gt=0)
    noise_dbm_per_mhz: float = -134.0
    ms_db: dict[int, float] = {1: 5.0, 2: 8.0, 3: 10.0}
    sinr_mode: Literal["always_pass", "geometric"] = "always_pass"
    beam_half_angle_deg: float = Field(15.0, gt=0, le=180)

    def params(self) -> RadioParams:
        psd = 10 ** ((self.noise_dbm_per_mhz - 30.0) / 10) / 1e6
        return RadioParams(self.tx_power_mw, self.path_loss_db, self.gamma, self.rho, self.bandwidth_hz, psd)

    def ms(self) -> MsTable:
        return MsTable.from_db(self.ms_db)

    def feasibility(self, positions):
        return make_feasibility(self.sinr_mode, self.params(), self.ms(), positions,
                                GeometricBeam(self.beam_half_angle_deg))


class ProtocolCfg(_Strict):
    name: Literal["d2dmac", "odmac", "rpdmac", "fdmac_e", "optimal"]
    beta: float = Field(2.0, ge=1)

    def build(self, seed: int) -> Protocol:
        return Protocol.named(self.name, self.beta, seed)


class TrafficCfg(_Strict):
    mode: Literal["poisson", "ipp"] = "poisson"
    loads: list[float] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]
    ipp_ratio: float = Field(10.0, gt=0)
    ipp_p1: float = Field(0.5, gt=0, lt=1)
    burst_max: int = Field(5, ge=0)
    packet_bits: int = Field(8000, gt=0)
    reference_rate: float = Field(2e9, gt=0)

    @field_validator("loads")
    @classmethod
    def _positive(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("loads must be positive")
        return v


class FrameCfg(_Strict):
    slot_seconds: float = Field(5e-6, gt=0)
    overhead_slots: int = Field(3, ge=0)
    delay_threshold: int = Field(10_000, ge=0)
    sim_length: float = Field(0.5, ge=0)

    def build(self) -> FrameConfig:
        return FrameConfig(self.slot_seconds, self.overhead_slots, self.delay_threshold, self.sim_length)


class OutputCfg(_Strict):
    results_csv: str = "results.csv"
    summary_csv: str = "summary.csv"
    packet_log_dir: str | None = None


class ScenarioConfig(_Strict):
    deployment: DeploymentCfg = DeploymentCfg()
    rate_policy: RatePolicyCfg = RatePolicyCfg()
    radio: RadioCfg = RadioCfg()
    protocols: list[ProtocolCfg] = [ProtocolCfg(name="d2dmac"), ProtocolCfg(name="fdmac_e"),
                                    ProtocolCfg(name="rpdmac"), ProtocolCfg(name="odmac")]
    traffic: TrafficCfg = TrafficCfg()
    frame: FrameCfg = FrameCfg()
    seeds: list[int] = list(range(10))
    output: OutputCfg = OutputCfg()
    workers: int = Field(1, ge=1)
    validate_schedules: bool = False

    @model_validator(mode="after")
    def _unique_protocols(self):
        keys = [(p.name, p.beta) for p in self.protocols]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate protocol entries")
        return self


class ConfigError(ValueError):
    pass


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "invalid config:\n  " + "\n  ".join(lines)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format(e)) from None


def load_config(path: str | Path | None, overrides: dict | None = None) -> ScenarioConfig:
    """Read a JSON config (None: all defaults) and apply dotted-key overrides such as ``{"frame.sim_length": 0.1}``."""
    data = {} if path is None else json.loads(Path(path).read_text())
    for key, value in (overrides or {}).items():
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return parse_config(data)
