"""JSON run configuration: schema, validation and conversion to a Scenario.

Powers are given in mW and SINR thresholds in dB; everything is converted
to watts / linear ratios on the way into :class:`~cogmesh.harness.Scenario`.
Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .harness import Scenario
from .learning import LearnParams
from .radio import ChannelParams, GeometryConfig, RadioParams, SUParams, Topology

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChannelCfg(_Strict):
    K: float = Field(1e-6, gt=0)
    path_loss_exponent: float = Field(4.0, gt=0)
    d0_m: float = Field(1.0, gt=0)
    shadow_mean_db: float = 0.0
    shadow_db: float = Field(6.0, ge=0)
    # how to read shadow_db: as the standard deviation or the variance of X in dB
    shadow_db_is: Literal["std", "variance"] = "std"


class GeometryCfg(_Strict):
    area_side_m: float = Field(300.0, gt=0)
    comm_range_m: float = Field(30.0, gt=0)
    max_retries: int = Field(10_000, ge=1)


class TopologyCfg(_Strict):
    num_su: int = Field(3, ge=1)
    num_pu: int = Field(3, ge=0)
    policy: Literal["redraw", "fixed"] = "redraw"
    gains_su: Optional[list[list[float]]] = None
    gains_pu_to_su: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def _explicit_shapes(self):
        if self.gains_su is not None:
            if len(self.gains_su) != self.num_su or any(len(r) != self.num_su for r in self.gains_su):
                raise ValueError("gains_su must be num_su x num_su")
            pu = self.gains_pu_to_su or []
            if len(pu) != self.num_pu or any(len(r) != self.num_su for r in pu):
                raise ValueError("gains_pu_to_su must be num_pu x num_su")
        elif self.gains_pu_to_su is not None:
            raise ValueError("gains_pu_to_su requires gains_su")
        return self


class SUCfg(_Strict):
    p_min_mw: float = Field(100.0, gt=0)
    p_max_mw: float = Field(200.0, gt=0)
    sinr_threshold_db: float = -20.0
    levels: int = Field(1, ge=1)


class RadioCfg(_Strict):
    bandwidth_hz: float = Field(1e6, gt=0)
    noise_mw: float = Field(1e-7, gt=0)
    gap: float = Field(1.0, ge=1)
    pu_power_mw: float = Field(200.0, ge=0)
    pu_activity: float = Field(0.5, ge=0, le=1)
    power_mask_mw: float = Field(200.0, gt=0)
    su: SUCfg = SUCfg()
    su_overrides: Optional[list[SUCfg]] = None


class LearningCfg(_Strict):
    beta: float = Field(0.9, ge=0, lt=1)
    tau: float = Field(1e6, gt=0)
    alpha0: float = Field(0.1, ge=0, lt=1)
    theta: float = Field(1.0001, gt=1)
    alpha_min: float = Field(1e-4, ge=0, lt=1)
    omega: float = Field(1.0, gt=0)
    conjecture_mode: Literal["linear_eq9", "history", "hybrid", "full_info"] = "linear_eq9"
    conjecture_init: Literal["harness", "strict"] = "harness"
    history_window: int = Field(50, ge=1)
    hybrid_period: int = Field(50, ge=1)
    reward_match_rtol: float = Field(1e-9, ge=0)


class RunCfg(_Strict):
    episode_length: int = Field(2000, ge=1)
    num_episodes: int = Field(200, ge=1)
    tail_fraction: float = Field(0.1, gt=0, le=1)
    seed: int = Field(0, ge=0)


class SweepCfg(_Strict):
    param: Literal["tau", "alpha0", "kappa"]
    values: list[float] = Field(min_length=1)


class RunConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    experiment_id: str = "cogmesh"
    channel: ChannelCfg = ChannelCfg()
    geometry: GeometryCfg = GeometryCfg()
    topology: TopologyCfg = TopologyCfg()
    radio: RadioCfg = RadioCfg()
    learning: LearningCfg = LearningCfg()
    run: RunCfg = RunCfg()
    sweep: Optional[SweepCfg] = None
    output: Optional[str] = None

    @model_validator(mode="after")
    def _overrides_len(self):
        ov = self.radio.su_overrides
        if ov is not None and len(ov) != self.topology.num_su:
            raise ValueError("radio.su_overrides must list one entry per SU")
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        """Copy with dotted-path overrides, e.g. ``{"run.seed": 7}``, revalidated."""
        data = self.model_dump(mode="json")
        for path, value in kw.items():
            node = data
            *parents, leaf = path.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return _validate(data)


def _format_validation(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        if e["type"] == "extra_forbidden":
            parts.append(f"unknown key {loc!r}")
        else:
            parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def _validate(data) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_validation(err)) from None
    to_scenario(cfg)  # cross-field physical checks
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    return _validate(data)


def shipped_configs() -> list[str]:
    return sorted(p.name for p in resources.files("cogmesh").joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


def load_config(path: str | Path) -> RunConfig:
    """Load a config file; bare names fall back to the configs shipped with the package."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text())
    shipped = resources.files("cogmesh").joinpath("configs", p.name)
    if shipped.is_file():
        return parse_config(shipped.read_text())
    raise ConfigError(f"config file not found: {path}")


def _su_params(c: SUCfg) -> SUParams:
    return SUParams(c.p_min_mw * 1e-3, c.p_max_mw * 1e-3, 10.0 ** (c.sinr_threshold_db / 10.0),
                    c.levels)


def to_scenario(cfg: RunConfig) -> Scenario:
    r = cfg.radio
    n = cfg.topology.num_su
    sus = [_su_params(c) for c in (r.su_overrides or [r.su] * n)]
    radio = RadioParams(
        bandwidth=r.bandwidth_hz, noise=r.noise_mw * 1e-3, gap=r.gap,
        pu_power=r.pu_power_mw * 1e-3, pu_activity=r.pu_activity,
        power_mask=r.power_mask_mw * 1e-3, su=tuple(sus))
    ch = cfg.channel
    std = ch.shadow_db if ch.shadow_db_is == "std" else math.sqrt(ch.shadow_db)
    channel = ChannelParams(ch.K, ch.path_loss_exponent, ch.d0_m, ch.shadow_mean_db, std)
    g = cfg.geometry
    geometry = GeometryConfig(g.area_side_m, g.comm_range_m, g.max_retries)
    topo = None
    if cfg.topology.gains_su is not None:
        topo = Topology.from_gains(cfg.topology.gains_su, cfg.topology.gains_pu_to_su or None)
    lc = cfg.learning
    learn = LearnParams(lc.beta, lc.tau, lc.alpha0, lc.theta, lc.alpha_min, lc.omega)
    return Scenario(
        radio=radio, learn=learn, num_pu=cfg.topology.num_pu, channel=channel,
        geometry=geometry, episode_length=cfg.run.episode_length,
        num_episodes=cfg.run.num_episodes,
        topology_policy="fixed" if topo is not None else cfg.topology.policy,
        topology=topo, conjecture_mode=lc.conjecture_mode, conjecture_init=lc.conjecture_init,
        history_window=lc.history_window, reward_rtol=lc.reward_match_rtol,
        hybrid_period=lc.hybrid_period, tail_fraction=cfg.run.tail_fraction)
