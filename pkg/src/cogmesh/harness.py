"""Seeded episodes, episode averaging and parameter sweeps."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from . import engine, oracle
from .errors import ConfigError
from .learning import CONJECTURE_MODES, LearnParams, learning_rate_schedule
from .radio import (ChannelParams, GeometryConfig, RadioEnv, RadioParams, Topology,
                    generate_topology)

log = logging.getLogger(__name__)

SWEEP_PARAMS = {"tau": "tau", "alpha0": "alpha0", "kappa": "pu_activity",
                "pu_activity": "pu_activity"}


@dataclass(frozen=True)
class Scenario:
    radio: RadioParams
    learn: LearnParams
    num_pu: int
    channel: ChannelParams = ChannelParams()
    geometry: GeometryConfig = GeometryConfig()
    episode_length: int = 2000
    num_episodes: int = 200
    topology_policy: str = "redraw"
    topology: Topology | None = None
    conjecture_mode: str = "linear_eq9"
    conjecture_init: str = "harness"
    history_window: int = 50
    reward_rtol: float = 1e-9
    hybrid_period: int = 50
    tail_fraction: float = 0.1

    def __post_init__(self):
        if self.num_episodes < 1:
            raise ConfigError("num_episodes must be >= 1")
        if self.episode_length < 1:
            raise ConfigError("episode_length must be >= 1")
        if self.topology_policy not in ("redraw", "fixed"):
            raise ConfigError("topology_policy must be 'redraw' or 'fixed'")
        if self.conjecture_mode not in CONJECTURE_MODES:
            raise ConfigError(f"unknown conjecture_mode {self.conjecture_mode!r}")
        if not 0 < self.tail_fraction <= 1:
            raise ConfigError("tail_fraction must lie in (0, 1]")
        if self.topology is not None:
            if self.topology.num_su != self.radio.num_su:
                raise ConfigError("explicit topology does not match the number of SUs")
            if self.topology.num_pu != self.num_pu:
                raise ConfigError("explicit topology does not match num_pu")

    @property
    def num_su(self) -> int:
        return self.radio.num_su

    def with_param(self, name: str, value: float) -> "Scenario":
        if name not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {name!r}; expected one of "
                              f"{sorted(SWEEP_PARAMS)}")
        key = SWEEP_PARAMS[name]
        if key == "pu_activity":
            return replace(self, radio=replace(self.radio, pu_activity=float(value)))
        return replace(self, learn=replace(self.learn, **{key: float(value)}))


def _episode_rngs(seed: int, num_su: int):
    topo_ss, pu_ss, *agent_ss = np.random.SeedSequence(seed).spawn(2 + num_su)
    return topo_ss, np.random.default_rng(pu_ss), [np.random.default_rng(s) for s in agent_ss]


def scenario_topology(scenario: Scenario, seed: int) -> Topology:
    """Topology used by the episode seeded with ``seed``."""
    if scenario.topology is not None:
        return scenario.topology
    topo_ss, _, _ = _episode_rngs(seed, scenario.num_su)
    return generate_topology(scenario.num_su, scenario.num_pu, topo_ss,
                             scenario.channel, scenario.geometry)


@dataclass
class MetricSeries:
    """Per-slot, per-agent metrics, shaped (T, N); averages when episodes > 1."""
    expected: np.ndarray
    realized: np.ndarray
    action: np.ndarray
    qos: np.ndarray
    conjecture: np.ndarray
    episodes: int = 1
    r_opt: np.ndarray | None = None  # PU-averaged per-agent optimum (mean over episodes)
    tail_means: np.ndarray | None = None  # (episodes, N) per-episode tail means
    clamp_events: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.expected.shape[0]

    @property
    def averaged(self) -> bool:
        return self.episodes > 1


def tail_slice(T: int, fraction: float) -> slice:
    return slice(T - max(1, int(round(T * fraction))), T)


def tail_mean(series: np.ndarray, fraction: float = 0.1) -> np.ndarray:
    return series[tail_slice(series.shape[0], fraction)].mean(axis=0)


def first_reach(curve: np.ndarray, level: float = 0.9, fraction: float = 0.1) -> int:
    """First slot at which ``curve`` reaches ``level`` times its own tail mean."""
    target = level * float(tail_mean(curve, fraction))
    hits = np.nonzero(curve >= target)[0]
    return int(hits[0]) if hits.size else len(curve)


def run_episode(scenario: Scenario, seed: int, *, topology: Topology | None = None,
                record_q: bool = False, backend: str | None = None) -> MetricSeries:
    """One episode from fresh agents; deterministic given ``seed``."""
    T = scenario.episode_length
    topo_ss, pu_rng, agent_rngs = _episode_rngs(seed, scenario.num_su)
    if topology is None:
        topology = scenario.topology or generate_topology(
            scenario.num_su, scenario.num_pu, topo_ss, scenario.channel, scenario.geometry)
    env = RadioEnv(topology, scenario.radio)
    streams = engine.EpisodeStreams.draw(T, topology.num_pu, pu_rng, agent_rngs)
    lp = scenario.learn
    alpha = learning_rate_schedule(T, lp.alpha0, lp.theta, lp.alpha_min)
    trace = engine.run_episode_arrays(
        env, lp, alpha, streams, scenario.conjecture_mode, scenario.conjecture_init,
        record_q, scenario.history_window, scenario.reward_rtol, scenario.hybrid_period,
        backend)
    if trace.clamp_events.sum():
        log.debug("seed %d: conjecture clamped %d times", seed, int(trace.clamp_events.sum()))
    table, _, opt = oracle.episode_oracle(env)
    expected = oracle.contract(table, trace.strategies)
    series = MetricSeries(
        expected=expected, realized=trace.rewards, action=trace.actions.astype(float),
        qos=trace.qos.astype(float), conjecture=trace.conjectures, episodes=1,
        r_opt=opt.kappa_average, clamp_events=int(trace.clamp_events.sum()),
        extra={"trace": trace, "topology": topology, "optimum": opt})
    series.tail_means = tail_mean(expected, scenario.tail_fraction)[None, :]
    return series


def _threads() -> int:
    env = os.environ.get("COGMESH_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, cap)


def run_experiment(scenario: Scenario, base_seed: int, threads: int | None = None) -> MetricSeries:
    """Average per-slot metrics over ``num_episodes`` seeds ``base_seed + k``.

    Episodes may run concurrently; the reduction runs in episode order so the
    result does not depend on scheduling.
    """
    K = scenario.num_episodes
    fixed = None
    if scenario.topology_policy == "fixed" or scenario.topology is not None:
        fixed = scenario_topology(scenario, base_seed)
    threads = threads or _threads()

    def one(k):
        s = run_episode(scenario, base_seed + k, topology=fixed)
        s.extra = {}
        return s

    if K == 1:
        return run_episode(scenario, base_seed, topology=fixed)
    names = ("expected", "realized", "action", "qos", "conjecture")
    acc = None
    r_opt = None
    tails = []
    clamps = 0
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for s in pool.map(one, range(K)):
            if acc is None:
                acc = {n: getattr(s, n).astype(float).copy() for n in names}
                r_opt = s.r_opt.copy()
            else:
                for n in names:
                    acc[n] += getattr(s, n)
                r_opt += s.r_opt
            tails.append(s.tail_means[0])
            clamps += s.clamp_events
    out = MetricSeries(**{n: acc[n] / K for n in names}, episodes=K, r_opt=r_opt / K,
                       tail_means=np.array(tails), clamp_events=clamps)
    return out


def sweep(scenario: Scenario, param: str, values: Iterable[float], base_seed: int,
          threads: int | None = None) -> list[tuple[float, MetricSeries]]:
    """One experiment per value, all sharing ``base_seed``."""
    values = list(values)
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; expected one of "
                          f"{sorted(SWEEP_PARAMS)}")
    return [(float(v), run_experiment(scenario.with_param(param, v), base_seed, threads))
            for v in values]


def optimality_gap(series: MetricSeries, scenario: Scenario | None = None,
                   fraction: float | None = None) -> np.ndarray:
    """Per-agent ``1 - tail expected reward / PU-averaged optimum``."""
    if fraction is None:
        fraction = scenario.tail_fraction if scenario is not None else 0.1
    r_opt = series.r_opt
    if r_opt is None:
        if scenario is None:
            raise ValueError("series carries no optimum; pass the scenario")
        env = RadioEnv(scenario_topology(scenario, 0), scenario.radio)
        r_opt = oracle.exhaustive_optimum(env).kappa_average
    achieved = tail_mean(series.expected, fraction)
    with np.errstate(divide="ignore", invalid="ignore"):
        gap = np.where(r_opt > 0, 1.0 - achieved / r_opt, 0.0)
    return gap
