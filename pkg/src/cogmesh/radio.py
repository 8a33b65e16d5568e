"""Physical layer of the shared band: placement, link gains, SINR and the
energy-efficiency reward.

Conventions
-----------
All powers are in watts.  ``gains_su[j, i]`` is the gain from the transmitter
of SU link ``j`` to the receiver of SU link ``i`` (so the diagonal holds the
direct-link gains) and ``gains_pu_to_su[k, i]`` is the gain from primary
transmitter ``k`` to the receiver of SU link ``i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ChannelParams:
    K: float = 1e-6
    path_loss_exp: float = 4.0
    d0: float = 1.0
    shadow_mean_db: float = 0.0
    shadow_std_db: float = 6.0

    def __post_init__(self):
        if not self.K > 0:
            raise ConfigError("K must be positive")
        if not self.path_loss_exp > 0:
            raise ConfigError("path_loss_exp must be positive")
        if not self.d0 > 0:
            raise ConfigError("d0 must be positive")
        if not self.shadow_std_db >= 0:
            raise ConfigError("shadow_std_db must be non-negative")


@dataclass(frozen=True)
class GeometryConfig:
    area_side: float = 300.0
    comm_range: float = 30.0
    max_retries: int = 10_000


@dataclass(frozen=True)
class SUParams:
    p_min: float
    p_max: float
    sinr_threshold: float
    levels: int  # m_i; the agent has m_i + 1 actions

    @property
    def n_actions(self) -> int:
        return self.levels + 1


@dataclass(frozen=True)
class RadioParams:
    bandwidth: float
    noise: float
    gap: float
    pu_power: float
    pu_activity: float
    power_mask: float
    su: tuple[SUParams, ...]

    def __post_init__(self):
        if not 0.0 <= self.pu_activity <= 1.0:
            raise ConfigError("pu_activity must lie in [0, 1]")
        if not self.noise > 0:
            raise ConfigError("noise must be positive")
        if not self.gap >= 1:
            raise ConfigError("gap must be >= 1")
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth must be positive")
        for i, s in enumerate(self.su):
            if not 0 < s.p_min <= min(s.p_max, self.power_mask):
                raise ConfigError(f"su[{i}]: need 0 < p_min <= min(p_max, power_mask)")
            if s.levels < 1:
                raise ConfigError(f"su[{i}]: levels must be >= 1")
            if not s.sinr_threshold >= 0:
                raise ConfigError(f"su[{i}]: sinr_threshold must be non-negative")

    @property
    def num_su(self) -> int:
        return len(self.su)

    def p_max_eff(self, i: int) -> float:
        return min(self.su[i].p_max, self.power_mask)

    def levels_of(self, i: int) -> np.ndarray:
        s = self.su[i]
        return np.array([power_level(a, s.levels, s.p_min, self.p_max_eff(i))
                         for a in range(s.n_actions)])

    @property
    def n_actions(self) -> tuple[int, ...]:
        return tuple(s.n_actions for s in self.su)


@dataclass(frozen=True)
class Topology:
    su_links: np.ndarray  # (N, 2, 2): [link, tx/rx, xy]
    pu_links: np.ndarray  # (M, 2, 2)
    gains_su: np.ndarray  # (N, N)
    gains_pu_to_su: np.ndarray  # (M, N)
    area_side: float = 300.0

    @property
    def num_su(self) -> int:
        return self.gains_su.shape[0]

    @property
    def num_pu(self) -> int:
        return self.gains_pu_to_su.shape[0]

    @classmethod
    def from_gains(cls, gains_su, gains_pu_to_su=None) -> "Topology":
        """Build a topology from explicit gain matrices (no geometry)."""
        g = np.array(gains_su, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ConfigError("gains_su must be a square matrix")
        n = g.shape[0]
        gp = (np.zeros((0, n)) if gains_pu_to_su is None
              else np.array(gains_pu_to_su, dtype=float).reshape(-1, n))
        if not (np.all(np.isfinite(g)) and np.all(g > 0)):
            raise ConfigError("gains_su entries must be positive and finite")
        if not (np.all(np.isfinite(gp)) and np.all(gp > 0)):
            raise ConfigError("gains_pu_to_su entries must be positive and finite")
        nan_links = np.full((n, 2, 2), np.nan)
        return cls(nan_links, np.full((gp.shape[0], 2, 2), np.nan), g, gp, float("nan"))


class AgentState(NamedTuple):
    agent_id: int
    qos_ok: int
    power_action: int


def link_gain(d: float, shadow_F: float, params: ChannelParams) -> float:
    """Path loss with shadowing: ``K * F * (d/d0)**(-n)``, valid for d > d0."""
    if not d > params.d0:
        raise ValueError(f"distance {d} m must exceed reference distance d0={params.d0} m")
    if not shadow_F > 0:
        raise ValueError("shadowing factor must be positive")
    return params.K * shadow_F * (d / params.d0) ** (-params.path_loss_exp)


def _place_link(rng, geom: GeometryConfig, d0: float, placed: list[np.ndarray]):
    side = geom.area_side
    for _ in range(geom.max_retries):
        tx = rng.uniform(0.0, side, size=2)
        r = geom.comm_range * math.sqrt(rng.uniform())
        ang = rng.uniform(0.0, 2 * math.pi)
        rx = tx + r * np.array([math.cos(ang), math.sin(ang)])
        if r <= d0 or np.any(rx < 0) or np.any(rx > side):
            continue
        if placed:
            pts = np.array(placed)
            if (np.min(np.hypot(*(pts - tx).T)) <= d0
                    or np.min(np.hypot(*(pts - rx).T)) <= d0):
                continue
        placed.extend([tx, rx])
        return np.array([tx, rx])
    raise ConfigError(f"could not place a link after {geom.max_retries} attempts; "
                      "check area_side, comm_range and d0")


def generate_topology(num_su: int, num_pu: int, rng_seed, params: ChannelParams,
                      geometry: GeometryConfig = GeometryConfig()) -> Topology:
    """Random deployment of SU and PU links with frozen lognormal shadowing.

    Transmitters are uniform over the square; each receiver is uniform over the
    disc of radius ``comm_range`` around its transmitter (kept inside the
    square).  Every node keeps more than ``d0`` from every other node so that
    all cross gains are defined.  One shadowing draw per ordered (tx, rx) pair.
    """
    if num_su < 1:
        raise ConfigError("num_su must be >= 1")
    if num_pu < 0:
        raise ConfigError("num_pu must be >= 0")
    if not (geometry.area_side > 0 and geometry.comm_range > 0):
        raise ConfigError("area_side and comm_range must be positive")
    rng = np.random.default_rng(rng_seed)
    placed: list[np.ndarray] = []
    su = np.array([_place_link(rng, geometry, params.d0, placed) for _ in range(num_su)])
    pu = np.array([_place_link(rng, geometry, params.d0, placed)
                   for _ in range(num_pu)]).reshape(num_pu, 2, 2)

    def shadow(shape):
        x = rng.normal(params.shadow_mean_db, params.shadow_std_db, size=shape)
        return 10.0 ** (x / 10.0)

    f_su = shadow((num_su, num_su))
    f_pu = shadow((num_pu, num_su))
    g_su = np.empty((num_su, num_su))
    for j in range(num_su):
        for i in range(num_su):
            d = float(np.hypot(*(su[j, 0] - su[i, 1])))
            g_su[j, i] = link_gain(d, f_su[j, i], params)
    g_pu = np.empty((num_pu, num_su))
    for k in range(num_pu):
        for i in range(num_su):
            d = float(np.hypot(*(pu[k, 0] - su[i, 1])))
            g_pu[k, i] = link_gain(d, f_pu[k, i], params)
    return Topology(su, pu, g_su, g_pu, float(geometry.area_side))


def power_level(a: int, m: int, p_min: float, p_max_eff: float) -> float:
    """Transmit power of action ``a`` among ``m + 1`` equally spaced levels."""
    if not 0 <= a <= m:
        raise IndexError(f"action {a} outside 0..{m}")
    return (1 - a / m) * p_min + (a / m) * p_max_eff


def pu_interference(active_pus: Sequence[bool], gains_col: Sequence[float],
                    pu_power: float) -> float:
    if len(active_pus) != len(gains_col):
        raise ValueError("active_pus and gains_col lengths differ")
    phi = 0.0
    for on, g in zip(active_pus, gains_col):
        if on:
            phi += g * pu_power
    return phi


def sinr(i: int, powers: Sequence[float], topology: Topology, phi: float,
         sigma: float) -> float:
    g = topology.gains_su
    denom = sigma + phi
    for j, p in enumerate(powers):
        if j != i:
            denom += g[j, i] * p
    return g[i, i] * powers[i] / denom


def reward(p: float, gamma: float, W: float, gap: float) -> float:
    """Bits received correctly per joule: ``W log2(1 + gamma/gap) / p``."""
    if not p > 0:
        raise ValueError("transmit power must be positive")
    return W * math.log2(1.0 + gamma / gap) / p


def realized_reward(p: float, gamma: float, gamma_star: float, W: float,
                    gap: float) -> float:
    if gamma >= gamma_star:
        return reward(p, gamma, W, gap)
    return 0.0


def observe_state(i: int, gamma: float, gamma_star: float, a: int) -> AgentState:
    return AgentState(i, int(gamma >= gamma_star), a)


def state_index(qos_ok: int, action: int, n_actions: int) -> int:
    """Dense index of (I, a) in ``range(2 * n_actions)``."""
    return qos_ok * n_actions + action


def state_from_index(idx: int, n_actions: int) -> tuple[int, int]:
    return divmod(idx, n_actions)


@dataclass
class RadioEnv:
    """Frozen topology plus radio parameters; evaluates one slot.

    The scalar loop in :meth:`slot_outcome` fixes the floating-point
    evaluation order shared with the compiled episode kernel.
    """
    topology: Topology
    radio: RadioParams
    levels: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        if self.topology.num_su != self.radio.num_su:
            raise ConfigError("topology and radio parameters disagree on the number of SUs")
        self.levels = [self.radio.levels_of(i) for i in range(self.radio.num_su)]

    @property
    def num_su(self) -> int:
        return self.radio.num_su

    def powers(self, actions: Sequence[int]) -> list[float]:
        return [float(self.levels[i][a]) for i, a in enumerate(actions)]

    def slot_outcome(self, actions: Sequence[int], active_pus: Sequence[bool]):
        """Return (sinrs, realized rewards, qos flags) for a joint action."""
        r = self.radio
        g = self.topology.gains_su
        gp = self.topology.gains_pu_to_su
        p = self.powers(actions)
        n = len(p)
        gammas, rewards, flags = [], [], []
        for i in range(n):
            phi = 0.0
            for k in range(gp.shape[0]):
                if active_pus[k]:
                    phi += float(gp[k, i]) * r.pu_power
            denom = r.noise + phi
            for j in range(n):
                if j != i:
                    denom += float(g[j, i]) * p[j]
            gam = float(g[i, i]) * p[i] / denom
            ok = gam >= r.su[i].sinr_threshold
            gammas.append(gam)
            rewards.append(r.bandwidth * math.log2(1.0 + gam / r.gap) / p[i] if ok else 0.0)
            flags.append(int(ok))
        return gammas, rewards, flags
