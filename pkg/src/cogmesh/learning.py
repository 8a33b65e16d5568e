"""Tabular learners for the power-allocation game.

Every agent keeps, per dense state index ``s = I * (m + 1) + a_prev``:

* ``q[s, a]``    Q-values (bits/joule scale),
* ``pi[s, a]``   its Boltzmann strategy,
* ``conj[s, a]`` its scalar conjecture about the others' joint probability.

The arithmetic in the scalar helpers below (softmax, update rules, action
sampling) is mirrored operation for operation by the compiled episode
kernel, so both backends produce bit-identical trajectories.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError
from .radio import RadioEnv, state_index

log = logging.getLogger(__name__)

CONJECTURE_MODES = ("linear_eq9", "history", "hybrid", "full_info")


@dataclass(frozen=True)
class LearnParams:
    beta: float = 0.9
    tau: float = 1e6
    alpha0: float = 0.5
    theta: float = 1.0001
    alpha_min: float = 1e-4
    omega: float = 1.0

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ConfigError("beta must lie in [0, 1)")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if not 0 <= self.alpha0 < 1:
            raise ConfigError("alpha0 must lie in [0, 1)")
        if not self.theta > 1:
            raise ConfigError("theta must exceed 1")
        if not 0 <= self.alpha_min < 1:
            raise ConfigError("alpha_min must lie in [0, 1)")
        if not self.omega > 0:
            raise ConfigError("omega must be positive")


def boltzmann_strategy(q_row: Sequence[float], tau: float) -> np.ndarray:
    """Softmax of ``q_row / tau``, shifted by the row maximum."""
    if not tau > 0:
        raise ValueError("temperature must be positive")
    q = [float(x) for x in q_row]
    mx = max(q)
    e = [math.exp((x - mx) / tau) for x in q]
    total = 0.0
    for v in e:
        total += v
    return np.array([v / total for v in e])


def learning_rate(t: int, alpha0: float, theta: float, alpha_min: float = 0.0) -> float:
    """``alpha0 / theta**t``, floored at ``alpha_min``; underflows to the floor."""
    if t < 0:
        raise ValueError("slot index must be non-negative")
    try:
        a = alpha0 / theta ** t
    except OverflowError:
        a = 0.0
    return max(a, alpha_min)


def learning_rate_schedule(T: int, alpha0: float, theta: float,
                           alpha_min: float = 0.0) -> np.ndarray:
    return np.array([learning_rate(t, alpha0, theta, alpha_min) for t in range(T)])


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def estimate_conjecture_from_history(mean_gap: float, prob: float) -> float:
    """Others' joint probability from the mean recurrence gap of a reward.

    A reward that recurs with mean gap ``n`` has per-visit probability about
    ``1 / (1 + n)``; dividing out the agent's own probability leaves the
    conjecture.
    """
    if not prob > 0:
        raise ValueError("own action probability must be positive")
    return clamp01(1.0 / ((1.0 + mean_gap) * prob))


def update_conjecture(c_prev: float, pi_new: float, pi_prev: float, omega: float) -> float:
    """Linear conjecture with the previous slot as reference point, clamped to [0, 1]."""
    return clamp01(c_prev - omega * (pi_new - pi_prev))


def q_update_conjecture(Q: np.ndarray, s: int, a: int, reward: float, conj: float,
                        s_next: int, alpha: float, beta: float) -> float:
    """In-place update of ``Q[s, a]``; returns the new entry."""
    target = conj * reward + beta * max(float(x) for x in Q[s_next])
    new = (1.0 - alpha) * float(Q[s, a]) + alpha * target
    Q[s, a] = new
    return new


def joint_probability(strategies: Sequence[Sequence[float]], actions: Sequence[int]) -> float:
    """Product of ``strategies[j][actions[j]]`` in index order (1 when empty)."""
    c = 1.0
    for row, a in zip(strategies, actions):
        c *= float(row[a])
    return c


def q_update_full_info(Q: np.ndarray, s: int, a: int, reward: float,
                       others_strategies: Sequence[Sequence[float]],
                       others_actions: Sequence[int], s_next: int,
                       alpha: float, beta: float) -> float:
    """Update weighting the reward by the others' exact joint probability."""
    c = joint_probability(others_strategies, others_actions)
    return q_update_conjecture(Q, s, a, reward, c, s_next, alpha, beta)


def q_update_single_agent(Q: np.ndarray, s: int, a: int, reward: float, s_next: int,
                          alpha: float, beta: float) -> float:
    return q_update_conjecture(Q, s, a, reward, 1.0, s_next, alpha, beta)


def sample_action(row: Sequence[float], u: float) -> int:
    """Inverse-CDF draw from a probability row given ``u`` in [0, 1)."""
    cum = 0.0
    n = len(row)
    for k in range(n):
        cum += float(row[k])
        if u < cum:
            return k
    return n - 1


class RewardHistory:
    """Recurrence gaps of distinct realized rewards per (state, action).

    Gaps are counted in visits to the state, so ``1 / (1 + mean gap)``
    estimates the per-visit probability of seeing that reward.
    """

    def __init__(self, n_states: int, n_actions: int, window: int = 50,
                 rtol: float = 1e-9):
        self.window = window
        self.rtol = rtol
        self.visits = [0] * n_states
        # per (s, a): list of [value, last visit, gaps deque]
        self.entries: list[list[list]] = [[] for _ in range(n_states * n_actions)]
        self.n_actions = n_actions
        self.last_value: list[float | None] = [None] * (n_states * n_actions)

    def visit(self, s: int) -> None:
        self.visits[s] += 1

    def _find(self, s: int, a: int, value: float):
        for e in self.entries[s * self.n_actions + a]:
            if abs(e[0] - value) <= self.rtol * max(abs(e[0]), abs(value)):
                return e
        return None

    def record(self, s: int, a: int, value: float) -> None:
        now = self.visits[s]
        e = self._find(s, a, value)
        if e is None:
            self.entries[s * self.n_actions + a].append([value, now, deque(maxlen=self.window)])
        else:
            e[2].append(now - e[1] - 1)
            e[1] = now
        self.last_value[s * self.n_actions + a] = value

    def mean_gap(self, s: int, a: int, value: float) -> float | None:
        e = self._find(s, a, value)
        if e is None or not e[2]:
            return None
        return sum(e[2]) / len(e[2])


class Agent:
    """One SU learner: Q-table, strategy table, conjectures and its RNG stream."""

    def __init__(self, agent_id: int, n_actions: int, params: LearnParams,
                 c0: float, rng=None, mode: str = "linear_eq9",
                 history_window: int = 50, reward_rtol: float = 1e-9):
        if mode not in CONJECTURE_MODES:
            raise ConfigError(f"unknown conjecture_mode {mode!r}")
        self.agent_id = agent_id
        self.n_actions = n_actions
        self.n_states = 2 * n_actions
        self.params = params
        self.mode = mode
        self.c0 = c0
        self.rng = rng if rng is not None else np.random.default_rng()
        self.q = np.zeros((self.n_states, n_actions))
        self.pi = np.tile(boltzmann_strategy(self.q[0], params.tau), (self.n_states, 1))
        self.conj = np.full((self.n_states, n_actions), float(c0))
        self.omega = np.full((self.n_states, n_actions), params.omega)
        self.history = (RewardHistory(self.n_states, n_actions, history_window, reward_rtol)
                        if mode in ("history", "hybrid") else None)
        self.state = 0
        self.clamp_events = 0

    def conjecture_for(self, s: int, a: int, reward: float) -> float:
        if self.mode == "history":
            gap = self.history.mean_gap(s, a, reward)
            if gap is None:
                return self.c0
            return estimate_conjecture_from_history(gap, float(self.pi[s, a]))
        return float(self.conj[s, a])

    def reanchor(self) -> None:
        """Reset linear reference points from reward-history estimates."""
        for s in range(self.n_states):
            for a in range(self.n_actions):
                v = self.history.last_value[s * self.n_actions + a]
                if v is None:
                    continue
                gap = self.history.mean_gap(s, a, v)
                if gap is not None:
                    self.conj[s, a] = estimate_conjecture_from_history(gap, float(self.pi[s, a]))

    def learn(self, s: int, a: int, reward: float, conj: float, s_next: int,
              alpha: float) -> None:
        """Q update, strategy refresh and conjecture update for the visited state."""
        p = self.params
        q_update_conjecture(self.q, s, a, reward, conj, s_next, alpha, p.beta)
        old = [float(x) for x in self.pi[s]]
        self.pi[s] = boltzmann_strategy(self.q[s], p.tau)
        if self.mode in ("linear_eq9", "hybrid"):
            for b in range(self.n_actions):
                raw = float(self.conj[s, b]) - float(self.omega[s, b]) * (float(self.pi[s, b]) - old[b])
                c = clamp01(raw)
                if c != raw:
                    self.clamp_events += 1
                self.conj[s, b] = c


def agent_step(agent: Agent, s: int, rng=None) -> int:
    """Draw an action from the agent's strategy in state ``s``."""
    rng = agent.rng if rng is None else rng
    return sample_action(agent.pi[s], float(rng.random()))


def initial_conjecture(i: int, n_actions: Sequence[int], init: str = "harness") -> float:
    """Uniform-play product of the others' probabilities, or the strict-information prior."""
    if init == "harness":
        c = 1.0
        for j, n in enumerate(n_actions):
            if j != i:
                c *= 1.0 / n
        return c
    if init == "strict":
        return 1.0 / n_actions[i]
    raise ConfigError(f"unknown conjecture_init {init!r}")


class SlotRecord(NamedTuple):
    agent: int
    state: int
    action: int
    reward: float
    next_state: int
    qos: int
    conjecture: float
    strategy: np.ndarray  # slot-start strategy row at `state`


def initial_states(agents: Sequence[Agent], env: RadioEnv, active_pus) -> None:
    """Evaluate the starting state with every SU at its lowest power level."""
    _, _, flags = env.slot_outcome([0] * len(agents), active_pus)
    for ag, f in zip(agents, flags):
        ag.state = state_index(f, 0, ag.n_actions)


def algorithm_slot(agents: Sequence[Agent], env: RadioEnv, alpha: float,
                   active_pus: Sequence[bool], t: int = 0,
                   hybrid_period: int = 50) -> list[SlotRecord]:
    """One synchronous time slot of the conjecture-based learner.

    Actions, rewards and conjectures are all computed from slot-start tables
    before any agent updates, so the update order cannot leak information.
    """
    states = [ag.state for ag in agents]
    actions = [agent_step(ag, s) for ag, s in zip(agents, states)]
    _, rewards, flags = env.slot_outcome(actions, active_pus)
    rows = [ag.pi[s].copy() for ag, s in zip(agents, states)]

    conjs = []
    for i, ag in enumerate(agents):
        s, a = states[i], actions[i]
        if ag.mode == "full_info":
            others = [rows[j] for j in range(len(agents)) if j != i]
            other_a = [actions[j] for j in range(len(agents)) if j != i]
            conjs.append(joint_probability(others, other_a))
        else:
            conjs.append(ag.conjecture_for(s, a, rewards[i]))

    records = []
    for i, ag in enumerate(agents):
        s, a = states[i], actions[i]
        s_next = state_index(flags[i], a, ag.n_actions)
        if ag.history is not None:
            ag.history.visit(s)
            ag.history.record(s, a, rewards[i])
        ag.learn(s, a, rewards[i], conjs[i], s_next, alpha)
        if ag.mode == "hybrid" and (t + 1) % hybrid_period == 0:
            ag.reanchor()
        ag.state = s_next
        records.append(SlotRecord(i, s, a, rewards[i], s_next, flags[i], conjs[i], rows[i]))
    return records
