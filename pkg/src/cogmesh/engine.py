"""Episode execution on the compiled kernel or the pure-Python agents.

The backend is chosen at import: the Cython kernel when it is importable,
otherwise the Python objects in :mod:`cogmesh.learning`.  Set
``COGMESH_BACKEND=python`` to force the fallback.  Conjecture modes that
need reward histories always run on the Python backend.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .learning import (Agent, LearnParams, algorithm_slot, initial_conjecture,
                       initial_states)
from .radio import RadioEnv, state_index

log = logging.getLogger(__name__)

try:
    from . import _kernel
except ImportError:  # pragma: no cover - exercised when the extension is absent
    _kernel = None

BACKEND = "compiled" if _kernel is not None and os.environ.get(
    "COGMESH_BACKEND", "").lower() != "python" else "python"

_KERNEL_MODES = {"linear_eq9": 0, "full_info": 1}


@dataclass
class EpisodeTrace:
    """Per-slot records of one episode, arrays shaped (T, N[, A])."""
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    qos: np.ndarray
    conjectures: np.ndarray
    strategies: np.ndarray  # slot-start row at the visited state, zero padded
    q: list[np.ndarray]
    pi: list[np.ndarray]
    conj: list[np.ndarray]
    clamp_events: np.ndarray
    q_trace: np.ndarray | None = None  # (T, N, S_max, A_max) after-slot Q tables
    backend: str = "python"


@dataclass
class EpisodeStreams:
    """Random inputs of one episode; agent draws come from per-agent streams."""
    pu_uniforms: np.ndarray  # (T + 1, M); row 0 sets the initial state
    agent_uniforms: np.ndarray  # (T, N)

    @classmethod
    def draw(cls, T: int, num_pu: int, pu_rng, agent_rngs) -> "EpisodeStreams":
        pu = pu_rng.random((T + 1, num_pu))
        ag = np.column_stack([r.random(T) for r in agent_rngs]) if agent_rngs else np.zeros((T, 0))
        return cls(pu, np.ascontiguousarray(ag))


class _ArrayRng:
    """Replays a fixed column of uniforms through the ``random()`` interface."""

    def __init__(self, values):
        self._it = iter(values.tolist())

    def random(self):
        return next(self._it)


def run_episode_arrays(env: RadioEnv, params: LearnParams, alpha: np.ndarray,
                       streams: EpisodeStreams, mode: str = "linear_eq9",
                       conjecture_init: str = "harness", record_q: bool = False,
                       history_window: int = 50, reward_rtol: float = 1e-9,
                       hybrid_period: int = 50, backend: str | None = None) -> EpisodeTrace:
    backend = backend or BACKEND
    if backend == "compiled" and (_kernel is None or mode not in _KERNEL_MODES):
        if _kernel is not None:
            log.debug("conjecture_mode %s not in compiled kernel; using Python engine", mode)
        backend = "python"
    kappa = env.radio.pu_activity
    n_actions = env.radio.n_actions
    c0 = [initial_conjecture(i, n_actions, conjecture_init) for i in range(env.num_su)]
    if backend == "compiled":
        return _run_compiled(env, params, alpha, streams, mode, c0, record_q, kappa)
    return _run_python(env, params, alpha, streams, mode, c0, record_q, kappa,
                       history_window, reward_rtol, hybrid_period)


def _alloc(T, N, A):
    return dict(
        states=np.zeros((T, N), dtype=np.int32),
        actions=np.zeros((T, N), dtype=np.int32),
        rewards=np.zeros((T, N)),
        qos=np.zeros((T, N), dtype=np.int32),
        conjectures=np.zeros((T, N)),
        strategies=np.zeros((T, N, A)),
    )


def _run_python(env, params, alpha, streams, mode, c0, record_q, kappa,
                history_window, reward_rtol, hybrid_period) -> EpisodeTrace:
    T, N = streams.agent_uniforms.shape
    n_actions = env.radio.n_actions
    A = max(n_actions)
    agents = [Agent(i, n_actions[i], params, c0[i], _ArrayRng(streams.agent_uniforms[:, i]),
                    mode, history_window, reward_rtol) for i in range(N)]
    initial_states(agents, env, (streams.pu_uniforms[0] < kappa).tolist())
    out = _alloc(T, N, A)
    q_trace = np.zeros((T, N, 2 * A, A)) if record_q else None
    for t in range(T):
        active = (streams.pu_uniforms[t + 1] < kappa).tolist()
        recs = algorithm_slot(agents, env, float(alpha[t]), active, t, hybrid_period)
        for r in recs:
            i = r.agent
            out["states"][t, i] = r.state
            out["actions"][t, i] = r.action
            out["rewards"][t, i] = r.reward
            out["qos"][t, i] = r.qos
            out["conjectures"][t, i] = r.conjecture
            out["strategies"][t, i, :len(r.strategy)] = r.strategy
        if record_q:
            for i, ag in enumerate(agents):
                q_trace[t, i, :ag.n_states, :ag.n_actions] = ag.q
    return EpisodeTrace(**out, q=[ag.q for ag in agents], pi=[ag.pi for ag in agents],
                        conj=[ag.conj for ag in agents],
                        clamp_events=np.array([ag.clamp_events for ag in agents]),
                        q_trace=q_trace, backend="python")


def _run_compiled(env, params, alpha, streams, mode, c0, record_q, kappa) -> EpisodeTrace:
    T, N = streams.agent_uniforms.shape
    n_actions = env.radio.n_actions
    A = max(n_actions)
    S = 2 * A
    levels = np.zeros((N, A))
    for i in range(N):
        levels[i, :n_actions[i]] = env.levels[i]
    q = np.zeros((N, S, A))
    pi = np.zeros((N, S, A))
    conj = np.zeros((N, S, A))
    for i, n in enumerate(n_actions):
        pi[i, :2 * n, :n] = 1.0 / n
        conj[i, :2 * n, :n] = c0[i]
    omega = np.full((N, S, A), params.omega)

    # initial state: everyone at level 0
    init_agents = [_StateHolder(n) for n in n_actions]
    initial_states(init_agents, env, (streams.pu_uniforms[0] < kappa).tolist())
    state = np.array([ag.state for ag in init_agents], dtype=np.int32)

    out = _alloc(T, N, A)
    q_trace = np.zeros((T, N, S, A)) if record_q else np.zeros((0, 1, 1, 1))
    clamps = np.zeros(N, dtype=np.int64)
    topo = env.topology
    gp = np.ascontiguousarray(topo.gains_pu_to_su, dtype=float)
    if gp.shape[0] == 0:
        gp = np.zeros((0, N))
    _kernel.run_episode(
        np.ascontiguousarray(topo.gains_su, dtype=float), gp, levels,
        np.array(n_actions, dtype=np.int32),
        np.array([s.sinr_threshold for s in env.radio.su], dtype=float),
        env.radio.noise, env.radio.bandwidth, env.radio.gap, env.radio.pu_power, kappa,
        np.ascontiguousarray(streams.pu_uniforms, dtype=float),
        np.ascontiguousarray(streams.agent_uniforms, dtype=float),
        np.ascontiguousarray(alpha, dtype=float),
        params.beta, params.tau, omega, _KERNEL_MODES[mode],
        q, pi, conj, state,
        out["states"], out["actions"], out["rewards"], out["qos"], out["conjectures"],
        out["strategies"], q_trace, clamps,
    )
    return EpisodeTrace(
        **out,
        q=[q[i, :2 * n, :n].copy() for i, n in enumerate(n_actions)],
        pi=[pi[i, :2 * n, :n].copy() for i, n in enumerate(n_actions)],
        conj=[conj[i, :2 * n, :n].copy() for i, n in enumerate(n_actions)],
        clamp_events=clamps, q_trace=q_trace if record_q else None, backend="compiled")


class _StateHolder:
    def __init__(self, n_actions):
        self.n_actions = n_actions
        self.state = state_index(0, 0, n_actions)
