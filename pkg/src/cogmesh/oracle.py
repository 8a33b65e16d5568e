"""Exact enumeration over joint power vectors and PU on/off patterns.

Reward tensors are laid out as ``table[a_1, ..., a_N, i]``: the realized
(QoS-gated) reward of agent ``i`` when SU ``j`` plays action ``a_j``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OracleSizeError
from .learning import boltzmann_strategy, initial_conjecture
from .radio import RadioEnv, state_index

MAX_JOINT = 10 ** 7


def joint_space_size(n_actions: Sequence[int]) -> int:
    return int(np.prod([int(n) for n in n_actions], dtype=object))


def _check_size(n_actions, patterns: int = 1):
    size = joint_space_size(n_actions)
    if size > MAX_JOINT:
        raise OracleSizeError(f"joint action space has {size} entries (limit {MAX_JOINT})")
    if size * patterns > 8 * MAX_JOINT:
        raise OracleSizeError(f"{size} joint actions x {patterns} PU patterns is too large")


def pu_patterns(num_pu: int, kappa: float):
    """All PU on/off patterns with non-zero probability and their weights."""
    out = []
    for bits in itertools.product((0, 1), repeat=num_pu):
        on = sum(bits)
        w = kappa ** on * (1.0 - kappa) ** (num_pu - on)
        if w > 0:
            out.append((np.array(bits, dtype=bool), w))
    return out


def joint_powers(env: RadioEnv) -> np.ndarray:
    """(J, N) power of every SU for every joint action, first agent slowest."""
    n = env.radio.n_actions
    grids = np.indices(n).reshape(len(n), -1)
    return np.stack([env.levels[i][grids[i]] for i in range(len(n))], axis=1)


class _JointGrid:
    """Pattern-independent parts of the joint-action SINR computation."""

    def __init__(self, env: RadioEnv):
        n = env.radio.n_actions
        _check_size(n)
        r = env.radio
        g = env.topology.gains_su
        self.env = env
        self.shape = tuple(n) + (len(n),)
        self.P = joint_powers(env)
        g_off = g.copy()
        np.fill_diagonal(g_off, 0.0)
        self.signal = np.diag(g) * self.P
        self.cross = r.noise + self.P @ g_off
        self.thr = np.array([s.sinr_threshold for s in r.su])

    def table(self, active_pus=None):
        env = self.env
        r = env.radio
        gp = env.topology.gains_pu_to_su
        active = (np.zeros(gp.shape[0], dtype=bool) if active_pus is None
                  else np.asarray(active_pus, dtype=bool))
        if active.any():
            phi = (gp[active] * r.pu_power).sum(axis=0)
            gamma = self.signal / (self.cross + phi)
        else:
            gamma = self.signal / self.cross
        ok = gamma >= self.thr
        rew = np.where(ok, r.bandwidth * np.log2(1.0 + gamma / r.gap) / self.P, 0.0)
        return rew.reshape(self.shape), ok.reshape(self.shape)


def reward_table(env: RadioEnv, active_pus: Sequence[bool] | None = None,
                 with_qos: bool = False):
    """Realized rewards for every joint action under one PU pattern."""
    rew, ok = _JointGrid(env).table(active_pus)
    return (rew, ok) if with_qos else rew


def pattern_tables(env: RadioEnv, kappa: float | None = None):
    """Yield ``(pattern, weight, rewards, qos)`` for every PU pattern with weight > 0."""
    kappa = env.radio.pu_activity if kappa is None else kappa
    pats = pu_patterns(env.topology.num_pu, kappa)
    _check_size(env.radio.n_actions, len(pats))
    grid = _JointGrid(env)
    for active, w in pats:
        rew, ok = grid.table(active)
        yield active, w, rew, ok


def expected_reward_table(env: RadioEnv, kappa: float | None = None):
    """PU-averaged reward tensor (and QoS probability tensor)."""
    return episode_oracle(env, kappa)[:2]


@dataclass
class OptimumResult:
    per_pattern: np.ndarray  # (P, N) per-agent optimum under each pattern
    argmax: np.ndarray  # (P, N, N) joint action achieving it
    weights: np.ndarray  # (P,)
    patterns: np.ndarray  # (P, M)

    @property
    def kappa_average(self) -> np.ndarray:
        return self.weights @ self.per_pattern


def _optimum(items, n_actions) -> OptimumResult:
    N = len(n_actions)
    per, arg, ws, pats = [], [], [], []
    for active, w, rew in items:
        tab = rew.reshape(-1, N)
        idx = np.argmax(tab, axis=0)
        per.append(tab[idx, np.arange(N)])
        arg.append(np.stack(np.unravel_index(idx, n_actions), axis=1))
        ws.append(w)
        pats.append(active)
    return OptimumResult(np.array(per), np.array(arg), np.array(ws),
                         np.array(pats).reshape(len(pats), -1))


def episode_oracle(env: RadioEnv, kappa: float | None = None):
    """PU-averaged reward and QoS tensors plus the optimum, in one enumeration pass."""
    rew = qos = None
    items = []
    for active, w, r, ok in pattern_tables(env, kappa):
        rew = w * r if rew is None else rew + w * r
        qos = w * ok if qos is None else qos + w * ok
        items.append((active, w, r))
    opt = _optimum(items, env.radio.n_actions)
    return rew, qos, opt


def exhaustive_optimum(env: RadioEnv, pu_state: Sequence[bool] | None = None) -> OptimumResult:
    """Best achievable realized reward of each SU over all joint power vectors.

    With ``pu_state`` the enumeration uses that single pattern; otherwise
    every pattern is enumerated and weighted by its Bernoulli probability.
    """
    if pu_state is not None:
        active = np.asarray(pu_state, dtype=bool)
        return _optimum([(active, 1.0, reward_table(env, active))], env.radio.n_actions)
    return _optimum([(a, w, r) for a, w, r, _ in pattern_tables(env)], env.radio.n_actions)


def contract(table: np.ndarray, strategies: np.ndarray, chunk: int = 16) -> np.ndarray:
    """Expected value of ``table`` under independent mixed strategies.

    ``table`` has shape ``(n_1, ..., n_N, K)``; ``strategies`` has shape
    ``(B, N, A)`` (rows zero-padded beyond ``n_j``) or ``(N, A)``.  Returns
    ``(B, K)`` (or ``(K,)``).
    """
    single = strategies.ndim == 2
    S = strategies[None] if single else strategies
    n = table.shape[:-1]
    K = table.shape[-1]
    out = np.empty((S.shape[0], K))
    flat = table.reshape(n[0], -1)
    for lo in range(0, S.shape[0], chunk):
        blk = S[lo:lo + chunk]
        B = blk.shape[0]
        y = blk[:, 0, :n[0]] @ flat
        for j in range(1, len(n)):
            y = np.matmul(blk[:, j, None, :n[j]], y.reshape(B, n[j], -1))
        out[lo:lo + chunk] = y.reshape(B, K)
    return out[0] if single else out


def exact_expected_reward(strategies, env: RadioEnv, kappa: float | None = None,
                          table: np.ndarray | None = None) -> np.ndarray:
    """Per-agent expected reward for one profile (list of vectors) or a batch."""
    if table is None:
        table, _ = expected_reward_table(env, kappa)
    if isinstance(strategies, (list, tuple)):
        A = max(len(s) for s in strategies)
        arr = np.zeros((len(strategies), A))
        for j, s in enumerate(strategies):
            arr[j, :len(s)] = s
        strategies = arr
    return contract(table, np.asarray(strategies, dtype=float))


@dataclass
class NECheck:
    is_ne: bool
    best_action: list[int]  # best unilateral deviation of each agent
    gain: list[float]  # reward improvement of that deviation (<= 0 at an NE)


def check_pure_ne(joint_action: Sequence[int], table: np.ndarray) -> NECheck:
    """Unilateral-deviation scan of a pure joint action on a reward tensor."""
    ja = tuple(int(a) for a in joint_action)
    N = len(ja)
    best, gain = [], []
    for i in range(N):
        idx = list(ja)
        idx[i] = slice(None)
        col = table[tuple(idx) + (i,)]
        b = int(np.argmax(col))
        best.append(b)
        gain.append(float(col[b] - col[ja[i]]))
    return NECheck(all(g <= 0 for g in gain), best, gain)


# -- Q-profile operator -------------------------------------------------------

QProfile = list  # list of per-agent (2 n_i, n_i) arrays


def q_distance(Q: Sequence[np.ndarray], Qp: Sequence[np.ndarray]) -> float:
    """Sup-norm distance over agents, states and actions."""
    if len(Q) != len(Qp):
        raise ValueError("profiles have different numbers of agents")
    d = 0.0
    for a, b in zip(Q, Qp):
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
        if a.size:
            d = max(d, float(np.max(np.abs(a - b))))
    return d


@dataclass
class TransitionBatch:
    """One realized (reward, next state) for every agent, state and action."""
    rewards: list[np.ndarray]  # per agent (S_i, A_i)
    next_states: list[np.ndarray]  # per agent (S_i, A_i) int


def apply_H(Q: Sequence[np.ndarray], batch: TransitionBatch,
            conjectures: Sequence[np.ndarray], beta: float) -> list[np.ndarray]:
    """Entrywise backup ``c * R + beta * max_b Q(s', b)`` for every agent."""
    out = []
    for q, r, sn, c in zip(Q, batch.rewards, batch.next_states, conjectures):
        q = np.asarray(q)
        row_max = q.max(axis=1)
        out.append(c * r + beta * row_max[sn])
    return out


def sample_transition_batch(env: RadioEnv, rng) -> TransitionBatch:
    """For each (agent, state, action): others' actions uniform, PU ~ Bernoulli(kappa)."""
    n = env.radio.n_actions
    M = env.topology.num_pu
    rewards, nexts = [], []
    for i, ni in enumerate(n):
        R = np.zeros((2 * ni, ni))
        SN = np.zeros((2 * ni, ni), dtype=int)
        for s in range(2 * ni):
            for a in range(ni):
                acts = [int(rng.integers(nj)) for nj in n]
                acts[i] = a
                active = (rng.random(M) < env.radio.pu_activity).tolist()
                _, rew, flags = env.slot_outcome(acts, active)
                R[s, a] = rew[i]
                SN[s, a] = state_index(flags[i], a, ni)
        rewards.append(R)
        nexts.append(SN)
    return TransitionBatch(rewards, nexts)


def strategies_of(Q: Sequence[np.ndarray], tau: float) -> list[np.ndarray]:
    return [np.array([boltzmann_strategy(row, tau) for row in q]) for q in Q]


def linear_conjectures(pis: Sequence[np.ndarray], c_ref: Sequence[float],
                       pi_ref: Sequence[np.ndarray], omega: float) -> list[np.ndarray]:
    """Linear conjecture around common reference points (no clamping)."""
    return [c - omega * (p - pr) for p, c, pr in zip(pis, c_ref, pi_ref)]


def max_realized_reward(env: RadioEnv) -> float:
    pats = pu_patterns(env.topology.num_pu, env.radio.pu_activity)
    return max(float(reward_table(env, a).max()) for a, _ in pats)


@dataclass
class ProbeResult:
    tau: float
    max_ratio: float
    ratios: np.ndarray
    box: float


def contraction_probe(env: RadioEnv, tau: float, num_pairs: int, rng, beta: float = 0.9,
                      omega: float = 1.0, box: float | None = None) -> ProbeResult:
    """Largest observed ``d(HQ, HQ') / d(Q, Q')`` over random Q pairs.

    Q entries are uniform on ``[0, R_max / (1 - beta)]``.  Each pair shares a
    transition batch and the reference points (uniform play), while
    strategies and conjectures follow from each Q separately.
    """
    if not tau > 0:
        raise ValueError("temperature must be positive")
    n = env.radio.n_actions
    if box is None:
        box = max_realized_reward(env) / (1.0 - beta)
    c_ref = [initial_conjecture(i, n) for i in range(len(n))]
    pi_ref = [np.full((2 * ni, ni), 1.0 / ni) for ni in n]
    ratios = []
    for _ in range(num_pairs):
        Q = [rng.uniform(0.0, box, size=(2 * ni, ni)) for ni in n]
        Qp = [rng.uniform(0.0, box, size=(2 * ni, ni)) for ni in n]
        d = q_distance(Q, Qp)
        if d == 0.0:
            continue
        batch = sample_transition_batch(env, rng)
        C = linear_conjectures(strategies_of(Q, tau), c_ref, pi_ref, omega)
        Cp = linear_conjectures(strategies_of(Qp, tau), c_ref, pi_ref, omega)
        ratios.append(q_distance(apply_H(Q, batch, C, beta), apply_H(Qp, batch, Cp, beta)) / d)
    ratios = np.array(ratios)
    return ProbeResult(tau, float(ratios.max()) if ratios.size else float("nan"), ratios, box)


def locate_contraction_threshold(env: RadioEnv, taus: Sequence[float], num_pairs: int, rng,
                                 beta: float = 0.9, omega: float = 1.0):
    """Smallest grid temperature from which every larger grid value contracts.

    Returns ``(threshold or None, list of ProbeResult)``.
    """
    taus = sorted(taus)
    results = [contraction_probe(env, t, num_pairs, rng, beta, omega) for t in taus]
    threshold = None
    for res in reversed(results):
        if res.max_ratio < 1.0:
            threshold = res.tau
        else:
            break
    return threshold, results


def expected_H(Q: Sequence[np.ndarray], env: RadioEnv, tau: float, beta: float = 0.9,
               omega: float = 1.0, tables=None) -> list[np.ndarray]:
    """Exact expectation of the backup over others' actions and PU patterns.

    The others play their state-averaged Boltzmann strategies; the agent's
    own conjecture follows the linear model around uniform reference points.
    """
    n = env.radio.n_actions
    N = len(n)
    rew, qos = tables if tables is not None else expected_reward_table(env)
    pis = strategies_of(Q, tau)
    mean_pi = [p.mean(axis=0) for p in pis]
    c_ref = [initial_conjecture(i, n) for i in range(N)]
    C = linear_conjectures(pis, c_ref, [np.full_like(p, 1.0 / p.shape[1]) for p in pis], omega)
    out = []
    for i, ni in enumerate(n):
        # condition on own action: contract every other axis
        er = np.empty(ni)
        pq = np.empty(ni)
        for a in range(ni):
            sub_r = np.take(rew[..., i], a, axis=i)
            sub_q = np.take(qos[..., i], a, axis=i)
            vecs = [mean_pi[j] for j in range(N) if j != i]
            for v in vecs:
                sub_r = np.tensordot(v, sub_r, axes=(0, 0))
                sub_q = np.tensordot(v, sub_q, axes=(0, 0))
            er[a] = float(sub_r)
            pq[a] = float(sub_q)
        q = np.asarray(Q[i])
        row_max = q.max(axis=1)
        cont = np.array([(1 - pq[a]) * row_max[state_index(0, a, ni)]
                         + pq[a] * row_max[state_index(1, a, ni)] for a in range(ni)])
        out.append(C[i] * er[None, :] + beta * cont[None, :])
    return out


def fixed_point_iteration(env: RadioEnv, Q0: Sequence[np.ndarray], tau: float,
                          beta: float = 0.9, omega: float = 1.0, tol: float = 1e-12,
                          max_iter: int = 10_000):
    """Iterate ``Q <- E[H Q]`` until successive profiles are within ``tol``."""
    tables = expected_reward_table(env)
    Q = [np.asarray(q, dtype=float) for q in Q0]
    for it in range(1, max_iter + 1):
        Qn = expected_H(Q, env, tau, beta, omega, tables)
        if q_distance(Q, Qn) <= tol:
            return Qn, it
        Q = Qn
    return Q, max_iter
