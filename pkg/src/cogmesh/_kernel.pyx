# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode loop.

Mirrors ``learning.algorithm_slot`` / ``radio.RadioEnv.slot_outcome`` in the
same floating-point order; build without -ffast-math and with FP contraction
off or the two backends drift apart.
"""
from libc.math cimport exp, log2


cdef inline double _clamp01(double x) noexcept nogil:
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    return x


def run_episode(
    const double[:, ::1] g_su,
    const double[:, ::1] g_pu,
    const double[:, ::1] levels,
    const int[::1] n_actions,
    const double[::1] gamma_star,
    double noise, double bandwidth, double gap, double pu_power, double kappa,
    const double[:, ::1] pu_u,
    const double[:, ::1] agent_u,
    const double[::1] alpha,
    double beta, double tau,
    const double[:, :, ::1] omega,
    int mode,
    double[:, :, ::1] q,
    double[:, :, ::1] pi,
    double[:, :, ::1] conj,
    int[::1] state,
    int[:, ::1] out_state,
    int[:, ::1] out_action,
    double[:, ::1] out_reward,
    int[:, ::1] out_qos,
    double[:, ::1] out_conj,
    double[:, :, ::1] out_strategy,
    double[:, :, :, ::1] q_trace,
    long long[::1] clamp_events,
):
    """Run ``agent_u.shape[0]`` slots in place.

    ``mode`` 0 uses the linear conjecture tables, 1 the exact product of the
    others' slot-start probabilities.  ``q_trace`` is either empty or has one
    Q snapshot per slot (taken after the updates).
    """
    cdef Py_ssize_t T = agent_u.shape[0]
    cdef Py_ssize_t N = g_su.shape[0]
    cdef Py_ssize_t M = g_pu.shape[0]
    cdef Py_ssize_t A = levels.shape[1]
    cdef bint trace = q_trace.shape[0] > 0
    cdef Py_ssize_t t, i, j, k, b, s, a, sn, n
    cdef double u, cum, phi, denom, gam, p, c, mx, target, total, raw, old
    cdef double[64] powers
    cdef double[64] rewards
    cdef double[64] conjs
    cdef int[64] acts
    cdef int[64] flags
    cdef double[64] e
    cdef double[64] prev

    if N > 64 or A > 64:
        raise ValueError("kernel supports at most 64 agents and 64 actions")

    with nogil:
        for t in range(T):
            # actions from slot-start strategies
            for i in range(N):
                s = state[i]
                n = n_actions[i]
                out_state[t, i] = <int>s
                for b in range(A):
                    out_strategy[t, i, b] = pi[i, s, b] if b < n else 0.0
                u = agent_u[t, i]
                cum = 0.0
                acts[i] = <int>(n - 1)
                for k in range(n):
                    cum += pi[i, s, k]
                    if u < cum:
                        acts[i] = <int>k
                        break
                powers[i] = levels[i, acts[i]]

            # SINR and realized rewards
            for i in range(N):
                phi = 0.0
                for k in range(M):
                    if pu_u[t + 1, k] < kappa:
                        phi += g_pu[k, i] * pu_power
                denom = noise + phi
                for j in range(N):
                    if j != i:
                        denom += g_su[j, i] * powers[j]
                gam = g_su[i, i] * powers[i] / denom
                if gam >= gamma_star[i]:
                    flags[i] = 1
                    rewards[i] = bandwidth * log2(1.0 + gam / gap) / powers[i]
                else:
                    flags[i] = 0
                    rewards[i] = 0.0

            # conjecture weight used by each agent's update
            for i in range(N):
                if mode == 1:
                    c = 1.0
                    for j in range(N):
                        if j != i:
                            c *= pi[j, state[j], acts[j]]
                    conjs[i] = c
                else:
                    conjs[i] = conj[i, state[i], acts[i]]

            # per-agent learning
            for i in range(N):
                s = state[i]
                a = acts[i]
                n = n_actions[i]
                sn = flags[i] * n + a
                mx = q[i, sn, 0]
                for b in range(1, n):
                    if q[i, sn, b] > mx:
                        mx = q[i, sn, b]
                target = conjs[i] * rewards[i] + beta * mx
                q[i, s, a] = (1.0 - alpha[t]) * q[i, s, a] + alpha[t] * target

                for b in range(n):
                    prev[b] = pi[i, s, b]
                mx = q[i, s, 0]
                for b in range(1, n):
                    if q[i, s, b] > mx:
                        mx = q[i, s, b]
                total = 0.0
                for b in range(n):
                    e[b] = exp((q[i, s, b] - mx) / tau)
                    total += e[b]
                for b in range(n):
                    pi[i, s, b] = e[b] / total

                if mode == 0:
                    for b in range(n):
                        raw = conj[i, s, b] - omega[i, s, b] * (pi[i, s, b] - prev[b])
                        c = _clamp01(raw)
                        if c != raw:
                            clamp_events[i] += 1
                        conj[i, s, b] = c

                out_action[t, i] = a
                out_reward[t, i] = rewards[i]
                out_qos[t, i] = flags[i]
                out_conj[t, i] = conjs[i]
                state[i] = <int>sn

            if trace:
                for i in range(N):
                    for s in range(q.shape[1]):
                        for b in range(A):
                            q_trace[t, i, s, b] = q[i, s, b]
