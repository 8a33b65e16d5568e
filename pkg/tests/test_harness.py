from dataclasses import replace

import numpy as np
import pytest

from cogmesh import config, engine, harness, oracle
from cogmesh.errors import ConfigError
from cogmesh.learning import LearnParams, learning_rate_schedule
from cogmesh.radio import RadioEnv, RadioParams, SUParams, Topology

from conftest import small_env

needs_kernel = pytest.mark.skipif(engine._kernel is None, reason="compiled kernel not built")


def _scenario(name, **kw):
    cfg = config.load_config(name)
    over = {f"run.{k}": v for k, v in kw.items()}
    return config.to_scenario(cfg.with_overrides(**over) if over else cfg)


def _trace(env, lp, T, mode, backend, seed=0, record_q=False):
    N, M = env.num_su, env.topology.num_pu
    rngs = np.random.default_rng(seed).spawn(N + 1)
    streams = engine.EpisodeStreams.draw(T, M, rngs[0], rngs[1:])
    alpha = learning_rate_schedule(T, lp.alpha0, lp.theta, lp.alpha_min)
    return engine.run_episode_arrays(env, lp, alpha, streams, mode, record_q=record_q,
                                     backend=backend)


@needs_kernel
@pytest.mark.parametrize("mode", ["linear_eq9", "full_info"])
@pytest.mark.parametrize("levels,kappa", [(1, 0.5), (3, 1.0), (5, 0.3)])
def test_backends_bit_identical(mode, levels, kappa):
    rng = np.random.default_rng(levels)
    g = rng.uniform(1e-12, 1e-9, (4, 4))
    gp = rng.uniform(1e-13, 1e-10, (3, 4))
    env = small_env(g, gp, levels=levels, kappa=kappa, thr=0.01)
    lp = LearnParams(tau=3e6, alpha0=0.2, omega=0.7)
    a = _trace(env, lp, 400, mode, "python", record_q=True)
    b = _trace(env, lp, 400, mode, "compiled", record_q=True)
    assert (a.backend, b.backend) == ("python", "compiled")
    for f in ("states", "actions", "rewards", "qos", "conjectures", "strategies", "q_trace",
              "clamp_events"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f), err_msg=f)
    for x, y in zip(a.conj, b.conj):
        np.testing.assert_array_equal(x, y)


def test_history_modes_fall_back_to_python():
    env = small_env([[1e-9, 1e-10], [1e-10, 1e-9]], levels=1)
    tr = _trace(env, LearnParams(), 50, "history", "compiled")
    assert tr.backend == "python"


def test_run_episode_deterministic():
    scen = _scenario("fig3.json", episode_length=300)
    a = harness.run_episode(scen, 9)
    b = harness.run_episode(scen, 9)
    assert a.length == 300
    for f in ("expected", "realized", "action", "qos", "conjecture"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    c = harness.run_episode(scen, 10)
    assert not np.array_equal(a.realized, c.realized)


def test_single_episode_experiment_is_run_episode():
    scen = _scenario("fig3.json", episode_length=200, num_episodes=1)
    a = harness.run_experiment(scen, 4)
    b = harness.run_episode(scen, 4)
    for f in ("expected", "realized", "action", "qos", "conjecture"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert not a.averaged


def test_experiment_independent_of_threads_and_order():
    scen = _scenario("fig3.json", episode_length=200, num_episodes=8)
    a = harness.run_experiment(scen, 0, threads=1)
    b = harness.run_experiment(scen, 0, threads=4)
    for f in ("expected", "realized", "action", "qos", "conjecture", "r_opt", "tail_means"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    runs = [harness.run_episode(scen, k) for k in reversed(range(8))]
    rev = sum(r.expected for r in runs) / 8
    np.testing.assert_allclose(a.expected, rev, rtol=1e-12)
    assert a.episodes == 8 and a.averaged


def test_averaging_reduces_variance():
    scen = _scenario("fig3.json", episode_length=400)
    tail = harness.tail_slice(400, 0.25)
    v = {}
    for k in (10, 200):
        s = harness.run_experiment(replace(scen, num_episodes=k), 1000)
        v[k] = s.realized[tail].var(axis=0).mean()
    ratio = v[10] / v[200]
    assert 8 < ratio < 50, ratio


def test_sweep_labels_and_single_value():
    scen = _scenario("fig6.json", episode_length=50, num_episodes=2)
    fam = harness.sweep(scen, "kappa", [0.0, 0.5, 1.0], 3)
    assert [v for v, _ in fam] == [0.0, 0.5, 1.0]
    one = harness.sweep(scen, "kappa", [0.5], 3)[0][1]
    ref = harness.run_experiment(scen.with_param("kappa", 0.5), 3)
    np.testing.assert_array_equal(one.expected, ref.expected)
    with pytest.raises(ConfigError):
        harness.sweep(scen, "gamma", [1.0], 0)


def test_single_agent_learns_optimum_level():
    radio = RadioParams(1e6, 1e-10, 1.0, 0.2, 0.0, 0.2, (SUParams(0.1, 0.2, 0.0, 1),))
    topo = Topology.from_gains([[3e-10]])
    env = RadioEnv(topo, radio)
    opt = oracle.exhaustive_optimum(env)
    for mode in ("linear_eq9", "full_info"):
        scen = harness.Scenario(radio=radio, learn=LearnParams(tau=1e5, alpha0=0.3), num_pu=0,
                                episode_length=2000, num_episodes=1, topology=topo,
                                conjecture_mode=mode)
        s = harness.run_episode(scen, 0)
        q = s.extra["trace"].q[0]
        last = s.extra["trace"].states[-1, 0]
        assert int(np.argmax(q[last])) == opt.argmax[0, 0, 0], mode


def test_optimality_gap_zero_at_optimum():
    radio = RadioParams(1e6, 1e-10, 1.0, 0.2, 0.0, 0.2, (SUParams(0.1, 0.2, 0.0, 1),))
    topo = Topology.from_gains([[3e-10]])
    scen = harness.Scenario(radio=radio, learn=LearnParams(), num_pu=0, topology=topo,
                            num_episodes=1, episode_length=10)
    r_opt = oracle.exhaustive_optimum(RadioEnv(topo, radio)).kappa_average
    z = np.zeros((10, 1))
    series = harness.MetricSeries(np.full((10, 1), r_opt[0]), z, z, z, z)
    np.testing.assert_allclose(harness.optimality_gap(series, scen), [0.0], atol=1e-15)
    series.r_opt = r_opt
    np.testing.assert_allclose(harness.optimality_gap(series), [0.0], atol=1e-15)


def test_first_reach_and_tail():
    curve = np.concatenate([np.linspace(0, 1, 11), np.ones(89)])
    assert harness.first_reach(curve, 0.9, 0.1) == 9
    assert harness.tail_slice(2000, 0.1) == slice(1800, 2000)
    assert harness.first_reach(np.zeros(5)) == 0


def test_scenario_validation():
    scen = _scenario("fig3.json")
    with pytest.raises(ConfigError):
        replace(scen, num_episodes=0)
    with pytest.raises(ConfigError):
        replace(scen, conjecture_mode="nope")
    with pytest.raises(ConfigError):
        scen.with_param("beta", 0.5)
