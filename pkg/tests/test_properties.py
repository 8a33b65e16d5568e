"""Randomized invariants; each suite draws at least 1000 cases."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from cogmesh import config, csvio, harness
from cogmesh.learning import (boltzmann_strategy, q_update_conjecture, update_conjecture)
from cogmesh.radio import Topology, power_level, sinr

CASES = settings(max_examples=1000, deadline=None, derandomize=True)

finite = st.floats(-1e8, 1e8, allow_nan=False)
gain = st.floats(1e-14, 1e-8)
power = st.floats(1e-3, 1.0)


@CASES
@given(st.lists(finite, min_size=1, max_size=8), st.floats(1e-2, 1e9), st.floats(-1e8, 1e8))
def test_softmax_properties(q, tau, shift):
    p = boltzmann_strategy(q, tau)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p >= 0)
    best = max(q)
    top = [k for k, x in enumerate(q) if x == best]
    assert all(p[k] == p.max() for k in top)
    shifted = boltzmann_strategy([x + shift for x in q], tau)
    # shifting by a constant is exact up to rounding of the shifted inputs
    scale = max(1.0, max(abs(x) for x in q) + abs(shift)) / tau
    assert np.max(np.abs(p - shifted)) <= 1e-12 + 4 * np.finfo(float).eps * scale


@CASES
@given(st.integers(2, 5), st.data())
def test_sinr_monotone_and_scale_invariant(n, data):
    g = np.array(data.draw(st.lists(gain, min_size=n * n, max_size=n * n))).reshape(n, n)
    topo = Topology.from_gains(g)
    p = data.draw(st.lists(power, min_size=n, max_size=n))
    phi = data.draw(st.floats(0.0, 1e-9))
    sigma = data.draw(st.floats(1e-13, 1e-9))
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, n - 1))
    k = data.draw(st.floats(1.01, 10.0))
    base = sinr(i, p, topo, phi, sigma)
    up = list(p)
    up[i] *= k
    assert sinr(i, up, topo, phi, sigma) > base
    if j != i:
        other = list(p)
        other[j] *= k
        assert sinr(i, other, topo, phi, sigma) <= base
    assert sinr(i, p, topo, phi * k, sigma) <= base
    assert sinr(i, p, topo, phi, sigma * k) < base
    c = data.draw(st.floats(1e-3, 1e3))
    scaled = sinr(i, [c * x for x in p], topo, c * phi, c * sigma)
    assert math.isclose(scaled, base, rel_tol=1e-12)


@CASES
@given(st.integers(1, 12), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_power_level_affine_bijection(m, p_min, width, mask):
    p_max_eff = min(p_min + width, max(mask, p_min))
    lv = [power_level(a, m, p_min, p_max_eff) for a in range(m + 1)]
    assert lv[0] == p_min
    assert math.isclose(lv[-1], p_max_eff, rel_tol=1e-12)
    steps = np.diff(lv)
    assert np.allclose(steps, (p_max_eff - p_min) / m, rtol=1e-9, atol=1e-15)
    if p_max_eff > p_min:
        assert len(set(lv)) == m + 1


@CASES
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.99), st.floats(1.0, 1e7))
def test_q_values_stay_bounded(seed, beta, r_max):
    rng = np.random.default_rng(seed)
    Q = np.zeros((4, 2))
    bound = r_max / (1.0 - beta)
    for _ in range(200):
        s, a, sn = int(rng.integers(4)), int(rng.integers(2)), int(rng.integers(4))
        q_update_conjecture(Q, s, a, float(rng.uniform(0, r_max)), float(rng.uniform()),
                            sn, float(rng.uniform()), beta)
        assert Q.min() >= 0.0
        assert Q.max() <= bound * (1 + 1e-12)


@CASES
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(1e-3, 100.0), st.integers(1, 50))
def test_conjecture_fixed_point(c, pi, omega, reps):
    x = c
    for _ in range(reps):
        x = update_conjecture(x, pi, pi, omega)
    assert x == c


_FIG3 = config.load_config("fig3.json")


@CASES
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6))
def test_config_seed_determines_csv(seed, slots):
    cfg = _FIG3.with_overrides(**{"run.seed": seed, "run.episode_length": slots,
                                   "run.num_episodes": 1})
    texts = []
    for _ in range(2):
        scen = config.to_scenario(config.parse_config(cfg.canonical_json()))
        series = harness.run_experiment(scen, cfg.run.seed)
        texts.append(csvio.render_csv(csvio.series_rows(cfg.experiment_id, series),
                                      csvio.RESULT_COLUMNS,
                                      {"seed": seed, "config_sha256": cfg.sha256()}))
    assert texts[0] == texts[1]
