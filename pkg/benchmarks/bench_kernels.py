"""Compare the compiled episode kernel with the pure-Python engine.

    python3 benchmarks/bench_kernels.py [--slots 2000] [--repeat 3]

Both backends consume the same random streams, so the script also checks
that their traces agree bit for bit.
"""
import argparse
import time
from dataclasses import replace

import numpy as np

from cogmesh import config, engine, harness
from cogmesh.learning import learning_rate_schedule
from cogmesh.radio import RadioEnv


def _episode(scen, seed, backend):
    topo_ss, pu_rng, agent_rngs = harness._episode_rngs(seed, scen.num_su)
    env = RadioEnv(harness.scenario_topology(scen, seed), scen.radio)
    T = scen.episode_length
    streams = engine.EpisodeStreams.draw(T, env.topology.num_pu, pu_rng, agent_rngs)
    lp = scen.learn
    alpha = learning_rate_schedule(T, lp.alpha0, lp.theta, lp.alpha_min)
    return engine.run_episode_arrays(env, lp, alpha, streams, scen.conjecture_mode,
                                     scen.conjecture_init, backend=backend)


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--slots", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if engine._kernel is None:
        print("compiled kernel not built; only the Python engine is available")
    print(f"{'config':<12}{'mode':<12}{'python s':>10}{'compiled s':>12}{'speedup':>9}  identical")
    for name in ("fig3.json", "fig5.json"):
        cfg = config.load_config(name).with_overrides(**{"run.episode_length": args.slots})
        base = config.to_scenario(cfg)
        for mode in ("linear_eq9", "full_info"):
            scen = replace(base, conjecture_mode=mode)
            tp, a = _best(lambda: _episode(scen, 0, "python"), args.repeat)
            if engine._kernel is None:
                print(f"{name:<12}{mode:<12}{tp:>10.3f}{'-':>12}{'-':>9}  -")
                continue
            tc, b = _best(lambda: _episode(scen, 0, "compiled"), args.repeat)
            same = all(np.array_equal(getattr(a, f), getattr(b, f))
                       for f in ("actions", "rewards", "conjectures", "strategies"))
            print(f"{name:<12}{mode:<12}{tp:>10.3f}{tc:>12.4f}{tp / tc:>9.0f}  {same}")


if __name__ == "__main__":
    main()
