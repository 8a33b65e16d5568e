import numpy as np
import pytest

from cogmesh import config
from cogmesh.learning import LearnParams
from cogmesh.radio import RadioEnv, RadioParams, SUParams, Topology


def small_env(gains_su, gains_pu=None, levels=1, kappa=0.0, thr=0.0, p_min=0.1, p_max=0.2,
              noise=1e-10, pu_power=0.2):
    g = np.asarray(gains_su, dtype=float)
    n = g.shape[0]
    radio = RadioParams(bandwidth=1e6, noise=noise, gap=1.0, pu_power=pu_power,
                        pu_activity=kappa, power_mask=0.2,
                        su=tuple(SUParams(p_min, p_max, thr, levels) for _ in range(n)))
    return RadioEnv(Topology.from_gains(g, gains_pu), radio)


@pytest.fixture
def two_by_two():
    cfg = config.load_config("two_by_two.json")
    scen = config.to_scenario(cfg)
    return scen, RadioEnv(scen.topology, scen.radio)


@pytest.fixture
def learn_params():
    return LearnParams()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
