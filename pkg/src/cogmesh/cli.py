"""Command-line entry point: ``cogmesh {run,sweep,oracle,contraction,topology}``.

Exit status is 0 on success, 2 for configuration errors and 1 for any
other failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

import numpy as np

from . import __version__, csvio, harness, oracle
from .config import RunConfig, load_config, to_scenario
from .errors import ConfigError
from .radio import RadioEnv

log = logging.getLogger("cogmesh")

TOPOLOGY_COLUMNS = ("section", "i", "j", "tx_x", "tx_y", "rx_x", "rx_y", "gain")
CONTRACTION_COLUMNS = ("tau", "beta", "pairs", "box", "max_ratio", "mean_ratio", "contracts")


def _parse_values(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError("--values is empty")
    return vals


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cogmesh", description="Conjecture-based Q-learning "
                                "power control simulator for cognitive radio links.")
    p.add_argument("--version", action="version", version=f"cogmesh {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config file or shipped config name")
        sp.add_argument("--seed", type=int, help="base seed (overrides run.seed)")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        return sp

    for name, help_ in (("run", "average episodes of one scenario"),
                        ("sweep", "one experiment per parameter value")):
        sp = common(sub.add_parser(name, help=help_))
        sp.add_argument("--episodes", type=int, help="override run.num_episodes")
        sp.add_argument("--slots", type=int, help="override run.episode_length")
        if name == "sweep":
            sp.add_argument("--param", choices=sorted(harness.SWEEP_PARAMS),
                            help="swept parameter (overrides sweep.param)")
            sp.add_argument("--values", help="comma separated values (overrides sweep.values)")
    common(sub.add_parser("oracle", help="joint-action reward table, pure NE flags and optimum"))
    sp = common(sub.add_parser("contraction", help="empirical contraction ratio of the backup"))
    sp.add_argument("--values", help="comma separated temperatures (default: around the Q box)")
    sp.add_argument("--pairs", type=int, default=200, help="random Q pairs per temperature")
    common(sub.add_parser("topology", help="generated link geometry and gains"))
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["run.seed"] = args.seed
    if getattr(args, "episodes", None) is not None:
        over["run.num_episodes"] = args.episodes
    if getattr(args, "slots", None) is not None:
        over["run.episode_length"] = args.slots
    if args.command == "sweep":
        if args.param is not None or args.values is not None:
            param = args.param or (cfg.sweep.param if cfg.sweep else None)
            if param is None:
                raise ConfigError("--param is required when the config has no sweep section")
            values = (_parse_values(args.values) if args.values is not None
                      else (cfg.sweep.values if cfg.sweep else None))
            if values is None:
                raise ConfigError("--values is required when the config has no sweep section")
            over["sweep"] = {"param": param, "values": values}
        elif cfg.sweep is None:
            raise ConfigError("config has no sweep section; pass --param and --values")
    return cfg.with_overrides(**over) if over else cfg


def _metadata(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "seed": cfg.run.seed,
        "episode_length": cfg.run.episode_length,
        "num_episodes": cfg.run.num_episodes,
        "config_sha256": cfg.sha256(),
        "config": cfg.canonical_json(),
    }


def _emit(rows, columns, meta, out: str | None):
    if out is None:
        sys.stdout.write(csvio.render_csv(rows, columns, meta))
    else:
        csvio.write_csv(rows, out, meta, columns)
        log.info("wrote %s", out)


def _cmd_run(cfg: RunConfig, args) -> None:
    scen = to_scenario(cfg)
    series = harness.run_experiment(scen, cfg.run.seed)
    rows = csvio.series_rows(cfg.experiment_id, series)
    _emit(rows, csvio.RESULT_COLUMNS, _metadata(cfg, "run"), args.out)


def _cmd_sweep(cfg: RunConfig, args) -> None:
    scen = to_scenario(cfg)
    fam = harness.sweep(scen, cfg.sweep.param, cfg.sweep.values, cfg.run.seed)

    def rows():
        for v, s in fam:
            yield from csvio.series_rows(cfg.experiment_id, s, cfg.sweep.param, v)

    _emit(rows(), csvio.RESULT_COLUMNS, _metadata(cfg, "sweep"), args.out)


def _cmd_oracle(cfg: RunConfig, args) -> None:
    scen = to_scenario(cfg)
    env = RadioEnv(harness.scenario_topology(scen, cfg.run.seed), scen.radio)
    n = env.radio.n_actions
    table, _, opt = oracle.episode_oracle(env)
    N = len(n)
    columns = ("section", "label", "pure_ne") + tuple(f"agent_{i}" for i in range(N))

    def rows():
        for ja in np.ndindex(*n):
            ne = oracle.check_pure_ne(ja, table)
            yield ("table", "|".join(map(str, ja)), ne.is_ne) + tuple(float(x) for x in table[ja])
        for k in range(len(opt.weights)):
            bits = "".join("1" if b else "0" for b in opt.patterns[k])
            yield (("optimum", f"pu={bits or '-'};weight=" + csvio.format_value(opt.weights[k]), "")
                   + tuple(float(x) for x in opt.per_pattern[k]))
            yield (("argmax", f"pu={bits or '-'}", "")
                   + tuple("|".join(map(str, opt.argmax[k, i])) for i in range(N)))
        yield ("optimum", "kappa_average", "") + tuple(float(x) for x in opt.kappa_average)

    _emit(rows(), columns, _metadata(cfg, "oracle"), args.out)


def _cmd_contraction(cfg: RunConfig, args) -> None:
    scen = to_scenario(cfg)
    env = RadioEnv(harness.scenario_topology(scen, cfg.run.seed), scen.radio)
    lp = scen.learn
    box = oracle.max_realized_reward(env) / (1.0 - lp.beta)
    taus = (_parse_values(args.values) if args.values is not None
            else [box * f for f in (0.01, 0.1, 1.0, 10.0, 100.0)])
    if any(t <= 0 for t in taus):
        raise ConfigError("temperatures must be positive")
    if args.pairs < 1:
        raise ConfigError("--pairs must be >= 1")
    rng = np.random.default_rng(cfg.run.seed)
    threshold, results = oracle.locate_contraction_threshold(env, taus, args.pairs, rng,
                                                             lp.beta, lp.omega)
    rows = [(r.tau, lp.beta, len(r.ratios), r.box, r.max_ratio,
             float(r.ratios.mean()) if r.ratios.size else float("nan"), r.max_ratio < 1.0)
            for r in results]
    meta = _metadata(cfg, "contraction")
    meta["threshold_tau"] = "none" if threshold is None else csvio.format_value(threshold)
    _emit(rows, CONTRACTION_COLUMNS, meta, args.out)


def _cmd_topology(cfg: RunConfig, args) -> None:
    scen = to_scenario(cfg)
    topo = harness.scenario_topology(scen, cfg.run.seed)
    nan = float("nan")

    def rows():
        for name, links in (("su_link", topo.su_links), ("pu_link", topo.pu_links)):
            for i, (tx, rx) in enumerate(links):
                yield (name, i, "", tx[0], tx[1], rx[0], rx[1], nan)
        for (j, i), g in np.ndenumerate(topo.gains_su):
            yield ("gain_su", j, i, nan, nan, nan, nan, g)
        for (k, i), g in np.ndenumerate(topo.gains_pu_to_su):
            yield ("gain_pu_to_su", k, i, nan, nan, nan, nan, g)

    _emit(rows(), TOPOLOGY_COLUMNS, _metadata(cfg, "topology"), args.out)


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "oracle": _cmd_oracle,
            "contraction": _cmd_contraction, "topology": _cmd_topology}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors are configuration errors
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"cogmesh: config error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001 - CLI boundary
        log.debug("failure", exc_info=True)
        print(f"cogmesh: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
