# src/acvspectra/harness/app.py

import argparse
import logging
import sys
from typing import Dict, List, Optional

import pandas as pd

from acvspectra import config as cfg
from acvspectra.errors import ConfigError, GuardError
from acvspectra.harness.app_functions import (
    n_list_check,
    output_dir,
    resolve_config,
    write_csv,
    write_json,
)
from acvspectra.harness.experiments import (
    FIGURE1_PANELS,
    ExperimentConfig,
    compare,
    run_ensemble,
    run_figure1,
    run_limit_moments,
)
from acvspectra.moments.momentcalc import DEFAULT_MC_SAMPLES
from acvspectra.moments.oracle import exact_moment_small, extrapolate_moment
from acvspectra.timeseries.process import process_from_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acvspectra",
        description="Seeded spectral experiments for sample autocovariance matrices of linear processes.",
    )
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--workers", type=int, help="worker threads; never changes results")
    parser.add_argument("--out-dir", help="directory for CSV/JSON outputs")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("simulate-esd", help="pooled ESD, trace moments and density grid of one ensemble")
    commands.add_parser("limit-moments", help="limit moments beta_h next to ensemble trace moments")
    compare_lsd = commands.add_parser("compare-lsd", help="d_BL between two ensembles or against f_X(U)")
    compare_lsd.add_argument("--against", help="config of the second ensemble")
    commands.add_parser("figure1", help="AR(1) density panels with the Sigma_n overlay")
    oracle = commands.add_parser("oracle", help="exact small-n moments under Rademacher innovations")
    oracle.add_argument("--n", type=int, action="append", help="dimension (repeatable)")
    oracle.add_argument("--h", type=int, default=2, help="moment order")
    return parser


def _with_default_process(config: Dict[str, str]) -> Dict[str, str]:
    if "theta" not in config and "phi" not in config:
        config["theta"] = "1"
    return config


def simulate_esd(config: Dict[str, str]) -> None:
    result = run_ensemble(ExperimentConfig.from_config(config))
    out = output_dir(config)
    echo = result.config.to_config()
    write_csv(result.pooled.to_frame()[["x"]].rename(columns={"x": "eigenvalue"}), out / "esd.csv", echo)
    write_csv(result.mean_moments(), out / "moments.csv", echo)
    write_csv(result.summary, out / "summary.csv", echo)
    write_csv(result.density().to_frame(), out / "density.csv", echo)
    write_csv(pd.DataFrame([result.distances]), out / "distances.csv", echo)


def limit_moments(config: Dict[str, str]) -> None:
    process = process_from_config(config)
    h_max = cfg.get_int(config, "h_max", 4)
    reports, table = run_limit_moments(
        process,
        h_max,
        mc_samples=cfg.get_int(config, "mc_samples", DEFAULT_MC_SAMPLES),
        seed=cfg.get_int(config, "seed", 0),
        n=cfg.get_int(config, "n", 3000),
        replicates=cfg.get_int(config, "replicates", 50),
        workers=cfg.get_int(config, "workers", 1),
    )
    out = output_dir(config)
    for report in reports:
        write_json(report.to_dict(), out / f"moments_h{report.h}.json", config)
    write_csv(table, out / "comparison.csv", config)


def compare_lsd(config: Dict[str, str], against: Optional[str]) -> None:
    first = run_ensemble(ExperimentConfig.from_config(config))
    if against is None:
        distances = {"dbl": first.distances["dbl_reference"], "ks": first.distances["ks_reference"]}
    else:
        other = _with_default_process(resolve_config(
            against, seed=cfg.get_int(config, "seed"), workers=cfg.get_int(config, "workers"),
        ))
        second = run_ensemble(ExperimentConfig.from_config(other), reference=first.reference)
        distances = compare(first, second)
    logger.info("d_BL = %.4f, KS = %.4f", distances["dbl"], distances["ks"])
    write_csv(pd.DataFrame([distances]), output_dir(config) / "distances.csv", config)


def figure1(config: Dict[str, str]) -> None:
    result = run_figure1(
        master_seed=cfg.get_int(config, "seed", 0),
        n=cfg.get_int(config, "n", 1000),
        replicates=cfg.get_int(config, "replicates", 100),
        workers=cfg.get_int(config, "workers", 1),
    )
    out = output_dir(config)
    for name in FIGURE1_PANELS + ("sigma",):
        write_csv(result.densities[name].to_frame(), out / f"density_{name}.csv",
                  result.ensembles[name].config.to_config())
    rows = [{"panel": name, **ensemble.distances} for name, ensemble in result.ensembles.items()]
    rows.append({"panel": "banded_m10_vs_sigma", "dbl_reference": result.overlay_distance})
    write_csv(pd.DataFrame(rows), out / "distances.csv", result.ensembles["gamma"].config.to_config())


def oracle(config: Dict[str, str], ns: Optional[List[int]], h: int) -> None:
    check = n_list_check(ns)
    if not check["valid"]:
        raise ConfigError(check["error"])
    theta = process_from_config(config).theta
    ns = check["value"]
    table = pd.DataFrame({"n": ns, "moment": [exact_moment_small(theta, n, h) for n in ns]})
    table.insert(0, "h", h)
    out = output_dir(config)
    write_csv(table, out / "oracle.csv", config)
    if len(ns) >= 3:
        limit = extrapolate_moment(table["n"], table["moment"])
        logger.info("extrapolated beta_%d = %.6g", h, limit)
        write_csv(pd.DataFrame([{"h": h, "limit": limit}]), out / "oracle_limit.csv", config)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _with_default_process(resolve_config(args.config, args.seed, args.workers, args.out_dir))
        if args.command == "simulate-esd":
            simulate_esd(config)
        elif args.command == "limit-moments":
            limit_moments(config)
        elif args.command == "compare-lsd":
            compare_lsd(config, args.against)
        elif args.command == "figure1":
            figure1(config)
        else:
            oracle(config, args.n, args.h)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except GuardError as exc:
        logger.error("guard violation: %s", exc)
        return EXIT_GUARD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
