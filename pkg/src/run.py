# enable type annotation syntax on Python versions earlier than 3.9
from __future__ import annotations

from pprint import pprint

# load .env defaults (LGI_SEED, LGI_RESOLUTION, ...) before reading any configuration
from dotenv import load_dotenv

load_dotenv()

import argparse
import dataclasses
import json
import logging
import math
import pathlib
import sys
from typing import Optional, Sequence

import pandas as pd
from scipy.optimize import brentq

from hidden_lgi import filters, nonlocality, theory
from hidden_lgi.config import LOG_LEVELS, OUTPUT_FORMATS, RunDefaults, SweepConfig, load_sweep_config
from hidden_lgi.errors import InvalidConfig, LgiError
from hidden_lgi.expsim import NOISE_PRESETS, NoiseModel, experiment_point
from hidden_lgi.quantum import MeasurementScenario, amplitude_damping, load_channel
from hidden_lgi.temporal import (
    CLASSICAL_BOUND,
    chsh_evaluate,
    filtered_two_time_distribution,
    get_scenario,
    get_scenario_names,
    two_time_distribution,
)

logger = logging.getLogger("run")

FLOAT_FORMAT = "%.15g"
SWEEP_COLUMNS = ["v", "D", "B_unfiltered", "B_filtered", "N", "violated_unfiltered", "violated_filtered"]
EXPERIMENT_COLUMNS = ["v", "D", "filtered", "shots", "replicates", "mean_B", "err_B", "seed"]


def parse_flag(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


# sweep the amplitude-damping family over v for each filter loss D
def sweep_rows(config: SweepConfig) -> pd.DataFrame:
    scen = config.measurement_scenario()
    rows = []
    for D in config.d_values:
        pre, post = filters.sppo_pair(D)
        for v in config.v_grid():
            ch = amplitude_damping(v)
            unfiltered = chsh_evaluate(two_time_distribution(ch, scen))
            row = {"v": float(v), "D": D, "B_unfiltered": unfiltered.value,
                   "B_filtered": math.nan, "N": math.nan,
                   "violated_unfiltered": unfiltered.violated, "violated_filtered": False}
            if config.filtered:
                stats = filtered_two_time_distribution(ch, pre.as_map(), post.as_map(), scen)
                report = chsh_evaluate(stats)
                row.update(B_filtered=report.value, N=float(stats.filter_success.min()),
                           violated_filtered=report.violated)
            rows.append(row)
    logger.info("swept %d points over D = %s", len(rows), list(config.d_values))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def classify_channel(path: str, resolution: int, activation_search: str, nonlocality_search: str,
                     scen: MeasurementScenario) -> dict:
    ch = load_channel(path)
    unfiltered = chsh_evaluate(two_time_distribution(ch, scen))
    activation = filters.activate(ch, scen, activation_search, resolution)
    verdict = nonlocality.strongly_breaking_assessment(ch, resolution, nonlocality_search)
    return {
        "channel": str(path),
        "scenario": scen.name,
        "chsh": unfiltered.to_dict(),
        "activation": activation.to_dict(),
        "nonlocality": verdict.to_dict(),
    }


def numeric_threshold(D: float, scen: MeasurementScenario) -> float:
    """Largest v at which the simulated amplitude-damping statistics still violate, by root bracketing."""
    pre, post = filters.sppo_pair(D)

    def excess(v: float) -> float:
        ch = amplitude_damping(v)
        if D == 0:
            stats = two_time_distribution(ch, scen)
        else:
            stats = filtered_two_time_distribution(ch, pre.as_map(), post.as_map(), scen)
        return chsh_evaluate(stats).value - CLASSICAL_BOUND

    return brentq(excess, 0.0, 1.0, xtol=1e-12)


def threshold_rows(d_values: Sequence[float], scen: MeasurementScenario) -> pd.DataFrame:
    rows = [{"D": D, "v_closed_form": theory.violation_threshold(D), "v_numeric": numeric_threshold(D, scen)}
            for D in d_values]
    return pd.DataFrame(rows, columns=["D", "v_closed_form", "v_numeric"])


def write_frame(frame: pd.DataFrame, output: Optional[str], fmt: str = "csv") -> None:
    if fmt == "json":
        text = frame.to_json(orient="records", double_precision=15, indent=2) + "\n"
    else:
        text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if output:
        pathlib.Path(output).write_text(text)
        logger.info("wrote %d rows to %s", len(frame), output)
    else:
        sys.stdout.write(text)


def write_json(doc: dict, output: Optional[str]) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if output:
        pathlib.Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def noise_from_args(args) -> NoiseModel:
    base = NOISE_PRESETS[args.noise]()
    overrides = {}
    if args.waveplate_sigma_deg is not None:
        overrides["waveplate_angle_sigma"] = math.radians(args.waveplate_sigma_deg)
    if args.d_sigma is not None:
        overrides["d_relative_sigma"] = args.d_sigma
    if args.polarization_sigma_deg is not None:
        overrides["incident_polarization_sigma"] = math.radians(args.polarization_sigma_deg)
    if args.visibility is not None:
        overrides["interferometer_visibility"] = tuple(args.visibility)
    return dataclasses.replace(base, **overrides)


def v_range_from_args(values: Sequence[float]) -> tuple[float, float, int]:
    start, stop, steps = values
    if not float(steps).is_integer():
        raise InvalidConfig(f"--v-range needs an integer step count, got {steps}")
    return start, stop, int(steps)


def cmd_sweep(args) -> int:
    config = load_sweep_config(args.config) if args.config else SweepConfig()
    v_range = None if args.v_range is None else v_range_from_args(args.v_range)
    config = config.replace(v_range=v_range, d_values=args.D, filtered=args.filtered,
                            scenario=args.scenario, output_path=args.output, format=args.format)
    write_frame(sweep_rows(config), config.output_path, config.format)
    return 0


def cmd_classify(args) -> int:
    scen = get_scenario(args.scenario)
    result = classify_channel(args.channel_file, args.resolution, args.search, args.nonlocality_search, scen)
    write_json(result, args.output)
    if args.summary:
        pprint({"activated": result["activation"]["activated"],
                "strongly_breaking_candidate": result["nonlocality"]["strongly_breaking_candidate"]},
               stream=sys.stderr)
    return 0


def cmd_experiment(args) -> int:
    point = experiment_point(args.v, args.D, bool(args.filtered), args.shots, args.replicates,
                             noise_from_args(args), args.seed)
    write_frame(pd.DataFrame([point.to_row()], columns=EXPERIMENT_COLUMNS), args.output)
    return 0


def cmd_thresholds(args) -> int:
    write_frame(threshold_rows(args.D, get_scenario(args.scenario)), args.output)
    return 0


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors reported as exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser(defaults: RunDefaults) -> ArgumentParser:
    parser = ArgumentParser(prog="run.py", description="Temporal CHSH simulator for qubit channels")
    parser.add_argument("--log-level", help="Logging level", type=str.upper, choices=LOG_LEVELS,
                        default=defaults.log_level)
    subparsers = parser.add_subparsers(dest="command", required=True)

    sweep = subparsers.add_parser("sweep", help="Temporal CHSH curves of amplitude damping over v")
    sweep.add_argument("--config", help="JSON sweep config (flags override it)", type=str)
    sweep.add_argument("--v-range", help="start stop steps", nargs=3, type=float, metavar=("START", "STOP", "STEPS"))
    sweep.add_argument("--D", help="Filter losses, one curve each", nargs="+", type=float)
    sweep.add_argument("--filtered", help="Compute the filtered curves", nargs="?", const=True, type=parse_flag)
    sweep.add_argument("--scenario", help="Measurement scenario", choices=get_scenario_names())
    sweep.add_argument("--output", help="Output file (stdout if omitted)", type=str)
    sweep.add_argument("--format", help="Output format", choices=OUTPUT_FORMATS)
    sweep.set_defaults(handler=cmd_sweep)

    classify = subparsers.add_parser("classify", help="Activation and nonlocality-breaking verdicts for a channel")
    classify.add_argument("channel_file", help="JSON channel document")
    classify.add_argument("--resolution", help="Grid points per loss axis", type=int, default=defaults.resolution)
    classify.add_argument("--search", help="Filter family for the activation search",
                          choices=[f.value for f in filters.SearchFamily], default=filters.SearchFamily.SPPO.value)
    classify.add_argument("--nonlocality-search", help="Filter family for the Choi-state search",
                          choices=[f.value for f in nonlocality.SearchFamily],
                          default=nonlocality.SearchFamily.GENERIC.value)
    classify.add_argument("--scenario", help="Measurement scenario", choices=get_scenario_names(), default="canonical")
    classify.add_argument("--output", help="Output file (stdout if omitted)", type=str)
    classify.add_argument("--summary", help="Print a short verdict to stderr", action="store_true")
    classify.set_defaults(handler=cmd_classify)

    experiment = subparsers.add_parser("experiment", help="Monte Carlo emulation of one data point")
    experiment.add_argument("--v", help="Damping strength", type=float, required=True)
    experiment.add_argument("--D", help="Filter loss", type=float, default=0.45)
    experiment.add_argument("--filtered", help="Insert the filters", nargs="?", const=True, type=parse_flag,
                            default=False)
    experiment.add_argument("--shots", help="Shots per setting pair", type=int, default=defaults.shots)
    experiment.add_argument("--replicates", help="Independent replicates", type=int, default=defaults.replicates)
    experiment.add_argument("--seed", help="Base seed", type=int, default=defaults.seed)
    experiment.add_argument("--noise", help="Noise preset", choices=sorted(NOISE_PRESETS), default="ideal")
    experiment.add_argument("--waveplate-sigma-deg", help="Waveplate angle error half-width", type=float)
    experiment.add_argument("--d-sigma", help="Relative filter loss error half-width", type=float)
    experiment.add_argument("--polarization-sigma-deg", help="Incident polarization error half-width", type=float)
    experiment.add_argument("--visibility", help="Visibility range", nargs=2, type=float, metavar=("LOW", "HIGH"))
    experiment.add_argument("--output", help="Output file (stdout if omitted)", type=str)
    experiment.set_defaults(handler=cmd_experiment)

    thresholds = subparsers.add_parser("thresholds", help="Largest violating v for each filter loss")
    thresholds.add_argument("--D", help="Filter losses", nargs="+", type=float, default=[0.0, 0.45, 0.99])
    thresholds.add_argument("--scenario", help="Measurement scenario", choices=get_scenario_names(),
                            default="canonical")
    thresholds.add_argument("--output", help="Output file (stdout if omitted)", type=str)
    thresholds.set_defaults(handler=cmd_thresholds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        defaults = RunDefaults.from_env()
    except LgiError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    args = build_parser(defaults).parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except LgiError as e:
        logger.debug("command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
