"""Command-line interface.

Verbs: teach, repeat, simulate, generate-dataset, eval-shift. Every run is
driven by a JSON run config (see harness.RunConfig); the resolved config is
echoed into each output directory, and `repeat` defaults to the config
echoed next to the map so a repeat run matches its teach run exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import importlib
import json
import sys
from pathlib import Path

from . import harness, metrics
from .errors import ConfigurationError
from .harness import RunConfig, Scenario
from .histogram import HistogramConfig, estimate_shift
from .sim import NoiseModel


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--config", type=Path, default=None,
                        help="run config JSON (defaults: built-in config)")


def _base_config(args, default: RunConfig | None = None) -> RunConfig:
    config = default or RunConfig()
    if args.config is not None:
        config = harness.load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _apply_run_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "path", None):
        config = dataclasses.replace(config, path_preset=args.path)
    if getattr(args, "platform", None):
        config = dataclasses.replace(config, platform=args.platform)
    if getattr(args, "world", None):
        config = dataclasses.replace(
            config, world=dataclasses.replace(config.world, kind=args.world))
    if getattr(args, "store_shifts", False):
        config = dataclasses.replace(
            config,
            capture=dataclasses.replace(config.capture, store_shifts=True))
    return config


def _scenario_from_args(args) -> Scenario:
    return Scenario(kind=args.scenario, lateral_offset_m=args.offset,
                    start_fraction=args.fraction)


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _cmd_teach(args) -> int:
    config = _apply_run_overrides(_base_config(args), args)
    _print_json(harness.cmd_teach(config, args.out))
    return 0


def _repeat_config(args) -> RunConfig:
    if args.config is None:
        echoed = Path(args.map) / harness.CONFIG_ECHO_NAME
        if echoed.is_file():
            config = harness.load_config(echoed)
            if args.seed is not None:
                config = dataclasses.replace(config, seed=args.seed)
            return config
    return _base_config(args)


def _cmd_repeat(args) -> int:
    config = _apply_run_overrides(_repeat_config(args), args)
    report = harness.cmd_repeat(config, args.map, args.out,
                                _scenario_from_args(args))
    _print_json(report)
    return 0 if report["completed"] else 3


def _cmd_simulate(args) -> int:
    config = _apply_run_overrides(_base_config(args), args)
    result = harness.cmd_simulate(config, args.out, _scenario_from_args(args))
    _print_json(result)
    return 0 if result["repeat"]["completed"] else 3


def _cmd_generate_dataset(args) -> int:
    config = _apply_run_overrides(
        _base_config(args, harness.dataset_run_config()), args)
    noise = NoiseModel.night(seed=config.seed) if args.noise == "night" else None
    summary = harness.cmd_generate_dataset(
        config, args.out, position_count=args.positions,
        position_spacing_m=args.spacing, noise=noise)
    _print_json(summary)
    return 0


def _resolve_estimator(spec: str, histogram_config: HistogramConfig):
    if spec == "histogram":
        def estimator(query, reference):
            return estimate_shift(query, reference, histogram_config)
        return estimator
    # external estimators are addressed as "package.module:function"
    if ":" not in spec:
        raise ConfigurationError(
            f"estimator must be 'histogram' or 'module:function', got {spec!r}")
    module_name, func_name = spec.split(":", 1)
    module = importlib.import_module(module_name)
    return getattr(module, func_name)


def _cmd_eval_shift(args) -> int:
    histogram_config = HistogramConfig(bin_size_px=args.bin_size,
                                       gaussian_sigma_bins=args.sigma)
    estimator = _resolve_estimator(args.estimator, histogram_config)
    metric_config = metrics.MetricConfig(reference_depth=args.reference_depth,
                                         tolerance_px=args.tolerance)
    report = metrics.evaluate(args.dataset, estimator, metric_config)
    if args.out is not None:
        Path(args.out).write_text(report.to_csv())
    sys.stdout.write(report.to_table())
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return 0 if report.complete else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repeatnav",
        description="Appearance-based teach-and-repeat navigation in simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    teach = sub.add_parser("teach", help="record a map along a scripted path")
    _add_common(teach)
    teach.add_argument("--out", type=Path, required=True, help="map directory")
    teach.add_argument("--path", choices=("two_turn_20m", "uav_ramp_15m",
                                          "straight_10m"), default=None)
    teach.add_argument("--platform", choices=("ground", "uav"), default=None)
    teach.add_argument("--world", choices=("open_field", "corridor"),
                       default=None)
    teach.add_argument("--store-shifts", action="store_true",
                       help="precompute shifts between consecutive keyframes")
    teach.set_defaults(func=_cmd_teach)

    repeat = sub.add_parser("repeat", help="repeat a taught map closed-loop")
    _add_common(repeat)
    repeat.add_argument("--map", type=Path, required=True)
    repeat.add_argument("--out", type=Path, required=True)
    repeat.add_argument("--scenario", choices=("normal", "shifted_start",
                                               "start_middle", "degraded"),
                        default="normal")
    repeat.add_argument("--offset", type=float, default=0.30,
                        help="lateral start offset for shifted_start (m)")
    repeat.add_argument("--fraction", type=float, default=0.5,
                        help="start point along the path for start_middle")
    repeat.set_defaults(func=_cmd_repeat, path=None, platform=None, world=None)

    simulate = sub.add_parser("simulate", help="teach then repeat in one run")
    _add_common(simulate)
    simulate.add_argument("--out", type=Path, required=True)
    simulate.add_argument("--path", choices=("two_turn_20m", "uav_ramp_15m",
                                             "straight_10m"), default=None)
    simulate.add_argument("--platform", choices=("ground", "uav"), default=None)
    simulate.add_argument("--world", choices=("open_field", "corridor"),
                          default=None)
    simulate.add_argument("--store-shifts", action="store_true")
    simulate.add_argument("--scenario", choices=("normal", "shifted_start",
                                                 "start_middle", "degraded"),
                          default="normal")
    simulate.add_argument("--offset", type=float, default=0.30)
    simulate.add_argument("--fraction", type=float, default=0.5)
    simulate.set_defaults(func=_cmd_simulate)

    gen = sub.add_parser("generate-dataset",
                         help="render the 9-view shift evaluation dataset")
    _add_common(gen)
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--positions", type=int, default=51)
    gen.add_argument("--spacing", type=float, default=1.0,
                     help="distance between dataset positions (m)")
    gen.add_argument("--noise", choices=("none", "night"), default="none")
    gen.set_defaults(func=_cmd_generate_dataset, path=None, platform=None,
                     world=None)

    ev = sub.add_parser("eval-shift",
                        help="score a shift estimator over a dataset")
    ev.add_argument("--dataset", type=Path, required=True,
                    help="dataset directory or its manifest")
    ev.add_argument("--estimator", default="histogram",
                    help="'histogram' or an external 'module:function'")
    ev.add_argument("--bin-size", type=int, default=4)
    ev.add_argument("--sigma", type=float, default=2.0)
    ev.add_argument("--tolerance", type=float, default=20.0)
    ev.add_argument("--reference-depth", type=float, default=5.0)
    ev.add_argument("--out", type=Path, default=None, help="CSV report path")
    ev.set_defaults(func=_cmd_eval_shift)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
