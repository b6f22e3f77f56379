"""Command-line entry point.

    mflab train|sweep|generalize|audit|bounds --config cfg.json
          [--out DIR] [--seed N] [--grad-scaling meanfield|raw]
          [--noise-variance-literal]

Options override the corresponding config keys; the effective config is
echoed into the output directory so artifacts are self-describing.
"""

import argparse
import json
import sys

from . import config as config_mod
from . import harness


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mflab",
        description="particle-ensemble simulator and bound-audit toolkit "
                    "for scaled two-layer networks")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in config_mod.KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=False, default=None,
                       help="JSON experiment config (defaults to the "
                            "desk-scale preset)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override hyper.seed")
        p.add_argument("--grad-scaling", choices=config_mod.GRAD_SCALINGS,
                       default=None, help="override grad_scaling")
        p.add_argument("--noise-variance-literal", action="store_true",
                       help="read the noise parameter as a variance instead "
                            "of a standard deviation")
    return parser


def effective_config(args) -> config_mod.ExperimentConfig:
    if args.config is not None:
        cfg = config_mod.load(args.config)
    else:
        cfg = config_mod.default_config(args.command)
    raw = cfg.to_dict()
    raw["kind"] = args.command
    if args.seed is not None:
        raw["hyper"]["seed"] = args.seed
    if args.grad_scaling is not None:
        raw["grad_scaling"] = args.grad_scaling
    if args.noise_variance_literal:
        raw["noise_variance_literal"] = True
    if args.out is not None:
        raw["out"] = args.out
    return config_mod.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
    except config_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = cfg.out
    if args.command == "train":
        report = harness.run_train(cfg, out=out)
        print(json.dumps(report.summary(), sort_keys=True))
    elif args.command == "sweep":
        report = harness.run_sweep(cfg, out=out)
        print(json.dumps({"slopes": report.slopes,
                          "failures": len(report.failures)}, sort_keys=True))
    elif args.command == "generalize":
        report = harness.run_generalize(cfg, out=out)
        print(json.dumps({"median_test_01": {str(k): v for k, v
                                             in report.medians.items()},
                          "trend_strictly_decreasing":
                              report.trend_strictly_decreasing},
                         sort_keys=True))
    elif args.command == "audit":
        audits = harness.run_audit(cfg, out=out)
        print(json.dumps({"pass": audits["pass"]}, sort_keys=True))
    elif args.command == "bounds":
        result = harness.run_bounds(cfg, out=out)
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
