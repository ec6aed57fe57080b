"""Command-line entry point for the experiment harness."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (ConfigError, ConfigValueError, parse_config, run_gradcheck,
                      run_nmse_sweep, run_optimize, run_rate_cdf, run_spectra)

DEFAULT_NMSE_POWERS = "-10,-5,0,5,10,15,20,25,30"


def _add_common(parser):
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed")
    parser.add_argument("--out", default="runs", help="output directory")
    parser.add_argument("--preset", choices=("paper", "desk"), default="paper",
                        help="base parameter set to start from")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risveil",
        description="RIS-assisted secure ISAC experiments: phase optimization, "
                    "MUSIC sensing for BS and wiretapper, rate benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectra", help="one scene: optimize and emit MUSIC spectra")
    _add_common(p)

    p = sub.add_parser("nmse", help="NMSE of both parties across a power sweep")
    _add_common(p)
    p.add_argument("--powers", default=DEFAULT_NMSE_POWERS,
                   help="comma-separated transmit powers in dBm")
    p.add_argument("--trials", type=int, default=20, help="trials per power point")

    p = sub.add_parser("rate-cdf", help="rate CDFs for optimized/random/identity RIS")
    _add_common(p)
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("optimize", help="optimize a single scene and dump the phases")
    _add_common(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of the gradient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-6)
    return parser


def _config_from(args) -> "ScenarioConfig":
    overrides = {"seed": args.seed} if args.seed is not None else {}
    return parse_config(path=args.config, overrides=overrides, preset=args.preset)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "spectra":
            result = run_spectra(_config_from(args), args.out)
        elif args.command == "nmse":
            try:
                powers = [float(p) for p in args.powers.split(",") if p.strip()]
            except ValueError as exc:
                raise ConfigValueError(f"powers: {exc}") from exc
            result = run_nmse_sweep(_config_from(args), powers, args.trials, args.out)
        elif args.command == "rate-cdf":
            result = run_rate_cdf(_config_from(args), args.trials, args.out)
        elif args.command == "optimize":
            result = run_optimize(_config_from(args), args.out)
        elif args.command == "gradcheck":
            result = run_gradcheck(instances=args.instances, seed=args.seed,
                                   step=args.step)
            for rec in result.records:
                print(f"instance {rec['instance']:3d}  rho {rec['rho']:.1f}  "
                      f"rel_err_fixed {rec['rel_err_fixed']:.3e}  "
                      f"rel_err_full {rec['rel_err_full']:.3e}")
            worst = result.summary["worst_rel_err_fixed"]
            print(f"worst fixed-combiner relative error: {worst:.3e}")
            return 0 if worst < 1e-6 else 1
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except Exception as exc:  # keep the promise of a machine-readable error line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    print(f"{result.experiment}: {len(result.records)} records in "
          f"{result.wall_clock:.1f}s -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
