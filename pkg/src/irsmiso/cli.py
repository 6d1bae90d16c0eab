"""Command-line entry point.

    irsmiso <scenario> [--config FILE] [--seed U64] [--trials N]
                       [--out CSV] [--protocol P] [--csi MODE] [key=value ...]

Scenarios: nmse, ber, rate-single, subphase, minrate-n, converge. Config-file
keys mirror the scenario parameters; command-line key=value pairs and the
named flags override them. Exits 0 on success, nonzero with a diagnostic on
validation or solver failure.
"""

import argparse
import sys

from .experiments import SCENARIOS, Scenario, _parse_value, read_config, \
    run_scenario, write_csv

PROTOCOL_CHOICES = ("mmse-dft", "ls-dft", "mmse-onoff", "ls-onoff")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="irsmiso",
        description="IRS-assisted multi-user MISO simulator")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", default=None,
                        help="key = value parameter file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--out", default=f"{name.replace('-', '_')}.csv")
        sp.add_argument("--protocol", choices=PROTOCOL_CHOICES, default=None)
        sp.add_argument("--csi", choices=("perfect", "imperfect"),
                        default=None)
        sp.add_argument("overrides", nargs="*", metavar="key=value",
                        help="direct parameter overrides")
    return parser


DEFAULT_TRIALS = {"nmse": 2000, "ber": 200, "rate-single": 200,
                  "subphase": 50, "minrate-n": 20, "converge": 10}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        params = read_config(args.config) if args.config else {}
        for item in args.overrides:
            if "=" not in item:
                raise ValueError(f"override {item!r} is not key=value")
            key, _, text = item.partition("=")
            params[key.strip()] = _parse_value(text.strip())
        trials = args.trials
        if trials is None:
            trials = int(params.pop("trials", DEFAULT_TRIALS[args.scenario]))
        else:
            params.pop("trials", None)
        seed = int(params.pop("seed", args.seed))
        out = params.pop("out", args.out)
        if args.protocol is not None:
            params["protocol"] = args.protocol
        if args.csi is not None:
            params["csi"] = args.csi
        scenario = Scenario(name=args.scenario, params=params, trials=trials,
                            seed=seed)
        table = run_scenario(scenario)
        write_csv(table, out)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"irsmiso: error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(table.rows)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
