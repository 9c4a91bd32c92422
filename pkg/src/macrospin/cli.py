"""Command-line entry point: `macrospin <experiment> --config <file>`.

Exit codes: 0 success, 1 validation error, 2 invariant violation, 3 I/O
error.  MACROSPIN_THREADS is the fallback for --threads.
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import EXPERIMENT_KINDS, ConfigError, InvariantViolation, parse_config, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macrospin",
        description=(
            "Coarse-grained spin measurement laboratory. Each experiment reads a "
            "strict JSON config and writes CSV artifacts plus summary.json; "
            "identical config and seed produce byte-identical outputs."
        ),
        epilog=(
            "config keys: see the JSON schema per experiment in "
            "macrospin.experiments.SCHEMAS. delta_m accepts an integer, a list, "
            "'doubling', or 'c*sqrt(j)' (rounded up). Exit codes: 0 ok, "
            "1 invalid config, 2 invariant violation, 3 I/O error."
        ),
        exit_on_error=False,
    )
    parser.add_argument("experiment", choices=EXPERIMENT_KINDS, help="experiment kind to run")
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    parser.add_argument("--out", default=None, help="output directory (default: config out_dir or ./macrospin-<kind>)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads for sweep points (default: MACROSPIN_THREADS or 1)",
    )
    parser.add_argument("--plot", action="store_true", help="also render matplotlib figures next to the CSVs")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except argparse.ArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:  # --help or argparse-internal exits
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    threads = args.threads
    if threads is None:
        try:
            threads = int(os.environ.get("MACROSPIN_THREADS", "1"))
        except ValueError:
            print("error: MACROSPIN_THREADS must be an integer", file=sys.stderr)
            return EXIT_CONFIG
    if threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        with open(args.config, "r") as fh:
            text = fh.read()
    except OSError as e:
        print(f"error reading config: {e}", file=sys.stderr)
        return EXIT_IO

    try:
        cfg = parse_config(args.experiment, text)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or cfg.data.get("out_dir") or f"macrospin-{args.experiment}"

    try:
        run(cfg, out_dir, threads=threads)
    except InvariantViolation as e:
        print(f"error: {e}", file=sys.stderr)
        print(f"summary written to {out_dir}/summary.json", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error writing artifacts: {e}", file=sys.stderr)
        return EXIT_IO

    if args.plot:
        try:
            from .plots import render

            figures = render(args.experiment, out_dir)
            for fig_path in figures:
                print(f"figure: {fig_path}")
        except OSError as e:
            print(f"error rendering figures: {e}", file=sys.stderr)
            return EXIT_IO

    print(f"ok: artifacts in {out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
