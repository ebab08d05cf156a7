"""Command line entry point: ``iomt-xai {preprocess,train,explain,report,run-all}``.

Exit codes: 0 success, 1 internal error, 2 config/precondition error,
3 data error. Failures print a JSON error document on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .errors import ConfigError, DataError, PreconditionError
from .pipeline import (
    METHODS,
    PipelineConfig,
    cmd_explain,
    cmd_preprocess,
    cmd_report,
    cmd_train,
    write_run_metadata,
)

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3


def _methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {','.join(METHODS)}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="bundle directory (overrides config output_dir)")
    common.add_argument("--canonical-output", action="store_true",
                        help="omit timings/timestamps so identical runs give byte-identical bundles")

    parser = argparse.ArgumentParser(prog="iomt-xai", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("preprocess", parents=[common], help="clean, scale and rebalance the input CSV")
    sub.add_parser("train", parents=[common], help="train the configured model and write metrics")
    explain = sub.add_parser("explain", parents=[common], help="explain test-split instances")
    explain.add_argument("--instance", type=int, action="append",
                         help="test-split row index to explain (repeatable)")
    explain.add_argument("--methods", type=_methods, help="comma-separated subset of shap,lime,dice")
    explain.add_argument("--svg", action="store_true", default=None, help="also write an SVG force plot")
    sub.add_parser("report", parents=[common], help="render summary.txt from a bundle")
    run_all = sub.add_parser("run-all", parents=[common], help="preprocess, train, explain and report")
    run_all.add_argument("--instance", type=int, action="append")
    run_all.add_argument("--methods", type=_methods)
    run_all.add_argument("--svg", action="store_true", default=None)
    return parser


def _error(exc: BaseException, code: int) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = PipelineConfig.load(
            args.config,
            seed=args.seed,
            output_dir=args.out,
            instances=getattr(args, "instance", None),
            methods=getattr(args, "methods", None),
            svg=getattr(args, "svg", None),
        )
        if args.command == "report":
            print(cmd_report(cfg), end="")
            return EXIT_OK
        steps = {
            "preprocess": [cmd_preprocess],
            "train": [cmd_train],
            "explain": [cmd_explain],
            "run-all": [cmd_preprocess, cmd_train, cmd_explain, cmd_report],
        }[args.command]
        timings = {}
        for fn in steps:
            t0 = time.perf_counter()
            result = fn(cfg)
            timings[fn.__name__.removeprefix("cmd_")] = time.perf_counter() - t0
        if args.command == "run-all":
            write_run_metadata(cfg, list(timings), timings, args.canonical_output)
            print(result, end="")
        return EXIT_OK
    except (ConfigError, PreconditionError) as exc:
        return _error(exc, EXIT_CONFIG)
    except DataError as exc:
        return _error(exc, EXIT_DATA)
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        return _error(exc, EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
