"""Command-line entry point.

    lucidtab <stage> --out runs/demo [--config run.ini] [--seed 42] [--quiet]

Stages: ingest, preprocess, select, tune, train, evaluate, explain, report,
and `all` to chain everything. `run --stage <name>` is accepted as an
alternative spelling. Exit codes: 0 ok, 2 config error, 3 data error,
4 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import ConfigError, DataError, LucidtabError
from .manifest import STAGE_ORDER
from .pipeline import run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_STAGE = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="INI config file; omitted keys fall back to defaults")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--out", required=True, help="run directory for artifacts and the manifest")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lucidtab", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_ORDER + ["all"]:
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage in order")
        _add_common(p)
    run_p = sub.add_parser("run", help="run a stage named via --stage")
    _add_common(run_p)
    run_p.add_argument("--stage", required=True, choices=STAGE_ORDER + ["all"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log = logging.getLogger("lucidtab")
    stage = args.stage if args.command == "run" else args.command
    try:
        overrides = {}
        if args.seed is not None:
            overrides["run.seed"] = str(args.seed)
        cfg = load_config(args.config, overrides)
        manifest = run_stage(stage, cfg, args.out)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except LucidtabError as exc:
        log.error("stage failure: %s", exc)
        return EXIT_STAGE
    if not args.quiet:
        done = [s for s, info in manifest.doc["stages"].items() if info["status"] == "ok"]
        log.info("completed stages: %s", ", ".join(done))
        if manifest.doc.get("metrics"):
            m = manifest.doc["metrics"]
            log.info(
                "test metrics: accuracy=%.4f precision=%.4f recall=%.4f auc=%.4f",
                m["accuracy"], m["precision"], m["recall"], m["roc_auc"],
            )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
