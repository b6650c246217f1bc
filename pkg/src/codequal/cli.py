"""Command-line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 2 configuration error, 3 missing upstream artifact,
4 backend failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .config import ConfigError, load_run_config
from .corpus import CorpusError
from .gateway import BackendError
from .pipeline import STAGES, MissingArtifactError, ProvenanceError, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_ARTIFACT = 3
EXIT_BACKEND = 4


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="run config YAML path (default: config.yaml)")
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="override the output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the root seed")
    common.add_argument(
        "--set", dest="overrides", action="append", default=argparse.SUPPRESS,
        metavar="KEY=VALUE",
        help="override a config field by dotted path (repeatable)",
    )
    parser = argparse.ArgumentParser(
        prog="codequal",
        description="Estimate functional correctness of generated code and "
                    "evaluate estimator rankings.",
        parents=[common],
    )
    subparsers = parser.add_subparsers(dest="stage", required=True)
    descriptions = {
        "ingest": "load, validate, and split the corpora",
        "generate": "sample candidate solutions from the generator backend",
        "label": "run candidate solutions against their test suites",
        "index": "embed train-split examples into the dual index",
        "predict": "score eval pairs under every configured method",
        "tune": "choose k per few-shot method on the dev set",
        "evaluate": "compute global/local nDCG and the k sweep",
        "report": "assemble the final report and verify provenance",
    }
    for stage in STAGES:
        subparsers.add_parser(stage, help=descriptions[stage], parents=[common])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(
            getattr(args, "config", "config.yaml"),
            overrides=getattr(args, "overrides", []),
            out_dir_override=getattr(args, "out", None),
            seed_override=getattr(args, "seed", None),
        )
        run_stage(args.stage, cfg)
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except (ConfigError, CorpusError, ProvenanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    print(f"{args.stage}: ok")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
