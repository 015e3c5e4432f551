"""Command-line driver for the ground-before-reasoning pipeline.

Subcommands run a single stage or the whole pipeline per topic manifest.
Backend endpoints come from flags (``--backend-<role>``) or environment
variables (``VIDCLAIMS_<ROLE>_ENDPOINT`` / ``_API_KEY`` / ``_MODEL``);
flags win. ``mock`` selects the deterministic offline backend.

Exit codes: 0 success, 2 validation failure, 3 backend exhaustion,
4 missing upstream artifact.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .backends import BackendProfile
from .consolidate import MODE_EMBED_SIM, MODE_LLM
from .errors import (
    DependencyError,
    ManifestError,
    PipelineError,
    TransportExhaustedError,
)
from .frameplan import BudgetPolicy
from .manifest import validate_manifest
from .pipeline import STAGES, RunConfig, TopicRunner
from .timeline import DEFAULT_EMIT_THRESHOLD

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND_EXHAUSTED = 3
EXIT_DEPENDENCY = 4

ROLE_FLAGS = {
    "text_chat": "backend_text_chat",
    "vision_chat": "backend_vision_chat",
    "embed": "backend_embed",
    "entail": "backend_entail",
}


def _profile_from_env(role: str, endpoint_flag: str | None) -> BackendProfile:
    prefix = f"VIDCLAIMS_{role.upper()}"
    endpoint = endpoint_flag or os.environ.get(f"{prefix}_ENDPOINT", "mock")
    return BackendProfile(
        role=role,
        endpoint=endpoint,
        model_name=os.environ.get(f"{prefix}_MODEL", "mock"),
        api_key=os.environ.get(f"{prefix}_API_KEY"),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidclaims",
        description="Grounding-guided multi-video claim generation pipeline.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", required=True, type=Path)
    common.add_argument("--run-dir", required=True, type=Path)
    common.add_argument("--window-size", type=int, default=30)
    common.add_argument("--n-uniform", type=int, default=100)
    common.add_argument("--k-max", type=int, default=30)
    common.add_argument("--tau", type=float, default=0.85)
    common.add_argument(
        "--agg", choices=["embed-sim", "llm"], default="embed-sim"
    )
    common.add_argument("--emit-threshold", type=float, default=DEFAULT_EMIT_THRESHOLD)
    common.add_argument("--jobs", type=int, default=4)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--gold", type=Path, default=None)
    common.add_argument("--mock-rules", type=Path, default=None)
    common.add_argument(
        "--resume",
        action="store_true",
        help="reuse cached stage artifacts (caching is on by default; this "
        "flag documents intent when restarting an interrupted run)",
    )
    common.add_argument(
        "--force", action="store_true", help="recompute everything, ignore cache"
    )
    for flag in ROLE_FLAGS.values():
        common.add_argument(
            "--" + flag.replace("_", "-"), metavar="URL|mock", default=None
        )

    sub.add_parser("validate", parents=[common])
    for stage in STAGES:
        stage_parser = sub.add_parser(stage, parents=[common])
        if stage == "evaluate":
            stage_parser.add_argument(
                "--table", action="store_true", help="print the metric table"
            )
    run_parser = sub.add_parser("run", parents=[common])
    run_parser.add_argument(
        "--table", action="store_true", help="print the metric table after evaluate"
    )
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    profiles = {
        role: _profile_from_env(role, getattr(args, flag))
        for role, flag in ROLE_FLAGS.items()
    }
    policy = BudgetPolicy(n_uniform=args.n_uniform, k_max_keyframes=args.k_max)
    return RunConfig(
        manifest_path=args.manifest,
        run_dir=args.run_dir,
        window_size=args.window_size,
        policy=policy,
        tau=args.tau,
        aggregation=MODE_LLM if args.agg == "llm" else MODE_EMBED_SIM,
        emit_threshold=args.emit_threshold,
        jobs=args.jobs,
        seed=args.seed,
        gold_path=args.gold,
        profiles=profiles,
        mock_rules_path=args.mock_rules,
        force=args.force,
    )


def _print_summary(summary, show_table: bool) -> None:
    print(f"topic: {summary.topic_id}")
    for stage in STAGES:
        counts = summary.by_status(stage)
        if not counts:
            continue
        seconds = sum(a.seconds for a in summary.artifacts if a.stage == stage)
        status = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
        print(f"  {stage}: {status} ({seconds:.2f}s)")
    if summary.report is not None and show_table:
        print(summary.report.render_table())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "validate":
            report = validate_manifest(args.manifest)
            if report.ok:
                print(f"{args.manifest}: OK")
                return EXIT_OK
            for violation in report.violations:
                print(f"violation: {violation}")
            return EXIT_VALIDATION

        report = validate_manifest(args.manifest)
        if not report.ok:
            for violation in report.violations:
                print(f"violation: {violation}")
            return EXIT_VALIDATION

        config = config_from_args(args)
        runner = TopicRunner(config)
        stages = None if args.command == "run" else [args.command]
        summary = runner.run(stages)
        show_table = getattr(args, "table", False) or summary.report is not None
        _print_summary(summary, show_table)
        return EXIT_OK
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TransportExhaustedError as exc:
        print(f"backend exhausted: {exc}", file=sys.stderr)
        return EXIT_BACKEND_EXHAUSTED
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
