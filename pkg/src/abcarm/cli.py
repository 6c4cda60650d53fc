"""Command-line entry points: abc-eval (accuracy harness) and abc-serve."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .errors import AbcArmError, SchemaError
from .evaluate import (
    PreferenceMatrix,
    SCENARIO_LABELS,
    load_manifest,
    emit_report,
    run_eval,
    scenarios_by_label,
)
from .recommend import LiveVisionBackend, MockVisionBackend


def eval_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="abc-eval",
        description="Compare backend gesture recommendations against a human "
                    "preference matrix over degraded stimulus images.",
    )
    parser.add_argument("--manifest", required=True, help="stimulus manifest JSON")
    parser.add_argument("--preferences", required=True, help="preference matrix CSV")
    parser.add_argument(
        "--backend", required=True,
        help="'mock:MAPPING.json' for the digest-keyed mock, or 'live' "
             "(reads ABC_LLM_API_KEY from the environment)",
    )
    parser.add_argument(
        "--scenarios", default=",".join(SCENARIO_LABELS),
        help="comma-separated scenario labels (default: all nine)",
    )
    parser.add_argument("--out", required=True, help="report output path")
    parser.add_argument("--format", choices=("json", "markdown"), default="json")
    parser.add_argument("--parallel", type=int, default=1,
                        help="concurrent cells (keep 1 for live backends)")
    parser.add_argument("--endpoint", default="https://api.openai.com/v1",
                        help="live backend endpoint")
    parser.add_argument("--model", default="gpt-4o-2024-05-13",
                        help="live backend model identifier")
    args = parser.parse_args(argv)

    try:
        if args.backend.startswith("mock:"):
            backend = MockVisionBackend.from_file(args.backend[len("mock:"):])
        elif args.backend == "live":
            backend = LiveVisionBackend(endpoint=args.endpoint, model=args.model)
        else:
            parser.error("--backend must be 'mock:FILE' or 'live'")

        manifest = load_manifest(args.manifest)
        matrix = PreferenceMatrix.load_csv(args.preferences)
        unknown = sorted({e.stimulus for e in manifest} - set(matrix.stimuli))
        if unknown:
            raise SchemaError(f"manifest stimuli missing from preference matrix: {unknown}")
        scenarios = scenarios_by_label(
            [s.strip() for s in args.scenarios.split(",") if s.strip()]
        )
        report = run_eval(manifest, matrix, backend, scenarios, parallel=args.parallel)
        emit_report(report, args.format, args.out)
    except AbcArmError as exc:
        print(f"abc-eval: {exc}", file=sys.stderr)
        return 1

    overall = report.overall()
    rate = overall.top1_match_rate
    rate_text = "n/a" if rate is None else f"{rate:.3f}"
    latency = overall.mean_latency_s
    latency_text = "n/a" if latency is None else f"{latency:.3f}s"
    print(
        f"evaluated {overall.evaluated}/{overall.cells} cells: "
        f"top-1 match rate {rate_text}, mean latency {latency_text} -> {args.out}"
    )
    return 0


def serve_main(argv: Optional[Sequence[str]] = None) -> int:
    from .service import ServiceConfig, serve

    parser = argparse.ArgumentParser(
        prog="abc-serve",
        description="Run the dual-interface arm control service.",
    )
    parser.add_argument("--config", help="service config JSON; defaults apply if omitted")
    parser.add_argument("--user-port", type=int, help="override user interface port")
    parser.add_argument("--assistant-port", type=int, help="override assistant port")
    parser.add_argument("--library", help="override action library path")
    args = parser.parse_args(argv)

    try:
        config = ServiceConfig.from_file(args.config) if args.config else ServiceConfig()
        overrides = {}
        if args.user_port is not None:
            overrides["user_port"] = args.user_port
        if args.assistant_port is not None:
            overrides["assistant_port"] = args.assistant_port
        if args.library is not None:
            overrides["library_path"] = args.library
        if overrides:
            from dataclasses import replace

            config = replace(config, **overrides)
        runner = serve(config)
    except AbcArmError as exc:
        print(f"abc-serve: {exc}", file=sys.stderr)
        return 1

    print(
        f"user interface on http://{config.host}:{config.user_port}  "
        f"assistant interface on http://{config.host}:{config.assistant_port}"
    )
    try:
        while True:
            import time

            time.sleep(1.0)
    except KeyboardInterrupt:
        pass
    finally:
        runner.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(eval_main())
