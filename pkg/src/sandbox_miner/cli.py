"""Command-line interface.

Verbs
-----
parse     validate a trace file and print a machine-readable summary
mine      extract the syscall set, saturation curve and frequency histogram
profile   translate a mined-set file into a Seccomp profile
simulate  replay a trace against a profile and report denials
diff      compare the allow-lists of two profiles
run       the full pipeline (mine -> profile -> self-audit -> diff)

Exit codes: 0 success; 2 completed with a warning (the syscall set did not
saturate); 3 input, configuration or parse errors; 4 self-consistency
failure (the emitted profile denied part of its own mining trace).

``SANDBOX_MINER_OUTPUT_DIR`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .enforcer_sim import replay
from .miner import (
    DEFAULT_INTERVAL_NS,
    DEFAULT_QUIET_WINDOW_NS,
    ProcessFilter,
    detect_convergence,
    extract_syscalls,
    frequency_histogram,
    saturation_curve,
)
from .pipeline import (
    CaptureError,
    PipelineConfig,
    PipelineError,
    SelfConsistencyError,
    action_from_token,
    parse_config_file,
    parse_duration,
    run_pipeline,
)
from .profile_codec import (
    DEFAULT_ARCHITECTURES,
    ProfileError,
    diff_profiles,
    generate_profile,
    parse_profile_file,
    serialize_profile,
)
from .reporting import (
    read_mined_set,
    render_frequency_histogram,
    render_saturation_curve,
    write_audit_report,
    write_curve,
    write_histogram,
    write_mined_set,
)
from .trace_model import merge_logs
from .trace_parser import ParseMode, TraceParseError, parse_trace_file

EXIT_OK = 0
EXIT_WARNING = 2
EXIT_ERROR = 3
EXIT_SELF_CONSISTENCY = 4

OUTPUT_DIR_ENV = "SANDBOX_MINER_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 means 'warning' here, so remap."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, ".")


def _duration_arg(text: str) -> int:
    try:
        return parse_duration(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_mode(strict: bool) -> ParseMode:
    return ParseMode.STRICT if strict else ParseMode.LENIENT


def _load_merged_trace(paths, mode: ParseMode):
    logs = []
    for path in paths:
        report = parse_trace_file(path, mode)
        logs.append(report.log)
    log = logs[0]
    for other in logs[1:]:
        log = merge_logs(log, other)
    return log


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sandbox-miner",
        description=(
            "Mine container syscall whitelists from traces, emit Docker-"
            "compatible Seccomp profiles, and audit them by replay."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="validate a trace file, print a summary")
    p.add_argument("trace", type=Path)
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument(
        "--reorder-window",
        type=_duration_arg,
        default="1ms",
        help="tolerated timestamp disorder (default 1ms)",
    )

    p = sub.add_parser("mine", help="extract syscall set, curve and histogram")
    p.add_argument("traces", nargs="+", type=Path)
    p.add_argument("--interval", type=_duration_arg, default=None,
                   help="curve sampling interval (default 5s)")
    p.add_argument("--quiet-window", type=_duration_arg, default=None,
                   help="quiet time required to call the set saturated (default 60s)")
    p.add_argument("--exclude-process", action="append", default=[],
                   metavar="NAME", help="drop events of this process (repeatable)")
    p.add_argument("--strict", action="store_true")
    p.add_argument("-o", "--output-dir", type=Path, default=None)
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering PNG figures next to the TSV reports")

    p = sub.add_parser("profile", help="turn a mined-set file into a profile")
    p.add_argument("mined_set", type=Path)
    p.add_argument("--default-action", choices=["errno", "kill", "trace"],
                   default="errno")
    p.add_argument("--arch", action="append", default=[],
                   help="architecture token (repeatable; default x86_64/x86/x32)")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("simulate", help="replay a trace against a profile")
    p.add_argument("--profile", type=Path, required=True)
    p.add_argument("--trace", type=Path, required=True)
    p.add_argument("--stop-on-kill", action="store_true",
                   help="a killed thread executes no further syscalls")
    p.add_argument("--lenient", action="store_true",
                   help="parse the profile leniently (foreign files)")
    p.add_argument("-o", "--output", type=Path, default=None,
                   help="write the audit report JSON here")

    p = sub.add_parser("diff", help="compare two whitelist profiles")
    p.add_argument("profile_a", type=Path)
    p.add_argument("profile_b", type=Path)
    p.add_argument("--lenient", action="store_true")

    p = sub.add_parser("run", help="full pipeline from a config or flags")
    p.add_argument("--config", type=Path, help="key = value configuration file")
    p.add_argument("--trace", action="append", default=[], type=Path,
                   metavar="FILE", help="trace input (repeatable)")
    p.add_argument("--capture-command", help="external capture command template "
                   "with an {output} placeholder")
    p.add_argument("--capture-duration", type=_duration_arg, default=None)
    p.add_argument("--interval", type=_duration_arg, default=None)
    p.add_argument("--quiet-window", type=_duration_arg, default=None)
    p.add_argument("--default-action", choices=["errno", "kill", "trace"],
                   default=None)
    p.add_argument("--arch", action="append", default=[])
    p.add_argument("--baseline", type=Path, default=None,
                   help="baseline profile to diff against")
    p.add_argument("--exclude-process", action="append", default=[])
    p.add_argument("--strict", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("-o", "--output-dir", type=Path, default=None)

    return parser


def _cmd_parse(args) -> int:
    report = parse_trace_file(
        args.trace,
        _parse_mode(args.strict),
        reorder_window_ns=args.reorder_window,
    )
    summary = {
        "file": str(args.trace),
        "events": len(report.log.events),
        "lines_read": report.lines_read,
        "lines_skipped": report.lines_skipped,
        "first_error": list(report.first_error) if report.first_error else None,
        "source": report.log.source_label,
        "duration_ns": report.log.duration_ns,
        "distinct_syscalls": len(
            {ev.syscall_name for ev in report.log.events}
        ),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_mine(args) -> int:
    out = args.output_dir or Path(_default_output_dir())
    out.mkdir(parents=True, exist_ok=True)
    interval = args.interval or DEFAULT_INTERVAL_NS
    quiet_window = args.quiet_window or DEFAULT_QUIET_WINDOW_NS

    log = _load_merged_trace(args.traces, _parse_mode(args.strict))
    proc_filter = (
        ProcessFilter(exclude=frozenset(args.exclude_process))
        if args.exclude_process
        else None
    )
    mined = extract_syscalls(log, proc_filter)
    curve = saturation_curve(log, interval, proc_filter)
    histogram = frequency_histogram(log, proc_filter)
    converged_at = detect_convergence(curve, quiet_window)

    write_mined_set(mined, out / "mined_syscalls.tsv")
    write_curve(curve, out / "saturation_curve.tsv")
    write_histogram(histogram, out / "frequency_histogram.tsv")
    if not args.no_figures:
        render_saturation_curve(curve, out / "saturation_curve.png")
        render_frequency_histogram(histogram, out / "frequency_histogram.png")

    print(f"mined {len(mined)} distinct syscalls from {len(log.events)} events")
    if converged_at is None:
        print("saturation: NOT observed within the quiet window")
        return EXIT_WARNING
    print(f"saturation: converged at {converged_at / 1e9:.1f} s")
    return EXIT_OK


def _cmd_profile(args) -> int:
    mined = read_mined_set(args.mined_set)
    archs = tuple(args.arch) if args.arch else DEFAULT_ARCHITECTURES
    profile = generate_profile(
        mined, action_from_token(args.default_action), archs
    )
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_bytes(serialize_profile(profile))
    print(f"wrote {args.output} ({len(profile.rules)} allow rules)")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    profile = parse_profile_file(args.profile, _parse_mode(not args.lenient))
    report = parse_trace_file(args.trace)
    audit = replay(profile, report.log, stop_on_kill=args.stop_on_kill)
    if args.output is not None:
        args.output.parent.mkdir(parents=True, exist_ok=True)
        write_audit_report(audit, args.output)
    print(
        f"replayed {audit.total_events} events: {audit.allowed} allowed, "
        f"{audit.denied} denied"
        + (
            f", {audit.skipped_after_kill} skipped after kill"
            if audit.skipped_after_kill
            else ""
        )
    )
    if audit.denied_names:
        print("denied syscalls: " + ", ".join(sorted(audit.denied_names)))
    return EXIT_OK


def _cmd_diff(args) -> int:
    mode = _parse_mode(not args.lenient)
    a = parse_profile_file(args.profile_a, mode)
    b = parse_profile_file(args.profile_b, mode)
    diff = diff_profiles(a, b)
    print(
        json.dumps(
            {
                "only_in_a": sorted(diff.only_in_a),
                "only_in_b": sorted(diff.only_in_b),
                "common": sorted(diff.common),
                "allowed_a": len(a.allowed),
                "allowed_b": len(b.allowed),
                "reduction_ratio": diff.reduction_ratio,
            },
            indent=2,
        )
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    if args.config:
        cfg = parse_config_file(args.config)
    else:
        cfg = PipelineConfig(output_dir=Path(_default_output_dir()))

    # explicit flags override the config file
    updates: dict = {}
    if args.trace:
        updates["trace_inputs"] = tuple(args.trace)
    if args.capture_command:
        updates["capture_command"] = args.capture_command
    if args.capture_duration is not None:
        updates["capture_duration_ns"] = args.capture_duration
    if args.interval is not None:
        updates["interval_ns"] = args.interval
    if args.quiet_window is not None:
        updates["quiet_window_ns"] = args.quiet_window
    if args.default_action is not None:
        updates["default_action"] = action_from_token(args.default_action)
    if args.arch:
        updates["architectures"] = tuple(args.arch)
    if args.baseline is not None:
        updates["baseline_profile"] = args.baseline
    if args.exclude_process:
        updates["exclude_processes"] = tuple(args.exclude_process)
    if args.strict:
        updates["strict_parse"] = True
    if args.no_figures:
        updates["figures"] = False
    if args.output_dir is not None:
        updates["output_dir"] = args.output_dir
    if updates:
        import dataclasses

        cfg = dataclasses.replace(cfg, **updates)

    report = run_pipeline(cfg)
    print((Path(cfg.output_dir) / "report.txt").read_text(), end="")
    if report.converged_at_ns is None:
        return EXIT_WARNING
    return EXIT_OK


_COMMANDS = {
    "parse": _cmd_parse,
    "mine": _cmd_mine,
    "profile": _cmd_profile,
    "simulate": _cmd_simulate,
    "diff": _cmd_diff,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SelfConsistencyError as exc:
        print(f"sandbox-miner: {exc}", file=sys.stderr)
        return EXIT_SELF_CONSISTENCY
    except (
        PipelineError,
        CaptureError,
        ProfileError,
        TraceParseError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"sandbox-miner: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
