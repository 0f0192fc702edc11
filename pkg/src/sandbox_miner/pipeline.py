"""End-to-end mining pipeline: ingest traces, mine, emit and audit a profile.

One configuration drives the whole two-phase workflow: traces are parsed (or
captured via an external command), merged and mined; the mined set becomes a
whitelist profile; the profile is replayed against the very trace it was
mined from. That self-replay must produce zero denials -- a denial can only
mean the miner and the profile generator disagree, so the pipeline aborts
loudly rather than emit a profile that would misfire in production.

All artifacts land in the configured output directory:

    mined_syscalls.tsv       the mined set with first-seen timestamps
    saturation_curve.tsv     cumulative distinct-count samples
    frequency_histogram.tsv  per-syscall invocation counts
    profile.json             the generated Seccomp profile
    audit.json               the self-replay audit report
    diff.json                comparison against the baseline (if configured)
    report.txt               human-readable summary (timestamp-free)
    run.json                 tool version, config echo, wall-clock timestamps
    saturation_curve.png     rendered curve (unless figures are disabled)
    frequency_histogram.png  rendered histogram (unless figures are disabled)
"""

from __future__ import annotations

import datetime as _dt
import functools
import json
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import __version__
from .enforcer_sim import AuditReport, replay
from .miner import (
    DEFAULT_INTERVAL_NS,
    DEFAULT_QUIET_WINDOW_NS,
    ProcessFilter,
    detect_convergence,
    extract_syscalls,
    frequency_histogram,
    saturation_curve,
)
from .profile_codec import (
    DEFAULT_ARCHITECTURES,
    ProfileDiff,
    SeccompAction,
    diff_profiles,
    generate_profile,
    parse_profile_file,
    serialize_profile,
)
from .reporting import (
    render_frequency_histogram,
    render_saturation_curve,
    write_audit_report,
    write_curve,
    write_histogram,
    write_mined_set,
)
from .trace_model import TraceLog, merge_logs
from .trace_parser import ParseMode, TraceParseError, parse_trace_file


class PipelineError(Exception):
    """Configuration or input problem; the pipeline cannot proceed."""


class CaptureError(PipelineError):
    """The external capture command failed or produced nothing."""


class SelfConsistencyError(PipelineError):
    """Self-replay denied a syscall: the emitted profile would misfire."""


_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ns|us|ms|s|m)?\s*$")
_DURATION_SCALE = {
    None: 1,
    "ns": 1,
    "us": 1_000,
    "ms": 1_000_000,
    "s": 1_000_000_000,
    "m": 60_000_000_000,
}


def parse_duration(text: str) -> int:
    """Parse a duration like "5s", "250ms", "1m" or "1500" (bare = ns)."""
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"bad duration {text!r} (expected e.g. 5s, 250ms, 1m)")
    value, unit = m.groups()
    return int(round(float(value) * _DURATION_SCALE[unit]))


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one pipeline run needs.

    Exactly one of ``trace_inputs`` / ``capture_command`` must be set.
    """

    output_dir: Path
    trace_inputs: tuple[Path, ...] = ()
    capture_command: str | None = None
    capture_duration_ns: int = 0
    interval_ns: int = DEFAULT_INTERVAL_NS
    quiet_window_ns: int = DEFAULT_QUIET_WINDOW_NS
    default_action: SeccompAction = SeccompAction.ERRNO
    architectures: tuple[str, ...] = DEFAULT_ARCHITECTURES
    baseline_profile: Path | None = None
    exclude_processes: tuple[str, ...] = ()
    strict_parse: bool = False
    figures: bool = True

    def validate(self) -> None:
        if bool(self.trace_inputs) == bool(self.capture_command):
            raise PipelineError(
                "exactly one of trace inputs or a capture command is required"
            )
        if self.capture_command and self.capture_duration_ns <= 0:
            raise PipelineError("capture mode needs a positive duration")
        if self.interval_ns <= 0:
            raise PipelineError("interval must be positive")
        if self.quiet_window_ns < self.interval_ns:
            raise PipelineError("quiet window must cover at least one interval")


_CONFIG_REPEATABLE = {
    "trace_input": "trace_inputs",
    "arch": "architectures",
    "exclude_process": "exclude_processes",
}
_CONFIG_BOOL = {"strict_parse", "figures"}
_CONFIG_DURATION = {
    "capture_duration": "capture_duration_ns",
    "interval": "interval_ns",
    "quiet_window": "quiet_window_ns",
}
_CONFIG_SIMPLE = {
    "capture_command",
    "default_action",
    "baseline_profile",
    "output_dir",
}


def parse_config_file(path: Path | str) -> PipelineConfig:
    """Read a pipeline configuration from a ``key = value`` file.

    Keys: trace_input (repeatable), capture_command, capture_duration,
    interval, quiet_window, default_action (errno|kill|trace), arch
    (repeatable), baseline_profile, output_dir, exclude_process
    (repeatable), strict_parse, figures. ``#`` starts a comment.
    """
    values: dict = {"trace_inputs": [], "architectures": [], "exclude_processes": []}
    for line_no, raw in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise PipelineError(
                f"{path}: line {line_no}: expected 'key = value'"
            )
        if key in _CONFIG_REPEATABLE:
            values[_CONFIG_REPEATABLE[key]].append(value)
        elif key in _CONFIG_DURATION:
            try:
                values[_CONFIG_DURATION[key]] = parse_duration(value)
            except ValueError as exc:
                raise PipelineError(f"{path}: line {line_no}: {exc}") from None
        elif key in _CONFIG_BOOL:
            lowered = value.lower()
            if lowered not in ("true", "false"):
                raise PipelineError(
                    f"{path}: line {line_no}: {key} must be true or false"
                )
            values[key] = lowered == "true"
        elif key in _CONFIG_SIMPLE:
            values[key] = value
        else:
            raise PipelineError(f"{path}: line {line_no}: unknown key {key!r}")

    kwargs: dict = {}
    if values["trace_inputs"]:
        kwargs["trace_inputs"] = tuple(Path(p) for p in values["trace_inputs"])
    if values["architectures"]:
        kwargs["architectures"] = tuple(values["architectures"])
    if values["exclude_processes"]:
        kwargs["exclude_processes"] = tuple(values["exclude_processes"])
    if "capture_command" in values:
        kwargs["capture_command"] = values["capture_command"]
    if "default_action" in values:
        kwargs["default_action"] = action_from_token(values["default_action"])
    if "baseline_profile" in values:
        kwargs["baseline_profile"] = Path(values["baseline_profile"])
    if "output_dir" not in values:
        raise PipelineError(f"{path}: output_dir is required")
    kwargs["output_dir"] = Path(values["output_dir"])
    for name in ("capture_duration_ns", "interval_ns", "quiet_window_ns"):
        if name in values:
            kwargs[name] = values[name]
    for name in _CONFIG_BOOL:
        if name in values:
            kwargs[name] = values[name]
    return PipelineConfig(**kwargs)


def action_from_token(token: str) -> SeccompAction:
    """Map a CLI/config token (errno, kill, trace) to a denying action."""
    table = {
        "errno": SeccompAction.ERRNO,
        "kill": SeccompAction.KILL,
        "trace": SeccompAction.TRACE,
    }
    try:
        return table[token.lower()]
    except KeyError:
        raise PipelineError(
            f"unknown default action {token!r} (expected errno, kill or trace)"
        ) from None


@dataclass(frozen=True)
class PipelineReport:
    """Summary of one successful pipeline run."""

    mined_count: int
    converged_at_ns: int | None
    profile_path: Path
    audit: AuditReport
    diff: ProfileDiff | None
    run_metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.audit.denied != 0:
            raise ValueError("a completed pipeline must have a clean self-replay")


def capture_adapter(
    command_template: str,
    duration_ns: int,
    snapshot_interval_ns: int,
    output_dir: Path,
) -> list[Path]:
    """Collect trace snapshots by invoking an external capture command.

    The template is split with shell rules and must contain an ``{output}``
    placeholder naming the snapshot path; the command is run once per
    interval tick (no shell) and must have written the snapshot by the time
    it exits. The capture tool is a black box expected to produce
    canonical-format traces.
    """
    if duration_ns <= 0:
        raise PipelineError("capture duration must be positive")
    if snapshot_interval_ns <= 0:
        raise PipelineError("snapshot interval must be positive")
    argv = shlex.split(command_template)
    if not any("{output}" in part for part in argv):
        raise PipelineError("capture command template lacks {output} placeholder")

    ticks = duration_ns // snapshot_interval_ns
    if ticks == 0:
        raise CaptureError(
            "capture window shorter than one snapshot interval: zero snapshots"
        )

    output_dir.mkdir(parents=True, exist_ok=True)
    snapshots: list[Path] = []
    for k in range(1, ticks + 1):
        time.sleep(snapshot_interval_ns / 1e9)
        snapshot = output_dir / f"snapshot_{k:03d}.trace"
        cmd = [part.replace("{output}", str(snapshot)) for part in argv]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except FileNotFoundError:
            raise CaptureError(f"capture command not found: {cmd[0]}") from None
        if proc.returncode != 0:
            raise CaptureError(
                f"capture command exited {proc.returncode}: {proc.stderr.strip()}"
            )
        if not snapshot.exists():
            raise CaptureError(f"capture command produced no file at {snapshot}")
        snapshots.append(snapshot)
    return snapshots


def _load_merged_log(cfg: PipelineConfig, trace_paths: list[Path]) -> TraceLog:
    mode = ParseMode.STRICT if cfg.strict_parse else ParseMode.LENIENT
    logs = []
    for path in trace_paths:
        try:
            report = parse_trace_file(path, mode)
        except FileNotFoundError:
            raise PipelineError(f"trace input not readable: {path}") from None
        except TraceParseError as exc:
            raise PipelineError(f"{path}: {exc}") from None
        logs.append(report.log)
    return functools.reduce(merge_logs, logs)


def _write_diff_file(diff: ProfileDiff, path: Path) -> None:
    doc = {
        "only_in_a": sorted(diff.only_in_a),
        "only_in_b": sorted(diff.only_in_b),
        "common": sorted(diff.common),
        "reduction_ratio": diff.reduction_ratio,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _summary_text(
    cfg: PipelineConfig,
    trace_paths: list[Path],
    log: TraceLog,
    mined_count: int,
    converged_at_ns: int | None,
    audit: AuditReport,
    diff: ProfileDiff | None,
) -> str:
    lines = [
        "sandbox-miner pipeline summary",
        "==============================",
        f"traces:        {', '.join(str(p) for p in trace_paths)}",
        f"events:        {len(log.events)} (duration {log.duration_ns / 1e9:.3f} s)",
        f"mined:         {mined_count} distinct syscalls",
    ]
    if converged_at_ns is None:
        lines.append(
            "saturation:    NOT OBSERVED within the quiet window "
            f"({cfg.quiet_window_ns / 1e9:.0f} s); keep testing"
        )
    else:
        lines.append(
            f"saturation:    converged at {converged_at_ns / 1e9:.1f} s "
            f"(no new syscall for {cfg.quiet_window_ns / 1e9:.0f} s)"
        )
    lines.append(
        f"profile:       profile.json ({mined_count} allow rules, "
        f"default {cfg.default_action.value})"
    )
    lines.append(
        f"self-replay:   {audit.total_events} events, {audit.allowed} allowed, "
        f"{audit.denied} denied"
    )
    if diff is not None:
        lines.append(
            f"baseline diff: {len(diff.common)} shared, "
            f"{len(diff.only_in_b)} baseline-only, "
            f"{len(diff.only_in_a)} mined-only; "
            f"attack surface reduced by {diff.reduction_ratio:.1%}"
        )
    return "\n".join(lines) + "\n"


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    """Run the full mine-then-audit workflow; see module docstring."""
    cfg.validate()
    started = _dt.datetime.now(_dt.timezone.utc)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    if cfg.capture_command:
        trace_paths = capture_adapter(
            cfg.capture_command,
            cfg.capture_duration_ns,
            cfg.interval_ns,
            out / "snapshots",
        )
    else:
        trace_paths = [Path(p) for p in cfg.trace_inputs]

    log = _load_merged_log(cfg, trace_paths)
    proc_filter = (
        ProcessFilter(exclude=frozenset(cfg.exclude_processes))
        if cfg.exclude_processes
        else None
    )

    mined = extract_syscalls(log, proc_filter)
    curve = saturation_curve(log, cfg.interval_ns, proc_filter)
    histogram = frequency_histogram(log, proc_filter)
    converged_at = detect_convergence(curve, cfg.quiet_window_ns)

    profile = generate_profile(mined, cfg.default_action, cfg.architectures)
    profile_path = out / "profile.json"
    profile_path.write_bytes(serialize_profile(profile))

    if proc_filter is None:
        replay_log = log
    else:
        kept = tuple(
            ev for ev in log.events if proc_filter.matches(ev.process_name)
        )
        replay_log = TraceLog(kept, log.source_label, log.duration_ns)
    audit = replay(profile, replay_log)

    write_mined_set(mined, out / "mined_syscalls.tsv")
    write_curve(curve, out / "saturation_curve.tsv")
    write_histogram(histogram, out / "frequency_histogram.tsv")
    write_audit_report(audit, out / "audit.json")
    if cfg.figures:
        render_saturation_curve(curve, out / "saturation_curve.png")
        render_frequency_histogram(histogram, out / "frequency_histogram.png")

    if audit.denied:
        raise SelfConsistencyError(
            f"self-replay denied {audit.denied} events "
            f"({', '.join(sorted(audit.denied_names))}); "
            "miner and profile generator disagree -- aborting"
        )

    diff = None
    if cfg.baseline_profile is not None:
        try:
            baseline = parse_profile_file(cfg.baseline_profile, ParseMode.LENIENT)
        except FileNotFoundError:
            raise PipelineError(
                f"baseline profile not readable: {cfg.baseline_profile}"
            ) from None
        diff = diff_profiles(profile, baseline)
        _write_diff_file(diff, out / "diff.json")

    (out / "report.txt").write_text(
        _summary_text(
            cfg, trace_paths, log, len(mined), converged_at, audit, diff
        ),
        encoding="utf-8",
    )

    finished = _dt.datetime.now(_dt.timezone.utc)
    run_metadata = {
        "tool": "sandbox-miner",
        "version": __version__,
        "started": started.isoformat(),
        "finished": finished.isoformat(),
        "config": _config_echo(cfg),
    }
    (out / "run.json").write_text(
        json.dumps(run_metadata, indent=2) + "\n", encoding="utf-8"
    )

    return PipelineReport(
        mined_count=len(mined),
        converged_at_ns=converged_at,
        profile_path=profile_path,
        audit=audit,
        diff=diff,
        run_metadata=run_metadata,
    )


def _config_echo(cfg: PipelineConfig) -> dict:
    echo = {}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = [str(v) for v in value]
        elif isinstance(value, SeccompAction):
            value = value.value
        echo[f.name] = value
    return echo
