"""Parse syscall trace files into TraceLog values.

Accepts the canonical tab-separated format written by
:func:`sandbox_miner.trace_model.dump_trace` and tolerates decorated syscall
names as tracers print them ("openat()", "WRITE"): every name is passed
through :func:`normalize_name` before validation.

Two modes:

* ``Strict``  -- the first malformed line raises :class:`TraceParseError`.
* ``Lenient`` -- malformed lines are skipped and counted; the earliest one is
  recorded in ``ParseReport.first_error``. Lenient parsing is total: any byte
  stream yields a report.

Multi-threaded tracers emit slightly out-of-order records. Timestamps that
lag the running maximum by at most ``reorder_window_ns`` (default 1 ms) are
accepted and re-sorted; larger regressions are malformed.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import IO, Union

from .trace_model import (
    COMMENT_PREFIX,
    DIRECTIVE_PREFIX,
    FIELD_SEP,
    SYSCALL_NAME_RE,
    Direction,
    SyscallEvent,
    TraceLog,
    unescape_field,
    validate_event,
)

DEFAULT_REORDER_WINDOW_NS = 1_000_000  # 1 ms


class ParseMode(enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class TraceParseError(ValueError):
    """Raised in Strict mode at the first malformed line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message


@dataclass(frozen=True, slots=True)
class ParseReport:
    """Outcome of parsing one trace stream."""

    log: TraceLog
    lines_read: int
    lines_skipped: int
    first_error: tuple[int, str] | None = None


def normalize_name(raw: str) -> str:
    """Reduce a decorated syscall name to canonical form.

    Strips surrounding whitespace and one trailing "()" pair, then lowercases.
    Raises ValueError when the result is empty or contains characters outside
    ``[a-z0-9_]``.
    """
    name = raw.strip()
    if name.endswith("()"):
        name = name[:-2]
    name = name.lower()
    if not name:
        raise ValueError(f"name {raw!r} empty after normalization")
    if not SYSCALL_NAME_RE.match(name):
        raise ValueError(f"illegal characters in syscall name {raw!r}")
    return name


def _decode_stream(
    stream: Union[bytes, str, IO[bytes], IO[str]], mode: ParseMode
) -> str:
    """Decode arbitrary input to text.

    Strict mode raises TraceParseError on undecodable bytes; Lenient
    substitutes replacement characters so parsing stays total.
    """
    if isinstance(stream, str):
        return stream
    if isinstance(stream, bytes):
        data = stream
    else:
        data = stream.read()
        if isinstance(data, str):
            return data
    errors = "strict" if mode is ParseMode.STRICT else "replace"
    try:
        return data.decode("utf-8", errors=errors)
    except UnicodeDecodeError as exc:
        raise TraceParseError(0, f"undecodable stream: {exc}") from exc


def _parse_line(line: str) -> SyscallEvent:
    """Parse one event line; raises ValueError with a reason on failure."""
    fields = line.split(FIELD_SEP)
    if len(fields) < 5:
        raise ValueError(f"expected at least 5 fields, got {len(fields)}")
    ts_text, process_raw, tid_text, direction_text, syscall_raw = fields[:5]
    try:
        timestamp_ns = int(ts_text)
    except ValueError:
        raise ValueError(f"bad timestamp {ts_text!r}") from None
    try:
        thread_id = int(tid_text)
    except ValueError:
        raise ValueError(f"bad thread id {tid_text!r}") from None
    try:
        direction = Direction(direction_text)
    except ValueError:
        raise ValueError(f"bad direction {direction_text!r}") from None
    syscall_name = normalize_name(syscall_raw)
    process_name = unescape_field(process_raw)
    payload = tuple(unescape_field(f) for f in fields[5:])
    event = SyscallEvent(
        timestamp_ns=timestamp_ns,
        process_name=process_name,
        thread_id=thread_id,
        syscall_name=syscall_name,
        direction=direction,
        payload=payload,
    )
    violation = validate_event(event)
    if violation is not None:
        raise ValueError(violation)
    return event


def parse_trace(
    stream: Union[bytes, str, IO[bytes], IO[str]],
    mode: ParseMode = ParseMode.LENIENT,
    *,
    source_label: str = "",
    reorder_window_ns: int = DEFAULT_REORDER_WINDOW_NS,
) -> ParseReport:
    """Parse a trace stream into a sorted, validated TraceLog.

    ``source_label`` is a fallback used when the stream carries no
    ``#%source`` directive. Directive lines count as skipped lines.
    """
    text = _decode_stream(stream, mode)

    events: list[SyscallEvent] = []
    lines_read = 0
    lines_skipped = 0
    first_error: tuple[int, str] | None = None
    label = source_label
    duration_directive: int | None = None
    max_ts = 0

    def fail(line_no: int, reason: str) -> None:
        nonlocal lines_skipped, first_error
        if mode is ParseMode.STRICT:
            raise TraceParseError(line_no, reason)
        lines_skipped += 1
        if first_error is None:
            first_error = (line_no, reason)

    for line_no, line in enumerate(io.StringIO(text), start=1):
        lines_read += 1
        line = line.rstrip("\r\n")
        if not line.strip():
            lines_skipped += 1
            continue
        if line.startswith(DIRECTIVE_PREFIX):
            lines_skipped += 1
            key, _, value = line[len(DIRECTIVE_PREFIX) :].partition(FIELD_SEP)
            if key == "source":
                try:
                    label = unescape_field(value)
                except ValueError as exc:
                    fail(line_no, f"bad source directive: {exc}")
            elif key == "duration_ns":
                try:
                    duration_directive = int(value)
                except ValueError:
                    fail(line_no, f"bad duration directive {value!r}")
            # unknown directives are reserved; treated as plain comments
            continue
        if line.startswith(COMMENT_PREFIX):
            lines_skipped += 1
            continue
        try:
            event = _parse_line(line)
        except ValueError as exc:
            fail(line_no, str(exc))
            continue
        if event.timestamp_ns < max_ts - reorder_window_ns:
            fail(
                line_no,
                f"timestamp {event.timestamp_ns} out of order beyond "
                f"{reorder_window_ns} ns reorder window",
            )
            continue
        max_ts = max(max_ts, event.timestamp_ns)
        events.append(event)

    events.sort(key=lambda ev: ev.timestamp_ns)
    duration_ns = events[-1].timestamp_ns if events else 0
    if duration_directive is not None:
        if duration_directive < duration_ns:
            if mode is ParseMode.STRICT:
                raise TraceParseError(
                    lines_read,
                    f"declared duration {duration_directive} precedes last "
                    f"event at {duration_ns}",
                )
            # Lenient: keep the wider extent
        else:
            duration_ns = duration_directive

    log = TraceLog(tuple(events), label, duration_ns)
    return ParseReport(
        log=log,
        lines_read=lines_read,
        lines_skipped=lines_skipped,
        first_error=first_error,
    )


def parse_trace_file(
    path,
    mode: ParseMode = ParseMode.LENIENT,
    *,
    reorder_window_ns: int = DEFAULT_REORDER_WINDOW_NS,
) -> ParseReport:
    """Parse a trace file, defaulting the source label to the file name."""
    with open(path, "rb") as fp:
        return parse_trace(
            fp,
            mode,
            source_label=str(path),
            reorder_window_ns=reorder_window_ns,
        )
