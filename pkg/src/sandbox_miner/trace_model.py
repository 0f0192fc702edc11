"""Canonical in-memory and on-disk representation of syscall trace events.

A trace is an ordered sequence of enter/exit records captured while a
container runs. Mining downstream only needs enter records (an invoked call
reveals intent whether or not it completed), but both directions are kept so
logs stay faithful to what the tracer saw.

Wire format
-----------
One event per line, tab-separated fields::

    ts_ns <TAB> process <TAB> tid <TAB> direction <TAB> syscall [<TAB> payload ...]

* ``ts_ns``      non-negative integer nanoseconds since trace start
* ``process``    process name (backslash-escaped, see below)
* ``tid``        positive integer thread id
* ``direction``  ``enter`` or ``exit``
* ``syscall``    canonical syscall name, ``[a-z0-9_]+``
* ``payload``    enter: zero or more argument fields; exit: exactly one
                 return-value field

Lines starting with ``#`` are comments and are ignored, except ``#%`` metadata
directives written by :func:`dump_trace`::

    #%source <TAB> <label>
    #%duration_ns <TAB> <integer>

Free-form fields (process, payload) are escaped so tabs and newlines in the
data cannot break the framing: ``\\`` -> ``\\\\``, TAB -> ``\\t``,
LF -> ``\\n``, CR -> ``\\r``.
"""

from __future__ import annotations

import enum
import heapq
import re
from dataclasses import dataclass
from typing import IO, Iterable

SYSCALL_NAME_RE = re.compile(r"^[a-z0-9_]+$")

DIRECTIVE_PREFIX = "#%"
COMMENT_PREFIX = "#"
FIELD_SEP = "\t"

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


class Direction(enum.Enum):
    """Whether a record marks syscall entry or syscall return."""

    ENTER = "enter"
    EXIT = "exit"


@dataclass(frozen=True, slots=True)
class SyscallEvent:
    """One enter or exit trace record.

    ``payload`` holds the argument strings for an enter record and a single
    return-value string for an exit record. Payload content is opaque: it is
    carried through verbatim and never interpreted.
    """

    timestamp_ns: int
    process_name: str
    thread_id: int
    syscall_name: str
    direction: Direction
    payload: tuple[str, ...] = ()

    @property
    def args(self) -> tuple[str, ...]:
        """Argument strings (enter records)."""
        return self.payload

    @property
    def return_value(self) -> str:
        """Return-value string (exit records)."""
        return self.payload[0]


def validate_event(event: SyscallEvent) -> str | None:
    """Check all SyscallEvent invariants.

    Returns None when the event is well formed, otherwise a description of
    the first violated invariant. Violations are values, not exceptions, so
    callers can tally them while scanning untrusted input.
    """
    if event.timestamp_ns < 0:
        return "negative timestamp"
    if not event.process_name:
        return "empty process name"
    if event.thread_id <= 0:
        return "non-positive thread id"
    if not event.syscall_name:
        return "empty syscall name"
    if not SYSCALL_NAME_RE.match(event.syscall_name):
        return f"non-canonical name {event.syscall_name!r}"
    if event.direction is Direction.EXIT and len(event.payload) != 1:
        return f"exit payload arity {len(event.payload)} (expected 1)"
    return None


@dataclass(frozen=True, slots=True)
class TraceLog:
    """An immutable, timestamp-ordered sequence of events plus metadata.

    ``duration_ns`` is how long the trace covered; it may exceed the last
    event timestamp (the monitor kept watching and saw nothing new).
    """

    events: tuple[SyscallEvent, ...]
    source_label: str = ""
    duration_ns: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.events, tuple):
            object.__setattr__(self, "events", tuple(self.events))
        last = 0
        for ev in self.events:
            if ev.timestamp_ns < last:
                raise ValueError(
                    f"events not sorted: {ev.timestamp_ns} after {last}"
                )
            last = ev.timestamp_ns
        if self.duration_ns < last:
            raise ValueError(
                f"duration_ns {self.duration_ns} < last event timestamp {last}"
            )

    def __len__(self) -> int:
        return len(self.events)


def build_log(
    events: Iterable[SyscallEvent],
    source_label: str = "",
    duration_ns: int | None = None,
) -> TraceLog:
    """Construct a TraceLog from events in any order.

    Events are stably sorted by timestamp; duration defaults to the last
    event timestamp (0 for an empty log).
    """
    ordered = sorted(events, key=lambda ev: ev.timestamp_ns)
    if duration_ns is None:
        duration_ns = ordered[-1].timestamp_ns if ordered else 0
    return TraceLog(tuple(ordered), source_label, duration_ns)


def merge_logs(a: TraceLog, b: TraceLog) -> TraceLog:
    """Merge two sorted logs into one sorted log.

    The event multiset is preserved; ties keep a's events before b's.
    Duration is the max of the inputs and the label is taken from ``a``.
    """
    merged = tuple(
        heapq.merge(a.events, b.events, key=lambda ev: ev.timestamp_ns)
    )
    return TraceLog(merged, a.source_label, max(a.duration_ns, b.duration_ns))


def escape_field(value: str) -> str:
    """Escape a free-form field for the tab-separated wire format."""
    if not any(ch in value for ch in _ESCAPES):
        return value
    return "".join(_ESCAPES.get(ch, ch) for ch in value)


def unescape_field(value: str) -> str:
    """Inverse of :func:`escape_field`.

    Raises ValueError on a dangling or unknown escape sequence.
    """
    if "\\" not in value:
        return value
    out: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\":
            if i + 1 >= len(value):
                raise ValueError("dangling escape at end of field")
            nxt = value[i + 1]
            if nxt not in _UNESCAPES:
                raise ValueError(f"unknown escape sequence \\{nxt}")
            out.append(_UNESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def format_event(event: SyscallEvent) -> str:
    """Render one event as a wire-format line (no trailing newline)."""
    fields = [
        str(event.timestamp_ns),
        escape_field(event.process_name),
        str(event.thread_id),
        event.direction.value,
        event.syscall_name,
    ]
    fields.extend(escape_field(p) for p in event.payload)
    return FIELD_SEP.join(fields)


def dump_trace(log: TraceLog, fp: IO[str]) -> None:
    """Write a TraceLog in the canonical wire format.

    Metadata directives are emitted first so a re-parse recovers the label
    and duration exactly.
    """
    fp.write(f"{DIRECTIVE_PREFIX}source{FIELD_SEP}{escape_field(log.source_label)}\n")
    fp.write(f"{DIRECTIVE_PREFIX}duration_ns{FIELD_SEP}{log.duration_ns}\n")
    for ev in log.events:
        fp.write(format_event(ev))
        fp.write("\n")


def dumps_trace(log: TraceLog) -> str:
    """Render a TraceLog in the canonical wire format as a string."""
    import io

    buf = io.StringIO()
    dump_trace(log, buf)
    return buf.getvalue()
