"""Mine the accessed-syscall set from a trace and measure its growth.

Mining looks at enter events only: a syscall that was invoked reveals intent
even if it never returned. Exit records are ignored throughout.

The saturation curve samples the cumulative count of distinct syscalls at a
fixed interval; convergence detection turns the informal "the curve went
flat" reading into a rule: the set is considered saturated at the first
sample after which a full quiet window passes without any new syscall, given
that the log actually extends that far.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass

from .trace_model import Direction, TraceLog

DEFAULT_INTERVAL_NS = 5_000_000_000  # 5 s sampling interval
DEFAULT_QUIET_WINDOW_NS = 60_000_000_000  # 60 s without a new syscall


@dataclass(frozen=True, slots=True)
class ProcessFilter:
    """Restrict mining to events from selected processes.

    ``include`` of None means every process passes; ``exclude`` always wins.
    The default (no filtering) deliberately keeps runtime-init processes in
    the mined set: their syscalls happen while the sandbox is already being
    applied, so a usable whitelist must cover them.
    """

    include: frozenset[str] | None = None
    exclude: frozenset[str] = frozenset()

    def matches(self, process_name: str) -> bool:
        if self.include is not None and process_name not in self.include:
            return False
        return process_name not in self.exclude

    def describe(self) -> str:
        parts = []
        if self.include is not None:
            parts.append("include=" + ",".join(sorted(self.include)))
        if self.exclude:
            parts.append("exclude=" + ",".join(sorted(self.exclude)))
        return " ".join(parts) if parts else "none"


@dataclass(frozen=True)
class MinedSet:
    """The distinct syscalls a trace accessed, with first-seen attribution."""

    names: frozenset[str]
    first_seen: dict[str, int]
    filter_applied: ProcessFilter | None = None

    def __post_init__(self) -> None:
        if frozenset(self.first_seen) != self.names:
            raise ValueError("first_seen domain differs from names")

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class SaturationCurve:
    """Cumulative distinct-syscall counts sampled over trace time."""

    interval_ns: int
    points: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.interval_ns <= 0:
            raise ValueError("interval_ns must be positive")
        prev = 0
        for _, count in self.points:
            if count < prev:
                raise ValueError("counts must be non-decreasing")
            prev = count


FrequencyHistogram = Counter  # name -> enter-event invocation count


def _enter_events(log: TraceLog, proc_filter: ProcessFilter | None):
    enter = Direction.ENTER
    if proc_filter is None:
        for ev in log.events:
            if ev.direction is enter:
                yield ev
    else:
        matches = proc_filter.matches
        for ev in log.events:
            if ev.direction is enter and matches(ev.process_name):
                yield ev


def extract_syscalls(
    log: TraceLog, proc_filter: ProcessFilter | None = None
) -> MinedSet:
    """Collect the distinct syscall names over enter events.

    ``first_seen`` maps each name to the timestamp of its earliest enter
    event in the (filtered) log. An empty log mines an empty set.
    """
    first_seen: dict[str, int] = {}
    setdefault = first_seen.setdefault
    for ev in _enter_events(log, proc_filter):
        # events are sorted, so the first insertion wins
        setdefault(ev.syscall_name, ev.timestamp_ns)
    return MinedSet(
        names=frozenset(first_seen),
        first_seen=first_seen,
        filter_applied=proc_filter,
    )


def saturation_curve(
    log: TraceLog,
    interval_ns: int = DEFAULT_INTERVAL_NS,
    proc_filter: ProcessFilter | None = None,
) -> SaturationCurve:
    """Sample cumulative distinct-syscall counts every ``interval_ns``.

    Samples sit at t = k * interval_ns for k >= 1 up to the log duration,
    plus one closing sample at the duration itself when it is not
    interval-aligned, so the final count always equals the full mined-set
    size. An empty-duration log yields an empty curve.
    """
    if interval_ns <= 0:
        raise ValueError("interval_ns must be positive")
    mined = extract_syscalls(log, proc_filter)
    seen_at = sorted(mined.first_seen.values())

    sample_times: list[int] = []
    t = interval_ns
    while t <= log.duration_ns:
        sample_times.append(t)
        t += interval_ns
    if log.duration_ns > 0 and (
        not sample_times or sample_times[-1] != log.duration_ns
    ):
        sample_times.append(log.duration_ns)

    points = tuple((t, bisect_right(seen_at, t)) for t in sample_times)
    return SaturationCurve(interval_ns=interval_ns, points=points)


def detect_convergence(
    curve: SaturationCurve, quiet_window_ns: int = DEFAULT_QUIET_WINDOW_NS
) -> int | None:
    """Find the earliest sample time followed by a quiet window.

    Returns the sample time t such that no sample in (t, t + quiet window]
    shows a new syscall and the curve extends to at least t + quiet window;
    None when no such sample exists. An empty curve never converges: absence
    of data is not evidence of saturation.
    """
    if quiet_window_ns < curve.interval_ns:
        raise ValueError("quiet window must be at least one sampling interval")
    if not curve.points:
        return None

    times = [t for t, _ in curve.points]
    counts = [c for _, c in curve.points]
    extent = times[-1]

    # next_growth[i]: time of the first sample after i with a larger count
    next_growth: list[int | None] = [None] * len(times)
    upcoming: int | None = None
    for i in range(len(times) - 2, -1, -1):
        if counts[i + 1] > counts[i]:
            upcoming = times[i + 1]
        next_growth[i] = upcoming

    for i, t in enumerate(times):
        if t + quiet_window_ns > extent:
            break  # later samples only have shorter lookahead
        if next_growth[i] is None or next_growth[i] > t + quiet_window_ns:
            return t
    return None


def frequency_histogram(
    log: TraceLog, proc_filter: ProcessFilter | None = None
) -> Counter:
    """Count enter-event invocations per syscall name."""
    return Counter(ev.syscall_name for ev in _enter_events(log, proc_filter))
