"""Replay traces against profiles with whitelist Seccomp semantics.

This is a desk-scale stand-in for kernel enforcement: it decides, per enter
event, whether a profile would have permitted the call, and tallies denials
the way an audit daemon would log them. The simulator models whitelists
only; a rule with a non-ALLOW action never shadows the default action, and a
profile whose default action is ALLOW is rejected outright.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .profile_codec import ProfileError, SeccompAction, SeccompProfile
from .trace_model import Direction, TraceLog


class Decision(enum.Enum):
    """Outcome of evaluating one syscall against a profile."""

    ALLOWED = "allowed"
    DENIED_ERRNO = "denied_errno"
    KILLED = "killed"
    TRACED = "traced"


_DEFAULT_ACTION_DECISION = {
    SeccompAction.ERRNO: Decision.DENIED_ERRNO,
    SeccompAction.KILL: Decision.KILLED,
    SeccompAction.TRACE: Decision.TRACED,
}


@dataclass(frozen=True, slots=True)
class AuditRecord:
    """One denied syscall invocation, as an audit log would capture it."""

    timestamp_ns: int
    process_name: str
    thread_id: int
    syscall_name: str
    decision: Decision

    def __post_init__(self) -> None:
        if self.decision is Decision.ALLOWED:
            raise ValueError("audit records capture denials only")


@dataclass(frozen=True)
class AuditReport:
    """Tally of one replay run.

    ``denied`` counts every non-allowed decision (errno, kill, and trace:
    a traced call interrupts normal flow even though the kernel would hand
    it to a tracer). ``skipped_after_kill`` counts enter events that were
    never evaluated because their thread had already been killed.
    """

    total_events: int
    allowed: int
    denied: int
    records: tuple[AuditRecord, ...]
    denied_names: frozenset[str]
    skipped_after_kill: int = 0

    def __post_init__(self) -> None:
        if self.allowed + self.denied != self.total_events:
            raise ValueError("allowed + denied must equal total_events")
        if len(self.records) != self.denied:
            raise ValueError("one audit record per denial")
        if frozenset(r.syscall_name for r in self.records) != self.denied_names:
            raise ValueError("denied_names must match the records")


def _default_decision(profile: SeccompProfile) -> Decision:
    try:
        return _DEFAULT_ACTION_DECISION[profile.default_action]
    except KeyError:
        raise ProfileError(
            "whitelist simulator requires a denying default action, "
            f"got {profile.default_action.value}"
        ) from None


def evaluate(profile: SeccompProfile, name: str) -> Decision:
    """Decide one syscall name: ALLOWED iff an ALLOW rule names it,
    otherwise the decision implied by the profile's default action."""
    if name in profile.allowed:
        return Decision.ALLOWED
    return _default_decision(profile)


def replay(
    profile: SeccompProfile, log: TraceLog, stop_on_kill: bool = False
) -> AuditReport:
    """Evaluate every enter event of a log against a profile.

    With ``stop_on_kill``, a KILLED decision suppresses all later events of
    the same thread id (the trace format carries no parent/child links, so
    kill semantics stop at thread granularity); the suppressed events are
    counted separately instead of being evaluated.
    """
    denied_decision = _default_decision(profile)
    allowed_names = profile.allowed
    enter = Direction.ENTER

    allowed = 0
    skipped = 0
    records: list[AuditRecord] = []
    killed_threads: set[int] = set()

    for ev in log.events:
        if ev.direction is not enter:
            continue
        if stop_on_kill and ev.thread_id in killed_threads:
            skipped += 1
            continue
        if ev.syscall_name in allowed_names:
            allowed += 1
            continue
        records.append(
            AuditRecord(
                timestamp_ns=ev.timestamp_ns,
                process_name=ev.process_name,
                thread_id=ev.thread_id,
                syscall_name=ev.syscall_name,
                decision=denied_decision,
            )
        )
        if stop_on_kill and denied_decision is Decision.KILLED:
            killed_threads.add(ev.thread_id)

    return AuditReport(
        total_events=allowed + len(records),
        allowed=allowed,
        denied=len(records),
        records=tuple(records),
        denied_names=frozenset(r.syscall_name for r in records),
        skipped_after_kill=skipped,
    )
