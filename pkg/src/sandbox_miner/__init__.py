"""sandbox-miner: mine syscall whitelists for containers from traces.

The library mirrors the two phases of sandbox mining: first extract the set
of syscalls a container accessed while being exercised (and decide whether
that set has saturated), then turn the set into a Docker-consumable Seccomp
whitelist and audit it by replaying traces against it.
"""

__version__ = "0.1.0"

from .enforcer_sim import AuditRecord, AuditReport, Decision, evaluate, replay
from .miner import (
    FrequencyHistogram,
    MinedSet,
    ProcessFilter,
    SaturationCurve,
    detect_convergence,
    extract_syscalls,
    frequency_histogram,
    saturation_curve,
)
from .profile_codec import (
    DEFAULT_ARCHITECTURES,
    ProfileDiff,
    ProfileError,
    SeccompAction,
    SeccompProfile,
    SeccompRule,
    diff_profiles,
    generate_profile,
    parse_profile,
    serialize_profile,
)
from .trace_model import (
    Direction,
    SyscallEvent,
    TraceLog,
    build_log,
    dump_trace,
    dumps_trace,
    merge_logs,
    validate_event,
)
from .trace_parser import (
    ParseMode,
    ParseReport,
    TraceParseError,
    normalize_name,
    parse_trace,
    parse_trace_file,
)

__all__ = [
    "__version__",
    "AuditRecord",
    "AuditReport",
    "Decision",
    "DEFAULT_ARCHITECTURES",
    "Direction",
    "FrequencyHistogram",
    "MinedSet",
    "ParseMode",
    "ParseReport",
    "ProcessFilter",
    "ProfileDiff",
    "ProfileError",
    "SaturationCurve",
    "SeccompAction",
    "SeccompProfile",
    "SeccompRule",
    "SyscallEvent",
    "TraceLog",
    "TraceParseError",
    "build_log",
    "detect_convergence",
    "diff_profiles",
    "dump_trace",
    "dumps_trace",
    "evaluate",
    "extract_syscalls",
    "frequency_histogram",
    "generate_profile",
    "merge_logs",
    "normalize_name",
    "parse_profile",
    "parse_trace",
    "parse_trace_file",
    "replay",
    "saturation_curve",
    "serialize_profile",
    "validate_event",
]
