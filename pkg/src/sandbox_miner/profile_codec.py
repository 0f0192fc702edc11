"""Translate mined syscall sets into Seccomp profiles and back.

The on-disk form is the JSON profile consumed by
``docker run --security-opt seccomp=<file>``: a ``defaultAction``, an
``architectures`` list, and a ``syscalls`` array of
``{"name": ..., "action": ..., "args": []}`` rules. Serialization is
canonical (fixed key order, rules sorted by name, 2-space indent, trailing
newline) so equal profiles are byte-identical, which makes golden tests and
diffing trivial.

Argument constraints are out of scope: ``args`` is always the empty list,
kept explicit for compatibility with the consumer.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass

from .miner import MinedSet
from .trace_model import SYSCALL_NAME_RE
from .trace_parser import ParseMode, normalize_name

logger = logging.getLogger(__name__)

DEFAULT_ARCHITECTURES = ("SCMP_ARCH_X86_64", "SCMP_ARCH_X86", "SCMP_ARCH_X32")

_TOP_LEVEL_KEYS = {"defaultAction", "architectures", "syscalls"}
_RULE_KEYS = {"name", "action", "args"}


class ProfileError(ValueError):
    """Invalid profile content or structure."""


class SeccompAction(enum.Enum):
    """Wire-level Seccomp actions."""

    ALLOW = "SCMP_ACT_ALLOW"
    ERRNO = "SCMP_ACT_ERRNO"
    KILL = "SCMP_ACT_KILL"
    TRACE = "SCMP_ACT_TRACE"

    @classmethod
    def from_wire(cls, token: str) -> "SeccompAction":
        try:
            return cls(token)
        except ValueError:
            raise ProfileError(f"unknown action token {token!r}") from None


@dataclass(frozen=True, slots=True)
class SeccompRule:
    """One whitelist entry: a syscall name bound to an action."""

    name: str
    action: SeccompAction
    args: tuple = ()

    def __post_init__(self) -> None:
        if not SYSCALL_NAME_RE.match(self.name):
            raise ProfileError(f"non-canonical syscall name {self.name!r}")
        if self.args:
            raise ProfileError("argument constraints are not supported")


@dataclass(frozen=True)
class SeccompProfile:
    """A complete profile: default action, architectures, sorted rules.

    Rules are sorted by name at construction and names must be unique. A
    profile whose default action is ALLOW while every rule is also ALLOW is
    rejected: such a whitelist restricts nothing.
    """

    default_action: SeccompAction
    architectures: tuple[str, ...] = DEFAULT_ARCHITECTURES
    rules: tuple[SeccompRule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "architectures", tuple(self.architectures))
        ordered = tuple(sorted(self.rules, key=lambda r: r.name))
        object.__setattr__(self, "rules", ordered)
        names = [r.name for r in ordered]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ProfileError(f"duplicate rule names: {', '.join(dupes)}")
        if self.default_action is SeccompAction.ALLOW and all(
            r.action is SeccompAction.ALLOW for r in ordered
        ):
            raise ProfileError(
                "vacuous profile: default action allows and so does every rule"
            )

    @property
    def allowed(self) -> frozenset[str]:
        """Names permitted by an explicit ALLOW rule."""
        return frozenset(
            r.name for r in self.rules if r.action is SeccompAction.ALLOW
        )

    def is_whitelist(self) -> bool:
        return all(r.action is SeccompAction.ALLOW for r in self.rules)


@dataclass(frozen=True)
class ProfileDiff:
    """Set comparison of two whitelists.

    ``reduction_ratio`` is the fraction of b's allow-list that a does not
    need: |only_in_b| / |allowed(b)| (0.0 when b allows nothing).
    """

    only_in_a: frozenset[str]
    only_in_b: frozenset[str]
    common: frozenset[str]
    reduction_ratio: float


def generate_profile(
    mined: MinedSet,
    default_action: SeccompAction = SeccompAction.ERRNO,
    architectures: tuple[str, ...] = DEFAULT_ARCHITECTURES,
) -> SeccompProfile:
    """Turn a mined syscall set into a whitelist profile.

    Every mined name becomes one ALLOW rule; anything else falls through to
    ``default_action``, which must therefore be a denying action. An empty
    mined set produces a deny-everything profile and logs a warning.
    """
    if default_action is SeccompAction.ALLOW:
        raise ProfileError("default action for a whitelist must deny")
    if not architectures:
        raise ProfileError("architecture list must not be empty")
    if not mined.names:
        logger.warning(
            "mined set is empty: generated profile denies every syscall"
        )
    rules = tuple(
        SeccompRule(name=name, action=SeccompAction.ALLOW)
        for name in sorted(mined.names)
    )
    return SeccompProfile(
        default_action=default_action,
        architectures=tuple(architectures),
        rules=rules,
    )


def serialize_profile(profile: SeccompProfile) -> bytes:
    """Render a profile as canonical JSON bytes.

    Key order is defaultAction, architectures, syscalls; rule keys are
    name, action, args; 2-space indentation; UTF-8 with a trailing newline.
    Equal profiles serialize to identical bytes.
    """
    doc = {
        "defaultAction": profile.default_action.value,
        "architectures": list(profile.architectures),
        "syscalls": [
            {"name": r.name, "action": r.action.value, "args": []}
            for r in profile.rules
        ],
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _parse_rule(obj, index: int, mode: ParseMode) -> SeccompRule | None:
    if not isinstance(obj, dict):
        raise ProfileError(f"syscalls[{index}] is not an object")
    unknown = set(obj) - _RULE_KEYS
    if unknown:
        msg = f"syscalls[{index}] has unknown keys: {sorted(unknown)}"
        if mode is ParseMode.STRICT:
            raise ProfileError(msg)
        logger.warning("%s (ignored)", msg)
    if "name" not in obj or "action" not in obj:
        raise ProfileError(f"syscalls[{index}] missing name or action")
    try:
        name = normalize_name(str(obj["name"]))
    except ValueError as exc:
        if mode is ParseMode.STRICT:
            raise ProfileError(f"syscalls[{index}]: {exc}") from None
        logger.warning("syscalls[%d]: %s (rule dropped)", index, exc)
        return None
    action = SeccompAction.from_wire(str(obj["action"]))
    args = obj.get("args", [])
    if args:
        msg = f"syscalls[{index}] carries argument constraints"
        if mode is ParseMode.STRICT:
            raise ProfileError(msg)
        logger.warning("%s (constraints dropped)", msg)
    return SeccompRule(name=name, action=action)


def parse_profile(
    data: bytes | str, mode: ParseMode = ParseMode.STRICT
) -> SeccompProfile:
    """Parse profile JSON into a SeccompProfile.

    Strict mode rejects unknown keys, duplicate rule names, missing
    ``architectures``/``syscalls`` sections and argument constraints.
    Lenient mode warns and recovers (first rule wins on duplicates,
    constraints are dropped). ``defaultAction`` is mandatory either way.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ProfileError("profile document must be a JSON object")

    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        msg = f"unknown top-level keys: {sorted(unknown)}"
        if mode is ParseMode.STRICT:
            raise ProfileError(msg)
        logger.warning("%s (ignored)", msg)

    if "defaultAction" not in doc:
        raise ProfileError("missing defaultAction")
    default_action = SeccompAction.from_wire(str(doc["defaultAction"]))

    if "architectures" in doc:
        archs = doc["architectures"]
        if not isinstance(archs, list) or not all(
            isinstance(a, str) for a in archs
        ):
            raise ProfileError("architectures must be a list of strings")
        architectures = tuple(archs)
    elif mode is ParseMode.STRICT:
        raise ProfileError("missing architectures")
    else:
        logger.warning("missing architectures (defaulting to empty list)")
        architectures = ()

    if "syscalls" in doc:
        raw_rules = doc["syscalls"]
        if not isinstance(raw_rules, list):
            raise ProfileError("syscalls must be a list")
    elif mode is ParseMode.STRICT:
        raise ProfileError("missing syscalls")
    else:
        logger.warning("missing syscalls (profile has zero rules)")
        raw_rules = []

    rules: dict[str, SeccompRule] = {}
    for index, obj in enumerate(raw_rules):
        rule = _parse_rule(obj, index, mode)
        if rule is None:
            continue
        if rule.name in rules:
            msg = f"duplicate rule name {rule.name!r}"
            if mode is ParseMode.STRICT:
                raise ProfileError(msg)
            logger.warning("%s (first rule wins)", msg)
            continue
        rules[rule.name] = rule

    return SeccompProfile(
        default_action=default_action,
        architectures=architectures,
        rules=tuple(rules.values()),
    )


def parse_profile_file(path, mode: ParseMode = ParseMode.STRICT) -> SeccompProfile:
    with open(path, "rb") as fp:
        return parse_profile(fp.read(), mode)


def diff_profiles(a: SeccompProfile, b: SeccompProfile) -> ProfileDiff:
    """Partition the allow-lists of two whitelist profiles.

    Both profiles must be pure whitelists. The reduction ratio reads b as
    the baseline: how much of b's surface does a leave unused.
    """
    for label, profile in (("a", a), ("b", b)):
        if not profile.is_whitelist():
            raise ProfileError(f"profile {label} is not a whitelist")
    allowed_a = a.allowed
    allowed_b = b.allowed
    only_in_b = allowed_b - allowed_a
    ratio = len(only_in_b) / len(allowed_b) if allowed_b else 0.0
    return ProfileDiff(
        only_in_a=frozenset(allowed_a - allowed_b),
        only_in_b=frozenset(only_in_b),
        common=frozenset(allowed_a & allowed_b),
        reduction_ratio=ratio,
    )
