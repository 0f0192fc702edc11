"""Profile generation, canonical serialization, parsing and diffing."""

import json
import random

import pytest

from conftest import HELLO_WORLD_NAMES, NAME_ALPHABET
from sandbox_miner.miner import MinedSet, extract_syscalls
from sandbox_miner.profile_codec import (
    DEFAULT_ARCHITECTURES,
    ProfileError,
    SeccompAction,
    SeccompProfile,
    SeccompRule,
    diff_profiles,
    generate_profile,
    parse_profile,
    serialize_profile,
)
from sandbox_miner.trace_parser import ParseMode

# A Docker-style profile document as found in the wild (4-space indent,
# unsorted rules) -- parsing must canonicalize it.
SAMPLE_PROFILE_JSON = """
{
    "defaultAction": "SCMP_ACT_ERRNO",
    "architectures": [
        "SCMP_ARCH_X86_64",
        "SCMP_ARCH_X86",
        "SCMP_ARCH_X32"
    ],
    "syscalls": [
        {
            "name": "accept",
            "action": "SCMP_ACT_ALLOW",
            "args": []
        },
        {
            "name": "accept4",
            "action": "SCMP_ACT_ALLOW",
            "args": []
        }
    ]
}
"""

WRITE_ONLY_GOLDEN = b"""{
  "defaultAction": "SCMP_ACT_ERRNO",
  "architectures": [
    "SCMP_ARCH_X86_64",
    "SCMP_ARCH_X86",
    "SCMP_ARCH_X32"
  ],
  "syscalls": [
    {
      "name": "write",
      "action": "SCMP_ACT_ALLOW",
      "args": []
    }
  ]
}
"""


def mined(*names: str) -> MinedSet:
    return MinedSet(
        names=frozenset(names), first_seen={n: i for i, n in enumerate(names)}
    )


def random_profile(rng: random.Random) -> SeccompProfile:
    names = rng.sample(NAME_ALPHABET, rng.randint(0, 40))
    action = rng.choice(
        [SeccompAction.ERRNO, SeccompAction.KILL, SeccompAction.TRACE]
    )
    archs = tuple(
        rng.sample(
            ["SCMP_ARCH_X86_64", "SCMP_ARCH_X86", "SCMP_ARCH_X32", "SCMP_ARCH_AARCH64"],
            rng.randint(1, 4),
        )
    )
    return generate_profile(mined(*names), action, archs)


class TestGenerateProfile:
    def test_single_write_rule(self):
        profile = generate_profile(mined("write"))
        assert profile.default_action is SeccompAction.ERRNO
        assert profile.rules == (
            SeccompRule(name="write", action=SeccompAction.ALLOW, args=()),
        )
        data = serialize_profile(profile)
        assert b'"defaultAction": "SCMP_ACT_ERRNO"' in data
        assert b'"name": "write"' in data
        assert data == WRITE_ONLY_GOLDEN

    def test_empty_set_warns_and_denies_everything(self, caplog):
        with caplog.at_level("WARNING"):
            profile = generate_profile(mined())
        assert profile.rules == ()
        assert any("denies" in r.message for r in caplog.records)

    def test_helloworld_rules_sorted_ascending(self):
        profile = generate_profile(mined(*HELLO_WORLD_NAMES))
        # oracle: sort the invocation-order listing independently
        assert [r.name for r in profile.rules] == sorted(HELLO_WORLD_NAMES)
        assert len(profile.rules) == 24
        assert all(r.action is SeccompAction.ALLOW for r in profile.rules)

    def test_allowed_equals_mined_names(self, rng):
        for _ in range(20):
            names = rng.sample(NAME_ALPHABET, rng.randint(0, 30))
            profile = generate_profile(mined(*names))
            assert profile.allowed == frozenset(names)

    def test_allow_default_rejected(self):
        with pytest.raises(ProfileError, match="deny"):
            generate_profile(mined("write"), SeccompAction.ALLOW)

    def test_empty_architectures_rejected(self):
        with pytest.raises(ProfileError, match="architecture"):
            generate_profile(mined("write"), architectures=())

    def test_non_canonical_name_rejected(self):
        with pytest.raises(ProfileError, match="non-canonical"):
            generate_profile(mined("Write()"))

    def test_deterministic_across_set_orderings(self, rng):
        names = rng.sample(NAME_ALPHABET, 20)
        a = generate_profile(mined(*names))
        b = generate_profile(mined(*reversed(names)))
        assert serialize_profile(a) == serialize_profile(b)


class TestProfileInvariants:
    def test_duplicate_rule_names_rejected(self):
        rules = (
            SeccompRule("read", SeccompAction.ALLOW),
            SeccompRule("read", SeccompAction.ALLOW),
        )
        with pytest.raises(ProfileError, match="duplicate"):
            SeccompProfile(SeccompAction.ERRNO, rules=rules)

    def test_vacuous_allow_everything_rejected(self):
        with pytest.raises(ProfileError, match="vacuous"):
            SeccompProfile(
                SeccompAction.ALLOW,
                rules=(SeccompRule("read", SeccompAction.ALLOW),),
            )
        with pytest.raises(ProfileError, match="vacuous"):
            SeccompProfile(SeccompAction.ALLOW, rules=())

    def test_blacklist_profiles_are_constructible(self):
        profile = SeccompProfile(
            SeccompAction.ALLOW,
            rules=(SeccompRule("ptrace", SeccompAction.ERRNO),),
        )
        assert not profile.is_whitelist()

    def test_rules_sorted_at_construction(self):
        profile = SeccompProfile(
            SeccompAction.ERRNO,
            rules=(
                SeccompRule("write", SeccompAction.ALLOW),
                SeccompRule("read", SeccompAction.ALLOW),
            ),
        )
        assert [r.name for r in profile.rules] == ["read", "write"]

    def test_args_constraints_rejected(self):
        with pytest.raises(ProfileError, match="constraint"):
            SeccompRule("clone", SeccompAction.ALLOW, args=("x",))


class TestSerializeParse:
    def test_wire_action_strings(self):
        assert SeccompAction.ALLOW.value == "SCMP_ACT_ALLOW"
        assert SeccompAction.ERRNO.value == "SCMP_ACT_ERRNO"
        assert SeccompAction.KILL.value == "SCMP_ACT_KILL"
        assert SeccompAction.TRACE.value == "SCMP_ACT_TRACE"

    def test_sample_document_parses(self):
        profile = parse_profile(SAMPLE_PROFILE_JSON)
        assert profile.default_action is SeccompAction.ERRNO
        assert profile.architectures == DEFAULT_ARCHITECTURES
        assert [r.name for r in profile.rules] == ["accept", "accept4"]

    def test_roundtrip_identity(self, rng):
        for _ in range(30):
            profile = random_profile(rng)
            data = serialize_profile(profile)
            assert parse_profile(data) == profile
            assert serialize_profile(parse_profile(data)) == data

    def test_serialization_is_stable_across_runs(self, rng):
        profile = random_profile(rng)
        assert serialize_profile(profile) == serialize_profile(profile)

    def test_shuffled_rule_order_gives_identical_bytes(self, rng):
        profile = random_profile(rng)
        doc = json.loads(serialize_profile(profile))
        rng.shuffle(doc["syscalls"])
        reparsed = parse_profile(json.dumps(doc))
        assert serialize_profile(reparsed) == serialize_profile(profile)

    def test_trailing_newline_and_indent(self):
        data = serialize_profile(generate_profile(mined("write")))
        assert data.endswith(b"}\n")
        assert b'\n  "architectures"' in data

    def test_missing_syscalls_lenient_vs_strict(self):
        doc = '{"defaultAction": "SCMP_ACT_ERRNO", "architectures": ["SCMP_ARCH_X86_64"]}'
        with pytest.raises(ProfileError, match="syscalls"):
            parse_profile(doc, ParseMode.STRICT)
        profile = parse_profile(doc, ParseMode.LENIENT)
        assert profile.rules == ()

    def test_missing_default_action_always_fails(self):
        doc = '{"architectures": [], "syscalls": []}'
        for mode in (ParseMode.STRICT, ParseMode.LENIENT):
            with pytest.raises(ProfileError, match="defaultAction"):
                parse_profile(doc, mode)

    def test_malformed_json(self):
        with pytest.raises(ProfileError, match="JSON"):
            parse_profile("{not json")

    def test_unknown_action_token(self):
        doc = '{"defaultAction": "SCMP_ACT_BOGUS", "architectures": [], "syscalls": []}'
        with pytest.raises(ProfileError, match="unknown action"):
            parse_profile(doc)

    def test_unknown_top_level_key_strict_vs_lenient(self, caplog):
        doc = (
            '{"defaultAction": "SCMP_ACT_ERRNO", "architectures": ["A"],'
            ' "syscalls": [], "comment": "hi"}'
        )
        with pytest.raises(ProfileError, match="unknown top-level"):
            parse_profile(doc, ParseMode.STRICT)
        with caplog.at_level("WARNING"):
            profile = parse_profile(doc, ParseMode.LENIENT)
        assert profile.rules == ()
        assert any("unknown top-level" in r.message for r in caplog.records)

    def test_duplicate_rules_strict_vs_lenient(self):
        doc = json.dumps(
            {
                "defaultAction": "SCMP_ACT_ERRNO",
                "architectures": ["A"],
                "syscalls": [
                    {"name": "read", "action": "SCMP_ACT_ALLOW", "args": []},
                    {"name": "read", "action": "SCMP_ACT_ALLOW", "args": []},
                ],
            }
        )
        with pytest.raises(ProfileError, match="duplicate"):
            parse_profile(doc, ParseMode.STRICT)
        profile = parse_profile(doc, ParseMode.LENIENT)
        assert [r.name for r in profile.rules] == ["read"]

    def test_decorated_rule_names_normalize(self):
        doc = json.dumps(
            {
                "defaultAction": "SCMP_ACT_ERRNO",
                "architectures": ["A"],
                "syscalls": [
                    {"name": "Openat()", "action": "SCMP_ACT_ALLOW", "args": []}
                ],
            }
        )
        profile = parse_profile(doc)
        assert profile.rules[0].name == "openat"

    def test_arg_constraints_strict_vs_lenient(self):
        doc = json.dumps(
            {
                "defaultAction": "SCMP_ACT_ERRNO",
                "architectures": ["A"],
                "syscalls": [
                    {
                        "name": "personality",
                        "action": "SCMP_ACT_ALLOW",
                        "args": [{"index": 0, "value": 0, "op": "SCMP_CMP_EQ"}],
                    }
                ],
            }
        )
        with pytest.raises(ProfileError, match="constraint"):
            parse_profile(doc, ParseMode.STRICT)
        profile = parse_profile(doc, ParseMode.LENIENT)
        assert profile.rules[0].args == ()


class TestDiffProfiles:
    def test_self_diff(self):
        p = generate_profile(mined("read", "write"))
        diff = diff_profiles(p, p)
        assert diff.only_in_a == diff.only_in_b == frozenset()
        assert diff.common == {"read", "write"}
        assert diff.reduction_ratio == 0.0

    def test_simple_reduction_ratio(self):
        a = generate_profile(mined("read"))
        b = generate_profile(mined("read", "write"))
        diff = diff_profiles(a, b)
        assert diff.only_in_b == {"write"}
        assert diff.reduction_ratio == pytest.approx(0.5)

    def test_helloworld_against_default_baseline(
        self, helloworld_log, default_docker_profile
    ):
        mined_set = extract_syscalls(helloworld_log)
        profile = generate_profile(mined_set)
        diff = diff_profiles(profile, default_docker_profile)
        # oracle: plain set arithmetic over the two allow-lists
        allowed_default = default_docker_profile.allowed
        assert diff.common == profile.allowed & allowed_default
        assert len(diff.common) == 24
        expected_ratio = (len(allowed_default) - 24) / len(allowed_default)
        assert diff.reduction_ratio == pytest.approx(expected_ratio)

    def test_swap_symmetry(self, rng):
        for _ in range(15):
            a = random_profile(rng)
            b = random_profile(rng)
            ab = diff_profiles(a, b)
            ba = diff_profiles(b, a)
            assert ab.only_in_a == ba.only_in_b
            assert ab.only_in_b == ba.only_in_a
            assert ab.common == ba.common

    def test_partition_covers_union(self, rng):
        a = random_profile(rng)
        b = random_profile(rng)
        diff = diff_profiles(a, b)
        union = a.allowed | b.allowed
        assert diff.only_in_a | diff.only_in_b | diff.common == union
        assert diff.only_in_a.isdisjoint(diff.only_in_b)
        assert diff.only_in_a.isdisjoint(diff.common)
        assert diff.only_in_b.isdisjoint(diff.common)

    def test_non_whitelist_rejected(self):
        blacklist = SeccompProfile(
            SeccompAction.ALLOW,
            rules=(SeccompRule("ptrace", SeccompAction.ERRNO),),
        )
        whitelist = generate_profile(mined("read"))
        with pytest.raises(ProfileError, match="whitelist"):
            diff_profiles(blacklist, whitelist)
        with pytest.raises(ProfileError, match="whitelist"):
            diff_profiles(whitelist, blacklist)

    def test_empty_baseline_ratio_is_zero(self):
        a = generate_profile(mined("read"))
        b = generate_profile(mined())
        assert diff_profiles(a, b).reduction_ratio == 0.0


class TestBundledDefaultProfile:
    def test_counts_and_coverage(self, default_docker_profile):
        allowed = default_docker_profile.allowed
        assert len(allowed) == 314  # frozen property of the bundled fixture
        assert len(allowed) > 300
        assert frozenset(HELLO_WORLD_NAMES) <= allowed
        assert default_docker_profile.default_action is SeccompAction.ERRNO

    def test_fixture_is_canonical_bytes(self, default_docker_profile):
        from sandbox_miner.fixtures import default_docker_profile_path

        data = default_docker_profile_path().read_bytes()
        assert serialize_profile(default_docker_profile) == data

    def test_provenance_sidecar_exists(self):
        from sandbox_miner.fixtures import default_docker_provenance_path

        text = default_docker_provenance_path().read_text()
        assert "Docker" in text
