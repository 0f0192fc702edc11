"""Shared fixtures: seeded RNG, trace builders, bundled fixture logs."""

from __future__ import annotations

import random

import pytest

from sandbox_miner.fixtures import (
    default_docker_profile_path,
    helloworld_trace_path,
)
from sandbox_miner.profile_codec import parse_profile_file
from sandbox_miner.trace_model import Direction, SyscallEvent, build_log
from sandbox_miner.trace_parser import ParseMode, parse_trace_file

# The syscalls of the bundled hello-world trace, in invocation order.
HELLO_WORLD_NAMES = [
    "openat", "getdents64", "lstat", "close", "fcntl", "getpid", "capget",
    "prctl", "getuid", "getgid", "read", "stat", "fstat", "fchown",
    "setgroups", "setgid", "futex", "setuid", "capset", "chdir", "getppid",
    "execve", "write", "exit",
]

# 400 distinct canonical names for randomized traces.
NAME_ALPHABET = [f"sc_{i:03d}" for i in range(400)]


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0x5ECC0)


def make_enter(
    ts: int,
    name: str,
    process: str = "proc",
    tid: int = 1,
    args: tuple[str, ...] = (),
) -> SyscallEvent:
    return SyscallEvent(ts, process, tid, name, Direction.ENTER, args)


def make_exit(
    ts: int, name: str, process: str = "proc", tid: int = 1, ret: str = "0"
) -> SyscallEvent:
    return SyscallEvent(ts, process, tid, name, Direction.EXIT, (ret,))


def random_log(
    rng: random.Random,
    n_events: int,
    n_names: int = 40,
    max_ts: int = 10**12,
    n_processes: int = 3,
    exit_fraction: float = 0.2,
):
    """A random, valid TraceLog drawn from the shared name alphabet."""
    names = rng.sample(NAME_ALPHABET, min(n_names, len(NAME_ALPHABET)))
    processes = [f"p{i}" for i in range(n_processes)]
    events = []
    for _ in range(n_events):
        ts = rng.randrange(max_ts)
        name = rng.choice(names)
        process = rng.choice(processes)
        tid = rng.randint(1, 4)
        if rng.random() < exit_fraction:
            events.append(make_exit(ts, name, process, tid))
        else:
            n_args = rng.randint(0, 3)
            args = tuple(f"a{j}" for j in range(n_args))
            events.append(make_enter(ts, name, process, tid, args))
    return build_log(events, source_label="random")


@pytest.fixture(scope="session")
def helloworld_log():
    report = parse_trace_file(helloworld_trace_path(), ParseMode.STRICT)
    return report.log


@pytest.fixture(scope="session")
def default_docker_profile():
    return parse_profile_file(default_docker_profile_path())
