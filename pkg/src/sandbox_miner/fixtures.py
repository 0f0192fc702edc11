"""Paths to the bundled example data.

Two fixtures ship with the package:

* ``helloworld.trace`` -- the trace of a minimal run-once container: the 24
  syscalls its runtime init and payload invoke, one enter record each, in
  invocation order, with a long quiet tail after the payload exits.
* ``docker-default.json`` -- a reconstruction of the stock Docker seccomp
  allowlist (300+ allowed syscalls), used as the attack-surface baseline.
  See the adjacent ``docker-default.provenance`` for where the list comes
  from and what was flattened.
"""

from __future__ import annotations

from pathlib import Path

_FIXTURE_DIR = Path(__file__).parent / "fixtures"


def helloworld_trace_path() -> Path:
    return _FIXTURE_DIR / "helloworld.trace"


def default_docker_profile_path() -> Path:
    return _FIXTURE_DIR / "docker-default.json"


def default_docker_provenance_path() -> Path:
    return _FIXTURE_DIR / "docker-default.provenance"
