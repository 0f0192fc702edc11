"""Write and read the miner's report artifacts.

Delimited formats (all tab-separated, ``#`` comments, ``#%`` directives):

* mined set:   ``name <TAB> first_seen_ns`` per line, sorted by name, with an
  informational ``#%filter`` directive describing any process filter.
* curve:       ``t_ns <TAB> cumulative_distinct_count`` per line, preceded by
  ``#%interval_ns``.
* histogram:   ``name <TAB> count`` per line, most frequent first (ties by
  name) to read like a frequency chart.

The audit report is JSON: its records are structured and consumers will want
them keyed, not positional.

Alongside the delimited output the report path can render the two display
artifacts (saturation curve, frequency histogram) as PNG figures; matplotlib
is imported lazily so library users who never plot do not pay for it.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

from .enforcer_sim import AuditRecord, AuditReport, Decision
from .miner import MinedSet, SaturationCurve
from .trace_model import DIRECTIVE_PREFIX, FIELD_SEP

_NS_PER_SECOND = 1_000_000_000


def write_mined_set(mined: MinedSet, path: Path | str) -> None:
    lines = []
    if mined.filter_applied is not None:
        desc = mined.filter_applied.describe()
        lines.append(f"{DIRECTIVE_PREFIX}filter{FIELD_SEP}{desc}")
    for name in sorted(mined.names):
        lines.append(f"{name}{FIELD_SEP}{mined.first_seen[name]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mined_set(path: Path | str) -> MinedSet:
    """Load a mined-set file.

    The filter directive is informational and not reconstructed; the loaded
    set carries ``filter_applied=None``.
    """
    first_seen: dict[str, int] = {}
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            name, ts_text = line.split(FIELD_SEP)
            first_seen[name] = int(ts_text)
        except ValueError:
            raise ValueError(
                f"{path}: line {line_no}: expected 'name<TAB>first_seen_ns'"
            ) from None
    return MinedSet(names=frozenset(first_seen), first_seen=first_seen)


def write_curve(curve: SaturationCurve, path: Path | str) -> None:
    lines = [f"{DIRECTIVE_PREFIX}interval_ns{FIELD_SEP}{curve.interval_ns}"]
    lines.extend(f"{t}{FIELD_SEP}{count}" for t, count in curve.points)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_curve(path: Path | str) -> SaturationCurve:
    interval_ns: int | None = None
    points: list[tuple[int, int]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith(DIRECTIVE_PREFIX):
            key, _, value = line[len(DIRECTIVE_PREFIX) :].partition(FIELD_SEP)
            if key == "interval_ns":
                interval_ns = int(value)
            continue
        if not line.strip() or line.startswith("#"):
            continue
        t_text, count_text = line.split(FIELD_SEP)
        points.append((int(t_text), int(count_text)))
    if interval_ns is None:
        raise ValueError(f"{path}: missing interval_ns directive")
    return SaturationCurve(interval_ns=interval_ns, points=tuple(points))


def write_histogram(histogram: Counter, path: Path | str) -> None:
    ordered = sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0]))
    lines = [f"{name}{FIELD_SEP}{count}" for name, count in ordered]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_histogram(path: Path | str) -> Counter:
    histogram: Counter = Counter()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, count_text = line.split(FIELD_SEP)
        histogram[name] = int(count_text)
    return histogram


def audit_report_to_dict(report: AuditReport) -> dict:
    return {
        "total_events": report.total_events,
        "allowed": report.allowed,
        "denied": report.denied,
        "skipped_after_kill": report.skipped_after_kill,
        "denied_names": sorted(report.denied_names),
        "records": [
            {
                "timestamp_ns": r.timestamp_ns,
                "process": r.process_name,
                "thread_id": r.thread_id,
                "syscall": r.syscall_name,
                "decision": r.decision.value,
            }
            for r in report.records
        ],
    }


def write_audit_report(report: AuditReport, path: Path | str) -> None:
    doc = audit_report_to_dict(report)
    Path(path).write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def read_audit_report(path: Path | str) -> AuditReport:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    records = tuple(
        AuditRecord(
            timestamp_ns=r["timestamp_ns"],
            process_name=r["process"],
            thread_id=r["thread_id"],
            syscall_name=r["syscall"],
            decision=Decision(r["decision"]),
        )
        for r in doc["records"]
    )
    return AuditReport(
        total_events=doc["total_events"],
        allowed=doc["allowed"],
        denied=doc["denied"],
        records=records,
        denied_names=frozenset(doc["denied_names"]),
        skipped_after_kill=doc.get("skipped_after_kill", 0),
    )


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_saturation_curve(curve: SaturationCurve, path: Path | str) -> None:
    """Render the cumulative distinct-syscall count over time as a PNG."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    if curve.points:
        times = [t / _NS_PER_SECOND for t, _ in curve.points]
        counts = [c for _, c in curve.points]
        ax.step([0.0] + times, [0] + counts, where="post", color="tab:blue")
        ax.plot(times, counts, "o", color="tab:blue", markersize=3)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("distinct syscalls accessed")
    ax.set_title("Syscall saturation")
    ax.grid(True, alpha=0.4)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_frequency_histogram(
    histogram: Counter, path: Path | str, top_n: int = 30
) -> None:
    """Render per-syscall invocation counts as a bar chart PNG.

    Only the ``top_n`` most frequent names are drawn; the long tail would
    make the labels unreadable.
    """
    plt = _pyplot()
    ordered = sorted(histogram.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    fig, ax = plt.subplots(figsize=(max(7, 0.3 * len(ordered) + 2), 4))
    if ordered:
        names = [name for name, _ in ordered]
        counts = [count for _, count in ordered]
        ax.bar(range(len(names)), counts, color="tab:blue")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=90, fontsize=8)
    ax.set_ylabel("invocations")
    ax.set_title("Syscall frequency")
    ax.grid(True, axis="y", alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
