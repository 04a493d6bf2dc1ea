"""Traces, windows over traces, suffix label counts and log ingestion (XES/CSV)."""
from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import MalformedInput, MissingColumn, WindowLengthZero

ColumnRef = Union[str, int]


@dataclass(frozen=True)
class Trace:
    case_id: str
    activities: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "activities", tuple(self.activities))

    def __len__(self) -> int:
        return len(self.activities)


@dataclass(frozen=True)
class SubtraceView:
    """Window ``activities[start:end]`` of a parent trace (0-based, end exclusive)."""

    parent: Trace
    start: int
    end: int
    window_index: int

    def __post_init__(self):
        if not 0 <= self.start <= self.end <= len(self.parent):
            raise ValueError(f"window [{self.start}, {self.end}) outside trace of length {len(self.parent)}")

    @property
    def activities(self) -> tuple[str, ...]:
        return self.parent.activities[self.start:self.end]

    def __len__(self) -> int:
        return self.end - self.start


def full_view(trace: Trace) -> SubtraceView:
    return SubtraceView(trace, 0, len(trace), 0)


@dataclass(frozen=True)
class SuffixFrequency:
    """``counts[p]`` maps each label to its number of occurrences in ``activities[p:]``."""

    counts: tuple[Mapping[str, int], ...]

    def at(self, position: int) -> Mapping[str, int]:
        return self.counts[position]


@dataclass
class EventLog:
    traces: list[Trace] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for t in self.traces:
            if t.case_id in seen:
                raise ValueError(f"duplicate case id {t.case_id!r}")
            seen.add(t.case_id)

    @property
    def activity_alphabet(self) -> set[str]:
        return {a for t in self.traces for a in t.activities}

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def filter_min_length(self, n: int) -> "EventLog":
        return EventLog([t for t in self.traces if len(t) >= n])


def split_trace(trace: Trace, window_length: int) -> list[SubtraceView]:
    """Tile the trace into consecutive windows of ``window_length`` (the last may be shorter)."""
    if window_length < 1:
        raise WindowLengthZero(f"window length must be >= 1, got {window_length}")
    n = len(trace)
    return [
        SubtraceView(trace, start, min(start + window_length, n), i)
        for i, start in enumerate(range(0, n, window_length))
    ]


def suffix_frequencies(trace: Trace) -> SuffixFrequency:
    running: Counter = Counter()
    out: list[Mapping[str, int]] = [{}]
    for label in reversed(trace.activities):
        running[label] += 1
        out.append(dict(running))
    out.reverse()
    return SuffixFrequency(tuple(out))


# -- XES ---------------------------------------------------------------------

def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _concept_name(elem) -> Optional[str]:
    for c in elem:
        if _local(c.tag) == "string" and c.get("key") == "concept:name":
            return c.get("value")
    return None


def parse_xes(data: bytes | str) -> EventLog:
    """Read the ``concept:name`` sequence of every ``<trace>`` in an XES document."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedInput(f"XES is not well-formed XML: {exc}") from None
    if _local(root.tag) != "log":
        raise MalformedInput(f"XES root element is <{_local(root.tag)}>, expected <log>")
    traces = []
    seen: set[str] = set()
    for ti, trace_el in enumerate(c for c in root if _local(c.tag) == "trace"):
        case_id = _concept_name(trace_el) or str(ti)
        if case_id in seen:
            raise MalformedInput(f"<trace> #{ti}: duplicate case id {case_id!r}")
        seen.add(case_id)
        acts = []
        for ei, ev in enumerate(c for c in trace_el if _local(c.tag) == "event"):
            name = _concept_name(ev)
            if name is None:
                raise MalformedInput(f"<trace> {case_id!r}, <event> #{ei}: missing concept:name")
            acts.append(name)
        traces.append(Trace(case_id, acts))
    return EventLog(traces)


def to_xes(log: EventLog) -> str:
    root = ET.Element("log", {"xes.version": "1.0", "xmlns": "http://www.xes-standard.org/"})
    ET.SubElement(root, "extension", name="Concept", prefix="concept", uri="http://www.xes-standard.org/concept.xesext")
    for t in log.traces:
        te = ET.SubElement(root, "trace")
        ET.SubElement(te, "string", key="concept:name", value=t.case_id)
        for a in t.activities:
            ET.SubElement(ET.SubElement(te, "event"), "string", key="concept:name", value=a)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True)


# -- CSV ---------------------------------------------------------------------

def _resolve(header: Sequence[str], ref: ColumnRef, role: str) -> int:
    if isinstance(ref, int) or (isinstance(ref, str) and ref.isdigit() and ref not in header):
        idx = int(ref)
        if not 0 <= idx < len(header):
            raise MissingColumn(f"{role} column index {idx} out of range (header has {len(header)} columns)")
        return idx
    try:
        return list(header).index(ref)
    except ValueError:
        raise MissingColumn(f"{role} column {ref!r} not in header {list(header)}") from None


def _parse_time(text: str, lineno: int) -> float:
    try:
        dt = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    except ValueError:
        raise MalformedInput(f"line {lineno}: unparseable timestamp {text!r}") from None
    return dt.timestamp()


def parse_csv(
    data: bytes | str,
    case: ColumnRef = "case",
    activity: ColumnRef = "activity",
    time: Optional[ColumnRef] = None,
    delimiter: str = ",",
) -> EventLog:
    """One trace per case id, in order of first appearance.

    Events within a case keep file order, or are stably sorted by timestamp
    when a time column is given.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(data), delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        raise MissingColumn("CSV has no header row")
    ci = _resolve(header, case, "case")
    ai = _resolve(header, activity, "activity")
    ti = _resolve(header, time, "time") if time is not None else None

    rows: dict[str, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        need = max(ci, ai, ti if ti is not None else 0)
        if len(row) <= need:
            raise MalformedInput(f"line {lineno}: expected at least {need + 1} fields, got {len(row)}")
        key = _parse_time(row[ti], lineno) if ti is not None else 0.0
        rows.setdefault(row[ci], []).append((key, lineno, row[ai]))
    traces = [Trace(cid, [a for _, _, a in sorted(evs)]) for cid, evs in rows.items()]
    return EventLog(traces)


def to_csv(log: EventLog, case: str = "case", activity: str = "activity") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([case, activity])
    for t in log.traces:
        for a in t.activities:
            w.writerow([t.case_id, a])
    return buf.getvalue()


def log_from_sequences(seqs: Iterable[Sequence[str]], prefix: str = "case") -> EventLog:
    return EventLog([Trace(f"{prefix}{i}", s) for i, s in enumerate(seqs)])
