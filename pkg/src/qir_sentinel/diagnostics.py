"""Diagnostic kinds, reports and their text/JSON renderings."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from . import __version__
from .ast import NO_SPAN, SourceSpan

SCHEMA_VERSION = "1"


class Severity(str, Enum):
    ERROR = "error"
    NOTE = "note"


class Kind(str, Enum):
    UseAfterReleaseQubit = "UseAfterReleaseQubit"
    UseAfterReleaseArray = "UseAfterReleaseArray"
    ReleaseQubitInArray = "ReleaseQubitInArray"
    DoubleReleaseQubit = "DoubleReleaseQubit"
    DoubleReleaseArray = "DoubleReleaseArray"
    ReleaseStaticQubit = "ReleaseStaticQubit"
    CloneInArrayStore = "CloneInArrayStore"
    CloneControlTarget = "CloneControlTarget"
    MeasureReleasedArray = "MeasureReleasedArray"
    LoadFromReleasedArray = "LoadFromReleasedArray"
    IndexOutOfBounds = "IndexOutOfBounds"
    MultiArrayMembershipNote = "MultiArrayMembershipNote"
    # analyzer-internal notes
    TypeMismatch = "TypeMismatch"
    AnalysisGap = "AnalysisGap"
    UnrecognizedGate = "UnrecognizedGate"
    InlineLimit = "InlineLimit"
    UnrollLimit = "UnrollLimit"
    Incomplete = "Incomplete"


PLUMBING = "plumbing"

RULES = ("Q_ALLOC", "QARR_ALLOC", "Q_DEALLOC", "QARR_DEALLOC", "Q_LOAD",
         "QARR_CREATE", "SG_OP", "CG_OP", "MEASURE")

# kind -> (severity, rules that may report it, message template)
KIND_INFO: dict[Kind, tuple[Severity, frozenset[str], str]] = {
    Kind.UseAfterReleaseQubit: (
        Severity.ERROR, frozenset({"SG_OP", "CG_OP", "QARR_CREATE", "Q_DEALLOC"}),
        "qubit {subject} is used after it was released"),
    Kind.UseAfterReleaseArray: (
        Severity.ERROR, frozenset({"CG_OP", "QARR_CREATE", "QARR_DEALLOC"}),
        "qubit array {subject} is used after it was released"),
    Kind.ReleaseQubitInArray: (
        Severity.ERROR, frozenset({"Q_DEALLOC"}),
        "qubit {subject} belongs to qubit array {other} and cannot be released on its own"),
    Kind.DoubleReleaseQubit: (
        Severity.ERROR, frozenset({"Q_DEALLOC"}),
        "qubit {subject} is released twice"),
    Kind.DoubleReleaseArray: (
        Severity.ERROR, frozenset({"QARR_DEALLOC"}),
        "qubit array {subject} is released twice"),
    Kind.ReleaseStaticQubit: (
        Severity.ERROR, frozenset({"Q_DEALLOC"}),
        "static qubit {subject} is not runtime-managed and cannot be released"),
    Kind.CloneInArrayStore: (
        Severity.ERROR, frozenset({"QARR_CREATE"}),
        "qubit {subject} is already stored in qubit array {other} (qubit cloning)"),
    Kind.CloneControlTarget: (
        Severity.ERROR, frozenset({"CG_OP"}),
        "target qubit {subject} is also a control in {other} (qubit cloning)"),
    Kind.MeasureReleasedArray: (
        Severity.ERROR, frozenset({"MEASURE"}),
        "measurement of released qubit array {subject}"),
    Kind.LoadFromReleasedArray: (
        Severity.ERROR, frozenset({"Q_LOAD"}),
        "qubit loaded from released qubit array {subject}"),
    Kind.IndexOutOfBounds: (
        Severity.ERROR, frozenset({"Q_LOAD", "QARR_CREATE"}),
        "index {other} is out of bounds for qubit array {subject}"),
    Kind.MultiArrayMembershipNote: (
        Severity.NOTE, frozenset({"QARR_CREATE"}),
        "qubit {subject} is now a member of several qubit arrays ({other})"),
    Kind.TypeMismatch: (
        Severity.NOTE, frozenset({PLUMBING}),
        "{subject} is not a {other}; operation skipped"),
    Kind.AnalysisGap: (
        Severity.NOTE, frozenset({PLUMBING}),
        "cannot track {subject}: {other}"),
    Kind.UnrecognizedGate: (
        Severity.NOTE, frozenset({PLUMBING}),
        "unrecognized quantum operation {subject}; qubit arguments checked for liveness only"),
    Kind.InlineLimit: (
        Severity.NOTE, frozenset({PLUMBING}),
        "call to {subject} not analyzed: {other}"),
    Kind.UnrollLimit: (
        Severity.NOTE, frozenset({PLUMBING}),
        "path truncated at block {subject}: loop unroll bound of {other} reached"),
    Kind.Incomplete: (
        Severity.NOTE, frozenset({PLUMBING}),
        "analysis of {subject} stopped after {other} paths; results are incomplete"),
}


def severity_of(kind: Kind) -> Severity:
    return KIND_INFO[kind][0]


def message_for(kind: Kind, subject: str, other: str = "") -> str:
    return KIND_INFO[kind][2].format(subject=subject, other=other)


@dataclass(frozen=True)
class TraceEvent:
    event: str
    span: SourceSpan
    function: str = ""

    def describe(self) -> str:
        where = f" in @{self.function}" if self.function else ""
        return f"{self.event} at {self.span}{where}"


@dataclass(frozen=True)
class Diagnostic:
    kind: Kind
    span: SourceSpan
    rule: str
    message: str
    trace: tuple[TraceEvent, ...] = ()
    entry: str = ""
    severity: Severity = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.severity is None:
            object.__setattr__(self, "severity", severity_of(self.kind))
        if self.rule not in KIND_INFO[self.kind][1]:
            raise ValueError(f"{self.kind.value} cannot come from rule {self.rule}")

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def sort_key(self):
        s = self.span
        return (s.file, s.line, s.col_start, self.kind.value, self.rule,
                self.message, self.entry, tuple((e.event, e.span, e.function) for e in self.trace))

    def dedupe_key(self):
        return (self.kind, self.span, self.trace)


def dedupe_and_sort(diags: Iterable[Diagnostic], by_entry: bool = True) -> list[Diagnostic]:
    """Drop repeats and order by source position.

    Two diagnostics are repeats when kind, span and trace agree (and, unless
    ``by_entry`` is false, the entry point too).  Among repeats the one that
    sorts first is kept.
    """
    seen = set()
    out = []
    for d in sorted(diags, key=Diagnostic.sort_key):
        key = d.dedupe_key() if not by_entry else (d.dedupe_key(), d.entry)
        if key in seen:
            continue
        seen.add(key)
        out.append(d)
    return out


@dataclass(frozen=True)
class InputError:
    """A parse, validation or I/O problem that prevented analysis."""

    kind: str
    message: str
    span: SourceSpan = NO_SPAN


@dataclass(frozen=True)
class RenderedReport:
    file: str
    digest: str
    diagnostics: tuple[Diagnostic, ...] = ()
    errors: tuple[InputError, ...] = ()
    tool_version: str = __version__

    @property
    def status(self) -> str:
        if not self.errors:
            return "ok"
        kinds = {e.kind for e in self.errors}
        if "IOError" in kinds:
            return "io_error"
        if "ParseError" in kinds:
            return "parse_error"
        return "invalid"

    @property
    def error_count(self) -> int:
        return sum(d.is_error for d in self.diagnostics)

    @property
    def note_count(self) -> int:
        return sum(not d.is_error for d in self.diagnostics)

    @property
    def summary(self) -> dict:
        by_kind = Counter(d.kind.value for d in self.diagnostics)
        return {
            "errors": self.error_count,
            "notes": self.note_count,
            "by_kind": {k: by_kind[k] for k in sorted(by_kind)},
        }


def digest_of(source: str) -> str:
    return "sha256:" + hashlib.sha256(source.encode("utf-8")).hexdigest()


def build_report(file: str, source: str, diagnostics: Iterable[Diagnostic] = (),
                 errors: Iterable[InputError] = ()) -> RenderedReport:
    return RenderedReport(file, digest_of(source), tuple(dedupe_and_sort(diagnostics, by_entry=False)),
                          tuple(errors))


# --------------------------------------------------------------------------
# Text

_COLORS = {"error": "\033[1;31m", "note": "\033[1;36m", "bold": "\033[1m", "reset": "\033[0m"}


def _excerpt(lines: list[str], span: SourceSpan) -> list[str]:
    if not 1 <= span.line <= len(lines):
        raise ValueError(f"span {span} is outside the source text")
    text = lines[span.line - 1].rstrip("\n")
    gutter = " " * len(str(span.line))
    start = max(span.col_start, 1)
    width = max(span.col_end - start, 1)
    caret = " " * (start - 1) + "^" * width
    return [f"{gutter} |", f"{span.line} | {text}", f"{gutter} | {caret}"]


def _headline(severity: str, kind: str, message: str, color: bool) -> str:
    if not color:
        return f"{severity}[{kind}]: {message}"
    return (f"{_COLORS[severity]}{severity}[{kind}]{_COLORS['reset']}: "
            f"{_COLORS['bold']}{message}{_COLORS['reset']}")


def render_text(report: RenderedReport, source: str, color: bool = False) -> str:
    """Human-readable report: headline, caret excerpt and handle trace per item."""
    lines = source.splitlines()
    out: list[str] = []
    for err in report.errors:
        out.append(_headline("error", err.kind, err.message, color))
        if err.span.line:
            out.append(f"  --> {err.span}")
            if err.span.line <= len(lines):
                out.extend(_excerpt(lines, err.span))
        else:
            out.append(f"  --> {report.file}")
        out.append("")
    for d in report.diagnostics:
        out.append(_headline(d.severity.value, d.kind.value, d.message, color))
        out.append(f"  --> {d.span}")
        out.extend(_excerpt(lines, d.span))
        gutter = " " * len(str(d.span.line))
        rule = f"rule {d.rule}" if d.rule != PLUMBING else "analyzer note"
        entry = f" (entry @{d.entry})" if d.entry else ""
        out.append(f"{gutter} = {rule}{entry}")
        for ev in d.trace:
            out.append(f"{gutter} = {ev.describe()}")
        out.append("")
    if report.errors:
        out.append(f"{report.file}: analysis not run ({len(report.errors)} input error(s))")
    elif not report.diagnostics:
        out.append(f"{report.file}: no issues found")
    s = report.summary
    noun = lambda n, w: f"{n} {w}" + ("" if n == 1 else "s")  # noqa: E731
    out.append(f"{report.file}: {noun(s['errors'], 'error')}, {noun(s['notes'], 'note')}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# JSON


def _span_json(span: SourceSpan) -> dict:
    return {"line": span.line, "col_start": span.col_start, "col_end": span.col_end}


def _span_from(obj: dict, file: str) -> SourceSpan:
    return SourceSpan(file, int(obj["line"]), int(obj["col_start"]), int(obj["col_end"]))


def report_to_dict(report: RenderedReport) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "tool_version": report.tool_version,
        "file": report.file,
        "digest": report.digest,
        "status": report.status,
        "summary": report.summary,
        "errors": [
            {"kind": e.kind, "message": e.message, "span": _span_json(e.span)}
            for e in report.errors
        ],
        "diagnostics": [
            {
                "kind": d.kind.value,
                "severity": d.severity.value,
                "rule": d.rule,
                "entry": d.entry,
                "span": _span_json(d.span),
                "message": d.message,
                "trace": [
                    {"event": ev.event, "function": ev.function, "span": _span_json(ev.span)}
                    for ev in d.trace
                ],
            }
            for d in report.diagnostics
        ],
    }


def render_json(report: RenderedReport) -> str:
    """Canonical single-line JSON; identical reports give identical bytes."""
    return json.dumps(report_to_dict(report), separators=(",", ":"), ensure_ascii=True)


class ReportFormatError(ValueError):
    pass


def report_from_json(text: str) -> RenderedReport:
    """Inverse of :func:`render_json`."""
    try:
        obj = json.loads(text)
        if obj.get("version") != SCHEMA_VERSION:
            raise ReportFormatError(f"unsupported report version {obj.get('version')!r}")
        file = obj["file"]
        errors = tuple(
            InputError(e["kind"], e["message"], _span_from(e["span"], file) if e["span"]["line"] else NO_SPAN)
            for e in obj["errors"]
        )
        diags = tuple(
            Diagnostic(
                kind=Kind(d["kind"]),
                span=_span_from(d["span"], file),
                rule=d["rule"],
                message=d["message"],
                trace=tuple(
                    TraceEvent(ev["event"], _span_from(ev["span"], file), ev["function"])
                    for ev in d["trace"]
                ),
                entry=d["entry"],
                severity=Severity(d["severity"]),
            )
            for d in obj["diagnostics"]
        )
        return RenderedReport(file, obj["digest"], diags, errors, obj["tool_version"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ReportFormatError):
            raise
        raise ReportFormatError(str(exc)) from exc


def parse_error_items(errors, kind: str = "ParseError") -> list[InputError]:
    return [InputError(kind, getattr(e, "message", str(e)), getattr(e, "span", NO_SPAN)) for e in errors]


def first_error_line(report: RenderedReport) -> Optional[int]:
    for d in report.diagnostics:
        if d.is_error:
            return d.span.line
    return None
