"""``qir-sentinel`` command line driver."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence, TextIO

from . import __version__
from .ast import validate_module
from .config import AnalysisConfig, GateTableError
from .diagnostics import InputError, RenderedReport, build_report, render_json, render_text
from .parser import ParseErrors, parse_module
from .semantics import analyze_function, entry_points, explore_function

log = logging.getLogger("qir_sentinel")

EXIT_CLEAN, EXIT_ERRORS, EXIT_FAILURE = 0, 1, 2


_STRUCTURAL = {
    "DuplicateType": "type %{} is defined more than once",
    "DuplicateFunction": "function @{} is defined or declared more than once",
    "BadIntWidth": "unsupported integer type {}",
    "UnresolvedType": "type %{} is never declared",
    "OpaqueByValue": "opaque type {} used by value",
    "DeclarationWithBody": "declaration of @{} has a body",
    "EmptyDefinition": "definition of @{} has no blocks",
    "DuplicateLabel": "block label %{} is defined twice",
    "DuplicateName": "value %{} is assigned more than once",
    "UndefinedValue": "use of undefined value %{}",
    "IntOutOfRange": "integer constant {} does not fit its type",
    "BadPauli": "{} is not a Pauli code",
    "PhiUnsupported": "phi nodes are not supported ({})",
    "UndeclaredCallee": "call to undeclared function @{}",
    "CallResultMismatch": "call result does not match the callee's return type ({})",
    "DanglingLabel": "branch to undefined block %{}",
}


def structural_message(kind: str, detail: str) -> str:
    template = _STRUCTURAL.get(kind)
    return template.format(detail) if template else detail


def analyze_source(source: str, filename: str, config: AnalysisConfig = AnalysisConfig()) -> RenderedReport:
    """Parse, validate and analyze one file's text into a report."""
    try:
        module = parse_module(source, filename)
    except ParseErrors as exc:
        return build_report(filename, source, errors=[
            InputError("ParseError", e.message, e.span) for e in exc.errors])
    problems = validate_module(module)
    if problems:
        return build_report(filename, source, errors=[
            InputError(p.kind, structural_message(p.kind, p.detail), p.span) for p in problems])
    if config.entry is not None:
        fn = module.get(config.entry)
        if fn is None or fn.is_declaration:
            return build_report(filename, source, errors=[
                InputError("UnknownEntry", f"no defined function @{config.entry}")])
    diags = []
    for name in entry_points(module, config):
        start = time.perf_counter()
        diags.extend(analyze_function(module, name, config))
        log.info("%s: analyzed @%s in %.1f ms", filename, name, (time.perf_counter() - start) * 1e3)
    return build_report(filename, source, diags)


def exit_code_for(reports: Sequence[RenderedReport]) -> int:
    if any(r.errors for r in reports):
        return EXIT_FAILURE
    if any(r.error_count for r in reports):
        return EXIT_ERRORS
    return EXIT_CLEAN


def _read(path: str) -> tuple[Optional[str], Optional[str]]:
    try:
        return Path(path).read_text(encoding="utf-8"), None
    except (OSError, UnicodeDecodeError) as exc:
        return None, f"cannot read {path}: {exc.strerror if isinstance(exc, OSError) and exc.strerror else exc}"


def _use_color(stream: TextIO) -> bool:
    mode = os.environ.get("QIR_SENTINEL_COLOR", "auto").lower()
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _dump_ledgers(module_src: str, filename: str, config: AnalysisConfig, out: TextIO) -> None:
    module = parse_module(module_src, filename)
    for name in entry_points(module, config):
        result = explore_function(module, name, config)
        for i, st in enumerate(result.final_states, 1):
            out.write(f"; final ledger of @{name}, path {i}\n")
            out.write(st.ledger.dump())


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--entry", help="analyze only this function (default: every defined function)")
    p.add_argument("--max-inline-depth", type=int, default=8, metavar="N")
    p.add_argument("--max-unroll", type=int, default=1, metavar="N")
    p.add_argument("--max-paths", type=int, default=4096, metavar="N")
    p.add_argument("--fail-fast", action="store_true", help="stop a path at its first error")
    p.add_argument("--gates", metavar="FILE", help="extra gate names, one per line (name:ctl for controlled)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qir-sentinel",
        description="Check QIR files for use of released qubits and qubit cloning.",
        epilog="Use 'qir-sentinel corpus DIR' to check a directory against expected results.",
    )
    p.add_argument("files", nargs="+", metavar="FILE", help=".ll files to analyze")
    _add_analysis_flags(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--dump-ledger", action="store_true", help="also print each path's final ledger")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _config_from(ns: argparse.Namespace, fmt: str = "text") -> AnalysisConfig:
    cfg = AnalysisConfig(entry=ns.entry, max_inline_depth=ns.max_inline_depth,
                         max_unroll=ns.max_unroll, max_paths=ns.max_paths, format=fmt,
                         fail_fast=ns.fail_fast, extra_gates=ns.gates)
    return cfg.with_gate_file()


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)


def run(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = stdout or sys.stdout
    if argv and argv[0] == "corpus":
        return _run_corpus_cli(argv[1:], out)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CLEAN if exc.code == 0 else EXIT_FAILURE
    _setup_logging(ns.verbose)
    try:
        config = _config_from(ns, ns.format)
    except (ValueError, OSError) as exc:
        print(f"qir-sentinel: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    color = ns.format == "text" and _use_color(out)
    reports = []
    for path in ns.files:
        source, problem = _read(path)
        if source is None:
            report = build_report(path, "", errors=[InputError("IOError", problem)])
            source = ""
        else:
            report = analyze_source(source, path, config)
        reports.append(report)
        if ns.format == "json":
            out.write(render_json(report) + "\n")
        else:
            out.write(render_text(report, source, color=color))
            if ns.dump_ledger and not report.errors:
                _dump_ledgers(source, path, config, out)
    return exit_code_for(reports)


# --------------------------------------------------------------------------
# Corpus mode


class ExpectationError(ValueError):
    pass


def load_expectations(path: str | Path) -> dict[str, list[tuple[str, int]]]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ExpectationError(f"cannot load expectations {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ExpectationError("expectations must be a JSON object")
    table = {}
    for name, items in raw.items():
        if not isinstance(items, list):
            raise ExpectationError(f"{name}: expected a list of [kind, line] pairs")
        pairs = []
        for item in items:
            if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)
                    and isinstance(item[1], int) and not isinstance(item[1], bool)):
                raise ExpectationError(f"{name}: bad entry {item!r}")
            pairs.append((item[0], item[1]))
        table[name] = sorted(pairs)
    return table


def observed_pairs(report: RenderedReport) -> list[tuple[str, int]]:
    pairs = [(e.kind, e.span.line) for e in report.errors]
    pairs += [(d.kind.value, d.span.line) for d in report.diagnostics]
    return sorted(pairs)


def _diff(expected, got) -> str:
    missing = [p for p in expected if p not in got or expected.count(p) > got.count(p)]
    extra = [p for p in got if p not in expected or got.count(p) > expected.count(p)]
    fmt = lambda ps: ", ".join(f"{k}@{n}" for k, n in sorted(set(ps))) or "-"  # noqa: E731
    return f"missing: {fmt(missing)}; unexpected: {fmt(extra)}"


def run_corpus(directory: str | Path, expectations: Optional[str | Path] = None,
               config: AnalysisConfig = AnalysisConfig(), out: Optional[TextIO] = None) -> int:
    """Check every ``*.ll`` in ``directory`` against the expectations file."""
    out = out or sys.stdout
    d = Path(directory)
    if not d.is_dir():
        print(f"qir-sentinel: {d} is not a directory", file=sys.stderr)
        return EXIT_FAILURE
    fixtures = sorted(d.glob("*.ll"))
    if not fixtures:
        print(f"warning: no .ll fixtures in {d}", file=sys.stderr)
        return EXIT_CLEAN
    exp_path = Path(expectations) if expectations is not None else d / "expectations.json"
    try:
        table = load_expectations(exp_path)
    except ExpectationError as exc:
        print(f"qir-sentinel: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    failures = 0
    width = max(len(f.name) for f in fixtures)
    for f in fixtures:
        source, problem = _read(str(f))
        if source is None:
            report = build_report(f.name, "", errors=[InputError("IOError", problem)])
        else:
            report = analyze_source(source, str(f), config)
        got = observed_pairs(report)
        expected = table.get(f.name)
        if expected is None:
            failures += 1
            out.write(f"FAIL  {f.name:<{width}}  no expectation recorded\n")
        elif got != expected:
            failures += 1
            out.write(f"FAIL  {f.name:<{width}}  {_diff(expected, got)}\n")
        else:
            out.write(f"pass  {f.name:<{width}}  {len(got)} item(s)\n")
    names = {f.name for f in fixtures}
    for stale in sorted(set(table) - names):
        failures += 1
        out.write(f"FAIL  {stale:<{width}}  fixture missing\n")
    out.write(f"{len(fixtures) - min(failures, len(fixtures))}/{len(fixtures)} fixtures match\n")
    return EXIT_ERRORS if failures else EXIT_CLEAN


def _run_corpus_cli(argv: list[str], out: TextIO) -> int:
    p = argparse.ArgumentParser(prog="qir-sentinel corpus",
                                description="Check a fixture directory against expected diagnostics.")
    p.add_argument("directory")
    p.add_argument("--expect", metavar="FILE", help="expectations JSON (default: DIR/expectations.json)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    _add_analysis_flags(p)
    try:
        ns = p.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CLEAN if exc.code == 0 else EXIT_FAILURE
    _setup_logging(ns.verbose)
    try:
        config = _config_from(ns)
    except (ValueError, OSError, GateTableError) as exc:
        print(f"qir-sentinel: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return run_corpus(ns.directory, ns.expect, config, out)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
