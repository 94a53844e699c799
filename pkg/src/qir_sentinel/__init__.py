"""Static checker for qubit lifetime and no-cloning violations in QIR."""

__version__ = "0.1.0"

from .ast import QirModule, SourceSpan, validate_module  # noqa: E402
from .config import AnalysisConfig, GateTable, load_gate_table  # noqa: E402
from .diagnostics import Diagnostic, Kind, build_report, render_json, render_text  # noqa: E402
from .parser import ParseErrors, parse_module  # noqa: E402
from .semantics import analyze_function, analyze_module  # noqa: E402

__all__ = [
    "AnalysisConfig", "Diagnostic", "GateTable", "Kind", "ParseErrors", "QirModule",
    "SourceSpan", "analyze_function", "analyze_module", "build_report", "load_gate_table",
    "parse_module", "render_json", "render_text", "validate_module",
]
