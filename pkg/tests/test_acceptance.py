"""End-to-end acceptance checks, one test per criterion.

The conftest hook prints a PASS/FAIL line per ``test_criterion_<N>_*`` test
at the end of the run.
"""

import io
import os
import random
import subprocess
import sys
import time
from collections import Counter

import pytest

from qir_sentinel.cli import analyze_source, run
from qir_sentinel.config import AnalysisConfig
from qir_sentinel.diagnostics import Kind
from qir_sentinel.parser import ParseErrors, parse_module
from qir_sentinel.printer import print_module
from qir_sentinel.semantics import analyze_function, explore_function
from tests.conftest import FIXTURES
from tests.support.oracle import replay
from tests.support.programs import (CLONING, USE_AFTER_RELEASE, VIOLATIONS, dirty_trace,
                                    random_module, random_program, safe_trace)
from tests.test_ledger import ARR, Q, _apply_random, _check_against_model

from qir_sentinel import ledger as L

BUDGET_S = 0.100


def _timed(module, entry):
    analyze_function(module, entry)  # warm imports and caches
    start = time.perf_counter()
    diags = analyze_function(module, entry)
    return diags, time.perf_counter() - start


def _line_of(text, needle, nth=1):
    hits = [i for i, line in enumerate(text.splitlines(), 1) if needle in line]
    return hits[nth - 1]


def test_criterion_1_released_qubit_reused(fixture_text):
    text = fixture_text("deadqubit.ll")
    diags, elapsed = _timed(parse_module(text, "deadqubit.ll"), "Deadqubit__body")
    errors = [d for d in diags if d.is_error]
    assert len(errors) == 1 and errors == diags
    d = errors[0]
    assert d.kind is Kind.UseAfterReleaseQubit
    assert d.span.line == _line_of(text, "@__quantum__qis__h__body(")
    released = [e for e in d.trace if e.event == "released"]
    assert released and all(e.function == "NewQubit__body" for e in released)
    assert elapsed < BUDGET_S, f"{elapsed * 1e3:.1f} ms"


def test_criterion_2_qubit_cloning(fixture_text):
    text = fixture_text("cloning.ll")
    diags, elapsed = _timed(parse_module(text, "cloning.ll"), "Cloning__body")
    store_line = _line_of(text, "store %Qubit*", nth=2)
    ctl_line = _line_of(text, "@__quantum__qis__x__ctl(")
    assert [(d.kind, d.span.line) for d in diags] == [
        (Kind.CloneInArrayStore, store_line), (Kind.CloneControlTarget, ctl_line)]
    assert store_line == 18 and all(d.is_error for d in diags)
    assert elapsed < BUDGET_S, f"{elapsed * 1e3:.1f} ms"


def test_criterion_3_sample_is_clean(fixture_text):
    report = analyze_source(fixture_text("sample.ll"), "sample.ll")
    assert report.errors == () and report.error_count == 0
    assert run([str(FIXTURES / "sample.ll")], stdout=io.StringIO()) == 0


def _ledger_labels(ledger):
    return ([str(q) for q in ledger.qubits],
            [(str(a), [str(m) for m in row]) for a, row in ledger.arrays])


def test_criterion_4_oracle_equivalence():
    rng = random.Random(20240601)
    mismatches = []
    for i in range(1000):
        p = random_program(rng, rng.randint(5, 30))
        res = explore_function(parse_module(p.text), "main")
        oracle = replay(p.ops)
        if len(res.final_states) != 1:
            mismatches.append((i, "paths"))
            continue
        ledger_ok = _ledger_labels(res.final_states[0].ledger) == oracle.snapshot()
        kinds_ok = Counter(d.kind.value for d in res.diagnostics) == Counter(k for k, _ in oracle.diags)
        if not (ledger_ok and kinds_ok):
            mismatches.append((i, p.text))
    assert mismatches == []


def test_criterion_5_ledger_properties():
    rng = random.Random(99)
    led, model_q, model_qa = L.EMPTY, [], {}
    for i in range(100_000):
        before = (led.qubits, led.arrays)
        prev = led
        led = _apply_random(led, model_q, model_qa, rng)
        assert (prev.qubits, prev.arrays) == before
        if i % 101 == 0:
            _check_against_model(led, model_q, model_qa)
    _check_against_model(led, model_q, model_qa)
    for a, row in led.arrays:
        assert len(set(row)) == len(row)
    for q in Q:
        hit = L.findqarr(led, q)
        assert (hit is not None) == any(L.checkqarr(led, a, q) for a in ARR)


def test_criterion_6_generated_traces():
    rng = random.Random(7)
    false_alarms = [p.text for p in (safe_trace(rng) for _ in range(600))
                    if any(d.is_error for d in analyze_function(parse_module(p.text), "main"))]
    assert false_alarms == []
    missed = []
    for i in range(600):
        violation = VIOLATIONS[i % len(VIOLATIONS)]
        p, expected = dirty_trace(rng, violation)
        assert expected <= (USE_AFTER_RELEASE | CLONING)
        found = {d.kind.value for d in analyze_function(parse_module(p.text), "main") if d.is_error}
        if not found & expected:
            missed.append((violation, p.text))
    assert missed == []


def test_criterion_7_round_trip_and_fuzz(fixture_text):
    rng = random.Random(3)
    for _ in range(1000):
        m = random_module(rng)
        assert parse_module(print_module(m), m.source_file) == m
    seeds = [fixture_text(f.name).encode() for f in sorted(FIXTURES.glob("*.ll"))]
    for i in range(100_000):
        if i % 2:
            data = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 64)))
        else:
            data = bytearray(rng.choice(seeds))
            for _ in range(rng.randint(1, 4)):
                data[rng.randrange(len(data))] = rng.getrandbits(8)
        text = bytes(data).decode("latin-1")
        try:
            parse_module(text)
        except ParseErrors:
            pass
        if i % 50 == 0:
            analyze_source(text, "fuzz.ll")


def _corpus_outputs(fmt, hashseed):
    files = [str(f) for f in sorted(FIXTURES.glob("*.ll"))]
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed), QIR_SENTINEL_COLOR="never")
    proc = subprocess.run([sys.executable, "-m", "qir_sentinel.cli", "--format", fmt, *files],
                          capture_output=True, env=env)
    return proc.returncode, proc.stdout


@pytest.mark.parametrize("fmt", ["text", "json"])
def test_criterion_8_deterministic_output(fmt):
    first = _corpus_outputs(fmt, 1)
    second = _corpus_outputs(fmt, 2)
    assert first[1] and first == second
    out_a, out_b = io.StringIO(), io.StringIO()
    files = [str(f) for f in sorted(FIXTURES.glob("*.ll"))]
    run(["--format", fmt, *files], stdout=out_a)
    run(["--format", fmt, *files], stdout=out_b)
    assert out_a.getvalue().encode() == out_b.getvalue().encode() == first[1]
