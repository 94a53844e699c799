import random
import textwrap

import pytest
from hypothesis import given, strategies as st

from qir_sentinel import ledger as L
from qir_sentinel.config import AnalysisConfig, GateTable, parse_gate_table
from qir_sentinel.diagnostics import Kind
from qir_sentinel.parser import parse_module
from qir_sentinel.semantics import (ResultRef, Unknown, analyze_function, analyze_module,
                                    explore_function)
from tests.support.oracle import replay
from tests.support.programs import DECLARATIONS, random_program, render, safe_trace

EXTRA = """
declare void @__quantum__qis__h__adj(%Qubit*)
declare void @__quantum__qis__cnot__body(%Qubit*, %Qubit*)
declare %Result* @Opaque__body(%Qubit*)
"""


def module(body, params="", extra=""):
    text = f"define void @main({params}) {{\nentry:\n{textwrap.dedent(body).strip()}\n}}\n{extra}\n{DECLARATIONS}{EXTRA}"
    return parse_module(text, "t.ll")


def run(body, params="", extra="", config=AnalysisConfig()):
    res = explore_function(module(body, params, extra), "main", config)
    return res


def kinds(res):
    return [(d.kind.value, d.span.line) for d in res.diagnostics]


def final(res, i=0):
    return res.final_states[i].ledger


def labels(ledger):
    return [str(q) for q in ledger.qubits], [(str(a), [str(m) for m in row]) for a, row in ledger.arrays]


ALLOC = "%{0} = call %Qubit* @__quantum__rt__qubit_allocate()"
SLOT = """%{p} = call i8* @__quantum__rt__array_get_element_ptr_1d(%Array* %{a}, i64 {i})
  %{s} = bitcast i8* %{p} to %Qubit**"""


# ---- Q_ALLOC -------------------------------------------------------------

def test_sample_allocation_enters_q(fixture_module):
    m = fixture_module("sample.ll")
    prefix = explore_function(m, "Sample__SampleQ__body")
    assert prefix.diagnostics == []
    assert final(prefix).qubits == ()  # allocated on line 7, released on line 10


def test_two_allocations_distinct():
    res = run("%a = call %Qubit* @__quantum__rt__qubit_allocate()\n"
              "%b = call %Qubit* @__quantum__rt__qubit_allocate()\nret void")
    qs = final(res).qubits
    assert len(qs) == 2 and qs[0] != qs[1]


def test_dump_after_single_allocation():
    res = run("%q = call %Qubit* @__quantum__rt__qubit_allocate()\nret void")
    dump = final(res).dump()
    assert dump.splitlines()[:2] == ["Q:", "  %q (allocated at t.ll:3:1)"]
    assert dump.count("allocated at") == 1


# ---- QARR_ALLOC ------------------------------------------------------------

def test_allocate_array_seeds_members():
    res = run("%qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 3)\nret void")
    assert labels(final(res)) == ([], [("%qs", ["%qs[0]", "%qs[1]", "%qs[2]"])])


def test_allocate_empty_array():
    res = run("%qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 0)\nret void")
    assert labels(final(res)) == ([], [("%qs", [])])
    assert res.diagnostics == []


def test_loads_from_allocated_array_are_distinct():
    p = render([("create", "bases", 1), ("alloc_array", "a", 2), ("load", "x", "a", 0), ("load", "y", "a", 1)])
    res = explore_function(parse_module(p.text), "main")
    env = res.final_states[0].env
    assert res.diagnostics == []
    assert env["x"].handle != env["y"].handle


def test_unknown_length_array_is_lazy(  ):
    res = run(f"""
        %qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 %n)
        {SLOT.format(p='p0', s='s0', a='qs', i=5)}
        %x = load %Qubit*, %Qubit** %s0
        %y = load %Qubit*, %Qubit** %s0
        call void @__quantum__qis__h__body(%Qubit* %x)
        ret void""", params="i64 %n")
    assert kinds(res) == [("AnalysisGap", 3)]
    env = res.final_states[0].env
    assert env["x"] == env["y"]


# ---- Q_DEALLOC -------------------------------------------------------------

def test_alloc_release_clean():
    res = run("%q = call %Qubit* @__quantum__rt__qubit_allocate()\n"
              "call void @__quantum__rt__qubit_release(%Qubit* %q)\nret void")
    assert res.diagnostics == [] and final(res).qubits == ()


def test_double_release():
    res = run("%q = call %Qubit* @__quantum__rt__qubit_allocate()\n"
              "call void @__quantum__rt__qubit_release(%Qubit* %q)\n"
              "call void @__quantum__rt__qubit_release(%Qubit* %q)\nret void")
    assert kinds(res) == [("DoubleReleaseQubit", 5)]
    assert [e.event for e in res.diagnostics[0].trace] == ["allocated", "released", "released again here"]


def test_release_of_array_member():
    res = run(f"""
        %qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 1)
        {SLOT.format(p='p0', s='s0', a='qs', i=0)}
        %x = load %Qubit*, %Qubit** %s0
        call void @__quantum__rt__qubit_release(%Qubit* %x)
        ret void""")
    assert kinds(res) == [("ReleaseQubitInArray", 7)]
    assert res.diagnostics[0].rule == "Q_DEALLOC"


def test_release_of_member_after_its_array_died():
    res = run(f"""
        %qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 1)
        {SLOT.format(p='p0', s='s0', a='qs', i=0)}
        %x = load %Qubit*, %Qubit** %s0
        call void @__quantum__rt__qubit_release_array(%Array* %qs)
        call void @__quantum__rt__qubit_release(%Qubit* %x)
        ret void""")
    assert kinds(res) == [("UseAfterReleaseQubit", 8)]


def test_release_non_qubit_is_type_mismatch():
    res = run("call void @__quantum__rt__qubit_release(%Qubit* null)\nret void")
    assert kinds(res) == [("ReleaseStaticQubit", 3)]
    res = run("%x = call %Result* @Opaque__body(%Qubit* null)\n"
              "%y = bitcast %Result* %x to %Qubit*\n"
              "call void @__quantum__rt__qubit_release(%Qubit* %y)\nret void")
    assert kinds(res) == [("TypeMismatch", 5)]


# ---- QARR_DEALLOC ----------------------------------------------------------

def test_release_array():
    res = run("%qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 2)\n"
              "call void @__quantum__rt__qubit_release_array(%Array* %qs)\nret void")
    assert labels(final(res)) == ([], [])


def test_release_array_twice():
    res = run("%qs = call %Array* @__quantum__rt__qubit_allocate_array(i64 2)\n"
              "call void @__quantum__rt__qubit_release_array(%Array* %qs)\n"
              "call void @__quantum__rt__qubit_release_array(%Array* %qs)\nret void")
    assert kinds(res) == [("DoubleReleaseArray", 5)]


def test_release_created_array_kills_single_members(fixture_module):
    res = explore_function(fixture_module("release_created_array.ll"), "ReleaseCreated__body")
    assert [(d.kind, d.span.line) for d in res.diagnostics] == [(Kind.UseAfterReleaseQubit, 13)]
    assert final(res).qubits == ()


# ---- Q_LOAD ----------------------------------------------------------------

def test_same_index_loaded_twice_is_same_handle():
    p = render([("create", "bases", 1), ("alloc_array", "a", 1), ("load", "x", "a", 0), ("load", "y", "a", 0)])
    env = explore_function(parse_module(p.text), "main").final_states[0].env
    assert env["x"] == env["y"]


def test_load_from_released_array():
    p = render([("create", "bases", 1), ("alloc_array", "a", 1), ("release_array", "a"), ("load", "x", "a", 0)])
    res = explore_function(parse_module(p.text), "main")
    assert [d.kind for d in res.diagnostics] == [Kind.LoadFromReleasedArray]
    assert isinstance(res.final_states[0].env["x"], Unknown)


def test_measurement_body_records_member(fixture_module):
    res = explore_function(fixture_module("sample.ll"), "Microsoft__Quantum__Intrinsic__M__body")
    assert res.diagnostics == []
    assert labels(final(res))[1] == [("%bases", []), ("%qubits", ["%qubit"])]


def test_classical_load_has_no_qubit_effect():
    res = run("%p = alloca i64\nstore i64 4, i64* %p\n%v = load i64, i64* %p\nret void")
    assert res.diagnostics == [] and labels(final(res)) == ([], [])


# ---- QARR_CREATE (stores) ----------------------------------------------------

def test_cloning_first_store_recorded(fixture_module):
    res = explore_function(fixture_module("cloning.ll"), "Cloning__body")
    assert labels(final(res))[1] == [("%__controlQubits__", ["%q1"])]


def test_store_of_released_qubit():
    p = render([("create", "bases", 1), ("alloc", "q"), ("release", "q"), ("create", "c", 1), ("store", "q", "c", 0)])
    res = explore_function(parse_module(p.text), "main")
    assert [(d.kind, d.rule) for d in res.diagnostics] == [(Kind.UseAfterReleaseQubit, "QARR_CREATE")]


def test_store_of_unknown_value_is_a_note():
    res = run(f"""
        %c = call %Array* @__quantum__rt__array_create_1d(i32 8, i64 1)
        {SLOT.format(p='p0', s='s0', a='c', i=0)}
        %x = call %Result* @Opaque__body(%Qubit* null)
        %y = bitcast %Result* %x to %Qubit*
        store %Qubit* %y, %Qubit** %s0
        ret void""")
    assert [d.kind for d in res.diagnostics] == [Kind.AnalysisGap]
    assert not res.diagnostics[0].is_error


def test_store_out_of_bounds():
    p = render([("create", "bases", 1), ("alloc", "q"), ("create", "c", 1), ("store", "q", "c", 1)])
    res = explore_function(parse_module(p.text), "main")
    assert [(d.kind, d.rule) for d in res.diagnostics] == [(Kind.IndexOutOfBounds, "QARR_CREATE")]


# ---- array_create_1d -------------------------------------------------------

def test_create_adds_empty_rows():
    res = run("%a = call %Array* @__quantum__rt__array_create_1d(i32 8, i64 2)\n"
              "%b = call %Array* @__quantum__rt__array_create_1d(i32 8, i64 0)\nret void")
    assert labels(final(res)) == ([], [("%a", []), ("%b", [])])
    a, b = final(res).array_handles
    assert a != b and not a.owns_members


# ---- SG_OP -------------------------------------------------------------------

def test_gate_on_live_qubit(fixture_module):
    assert analyze_function(fixture_module("sample.ll"), "Sample__SampleQ__body") == []


def test_gate_on_released_qubit(fixture_module):
    diags = analyze_function(fixture_module("deadqubit.ll"), "Deadqubit__body")
    assert [(d.kind, d.span.line, d.rule) for d in diags] == [(Kind.UseAfterReleaseQubit, 4, "SG_OP")]


@pytest.mark.parametrize("release,expected", [(False, []), (True, [("UseAfterReleaseQubit", 5)])])
def test_rotation(release, expected):
    body = ALLOC.format("q") + "\n"
    body += "call void @__quantum__rt__qubit_release(%Qubit* %q)\n" if release else "call void @__quantum__qis__h__body(%Qubit* %q)\n"
    body += "call void @__quantum__qis__rz__body(double 5.0e-01, %Qubit* %q)\nret void"
    assert kinds(run(body)) == expected


def test_unrecognized_body_gets_liveness_and_note():
    res = run(ALLOC.format("a") + "\n" + ALLOC.format("b") + "\n"
              "call void @__quantum__rt__qubit_release(%Qubit* %a)\n"
              "call void @__quantum__qis__cnot__body(%Qubit* %a, %Qubit* %b)\nret void")
    assert kinds(res) == [("UnrecognizedGate", 6), ("UseAfterReleaseQubit", 6)]


def test_extra_gate_table_silences_note():
    gates = parse_gate_table("cnot\n# comment\n\nswap:ctl\n")
    assert "cnot" in gates.single and "swap" in gates.ctl and "cnot" not in gates.ctl
    res = run(ALLOC.format("a") + "\n" + ALLOC.format("b") + "\n"
              "call void @__quantum__qis__cnot__body(%Qubit* %a, %Qubit* %b)\nret void",
              config=AnalysisConfig(gates=gates))
    assert res.diagnostics == []


def test_bad_gate_table_line():
    with pytest.raises(ValueError):
        parse_gate_table("cnot:adj\n")


def test_adjoint_checks_liveness_without_note():
    res = run(ALLOC.format("a") + "\ncall void @__quantum__qis__h__adj(%Qubit* %a)\n"
              "call void @__quantum__rt__qubit_release(%Qubit* %a)\n"
              "call void @__quantum__qis__h__adj(%Qubit* %a)\nret void")
    assert kinds(res) == [("UseAfterReleaseQubit", 6)]


# ---- CG_OP -------------------------------------------------------------------

def test_target_in_controls(fixture_module):
    diags = analyze_function(fixture_module("cloning.ll"), "Cloning__body")
    assert [(d.kind, d.span.line, d.rule) for d in diags] == [
        (Kind.CloneInArrayStore, 18, "QARR_CREATE"), (Kind.CloneControlTarget, 20, "CG_OP")]


def test_distinct_controls_and_target_clean():
    p = render([("create", "bases", 1), ("alloc", "c"), ("alloc", "t"), ("create", "ctl", 1),
                ("store", "c", "ctl", 0), ("ctl", "ctl", "t")])
    assert analyze_function(parse_module(p.text), "main") == []


def test_released_control_array():
    p = render([("create", "bases", 1), ("alloc", "t"), ("create", "ctl", 0),
                ("release_array", "ctl"), ("ctl", "ctl", "t")])
    diags = analyze_function(parse_module(p.text), "main")
    assert [(d.kind, d.rule) for d in diags] == [(Kind.UseAfterReleaseArray, "CG_OP")]


# ---- MEASURE -----------------------------------------------------------------

def test_measure_binds_result(fixture_module):
    res = explore_function(fixture_module("sample.ll"), "Sample__SampleQ__body")
    assert isinstance(res.final_states[0].env["0"], ResultRef)


def test_measure_after_release():
    p = render([("create", "bases", 1), ("alloc_array", "a", 1), ("release_array", "a"), ("measure", "a", "r")])
    diags = analyze_function(parse_module(p.text), "main")
    assert [(d.kind, d.rule) for d in diags] == [(Kind.MeasureReleasedArray, "MEASURE")]


def test_measure_twice_is_clean():
    p = render([("create", "bases", 1), ("alloc_array", "a", 1), ("measure", "a", "r1"), ("measure", "a", "r2")])
    assert analyze_function(parse_module(p.text), "main") == []


# ---- static qubits -------------------------------------------------------------

def test_static_qubits_dedupe_by_address():
    res = run("%a = inttoptr i64 3 to %Qubit*\n%b = inttoptr i64 3 to %Qubit*\n"
              "%c = inttoptr i64 4 to %Qubit*\n"
              "call void @__quantum__qis__h__body(%Qubit* %a)\nret void")
    env = res.final_states[0].env
    assert env["a"] == env["b"] and env["a"] != env["c"]
    assert len(final(res).qubits) == 2 and res.diagnostics == []
    assert all(q.is_static for q in final(res).qubits)


def test_static_from_unknown_address():
    res = run("%a = inttoptr i64 %n to %Qubit*\nret void", params="i64 %n")
    assert kinds(res) == [("AnalysisGap", 3)]


def test_static_release_then_use_stays_live(fixture_module):
    diags = analyze_function(fixture_module("static_release.ll"), "StaticRelease__body")
    assert [(d.kind, d.span.line) for d in diags] == [(Kind.ReleaseStaticQubit, 5)]


# ---- interprocedural -------------------------------------------------------------

HELPER = """
define %Qubit* @Fresh() {
entry:
  %q = call %Qubit* @__quantum__rt__qubit_allocate()
  ret %Qubit* %q
}
"""


def test_two_calls_to_allocating_helper():
    res = run("%a = call %Qubit* @Fresh()\n%b = call %Qubit* @Fresh()\nret void", extra=HELPER)
    env = res.final_states[0].env
    assert env["a"] != env["b"] and len(final(res).qubits) == 2


def test_declared_only_function_is_opaque():
    res = run(ALLOC.format("q") + "\n%r = call %Result* @Opaque__body(%Qubit* %q)\nret void")
    assert res.diagnostics == [] and isinstance(res.final_states[0].env["r"], Unknown)
    assert len(final(res).qubits) == 1


def test_inline_depth_limit():
    chain = "".join(
        f"define void @L{i}() {{\nentry:\n  call void @L{i + 1}()\n  ret void\n}}\n" for i in range(5))
    chain += "define void @L5() {\nentry:\n  ret void\n}\n"
    res = run("call void @L0()\nret void", extra=chain, config=AnalysisConfig(max_inline_depth=3))
    assert [d.kind for d in res.diagnostics] == [Kind.InlineLimit]


def test_recursion_is_cut(fixture_module):
    diags = analyze_function(fixture_module("recursion.ll"), "Recurse__body")
    assert [d.kind for d in diags] == [Kind.InlineLimit]


# ---- paths -------------------------------------------------------------------------

def test_path_isolation():
    res = run("""
        %q = call %Qubit* @__quantum__rt__qubit_allocate()
        br i1 %c, label %left, label %right
        left:
          call void @__quantum__rt__qubit_release(%Qubit* %q)
          ret void
        right:
          call void @__quantum__qis__h__body(%Qubit* %q)
          call void @__quantum__rt__qubit_release(%Qubit* %q)
          ret void""", params="i1 %c")
    assert res.diagnostics == []
    assert len(res.final_states) == 2


def test_known_condition_does_not_fork(fixture_module):
    res = explore_function(fixture_module("constant_branch.ll"), "ConstantBranch__body")
    assert res.diagnostics == [] and len(res.final_states) == 1


def test_loop_unrolling_bound(fixture_module):
    m = fixture_module("loop_release.ll")
    once = explore_function(m, "LoopRelease__body", AnalysisConfig(max_unroll=0))
    assert [d.kind for d in once.diagnostics] == [Kind.UnrollLimit]
    twice = explore_function(m, "LoopRelease__body", AnalysisConfig(max_unroll=1))
    assert [d.kind for d in twice.diagnostics] == [Kind.DoubleReleaseQubit, Kind.UnrollLimit]


def test_path_budget():
    blocks = []
    for i in range(12):
        blocks.append(f"  br i1 %c, label %t{i}, label %f{i}\nt{i}:\n  br label %j{i}\nf{i}:\n  br label %j{i}\nj{i}:")
    body = "\n".join(blocks) + "\n  ret void"
    res = run(body, params="i1 %c", config=AnalysisConfig(max_paths=16))
    assert [d.kind for d in res.diagnostics] == [Kind.Incomplete]
    assert len(res.final_states) == 16 and res.incomplete


def test_fail_fast_stops_the_path(fixture_module):
    diags = analyze_function(fixture_module("cloning.ll"), "Cloning__body", AnalysisConfig(fail_fast=True))
    assert [d.kind for d in diags] == [Kind.CloneInArrayStore]


def test_module_analysis_covers_every_definition(fixture_module):
    diags = analyze_module(fixture_module("cloning.ll"))
    assert {d.entry for d in diags} == {"Cloning__body"}
    assert len(diags) == 2


def test_entry_parameters_are_live(fixture_module):
    assert analyze_function(fixture_module("array_param.ll"), "ArrayParam__body") == []


# ---- properties ------------------------------------------------------------------

def _canonical(ledger):
    return labels(ledger)


@given(st.integers(0, 2**32 - 1))
def test_oracle_agreement(seed):
    p = random_program(random.Random(seed), 20)
    res = explore_function(parse_module(p.text), "main")
    o = replay(p.ops)
    at = p.op_at_line()
    assert _canonical(final(res)) == o.snapshot()
    assert sorted((d.kind.value, at[d.span.line]) for d in res.diagnostics) == sorted(o.diags)


@given(st.integers(0, 2**32 - 1))
def test_gates_do_not_change_the_ledger(seed):
    p = safe_trace(random.Random(seed), 14)
    stripped = [op for op in p.ops if op[0] not in ("gate", "ctl", "measure")]
    a = explore_function(parse_module(p.text), "main")
    b = explore_function(parse_module(render(stripped).text), "main")
    assert _canonical(final(a)) == _canonical(final(b))


@given(st.integers(0, 2**32 - 1))
def test_analysis_is_deterministic(seed):
    p = random_program(random.Random(seed), 15)
    m = parse_module(p.text)
    assert analyze_function(m, "main") == analyze_function(m, "main")
