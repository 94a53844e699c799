"""Path-sensitive rule engine over (abstract environment, ledger).

Each defined function is executed symbolically.  Unknown branch conditions
fork the state, loops are unrolled a bounded number of times, and calls to
defined functions are inlined.  Where a rule would abort, the engine records
a diagnostic, skips the offending operation and keeps going (or stops the
path when ``fail_fast`` is set).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

from . import ast as A
from . import ledger as L
from .config import AnalysisConfig
from .diagnostics import PLUMBING, Diagnostic, Kind, TraceEvent, dedupe_and_sort, message_for

# --------------------------------------------------------------------------
# Abstract values


@dataclass(frozen=True)
class QubitRef:
    handle: L.QubitHandle


@dataclass(frozen=True)
class ArrayRef:
    handle: L.ArrayHandle


@dataclass(frozen=True)
class ElemPtr:
    array: L.ArrayHandle
    index: Optional[int]


@dataclass(frozen=True)
class QubitPtrSlot:
    array: L.ArrayHandle
    index: Optional[int]


@dataclass(frozen=True)
class ResultRef:
    site: A.SourceSpan


@dataclass(frozen=True)
class Classical:
    value: Union[int, float, None] = None


@dataclass(frozen=True)
class StackSlot:
    """Memory from ``alloca``; loads see the last value stored on this path."""

    id: int


@dataclass(frozen=True)
class Unknown:
    pass


UNKNOWN = Unknown()
AbstractValue = Union[QubitRef, ArrayRef, ElemPtr, QubitPtrSlot, ResultRef, Classical, StackSlot, Unknown]

RT = "__quantum__rt__"
QIS = "__quantum__qis__"


# --------------------------------------------------------------------------
# Execution state


@dataclass
class ExecState:
    env: dict[str, AbstractValue]
    ledger: L.Ledger
    call_stack: tuple[tuple[str, A.SourceSpan], ...]
    path_id: int
    slots: dict[tuple, AbstractValue] = field(default_factory=dict)
    history: dict[int, tuple[TraceEvent, ...]] = field(default_factory=dict)
    halted: bool = False
    retval: AbstractValue = UNKNOWN

    @property
    def function(self) -> str:
        return self.call_stack[-1][0] if self.call_stack else ""

    def fork(self, path_id: int) -> "ExecState":
        return ExecState(dict(self.env), self.ledger, self.call_stack, path_id,
                         dict(self.slots), dict(self.history), self.halted, self.retval)

    def note_event(self, handle_id: int, event: str, span: A.SourceSpan) -> None:
        ev = TraceEvent(event, span, self.function)
        self.history[handle_id] = self.history.get(handle_id, ()) + (ev,)


@dataclass
class AnalysisResult:
    entry: str
    diagnostics: list[Diagnostic]
    final_states: list[ExecState]
    incomplete: bool = False


# --------------------------------------------------------------------------
# The analyzer


class Analyzer:
    def __init__(self, module: A.QirModule, config: AnalysisConfig = AnalysisConfig()):
        self.module = module
        self.config = config
        self.gates = config.gates
        self._functions = {f.name: f for f in module.functions}
        self._reset("")

    def _reset(self, entry: str) -> None:
        self.entry = entry
        self.diags: list[Diagnostic] = []
        self._ids = itertools.count(1)
        self._paths = 1
        self._statics: dict[object, L.QubitHandle] = {}
        self.incomplete = False

    # ---- bookkeeping -----------------------------------------------------

    def fresh_id(self) -> int:
        return next(self._ids)

    def emit(self, st: ExecState, kind: Kind, span: A.SourceSpan, rule: str,
             subject: str, other: str = "", trace: tuple[TraceEvent, ...] = ()) -> None:
        d = Diagnostic(kind, span, rule, message_for(kind, subject, other), trace, self.entry)
        self.diags.append(d)
        if d.is_error and self.config.fail_fast:
            st.halted = True

    def _trace(self, st: ExecState, handle, final: str, span: A.SourceSpan) -> tuple[TraceEvent, ...]:
        return st.history.get(handle.id, ()) + (TraceEvent(final, span, st.function),)

    def _new_path(self, st: ExecState, span: A.SourceSpan) -> Optional[int]:
        if self._paths >= self.config.max_paths:
            if not self.incomplete:
                self.incomplete = True
                self.emit(st, Kind.Incomplete, span, PLUMBING, f"@{self.entry}", str(self.config.max_paths))
            return None
        self._paths += 1
        return self._paths

    # ---- value evaluation ------------------------------------------------

    def static_qubit(self, st: ExecState, address, span: A.SourceSpan) -> QubitRef:
        key = address if address is not None else ("unknown", span)
        q = self._statics.get(key)
        if q is None:
            label = f"static#{address}" if address is not None else f"static#{span.line}:{span.col_start}"
            q = L.QubitHandle(self.fresh_id(), L.Static(address, span), label)
            self._statics[key] = q
        if not L.checkq(st.ledger, q):
            st.ledger = L.appqlist(st.ledger, q)
            st.note_event(q.id, "fixed", span)
        return QubitRef(q)

    def eval(self, st: ExecState, op: A.Operand, span: A.SourceSpan = A.NO_SPAN) -> AbstractValue:
        if isinstance(op, A.Local):
            return st.env.get(op.name, UNKNOWN)
        if isinstance(op, A.IntConst):
            return Classical(op.value)
        if isinstance(op, A.DoubleConst):
            return Classical(op.value)
        if isinstance(op, A.NullPtr):
            if op.type == A.QUBIT_PTR:
                return self.static_qubit(st, 0, span)
            return Classical(0)
        if isinstance(op, A.ConstCast):
            if op.op == "inttoptr" and op.to_type == A.QUBIT_PTR:
                inner = self.eval(st, op.value, span)
                address = inner.value if isinstance(inner, Classical) and isinstance(inner.value, int) else None
                return self.static_qubit(st, address, span)
            return UNKNOWN
        return UNKNOWN

    def _describe(self, op: A.Operand, handle) -> str:
        name = str(op) if isinstance(op, A.Local) else None
        label = str(handle)
        if name is None or name == label:
            return label
        return f"{name} (alias of {label})"

    # ---- entry points ----------------------------------------------------

    def analyze(self, fname: str) -> AnalysisResult:
        fn = self._functions.get(fname)
        if fn is None or fn.is_declaration:
            raise KeyError(f"no defined function @{fname}")
        self._reset(fname)
        st = ExecState({}, L.EMPTY, (), 1)
        args = []
        for p in fn.params:
            args.append(self._entry_param(st, p, fn.span))
        st.call_stack = ()
        try:
            finals = self.run_function(fn, st, args, fn.span)
        except RecursionError:  # pragma: no cover - guarded by max_inline_depth
            finals = []
        return AnalysisResult(fname, dedupe_and_sort(self.diags), finals, self.incomplete)

    def _entry_param(self, st: ExecState, p: A.Param, span: A.SourceSpan) -> AbstractValue:
        label = A.fmt_name("%", p.name) if p.name is not None else "%param"
        st.call_stack = ((self.entry, span),)
        if p.type == A.QUBIT_PTR:
            q = L.QubitHandle(self.fresh_id(), L.EntryParameter(label), label)
            st.ledger = L.appqlist(st.ledger, q)
            st.note_event(q.id, "received as parameter", span)
            return QubitRef(q)
        if p.type == A.ARRAY_PTR:
            a = L.ArrayHandle(self.fresh_id(), L.EntryParameter(label), None, label)
            st.ledger = L.appqarrlist(st.ledger, a)
            st.note_event(a.id, "received as parameter", span)
            return ArrayRef(a)
        return UNKNOWN

    # ---- control flow ----------------------------------------------------

    def run_function(self, fn: A.Function, st: ExecState, args: list[AbstractValue],
                     call_span: A.SourceSpan) -> list[ExecState]:
        """Execute ``fn`` from its entry block; returns one state per finished path."""
        st.call_stack = st.call_stack + ((fn.name, call_span),)
        st.env = {}
        for p, v in zip(fn.params, args):
            if p.name is not None:
                st.env[p.name] = v
        order = {b.label: i for i, b in enumerate(fn.blocks)}
        finished: list[ExecState] = []
        # work items: (state, block label, instruction index, block visit counts)
        work = [(st, fn.blocks[0].label, 0, {fn.blocks[0].label: 1})]
        while work:
            cur, label, idx, visits = work.pop()
            block = fn.block(label)
            instrs = block.instructions
            while idx < len(instrs) and not cur.halted:
                outs = self.exec_instruction(cur, instrs[idx])
                idx += 1
                if not outs:
                    cur.halted = True
                    break
                for extra in reversed(outs[1:]):
                    work.append((extra, label, idx, dict(visits)))
                cur = outs[0]
            if cur.halted:
                continue
            term = block.terminator
            if isinstance(term, (A.RetVoid, A.RetValue)):
                cur.retval = self.eval(cur, term.value, term.span) if isinstance(term, A.RetValue) else UNKNOWN
                finished.append(cur)
                continue
            targets = self._branch_targets(cur, term)
            followers = []
            for tgt in targets:
                count = visits.get(tgt, 0)
                if count > self.config.max_unroll and order[tgt] <= order[label]:
                    self.emit(cur, Kind.UnrollLimit, term.span, PLUMBING,
                              A.fmt_name("%", tgt), str(self.config.max_unroll))
                    continue
                followers.append(tgt)
            pending = []
            for i, tgt in enumerate(followers):
                if i == 0:
                    nxt = cur
                else:
                    pid = self._new_path(cur, term.span)
                    if pid is None:
                        break
                    nxt = cur.fork(pid)
                v = dict(visits)
                v[tgt] = v.get(tgt, 0) + 1
                pending.append((nxt, tgt, 0, v))
            # first successor is explored first
            work.extend(reversed(pending))
        return finished

    def _branch_targets(self, st: ExecState, term) -> list[str]:
        if isinstance(term, A.Branch):
            return [term.label]
        cond = self.eval(st, term.cond, term.span)
        if isinstance(cond, Classical) and cond.value is not None:
            return [term.then_label if cond.value else term.else_label]
        return [term.then_label, term.else_label]

    # ---- instructions ----------------------------------------------------

    def exec_instruction(self, st: ExecState, ins) -> list[ExecState]:
        if isinstance(ins, A.Call):
            return self.exec_call(st, ins)
        if isinstance(ins, A.Bitcast):
            v = self.eval(st, ins.operand, ins.span)
            if isinstance(v, ElemPtr):
                v = QubitPtrSlot(v.array, v.index) if ins.to_type == A.QUBIT_SLOT else UNKNOWN
            elif ins.from_type != ins.to_type and not isinstance(v, StackSlot):
                v = UNKNOWN
            st.env[ins.result] = v
        elif isinstance(ins, A.IntToPtr):
            if ins.to_type == A.QUBIT_PTR:
                st.env[ins.result] = self.exec_inttoptr_qubit(st, ins.operand, ins.span)
            else:
                st.env[ins.result] = UNKNOWN
        elif isinstance(ins, A.Store):
            self.exec_store(st, ins)
        elif isinstance(ins, A.Load):
            st.env[ins.result] = self.exec_load(st, ins)
        elif isinstance(ins, A.Alloca):
            st.env[ins.result] = StackSlot(self.fresh_id())
        elif isinstance(ins, A.ICmp):
            st.env[ins.result] = _compare(ins.predicate, self.eval(st, ins.lhs), self.eval(st, ins.rhs))
        elif isinstance(ins, A.GetElementPtr):
            st.env[ins.result] = UNKNOWN
        elif isinstance(ins, A.Phi):  # rejected by validation; stay total anyway
            st.env[ins.result] = UNKNOWN
        return [st]

    def exec_inttoptr_qubit(self, st: ExecState, operand: A.Operand, span: A.SourceSpan) -> QubitRef:
        v = self.eval(st, operand, span)
        if isinstance(v, Classical) and isinstance(v.value, int):
            return self.static_qubit(st, v.value, span)
        ref = self.static_qubit(st, None, span)
        self.emit(st, Kind.AnalysisGap, span, PLUMBING, str(ref.handle), "address is not a constant")
        return ref

    def exec_call(self, st: ExecState, ins: A.Call) -> list[ExecState]:
        callee = ins.callee
        args = [(t, op, self.eval(st, op, ins.span)) for t, op in ins.args]
        result = UNKNOWN
        if callee.startswith(RT):
            result = self.exec_runtime(st, callee[len(RT):], args, ins)
        elif callee.startswith(QIS):
            result = self.exec_qis(st, callee[len(QIS):], args, ins)
        else:
            fn = self._functions.get(callee)
            if fn is not None and not fn.is_declaration:
                return self.exec_call_user(st, fn, args, ins)
        if ins.result is not None:
            st.env[ins.result] = result
        return [st]

    # ---- runtime functions -----------------------------------------------

    def exec_runtime(self, st: ExecState, name: str, args, ins: A.Call) -> AbstractValue:
        span = ins.span
        if name == "qubit_allocate":
            return self.exec_qubit_allocate(st, ins.result, span)
        if name == "qubit_allocate_array":
            n = args[0][2] if args else UNKNOWN
            return self.exec_qubit_allocate_array(st, ins.result, n, span)
        if name == "qubit_release":
            if args:
                self.exec_qubit_release(st, args[0][1], args[0][2], span)
            return UNKNOWN
        if name == "qubit_release_array":
            if args:
                self.exec_qubit_release_array(st, args[0][1], args[0][2], span)
            return UNKNOWN
        if name == "array_create_1d":
            n = args[1][2] if len(args) > 1 else UNKNOWN
            return self.exec_array_create_1d(st, ins.result, n, span)
        if name == "array_get_element_ptr_1d":
            if len(args) == 2 and isinstance(args[0][2], ArrayRef):
                idx = args[1][2]
                index = idx.value if isinstance(idx, Classical) and isinstance(idx.value, int) else None
                return ElemPtr(args[0][2].handle, index)
            return UNKNOWN
        if name == "array_get_size_1d":
            if args and isinstance(args[0][2], ArrayRef) and args[0][2].handle.length is not None:
                return Classical(args[0][2].handle.length)
            return UNKNOWN
        return UNKNOWN  # reference counting and all other runtime helpers

    def exec_qubit_allocate(self, st: ExecState, result: Optional[str], span) -> QubitRef:
        label = A.fmt_name("%", result) if result is not None else f"qubit at line {span.line}"
        q = L.QubitHandle(self.fresh_id(), L.DynamicSingle(span), label)
        st.ledger = L.appqlist(st.ledger, q)
        st.note_event(q.id, "allocated", span)
        return QubitRef(q)

    def exec_qubit_allocate_array(self, st: ExecState, result, n: AbstractValue, span) -> ArrayRef:
        label = A.fmt_name("%", result) if result is not None else f"array at line {span.line}"
        length = n.value if isinstance(n, Classical) and isinstance(n.value, int) and n.value >= 0 else None
        a = L.ArrayHandle(self.fresh_id(), L.AllocatedArray(span), length, label)
        st.note_event(a.id, "allocated", span)
        members = []
        for i in range(length or 0):
            m = L.QubitHandle(self.fresh_id(), L.DynamicArrayMember(a, i), f"{label}[{i}]")
            members.append(m)
            st.slots[(a.id, i)] = QubitRef(m)
            st.note_event(m.id, f"allocated in {label}", span)
        st.ledger = L.appqarrlist(st.ledger, a, tuple(members))
        if length is None:
            self.emit(st, Kind.AnalysisGap, span, PLUMBING, label, "array length is not a known constant")
        return ArrayRef(a)

    def exec_array_create_1d(self, st: ExecState, result, n: AbstractValue, span) -> ArrayRef:
        label = A.fmt_name("%", result) if result is not None else f"array at line {span.line}"
        length = n.value if isinstance(n, Classical) and isinstance(n.value, int) and n.value >= 0 else None
        a = L.ArrayHandle(self.fresh_id(), L.CreatedArray(span), length, label)
        st.ledger = L.appqarrlist(st.ledger, a)
        st.note_event(a.id, "created", span)
        return ArrayRef(a)

    def exec_qubit_release(self, st: ExecState, op, v: AbstractValue, span) -> None:
        if not isinstance(v, QubitRef):
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, str(op), "qubit")
            return
        q = v.handle
        subject = self._describe(op, q)
        if q.is_static:
            self.emit(st, Kind.ReleaseStaticQubit, span, "Q_DEALLOC", subject,
                      trace=self._trace(st, q, "released here", span))
            return
        owner = L.owning_array(st.ledger, q)
        if owner is not None:
            self.emit(st, Kind.ReleaseQubitInArray, span, "Q_DEALLOC", subject, str(owner),
                      trace=self._trace(st, q, "released here", span))
            return
        if not L.checkq(st.ledger, q):
            released = any(ev.event == "released" for ev in st.history.get(q.id, ()))
            kind = Kind.DoubleReleaseQubit if released else Kind.UseAfterReleaseQubit
            self.emit(st, kind, span, "Q_DEALLOC", subject,
                      trace=self._trace(st, q, "released again here" if released else "released here", span))
            return
        st.ledger = L.delq(st.ledger, q)
        st.note_event(q.id, "released", span)

    def exec_qubit_release_array(self, st: ExecState, op, v: AbstractValue, span) -> None:
        if not isinstance(v, ArrayRef):
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, str(op), "qubit array")
            return
        a = v.handle
        subject = self._describe(op, a)
        if not L.checkqarrlist(st.ledger, a):
            released = any(ev.event == "released" for ev in st.history.get(a.id, ()))
            kind = Kind.DoubleReleaseArray if released else Kind.UseAfterReleaseArray
            self.emit(st, kind, span, "QARR_DEALLOC", subject,
                      trace=self._trace(st, a, "released again here" if released else "released here", span))
            return
        members = st.ledger.row(a)
        dying = [m for m in members if a.owns_members or L.checkq(st.ledger, m)]
        st.ledger = L.delqarr(st.ledger, a)
        st.note_event(a.id, "released", span)
        for m in dying:
            if not L.is_live(st.ledger, m):
                st.note_event(m.id, f"released with {a}", span)

    # ---- loads and stores through array slots ------------------------------

    def _slot_in_bounds(self, st, slot: QubitPtrSlot, span, rule, op) -> bool:
        a, i = slot.array, slot.index
        if i is not None and a.length is not None and not 0 <= i < a.length:
            self.emit(st, Kind.IndexOutOfBounds, span, rule, str(a), str(i),
                      trace=self._trace(st, a, "indexed here", span))
            return False
        return True

    def exec_load(self, st: ExecState, ins: A.Load) -> AbstractValue:
        src = self.eval(st, ins.src, ins.span)
        if isinstance(src, StackSlot):
            return st.slots.get(("stack", src.id), UNKNOWN)
        if not isinstance(src, QubitPtrSlot):
            return UNKNOWN
        return self.exec_load_qubit(st, ins.src, src, ins.result, ins.span)

    def exec_load_qubit(self, st: ExecState, op, slot: QubitPtrSlot, result, span) -> AbstractValue:
        a, i = slot.array, slot.index
        if not L.checkqarrlist(st.ledger, a):
            self.emit(st, Kind.LoadFromReleasedArray, span, "Q_LOAD", str(a),
                      trace=self._trace(st, a, "loaded here", span))
            return UNKNOWN
        if not self._slot_in_bounds(st, slot, span, "Q_LOAD", op):
            return UNKNOWN
        if i is None:
            self.emit(st, Kind.AnalysisGap, span, PLUMBING, f"load from {a}", "index is not a known constant")
            return UNKNOWN
        v = st.slots.get((a.id, i))
        if v is None and a.owns_members:
            # members of arrays of unknown length are materialized on first use
            m = L.QubitHandle(self.fresh_id(), L.DynamicArrayMember(a, i), f"{a}[{i}]")
            st.note_event(m.id, f"member of {a}", span)
            v = QubitRef(m)
            st.slots[(a.id, i)] = v
        if not isinstance(v, QubitRef):
            if v is None:
                self.emit(st, Kind.AnalysisGap, span, PLUMBING, f"{a}[{i}]", "slot read before any store")
            return UNKNOWN
        st.ledger = L.appqarr(st.ledger, a, v.handle)
        return v

    def exec_store(self, st: ExecState, ins: A.Store) -> None:
        dest = self.eval(st, ins.dest, ins.span)
        value = self.eval(st, ins.value, ins.span)
        if isinstance(dest, StackSlot):
            st.slots[("stack", dest.id)] = value
            return
        if isinstance(dest, QubitPtrSlot):
            if isinstance(value, QubitRef):
                self.exec_store_qubit(st, ins.value, value, dest, ins.span)
            else:
                self.emit(st, Kind.AnalysisGap, ins.span, PLUMBING, f"{dest.array}[{dest.index}]",
                          "stored value is not a tracked qubit")
                if dest.index is not None:
                    st.slots[(dest.array.id, dest.index)] = UNKNOWN
            return
        if isinstance(value, QubitRef):
            self.emit(st, Kind.AnalysisGap, ins.span, PLUMBING, str(value.handle),
                      "stored to memory the analyzer does not track")

    def exec_store_qubit(self, st: ExecState, op, v: QubitRef, slot: QubitPtrSlot, span) -> None:
        a, q = slot.array, v.handle
        subject = self._describe(op, q)
        if not L.checkqarrlist(st.ledger, a):
            self.emit(st, Kind.UseAfterReleaseArray, span, "QARR_CREATE", str(a),
                      trace=self._trace(st, a, "stored into here", span))
            return
        if not self._slot_in_bounds(st, slot, span, "QARR_CREATE", op):
            return
        if not L.is_live(st.ledger, q):
            self.emit(st, Kind.UseAfterReleaseQubit, span, "QARR_CREATE", subject,
                      trace=self._trace(st, q, "stored here", span))
            return
        if L.checkqarr(st.ledger, a, q):
            self.emit(st, Kind.CloneInArrayStore, span, "QARR_CREATE", subject, str(a),
                      trace=self._trace(st, q, "stored again here", span))
            return
        # rows that merely own q are the normal source of a stored qubit
        others = [x for x in L.arrays_containing(st.ledger, q) if x != a and not x.owns_members]
        st.ledger = L.appqarr(st.ledger, a, q)
        if slot.index is not None:
            st.slots[(a.id, slot.index)] = v
        st.note_event(q.id, f"stored into {a}", span)
        if others:
            names = ", ".join(str(x) for x in [*others, a])
            self.emit(st, Kind.MultiArrayMembershipNote, span, "QARR_CREATE", subject, names)

    # ---- quantum instruction set ---------------------------------------------

    def exec_qis(self, st: ExecState, name: str, args, ins: A.Call) -> AbstractValue:
        span = ins.span
        if name == "measure__body":
            return self.exec_measure(st, args, ins.result, span)
        base, _, functor = name.rpartition("__")
        if not base:
            return UNKNOWN
        if functor == "body":
            if base not in self.gates.single:
                self.emit(st, Kind.UnrecognizedGate, span, PLUMBING, A.fmt_name("@", ins.callee))
                for _, op, v in args:
                    if isinstance(v, QubitRef):
                        self._check_qubit_live(st, op, v, span, "SG_OP")
                return UNKNOWN
            self.exec_gate_single(st, args, span)
        elif functor == "ctl":
            if base not in self.gates.ctl:
                self.emit(st, Kind.UnrecognizedGate, span, PLUMBING, A.fmt_name("@", ins.callee))
            self.exec_gate_ctl(st, args, span)
        elif functor in ("adj", "ctladj"):
            for _, op, v in args:
                if isinstance(v, QubitRef):
                    self._check_qubit_live(st, op, v, span, "SG_OP" if functor == "adj" else "CG_OP")
                elif isinstance(v, ArrayRef) and functor == "ctladj":
                    self._check_array_live(st, op, v, span, "CG_OP")
        return UNKNOWN

    def _check_qubit_live(self, st, op, v: QubitRef, span, rule) -> bool:
        if L.is_live(st.ledger, v.handle):
            return True
        self.emit(st, Kind.UseAfterReleaseQubit, span, rule, self._describe(op, v.handle),
                  trace=self._trace(st, v.handle, "used here", span))
        return False

    def _check_array_live(self, st, op, v: ArrayRef, span, rule) -> bool:
        if L.checkqarrlist(st.ledger, v.handle):
            return True
        self.emit(st, Kind.UseAfterReleaseArray, span, rule, self._describe(op, v.handle),
                  trace=self._trace(st, v.handle, "used here", span))
        return False

    def exec_gate_single(self, st: ExecState, args, span) -> None:
        if not args or not isinstance(args[-1][2], QubitRef):
            target = str(args[-1][1]) if args else "missing operand"
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, target, "qubit")
            return
        _, op, v = args[-1]
        self._check_qubit_live(st, op, v, span, "SG_OP")

    def exec_gate_ctl(self, st: ExecState, args, span) -> None:
        if len(args) < 2:
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, "operand list", "control array and target")
            return
        _, cop, ctl = args[0]
        _, top, tgt = args[-1]
        ctl_live = False
        if isinstance(ctl, ArrayRef):
            ctl_live = self._check_array_live(st, cop, ctl, span, "CG_OP")
        else:
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, str(cop), "qubit array")
        if not isinstance(tgt, QubitRef):
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, str(top), "qubit")
            return
        self._check_qubit_live(st, top, tgt, span, "CG_OP")
        if ctl_live and L.checkqarr(st.ledger, ctl.handle, tgt.handle):
            self.emit(st, Kind.CloneControlTarget, span, "CG_OP", self._describe(top, tgt.handle),
                      str(ctl.handle), trace=self._trace(st, tgt.handle, "used as target here", span))

    def exec_measure(self, st: ExecState, args, result, span) -> AbstractValue:
        if len(args) != 2 or not all(isinstance(v, ArrayRef) for _, _, v in args):
            self.emit(st, Kind.TypeMismatch, span, PLUMBING, "measurement operands", "qubit array")
            return UNKNOWN
        _, op, qs = args[1]
        if not L.checkqarrlist(st.ledger, qs.handle):
            self.emit(st, Kind.MeasureReleasedArray, span, "MEASURE", self._describe(op, qs.handle),
                      trace=self._trace(st, qs.handle, "measured here", span))
            return UNKNOWN
        return ResultRef(span)

    # ---- user functions ----------------------------------------------------

    def exec_call_user(self, st: ExecState, fn: A.Function, args, ins: A.Call) -> list[ExecState]:
        callee = A.fmt_name("@", fn.name)
        if any(name == fn.name for name, _ in st.call_stack):
            self.emit(st, Kind.InlineLimit, ins.span, PLUMBING, callee, "recursive call")
            return self._opaque_result(st, ins)
        if len(st.call_stack) > self.config.max_inline_depth:
            self.emit(st, Kind.InlineLimit, ins.span, PLUMBING, callee,
                      f"inline depth {self.config.max_inline_depth} reached")
            return self._opaque_result(st, ins)
        caller_env, caller_stack = st.env, st.call_stack
        finals = self.run_function(fn, st, [v for _, _, v in args], ins.span)
        outs = []
        for i, s in enumerate(finals):
            s.env = caller_env if i == 0 else dict(caller_env)
            s.call_stack = caller_stack
            if ins.result is not None:
                s.env[ins.result] = s.retval
            s.retval = UNKNOWN
            outs.append(s)
        return outs

    def _opaque_result(self, st: ExecState, ins: A.Call) -> list[ExecState]:
        if ins.result is not None:
            st.env[ins.result] = UNKNOWN
        return [st]


def _compare(pred: str, a: AbstractValue, b: AbstractValue) -> AbstractValue:
    if not (isinstance(a, Classical) and isinstance(b, Classical)):
        return UNKNOWN
    x, y = a.value, b.value
    if not (isinstance(x, int) and isinstance(y, int)):
        return UNKNOWN
    ops = {
        "eq": x == y, "ne": x != y,
        "ugt": x > y, "uge": x >= y, "ult": x < y, "ule": x <= y,
        "sgt": x > y, "sge": x >= y, "slt": x < y, "sle": x <= y,
    }
    return Classical(int(ops[pred]))


# --------------------------------------------------------------------------
# Public drivers


def explore_function(module: A.QirModule, name: str,
                     config: AnalysisConfig = AnalysisConfig()) -> AnalysisResult:
    """Analyze ``name`` as an entry point and keep the final per-path states."""
    return Analyzer(module, config).analyze(name)


def analyze_function(module: A.QirModule, name: str,
                     config: AnalysisConfig = AnalysisConfig()) -> list[Diagnostic]:
    return explore_function(module, name, config).diagnostics


def entry_points(module: A.QirModule, config: AnalysisConfig) -> list[str]:
    if config.entry is not None:
        return [config.entry]
    return [f.name for f in module.definitions]


def analyze_module(module: A.QirModule, config: AnalysisConfig = AnalysisConfig()) -> list[Diagnostic]:
    """Analyze every entry point; diagnostics merged across entries."""
    out: list[Diagnostic] = []
    for name in entry_points(module, config):
        out.extend(analyze_function(module, name, config))
    return dedupe_and_sort(out, by_entry=False)
