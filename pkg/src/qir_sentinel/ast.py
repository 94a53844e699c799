"""Typed program representation for the QIR subset of LLVM IR.

Every node is a frozen dataclass.  Source spans are carried on instructions,
terminators, blocks and functions but are excluded from equality, so two
modules compare equal when they have the same structure regardless of layout.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True, order=True)
class SourceSpan:
    file: str
    line: int
    col_start: int
    col_end: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col_start}"


NO_SPAN = SourceSpan("<unknown>", 0, 0, 0)

_PLAIN_NAME = re.compile(r"[-a-zA-Z$._][-a-zA-Z$._0-9]*\Z|[0-9]+\Z")


def fmt_name(sigil: str, name: str) -> str:
    if _PLAIN_NAME.match(name):
        return sigil + name
    escaped = "".join(
        ch if ch.isprintable() and ch not in '"\\' else "\\%02X" % ord(ch)
        for ch in name
    )
    return f'{sigil}"{escaped}"'


# --------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class IntBits:
    width: int

    def __str__(self) -> str:
        return f"i{self.width}"


@dataclass(frozen=True)
class Double:
    def __str__(self) -> str:
        return "double"


@dataclass(frozen=True)
class Void:
    def __str__(self) -> str:
        return "void"


@dataclass(frozen=True)
class PointerTo:
    pointee: "Type"

    def __str__(self) -> str:
        return f"{self.pointee}*"


@dataclass(frozen=True)
class ArrayOf:
    size: int
    elem: "Type"

    def __str__(self) -> str:
        return f"[{self.size} x {self.elem}]"


@dataclass(frozen=True)
class FunctionOf:
    ret: "Type"
    params: tuple["Type", ...] = ()

    def __str__(self) -> str:
        return f"{self.ret} ({', '.join(map(str, self.params))})"


@dataclass(frozen=True)
class StructOf:
    fields: tuple["Type", ...] = ()

    def __str__(self) -> str:
        if not self.fields:
            return "{}"
        return "{ " + ", ".join(map(str, self.fields)) + " }"


@dataclass(frozen=True)
class Named:
    name: str

    def __str__(self) -> str:
        return fmt_name("%", self.name)


@dataclass(frozen=True)
class Qubit:
    def __str__(self) -> str:
        return "%Qubit"


@dataclass(frozen=True)
class Result:
    def __str__(self) -> str:
        return "%Result"


@dataclass(frozen=True)
class Array:
    def __str__(self) -> str:
        return "%Array"


@dataclass(frozen=True)
class Tuple:
    def __str__(self) -> str:
        return "%Tuple"


@dataclass(frozen=True)
class Pauli:
    def __str__(self) -> str:
        return "%Pauli"


@dataclass(frozen=True)
class Range:
    def __str__(self) -> str:
        return "%Range"


Type = Union[
    IntBits, Double, Void, PointerTo, ArrayOf, FunctionOf, StructOf, Named,
    Qubit, Result, Array, Tuple, Pauli, Range,
]

# Names with a dedicated variant; the parser never produces Named for these.
BUILTIN_TYPES: dict[str, Type] = {
    "Qubit": Qubit(),
    "Result": Result(),
    "Array": Array(),
    "Tuple": Tuple(),
    "Pauli": Pauli(),
    "Range": Range(),
}
OPAQUE_TYPES = (Qubit, Result, Array, Tuple)

QUBIT_PTR = PointerTo(Qubit())
QUBIT_SLOT = PointerTo(QUBIT_PTR)
ARRAY_PTR = PointerTo(Array())
RESULT_PTR = PointerTo(Result())


# --------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class Local:
    name: str

    def __str__(self) -> str:
        return fmt_name("%", self.name)


@dataclass(frozen=True)
class Global:
    name: str

    def __str__(self) -> str:
        return fmt_name("@", self.name)


@dataclass(frozen=True)
class IntConst:
    width: int
    value: int

    def __str__(self) -> str:
        return str(self.value)


def fmt_double(value: float) -> str:
    import math
    import struct

    if math.isnan(value) or math.isinf(value):
        (bits,) = struct.unpack(">Q", struct.pack(">d", value))
        return "0x%016X" % bits
    text = repr(float(value))
    mantissa, _, exponent = text.partition("e")
    if "." not in mantissa:
        mantissa += ".0"
    return mantissa + ("e" + exponent if exponent else "")


@dataclass(frozen=True)
class DoubleConst:
    value: float

    def __str__(self) -> str:
        return fmt_double(self.value)

    def __eq__(self, other: object) -> bool:
        # bitwise, so that nan round-trips
        if not isinstance(other, DoubleConst):
            return NotImplemented
        return fmt_double(self.value) == fmt_double(other.value)

    def __hash__(self) -> int:
        return hash(fmt_double(self.value))


@dataclass(frozen=True)
class VoidConst:
    def __str__(self) -> str:
        return "void"


@dataclass(frozen=True)
class NullPtr:
    type: Type

    def __str__(self) -> str:
        return "null"


@dataclass(frozen=True)
class RangeConst:
    start: int
    step: int
    end: int

    def __str__(self) -> str:
        return f"{{ i64 {self.start}, i64 {self.step}, i64 {self.end} }}"


@dataclass(frozen=True)
class PauliConst:
    code: int

    def __str__(self) -> str:
        return str(self.code)


@dataclass(frozen=True)
class AggregateConst:
    elements: tuple[tuple[Type, "Operand"], ...]
    is_array: bool = False

    def __str__(self) -> str:
        body = ", ".join(f"{t} {v}" for t, v in self.elements)
        if self.is_array:
            return f"[{body}]"
        return "{ " + body + " }" if body else "{}"


@dataclass(frozen=True)
class ConstCast:
    """``bitcast``/``inttoptr``/``ptrtoint`` constant expression."""

    op: str
    from_type: Type
    value: "Operand"
    to_type: Type

    def __str__(self) -> str:
        return f"{self.op} ({self.from_type} {self.value} to {self.to_type})"


@dataclass(frozen=True)
class ConstGep:
    base_type: Type
    args: tuple[tuple[Type, "Operand"], ...]
    inbounds: bool = False

    def __str__(self) -> str:
        kw = "getelementptr inbounds" if self.inbounds else "getelementptr"
        body = ", ".join(f"{t} {v}" for t, v in self.args)
        return f"{kw} ({self.base_type}, {body})"


@dataclass(frozen=True)
class ConstExtract:
    agg_type: Type
    agg: "Operand"
    indices: tuple[int, ...]

    def __str__(self) -> str:
        idx = ", ".join(map(str, self.indices))
        return f"extractvalue ({self.agg_type} {self.agg}, {idx})"


Constant = Union[
    IntConst, DoubleConst, VoidConst, NullPtr, RangeConst, PauliConst,
    AggregateConst, ConstCast, ConstGep, ConstExtract,
]
Operand = Union[Local, Global, Constant]


# --------------------------------------------------------------------------
# Instructions

_span = lambda: field(default=NO_SPAN, compare=False, repr=False)  # noqa: E731


@dataclass(frozen=True)
class Call:
    result: Optional[str]
    ret_type: Type
    callee: str
    args: tuple[tuple[Type, Operand], ...] = ()
    tail: Optional[str] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Bitcast:
    result: str
    from_type: Type
    operand: Operand
    to_type: Type
    span: SourceSpan = _span()


@dataclass(frozen=True)
class IntToPtr:
    result: str
    from_type: Type
    operand: Operand
    to_type: Type
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Store:
    value_type: Type
    value: Operand
    dest_type: Type
    dest: Operand
    align: Optional[int] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Load:
    result: str
    loaded_type: Type
    src_type: Type
    src: Operand
    align: Optional[int] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class GetElementPtr:
    result: str
    base_type: Type
    ptr_type: Type
    base: Operand
    indices: tuple[tuple[Type, Operand], ...] = ()
    inbounds: bool = False
    span: SourceSpan = _span()


ICMP_PREDICATES = ("eq", "ne", "ugt", "uge", "ult", "ule", "sgt", "sge", "slt", "sle")


@dataclass(frozen=True)
class ICmp:
    result: str
    predicate: str
    type: Type
    lhs: Operand
    rhs: Operand
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Alloca:
    result: str
    type: Type
    count: Optional[tuple[Type, Operand]] = None
    align: Optional[int] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Phi:
    result: str
    type: Type
    incoming: tuple[tuple[Operand, str], ...]
    span: SourceSpan = _span()


Instruction = Union[Call, Bitcast, IntToPtr, Store, Load, GetElementPtr, ICmp, Alloca]


@dataclass(frozen=True)
class RetValue:
    type: Type
    value: Operand
    span: SourceSpan = _span()


@dataclass(frozen=True)
class RetVoid:
    span: SourceSpan = _span()


@dataclass(frozen=True)
class CondBranch:
    cond: Operand
    then_label: str
    else_label: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Branch:
    label: str
    span: SourceSpan = _span()


Terminator = Union[RetValue, RetVoid, CondBranch, Branch]


def result_name(instr: Union[Instruction, Phi]) -> Optional[str]:
    return getattr(instr, "result", None)


def successors(term: Terminator) -> tuple[str, ...]:
    if isinstance(term, CondBranch):
        return (term.then_label, term.else_label)
    if isinstance(term, Branch):
        return (term.label,)
    return ()


# --------------------------------------------------------------------------
# Containers


@dataclass(frozen=True)
class Block:
    label: str
    instructions: tuple[Instruction, ...]
    terminator: Terminator
    phis: tuple[Phi, ...] = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Param:
    type: Type
    name: Optional[str] = None


@dataclass(frozen=True)
class Function:
    name: str
    ret_type: Type
    params: tuple[Param, ...] = ()
    blocks: tuple[Block, ...] = ()
    is_declaration: bool = False
    linkage: Optional[str] = None
    span: SourceSpan = _span()

    @property
    def entry(self) -> Block:
        return self.blocks[0]

    def block(self, label: str) -> Block:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    body: Optional[Type]  # None means opaque
    span: SourceSpan = _span()


@dataclass(frozen=True)
class QirModule:
    source_file: str
    type_decls: tuple[TypeDecl, ...] = ()
    functions: tuple[Function, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def get(self, name: str) -> Optional[Function]:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    @property
    def definitions(self) -> list[Function]:
        return [f for f in self.functions if not f.is_declaration]

    @property
    def declarations(self) -> list[Function]:
        return [f for f in self.functions if f.is_declaration]


# --------------------------------------------------------------------------
# Well-formedness


@dataclass(frozen=True)
class StructuralError:
    kind: str
    detail: str
    span: SourceSpan = field(default=NO_SPAN, compare=False)
    function: Optional[str] = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span.line else ""
        fn = f" (in @{self.function})" if self.function else ""
        return f"{where}{self.kind}: {self.detail}{fn}"


def _walk_type(t: Type, under_ptr: bool = False):
    yield t, under_ptr
    if isinstance(t, PointerTo):
        yield from _walk_type(t.pointee, True)
    elif isinstance(t, ArrayOf):
        yield from _walk_type(t.elem)
    elif isinstance(t, FunctionOf):
        yield from _walk_type(t.ret)
        for p in t.params:
            yield from _walk_type(p)
    elif isinstance(t, StructOf):
        for f in t.fields:
            yield from _walk_type(f)


def _operand_types(op: Operand):
    if isinstance(op, NullPtr):
        yield op.type
    elif isinstance(op, AggregateConst):
        for t, v in op.elements:
            yield t
            yield from _operand_types(v)
    elif isinstance(op, ConstCast):
        yield op.from_type
        yield op.to_type
        yield from _operand_types(op.value)
    elif isinstance(op, ConstGep):
        yield op.base_type
        for t, v in op.args:
            yield t
            yield from _operand_types(v)
    elif isinstance(op, ConstExtract):
        yield op.agg_type
        yield from _operand_types(op.agg)


def _operand_ints(op: Operand):
    if isinstance(op, IntConst):
        yield op
    elif isinstance(op, AggregateConst):
        for _, v in op.elements:
            yield from _operand_ints(v)
    elif isinstance(op, (ConstCast,)):
        yield from _operand_ints(op.value)
    elif isinstance(op, ConstGep):
        for _, v in op.args:
            yield from _operand_ints(v)


def _instr_types(instr) -> list[Type]:
    if isinstance(instr, Call):
        return [instr.ret_type] + [t for t, _ in instr.args]
    if isinstance(instr, (Bitcast, IntToPtr)):
        return [instr.from_type, instr.to_type]
    if isinstance(instr, Store):
        return [instr.value_type, instr.dest_type]
    if isinstance(instr, Load):
        return [instr.loaded_type, instr.src_type]
    if isinstance(instr, GetElementPtr):
        return [instr.base_type, instr.ptr_type] + [t for t, _ in instr.indices]
    if isinstance(instr, ICmp):
        return [instr.type]
    if isinstance(instr, Alloca):
        return [instr.type] + ([instr.count[0]] if instr.count else [])
    if isinstance(instr, Phi):
        return [instr.type]
    if isinstance(instr, RetValue):
        return [instr.type]
    return []


def _instr_operands(instr) -> list[Operand]:
    if isinstance(instr, Call):
        return [v for _, v in instr.args]
    if isinstance(instr, (Bitcast, IntToPtr)):
        return [instr.operand]
    if isinstance(instr, Store):
        return [instr.value, instr.dest]
    if isinstance(instr, Load):
        return [instr.src]
    if isinstance(instr, GetElementPtr):
        return [instr.base] + [v for _, v in instr.indices]
    if isinstance(instr, ICmp):
        return [instr.lhs, instr.rhs]
    if isinstance(instr, Alloca):
        return [instr.count[1]] if instr.count else []
    if isinstance(instr, Phi):
        return [v for v, _ in instr.incoming]
    if isinstance(instr, RetValue):
        return [instr.value]
    if isinstance(instr, CondBranch):
        return [instr.cond]
    return []


def validate_module(module: QirModule) -> list[StructuralError]:
    """Return every structural problem in ``module``; empty means well-formed.

    Checks label resolution, SSA uniqueness, named-type resolution, opacity
    of Qubit/Result/Array/Tuple, callee declaration, call result/void
    agreement, integer literal ranges, and rejects phi nodes.
    """
    errors: list[StructuralError] = []
    declared_types = {d.name for d in module.type_decls}
    opaque_named = {d.name for d in module.type_decls if d.body is None}
    fn_names: dict[str, int] = {}
    for f in module.functions:
        fn_names[f.name] = fn_names.get(f.name, 0) + 1

    seen_decl: set[str] = set()
    for d in module.type_decls:
        if d.name in seen_decl:
            errors.append(StructuralError("DuplicateType", d.name, d.span))
        seen_decl.add(d.name)
        if d.body is not None:
            errors.extend(_check_type(d.body, declared_types, opaque_named, d.span, None))

    for name, count in fn_names.items():
        if count > 1:
            errors.append(StructuralError("DuplicateFunction", name))

    for f in module.functions:
        errors.extend(_check_function(f, module, fn_names, declared_types, opaque_named))
    return errors


def _check_type(t, declared, opaque_named, span, fn) -> list[StructuralError]:
    out = []
    for sub, under_ptr in _walk_type(t):
        if isinstance(sub, IntBits) and sub.width < 1:
            out.append(StructuralError("BadIntWidth", str(sub), span, fn))
        elif isinstance(sub, Named):
            if sub.name not in declared:
                out.append(StructuralError("UnresolvedType", sub.name, span, fn))
            elif sub.name in opaque_named and not under_ptr:
                out.append(StructuralError("OpaqueByValue", str(sub), span, fn))
        elif isinstance(sub, OPAQUE_TYPES) and not under_ptr:
            out.append(StructuralError("OpaqueByValue", str(sub), span, fn))
    return out


def _check_function(f, module, fn_names, declared, opaque_named) -> list[StructuralError]:
    errors: list[StructuralError] = []
    where = f.name

    def check_type(t, span, allow_void=False):
        if isinstance(t, Void) and not allow_void:
            errors.append(StructuralError("VoidValue", "void used as a value type", span, where))
        errors.extend(_check_type(t, declared, opaque_named, span, where))

    check_type(f.ret_type, f.span, allow_void=True)
    for p in f.params:
        check_type(p.type, f.span)

    if f.is_declaration:
        if f.blocks:
            errors.append(StructuralError("DeclarationWithBody", f.name, f.span, where))
        return errors
    if not f.blocks:
        errors.append(StructuralError("EmptyDefinition", f.name, f.span, where))
        return errors

    labels: dict[str, int] = {}
    for b in f.blocks:
        labels[b.label] = labels.get(b.label, 0) + 1
    for label, n in labels.items():
        if n > 1:
            errors.append(StructuralError("DuplicateLabel", label, f.span, where))

    defined: dict[str, int] = {}
    for p in f.params:
        if p.name is not None:
            defined[p.name] = defined.get(p.name, 0) + 1
    for b in f.blocks:
        for instr in (*b.phis, *b.instructions):
            name = result_name(instr)
            if name is not None:
                defined[name] = defined.get(name, 0) + 1
    for name, n in defined.items():
        if n > 1:
            errors.append(StructuralError("DuplicateName", name, f.span, where))

    def check_operands(node):
        for op in _instr_operands(node):
            if isinstance(op, Local) and op.name not in defined:
                errors.append(StructuralError("UndefinedValue", op.name, node.span, where))
            for t in _operand_types(op):
                check_type(t, node.span)
            for c in _operand_ints(op):
                lo, hi = -(1 << (c.width - 1)) if c.width >= 1 else 0, 1 << c.width
                if c.width < 1 or not lo <= c.value < hi:
                    errors.append(StructuralError(
                        "IntOutOfRange", f"i{c.width} {c.value}", node.span, where))
            if isinstance(op, PauliConst) and not 0 <= op.code <= 3:
                errors.append(StructuralError("BadPauli", str(op.code), node.span, where))

    for b in f.blocks:
        for phi in b.phis:
            errors.append(StructuralError(
                "PhiUnsupported", f"phi node %{phi.result} in block {b.label}", phi.span, where))
        for instr in b.instructions:
            for t in _instr_types(instr):
                check_type(t, instr.span, allow_void=isinstance(instr, Call) and t is instr.ret_type)
            check_operands(instr)
            if isinstance(instr, Call):
                if instr.callee not in fn_names:
                    errors.append(StructuralError("UndeclaredCallee", instr.callee, instr.span, where))
                is_void = isinstance(instr.ret_type, Void)
                if is_void == (instr.result is not None):
                    errors.append(StructuralError(
                        "CallResultMismatch",
                        f"call to @{instr.callee} returning {instr.ret_type}",
                        instr.span, where))
        term = b.terminator
        for t in _instr_types(term):
            check_type(t, term.span)
        check_operands(term)
        if isinstance(term, RetVoid) and not isinstance(f.ret_type, Void):
            errors.append(StructuralError("ReturnMismatch", "ret void in non-void function", term.span, where))
        if isinstance(term, RetValue) and term.type != f.ret_type:
            errors.append(StructuralError("ReturnMismatch", f"ret {term.type} in function returning {f.ret_type}", term.span, where))
        for target in successors(term):
            if target not in labels:
                errors.append(StructuralError("DanglingLabel", target, term.span, where))
    return errors
