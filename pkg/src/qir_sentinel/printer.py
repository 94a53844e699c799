"""Emit textual QIR that :func:`qir_sentinel.parser.parse_module` accepts."""

from __future__ import annotations

from . import ast as A


def _typed(t: A.Type, v: A.Operand) -> str:
    return f"{t} {v}"


def _align(align) -> str:
    return f", align {align}" if align is not None else ""


def format_instruction(instr) -> str:
    if isinstance(instr, A.Call):
        lhs = f"{A.fmt_name('%', instr.result)} = " if instr.result is not None else ""
        tail = f"{instr.tail} " if instr.tail else ""
        args = ", ".join(_typed(t, v) for t, v in instr.args)
        return f"{lhs}{tail}call {instr.ret_type} {A.fmt_name('@', instr.callee)}({args})"
    if isinstance(instr, (A.Bitcast, A.IntToPtr)):
        op = "bitcast" if isinstance(instr, A.Bitcast) else "inttoptr"
        return (f"{A.fmt_name('%', instr.result)} = {op} "
                f"{_typed(instr.from_type, instr.operand)} to {instr.to_type}")
    if isinstance(instr, A.Store):
        return (f"store {_typed(instr.value_type, instr.value)}, "
                f"{_typed(instr.dest_type, instr.dest)}{_align(instr.align)}")
    if isinstance(instr, A.Load):
        return (f"{A.fmt_name('%', instr.result)} = load {instr.loaded_type}, "
                f"{_typed(instr.src_type, instr.src)}{_align(instr.align)}")
    if isinstance(instr, A.GetElementPtr):
        kw = "getelementptr inbounds" if instr.inbounds else "getelementptr"
        parts = [str(instr.base_type), _typed(instr.ptr_type, instr.base)]
        parts += [_typed(t, v) for t, v in instr.indices]
        return f"{A.fmt_name('%', instr.result)} = {kw} " + ", ".join(parts)
    if isinstance(instr, A.ICmp):
        return (f"{A.fmt_name('%', instr.result)} = icmp {instr.predicate} "
                f"{instr.type} {instr.lhs}, {instr.rhs}")
    if isinstance(instr, A.Alloca):
        count = f", {_typed(*instr.count)}" if instr.count else ""
        return f"{A.fmt_name('%', instr.result)} = alloca {instr.type}{count}{_align(instr.align)}"
    if isinstance(instr, A.Phi):
        incoming = ", ".join(f"[ {v}, {A.fmt_name('%', lbl)} ]" for v, lbl in instr.incoming)
        return f"{A.fmt_name('%', instr.result)} = phi {instr.type} {incoming}"
    if isinstance(instr, A.RetVoid):
        return "ret void"
    if isinstance(instr, A.RetValue):
        return f"ret {_typed(instr.type, instr.value)}"
    if isinstance(instr, A.Branch):
        return f"br label {A.fmt_name('%', instr.label)}"
    if isinstance(instr, A.CondBranch):
        return (f"br i1 {instr.cond}, label {A.fmt_name('%', instr.then_label)}, "
                f"label {A.fmt_name('%', instr.else_label)}")
    raise TypeError(f"not an instruction: {instr!r}")


def _format_label(label: str) -> str:
    return A.fmt_name("", label) if label else ""


def format_function(f: A.Function) -> str:
    linkage = f"{f.linkage} " if f.linkage else ""
    params = ", ".join(
        f"{p.type} {A.fmt_name('%', p.name)}" if p.name is not None else str(p.type)
        for p in f.params
    )
    head = f"{f.ret_type} {A.fmt_name('@', f.name)}({params})"
    if f.is_declaration:
        return f"declare {linkage}{head}"
    lines = [f"define {linkage}{head} {{"]
    for i, b in enumerate(f.blocks):
        if b.label:
            lines.append(f"{_format_label(b.label)}:")
        elif i:
            raise ValueError("only the entry block may be unlabeled")
        for node in (*b.phis, *b.instructions, b.terminator):
            lines.append("  " + format_instruction(node))
    lines.append("}")
    return "\n".join(lines)


def print_module(module: A.QirModule) -> str:
    """Render ``module`` as ``.ll`` text, starting with a ModuleID comment."""
    out = [f"; ModuleID = '{module.source_file}'"]
    if module.type_decls:
        out.append("")
        for d in module.type_decls:
            body = "opaque" if d.body is None else str(d.body)
            out.append(f"{A.fmt_name('%', d.name)} = type {body}")
    for f in module.functions:
        out.append("")
        out.append(format_function(f))
    return "\n".join(out) + "\n"
