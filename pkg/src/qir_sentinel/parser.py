"""Recursive-descent parser for the QIR dialect of LLVM IR text.

Errors are collected with panic-mode recovery at line (instruction)
boundaries; a failed parse raises :class:`ParseErrors` carrying all of them.
Attribute groups, metadata, globals and unneeded modifiers are skipped and
reported through ``QirModule.warnings``.
"""

from __future__ import annotations

import logging
import struct
from typing import Optional

from . import ast as A
from .lexer import Kind, ParseError, Token, lex_recovering

log = logging.getLogger(__name__)

DEFAULT_MAX_ERRORS = 20

LINKAGES = {
    "private", "internal", "external", "linkonce", "linkonce_odr", "weak",
    "weak_odr", "available_externally", "extern_weak", "common",
}
# Modifiers accepted and dropped (with a warning) in headers and calls.
SKIPPED_MODIFIERS = {
    "dso_local", "dso_preemptable", "hidden", "protected", "default",
    "unnamed_addr", "local_unnamed_addr", "fastcc", "ccc", "coldcc",
    "noundef", "nonnull", "zeroext", "signext", "inreg", "noalias",
    "nocapture", "readonly", "writeonly", "readnone", "returned", "nofree",
    "nounwind", "immarg", "nsz", "fast",
}
TERMINATORS = {"ret", "br"}
VALUE_OPCODES = {"call", "tail", "musttail", "notail", "bitcast", "inttoptr",
                 "load", "getelementptr", "icmp", "alloca", "phi"}


class ParseErrors(Exception):
    """Raised by :func:`parse_module` when the input has errors."""

    def __init__(self, errors: list[ParseError]):
        super().__init__("\n".join(map(str, errors)))
        self.errors = errors


class _Parser:
    def __init__(self, tokens: list[Token], filename: str, max_errors: int):
        self.toks = tokens
        self.i = 0
        self.filename = filename
        self.max_errors = max_errors
        self.errors: list[ParseError] = []
        self.warnings: list[str] = []
        last = tokens[-1].span if tokens else A.SourceSpan(filename, 1, 1, 1)
        self.eof = Token(Kind.EOF, "", A.SourceSpan(filename, last.line, last.col_end, last.col_end))

    # -- token helpers ----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else self.eof

    def next(self) -> Token:
        tok = self.peek()
        if self.i < len(self.toks):
            self.i += 1
        return tok

    @property
    def prev(self) -> Token:
        return self.toks[self.i - 1] if self.i else self.eof

    def at(self, lexeme: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind in (Kind.PUNCT, Kind.KEYWORD) and tok.lexeme == lexeme

    def fail(self, message: str, expected: Optional[list[str]] = None):
        tok = self.peek()
        got = "end of input" if tok.kind is Kind.EOF else repr(tok.lexeme)
        raise ParseError(f"{message}, got {got}", tok.span, expected or [], tok)

    def expect(self, lexeme: str) -> Token:
        if not self.at(lexeme):
            self.fail(f"expected '{lexeme}'", [lexeme])
        return self.next()

    def expect_kind(self, kind: Kind, what: str) -> Token:
        if self.peek().kind is not kind:
            self.fail(f"expected {what}", [kind.value])
        return self.next()

    def expect_int(self) -> int:
        return int(self.expect_kind(Kind.INT, "integer").lexeme)

    def warn(self, tok: Token, message: str) -> None:
        self.warnings.append(f"{tok.span}: {message}")

    def first_on_line(self, k: int = 0) -> bool:
        j = self.i + k
        if j == 0:
            return True
        if j >= len(self.toks):
            return True
        return self.toks[j - 1].span.line != self.toks[j].span.line

    def record(self, err: ParseError) -> None:
        if len(self.errors) < self.max_errors:
            self.errors.append(err)

    @property
    def saturated(self) -> bool:
        return len(self.errors) >= self.max_errors

    def skip_line(self, line: int) -> None:
        while self.peek().kind is not Kind.EOF and self.peek().span.line <= line:
            self.next()

    def skip_balanced_line(self) -> None:
        """Skip the current line, continuing past line ends inside braces."""
        line = self.peek().span.line
        depth = 0
        while self.peek().kind is not Kind.EOF:
            tok = self.peek()
            if depth == 0 and tok.span.line > line:
                break
            if tok.lexeme == "{":
                depth += 1
            elif tok.lexeme == "}":
                depth -= 1
            line = max(line, tok.span.line) if depth else line
            self.next()

    def span_from(self, first: Token) -> A.SourceSpan:
        last = self.prev
        end = last.span.col_end if last.span.line == first.span.line else first.span.col_end
        return A.SourceSpan(self.filename, first.span.line, first.span.col_start, end)

    # -- module -----------------------------------------------------------

    def at_toplevel_item(self) -> bool:
        tok = self.peek()
        if tok.kind is Kind.EOF:
            return True
        if not self.first_on_line():
            return False
        if tok.kind is Kind.KEYWORD and tok.lexeme in (
                "define", "declare", "attributes", "source_filename", "target"):
            return True
        if tok.kind in (Kind.LOCAL, Kind.GLOBAL) and self.at("=", 1):
            return True
        return tok.kind is Kind.META

    def parse_module(self) -> A.QirModule:
        type_decls: list[A.TypeDecl] = []
        functions: list[A.Function] = []
        while self.peek().kind is not Kind.EOF and not self.saturated:
            start = self.i
            try:
                item = self.toplevel_item()
            except ParseError as err:
                self.record(err)
                if self.i == start:
                    self.next()
                while not self.at_toplevel_item():
                    self.next()
                continue
            if isinstance(item, A.TypeDecl):
                type_decls.append(item)
            elif isinstance(item, A.Function):
                functions.append(item)
        return A.QirModule(self.filename, tuple(type_decls), tuple(functions), tuple(self.warnings))

    def toplevel_item(self):
        tok = self.peek()
        if tok.kind is Kind.LOCAL and self.at("=", 1) and self.at("type", 2):
            return self.type_decl()
        if tok.kind is Kind.KEYWORD and tok.lexeme == "define":
            return self.function(define=True)
        if tok.kind is Kind.KEYWORD and tok.lexeme == "declare":
            return self.function(define=False)
        if tok.kind is Kind.KEYWORD and tok.lexeme in ("attributes", "source_filename", "target"):
            self.warn(tok, f"skipped '{tok.lexeme}' directive")
            self.skip_balanced_line()
            return None
        if tok.kind is Kind.META:
            self.warn(tok, "skipped module metadata")
            self.skip_balanced_line()
            return None
        if tok.kind is Kind.GLOBAL and self.at("=", 1):
            self.warn(tok, f"skipped global {tok.lexeme}")
            self.skip_balanced_line()
            return None
        if tok.kind is Kind.KEYWORD and tok.lexeme.startswith("$"):
            self.warn(tok, "skipped comdat")
            self.skip_balanced_line()
            return None
        self.fail("expected a type declaration, 'define' or 'declare'", ["define", "declare"])

    def type_decl(self) -> A.TypeDecl:
        first = self.next()
        name = first.value
        self.expect("=")
        self.expect("type")
        if self.at("opaque"):
            self.next()
            body = None
        else:
            body = self.type()
        return A.TypeDecl(name, body, self.span_from(first))

    # -- types ------------------------------------------------------------

    def type(self) -> A.Type:
        tok = self.peek()
        if tok.kind is Kind.KEYWORD:
            word = tok.lexeme
            if word == "void":
                self.next()
                t: A.Type = A.Void()
            elif word == "double":
                self.next()
                t = A.Double()
            elif word[:1] == "i" and word[1:].isdigit():
                self.next()
                t = A.IntBits(int(word[1:]))
            elif word == "ptr":
                self.fail("opaque 'ptr' types are not supported")
            else:
                self.fail("expected a type", ["type"])
        elif tok.kind is Kind.LOCAL:
            self.next()
            t = A.BUILTIN_TYPES.get(tok.value) or A.Named(tok.value)
        elif self.at("["):
            self.next()
            size = self.expect_int()
            self.expect("x")
            elem = self.type()
            self.expect("]")
            t = A.ArrayOf(size, elem)
        elif self.at("{"):
            self.next()
            fields = []
            if not self.at("}"):
                fields.append(self.type())
                while self.at(","):
                    self.next()
                    fields.append(self.type())
            self.expect("}")
            t = A.StructOf(tuple(fields))
        else:
            self.fail("expected a type", ["type"])
        while True:
            if self.at("*"):
                self.next()
                t = A.PointerTo(t)
            elif self.at("("):
                self.next()
                params = []
                if not self.at(")"):
                    params.append(self.type())
                    while self.at(","):
                        self.next()
                        if self.at("..."):
                            self.fail("variadic function types are not supported")
                        params.append(self.type())
                self.expect(")")
                t = A.FunctionOf(t, tuple(params))
            else:
                return t

    # -- values -----------------------------------------------------------

    def typed_value(self) -> tuple[A.Type, A.Operand]:
        t = self.type()
        self.skip_modifiers("parameter attribute")
        return t, self.value(t)

    def value(self, t: A.Type) -> A.Operand:
        tok = self.peek()
        if tok.kind is Kind.LOCAL:
            self.next()
            return A.Local(tok.value)
        if tok.kind is Kind.GLOBAL:
            self.next()
            return A.Global(tok.value)
        if tok.kind is Kind.INT:
            self.next()
            v = int(tok.lexeme)
            if isinstance(t, A.IntBits):
                return A.IntConst(t.width, v)
            if isinstance(t, A.Pauli):
                return A.PauliConst(v)
            if isinstance(t, A.Double):
                return A.DoubleConst(float(v))
            raise ParseError(f"integer literal for type {t}", tok.span, [], tok)
        if tok.kind is Kind.FLOAT:
            self.next()
            if not isinstance(t, A.Double):
                raise ParseError(f"floating-point literal for type {t}", tok.span, [], tok)
            if tok.lexeme.lower().startswith("0x"):
                bits = int(tok.lexeme[2:], 16)
                if bits >= 1 << 64:
                    raise ParseError("hex literal too wide for double", tok.span, [], tok)
                return A.DoubleConst(struct.unpack(">d", struct.pack(">Q", bits))[0])
            return A.DoubleConst(float(tok.lexeme))
        if tok.kind is Kind.KEYWORD:
            word = tok.lexeme
            if word in ("true", "false"):
                self.next()
                if not isinstance(t, A.IntBits):
                    raise ParseError(f"boolean literal for type {t}", tok.span, [], tok)
                return A.IntConst(t.width, 1 if word == "true" else 0)
            if word == "null":
                self.next()
                if not isinstance(t, A.PointerTo):
                    raise ParseError(f"null for non-pointer type {t}", tok.span, [], tok)
                return A.NullPtr(t)
            if word == "void":
                self.next()
                return A.VoidConst()
            if word in ("bitcast", "inttoptr", "ptrtoint"):
                self.next()
                self.expect("(")
                ft, fv = self.typed_value()
                self.expect("to")
                tt = self.type()
                self.expect(")")
                return A.ConstCast(word, ft, fv, tt)
            if word == "getelementptr":
                self.next()
                inbounds = self.at("inbounds")
                if inbounds:
                    self.next()
                self.expect("(")
                base_t = self.type()
                args = []
                while self.at(","):
                    self.next()
                    args.append(self.typed_value())
                self.expect(")")
                if not args:
                    self.fail("getelementptr needs a base pointer")
                return A.ConstGep(base_t, tuple(args), inbounds)
            if word == "extractvalue":
                self.next()
                self.expect("(")
                at, av = self.typed_value()
                idx = []
                while self.at(","):
                    self.next()
                    idx.append(self.expect_int())
                self.expect(")")
                if not idx:
                    self.fail("extractvalue needs an index")
                return A.ConstExtract(at, av, tuple(idx))
        if self.at("{") or self.at("["):
            is_array = self.next().lexeme == "["
            close = "]" if is_array else "}"
            elems = []
            if not self.at(close):
                elems.append(self.typed_value())
                while self.at(","):
                    self.next()
                    elems.append(self.typed_value())
            self.expect(close)
            if isinstance(t, A.Range) and not is_array:
                if len(elems) != 3 or not all(
                        isinstance(v, A.IntConst) and et == A.IntBits(64) for et, v in elems):
                    raise ParseError("%Range constant needs three i64 integers", tok.span, [], tok)
                return A.RangeConst(*(v.value for _, v in elems))
            return A.AggregateConst(tuple(elems), is_array)
        self.fail("expected a value", ["value"])

    def skip_modifiers(self, what: str) -> None:
        while self.peek().kind is Kind.KEYWORD and self.peek().lexeme in SKIPPED_MODIFIERS:
            tok = self.next()
            self.warn(tok, f"skipped {what} '{tok.lexeme}'")
        while self.at("align") and self.peek(1).kind is Kind.INT and what == "parameter attribute":
            tok = self.next()
            self.next()
            self.warn(tok, "skipped parameter alignment")

    def label_ref(self) -> str:
        self.expect("label")
        return self.expect_kind(Kind.LOCAL, "block label").value

    # -- functions --------------------------------------------------------

    def function(self, define: bool) -> A.Function:
        first = self.next()
        linkage = None
        while self.peek().kind is Kind.KEYWORD and (
                self.peek().lexeme in LINKAGES or self.peek().lexeme in SKIPPED_MODIFIERS):
            tok = self.next()
            if tok.lexeme in LINKAGES and linkage is None:
                linkage = tok.lexeme
            else:
                self.warn(tok, f"skipped function modifier '{tok.lexeme}'")
        ret = self.type()
        name_tok = self.expect_kind(Kind.GLOBAL, "function name")
        self.expect("(")
        params: list[A.Param] = []
        unnamed = 0
        if not self.at(")"):
            while True:
                pt = self.type()
                self.skip_modifiers("parameter attribute")
                if self.peek().kind is Kind.LOCAL:
                    params.append(A.Param(pt, self.next().value))
                elif define:
                    params.append(A.Param(pt, str(unnamed)))
                    unnamed += 1
                else:
                    params.append(A.Param(pt, None))
                if not self.at(","):
                    break
                self.next()
                if self.at("..."):
                    self.fail("variadic functions are not supported")
        self.expect(")")
        header_line = self.prev.span.line
        if define:
            while not self.at("{") and self.peek().kind is not Kind.EOF:
                if self.peek().kind in (Kind.ATTR, Kind.KEYWORD, Kind.META) and self.peek().span.line == header_line:
                    tok = self.next()
                    self.warn(tok, f"skipped function attribute '{tok.lexeme}'")
                else:
                    self.fail("expected '{'", ["{"])
            self.expect("{")
            blocks = self.body()
        else:
            while self.peek().kind is not Kind.EOF and self.peek().span.line == header_line:
                tok = self.next()
                if tok.kind not in (Kind.ATTR, Kind.KEYWORD, Kind.META):
                    raise ParseError(f"unexpected {tok.lexeme!r} after declaration", tok.span, [], tok)
                self.warn(tok, f"skipped function attribute '{tok.lexeme}'")
            blocks = ()
        span = A.SourceSpan(self.filename, first.span.line, first.span.col_start,
                            name_tok.span.col_end)
        return A.Function(name_tok.value, ret, tuple(params), tuple(blocks),
                          not define, linkage, span)

    def body(self) -> list[A.Block]:
        blocks: list[A.Block] = []
        label: Optional[str] = None
        label_tok: Optional[Token] = None
        phis: list[A.Phi] = []
        instrs: list[A.Instruction] = []
        open_block = False

        def start(lbl: str, tok: Token):
            nonlocal label, label_tok, phis, instrs, open_block
            label, label_tok, phis, instrs, open_block = lbl, tok, [], [], True

        while not self.saturated:
            tok = self.peek()
            if tok.kind is Kind.EOF:
                self.fail("expected '}' to close function body", ["}"])
            if self.at("}"):
                if open_block:
                    self.record(ParseError(f"block '{label}' has no terminator", tok.span, ["ret", "br"], tok))
                self.next()
                break
            if tok.kind is Kind.KEYWORD and tok.lexeme in ("define", "declare") and self.first_on_line():
                self.fail("expected '}' to close function body", ["}"])
            if tok.kind is Kind.LABEL:
                if open_block:
                    self.record(ParseError(f"block '{label}' has no terminator", tok.span, ["ret", "br"], tok))
                self.next()
                start(tok.value, tok)
                continue
            if not open_block:
                if blocks:
                    self.record(ParseError("instruction after terminator needs a block label",
                                           tok.span, ["label"], tok))
                    self.skip_line(tok.span.line)
                    continue
                start("", tok)
            line = tok.span.line
            try:
                node = self.instruction()
                self.trailing(line)
            except ParseError as err:
                self.record(err)
                self.skip_line(line)
                continue
            if isinstance(node, A.Phi):
                if instrs:
                    self.record(ParseError("phi must precede other instructions", node.span, [], tok))
                phis.append(node)
            elif isinstance(node, (A.RetValue, A.RetVoid, A.CondBranch, A.Branch)):
                span = label_tok.span if label_tok is not None else node.span
                blocks.append(A.Block(label, tuple(instrs), node, tuple(phis),
                                      A.SourceSpan(self.filename, span.line, span.col_start, span.col_end)))
                open_block = False
            else:
                instrs.append(node)
        return blocks

    def trailing(self, line: int) -> None:
        while self.peek().kind is not Kind.EOF and self.peek().span.line == line:
            tok = self.peek()
            if tok.kind is Kind.ATTR:
                self.next()
                self.warn(tok, f"skipped attribute reference {tok.lexeme}")
            elif self.at(",") and self.peek(1).kind is Kind.META:
                self.next()
                while self.peek().span.line == line and (
                        self.peek().kind is Kind.META or self.at("{") or self.at("}")
                        or self.at(",") and self.peek(1).kind is Kind.META):
                    self.next()
                self.warn(tok, "skipped instruction metadata")
            else:
                raise ParseError(f"unexpected {tok.lexeme!r} after instruction", tok.span, [], tok)

    # -- instructions -----------------------------------------------------

    def instruction(self):
        first = self.peek()
        if first.kind is Kind.LOCAL and self.at("=", 1):
            self.next()
            self.next()
            result = first.value
            op = self.peek()
            if op.kind is not Kind.KEYWORD or op.lexeme not in VALUE_OPCODES:
                if op.kind is Kind.KEYWORD:
                    self.fail(f"unsupported instruction '{op.lexeme}'")
                self.fail("expected an instruction", sorted(VALUE_OPCODES))
            return self.value_instruction(first, result)
        if first.kind is Kind.KEYWORD:
            word = first.lexeme
            if word in ("call", "tail", "musttail", "notail"):
                return self.call(first, None)
            if word == "store":
                return self.store(first)
            if word == "ret":
                return self.ret(first)
            if word == "br":
                return self.br(first)
            self.fail(f"unsupported instruction '{word}'")
        self.fail("expected an instruction")

    def value_instruction(self, first: Token, result: str):
        word = self.peek().lexeme
        if word in ("call", "tail", "musttail", "notail"):
            return self.call(first, result)
        self.next()
        if word in ("bitcast", "inttoptr"):
            ft, fv = self.typed_value()
            self.expect("to")
            tt = self.type()
            cls = A.Bitcast if word == "bitcast" else A.IntToPtr
            return cls(result, ft, fv, tt, self.span_from(first))
        if word == "load":
            if self.at("volatile"):
                self.fail("volatile loads are not supported")
            lt = self.type()
            self.expect(",")
            st, sv = self.typed_value()
            align = self.opt_align()
            return A.Load(result, lt, st, sv, align, self.span_from(first))
        if word == "getelementptr":
            inbounds = self.at("inbounds")
            if inbounds:
                self.next()
            bt = self.type()
            self.expect(",")
            pt, pv = self.typed_value()
            idx = []
            while self.at(","):
                self.next()
                idx.append(self.typed_value())
            return A.GetElementPtr(result, bt, pt, pv, tuple(idx), inbounds, self.span_from(first))
        if word == "icmp":
            pred = self.expect_kind(Kind.KEYWORD, "comparison predicate")
            if pred.lexeme not in A.ICMP_PREDICATES:
                raise ParseError(f"unknown icmp predicate '{pred.lexeme}'", pred.span,
                                 list(A.ICMP_PREDICATES), pred)
            t = self.type()
            lhs = self.value(t)
            self.expect(",")
            rhs = self.value(t)
            return A.ICmp(result, pred.lexeme, t, lhs, rhs, self.span_from(first))
        if word == "alloca":
            t = self.type()
            count = None
            align = None
            if self.at(",") and not self.at("align", 1):
                self.next()
                count = self.typed_value()
            align = self.opt_align()
            return A.Alloca(result, t, count, align, self.span_from(first))
        if word == "phi":
            t = self.type()
            incoming = []
            while True:
                self.expect("[")
                v = self.value(t)
                self.expect(",")
                lbl = self.expect_kind(Kind.LOCAL, "block label").value
                self.expect("]")
                incoming.append((v, lbl))
                if not self.at(","):
                    break
                self.next()
            return A.Phi(result, t, tuple(incoming), self.span_from(first))
        raise AssertionError(word)

    def opt_align(self) -> Optional[int]:
        if self.at(",") and self.at("align", 1):
            self.next()
            self.next()
            return self.expect_int()
        return None

    def call(self, first: Token, result: Optional[str]) -> A.Call:
        tail = None
        if self.peek().lexeme in ("tail", "musttail", "notail"):
            tail = self.next().lexeme
        self.expect("call")
        self.skip_modifiers("call modifier")
        ret = self.type()
        if isinstance(ret, A.FunctionOf):
            ret = ret.ret
        callee = self.peek()
        if callee.kind is Kind.LOCAL:
            self.fail("indirect calls are not supported")
        self.expect_kind(Kind.GLOBAL, "callee")
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.typed_value())
            while self.at(","):
                self.next()
                args.append(self.typed_value())
        self.expect(")")
        return A.Call(result, ret, callee.value, tuple(args), tail, self.span_from(first))

    def store(self, first: Token) -> A.Store:
        self.next()
        if self.at("volatile"):
            self.fail("volatile stores are not supported")
        vt, vv = self.typed_value()
        self.expect(",")
        dt, dv = self.typed_value()
        align = self.opt_align()
        return A.Store(vt, vv, dt, dv, align, self.span_from(first))

    def ret(self, first: Token):
        self.next()
        if self.at("void"):
            self.next()
            return A.RetVoid(self.span_from(first))
        t, v = self.typed_value()
        return A.RetValue(t, v, self.span_from(first))

    def br(self, first: Token):
        self.next()
        if self.at("label"):
            return A.Branch(self.label_ref(), self.span_from(first))
        t = self.type()
        cond = self.value(t)
        self.expect(",")
        then_label = self.label_ref()
        self.expect(",")
        else_label = self.label_ref()
        return A.CondBranch(cond, then_label, else_label, self.span_from(first))


def parse_module(source: str, filename: str = "<input>",
                 max_errors: int = DEFAULT_MAX_ERRORS) -> A.QirModule:
    """Parse QIR text into a :class:`~qir_sentinel.ast.QirModule`.

    Raises :class:`ParseErrors` listing up to ``max_errors`` problems.
    """
    tokens, lex_errors = lex_recovering(source, filename)
    parser = _Parser(tokens, filename, max_errors)
    parser.errors.extend(lex_errors[:max_errors])
    try:
        module = parser.parse_module()
    except RecursionError:
        tok = parser.peek()
        parser.errors.append(ParseError("input nested too deeply", tok.span, [], tok))
        module = None
    if parser.errors:
        errors = sorted(parser.errors, key=lambda e: (e.span.line, e.span.col_start))
        raise ParseErrors(errors[:max_errors])
    for w in module.warnings:
        log.debug("%s", w)
    return module
