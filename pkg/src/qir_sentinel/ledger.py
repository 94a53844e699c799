"""Qubit management model: live single qubits ``Q`` and live arrays ``QA``.

A :class:`Ledger` is an immutable value.  The nine management methods are
module-level functions that return a new ledger (or a query answer) and never
modify their input, so per-path snapshots are just references.

Iteration order is insertion order everywhere, which keeps ``findqarr`` and
every rendered dump deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .ast import NO_SPAN, SourceSpan


class LedgerFault(AssertionError):
    """A management method was called outside its precondition (analyzer bug)."""


# --------------------------------------------------------------------------
# Handles


@dataclass(frozen=True)
class DynamicSingle:
    site: SourceSpan = NO_SPAN


@dataclass(frozen=True)
class DynamicArrayMember:
    array: "ArrayHandle"
    index: int


@dataclass(frozen=True)
class Static:
    address: Optional[int]
    site: SourceSpan = NO_SPAN


@dataclass(frozen=True)
class EntryParameter:
    name: str


QubitOrigin = Union[DynamicSingle, DynamicArrayMember, Static, EntryParameter]


@dataclass(frozen=True)
class AllocatedArray:
    site: SourceSpan = NO_SPAN


@dataclass(frozen=True)
class CreatedArray:
    site: SourceSpan = NO_SPAN


ArrayOrigin = Union[AllocatedArray, CreatedArray, EntryParameter]


@dataclass(frozen=True)
class QubitHandle:
    """Identity of one qubit; equality and hashing use ``id`` only."""

    id: int
    origin: QubitOrigin = field(default=DynamicSingle(), compare=False)
    label: str = field(default="", compare=False)

    @property
    def is_static(self) -> bool:
        return isinstance(self.origin, Static)

    def __str__(self) -> str:
        return self.label or f"q#{self.id}"


@dataclass(frozen=True)
class ArrayHandle:
    id: int
    origin: ArrayOrigin = field(default=AllocatedArray(), compare=False)
    length: Optional[int] = field(default=None, compare=False)
    label: str = field(default="", compare=False)

    @property
    def owns_members(self) -> bool:
        """Whether member qubits live and die with this array.

        Arrays from ``qubit_allocate_array`` own their qubits.  Arrays from
        ``array_create_1d`` only reference qubits owned elsewhere.  Arrays
        received as entry parameters are treated as owners because their
        members are otherwise unaccounted for.
        """
        return not isinstance(self.origin, CreatedArray)

    def __str__(self) -> str:
        return self.label or f"a#{self.id}"


# --------------------------------------------------------------------------
# The ledger value


@dataclass(frozen=True)
class Ledger:
    qubits: tuple[QubitHandle, ...] = ()
    arrays: tuple[tuple[ArrayHandle, tuple[QubitHandle, ...]], ...] = ()

    def row(self, a: ArrayHandle) -> tuple[QubitHandle, ...]:
        for key, members in self.arrays:
            if key == a:
                return members
        raise LedgerFault(f"array {a} is not in QA")

    @property
    def array_handles(self) -> tuple[ArrayHandle, ...]:
        return tuple(k for k, _ in self.arrays)

    def dump(self) -> str:
        """Stable text form: one line per Q entry, one block per QA row."""
        lines = ["Q:"]
        lines += [f"  {_describe_qubit(q)}" for q in self.qubits]
        lines.append("QA:")
        for a, members in self.arrays:
            length = "?" if a.length is None else a.length
            lines.append(f"  {a} [{_origin_name(a.origin)}, length {length}]")
            lines += [f"    {_describe_qubit(q)}" for q in members]
        return "\n".join(lines) + "\n"


def _origin_name(origin) -> str:
    return {
        DynamicSingle: "allocated",
        DynamicArrayMember: "member",
        Static: "static",
        EntryParameter: "parameter",
        AllocatedArray: "allocated",
        CreatedArray: "created",
    }[type(origin)]


def _describe_qubit(q: QubitHandle) -> str:
    origin = q.origin
    site = getattr(origin, "site", None)
    where = f" at {site}" if site is not None and site.line else ""
    return f"{q} ({_origin_name(origin)}{where})"


EMPTY = Ledger()


# --------------------------------------------------------------------------
# Management methods


def appqlist(ledger: Ledger, q: QubitHandle) -> Ledger:
    """Append ``q`` to Q."""
    if q in ledger.qubits:
        raise LedgerFault(f"qubit {q} is already in Q")
    return Ledger(ledger.qubits + (q,), ledger.arrays)


def appqarrlist(ledger: Ledger, a: ArrayHandle,
                members: tuple[QubitHandle, ...] = ()) -> Ledger:
    """Append ``a`` to QA with an empty row (or the given seed members)."""
    if checkqarrlist(ledger, a):
        raise LedgerFault(f"array {a} is already in QA")
    if len(set(members)) != len(members):
        raise LedgerFault(f"duplicate seed members for {a}")
    return Ledger(ledger.qubits, ledger.arrays + ((a, tuple(members)),))


def checkq(ledger: Ledger, q: QubitHandle) -> bool:
    return q in ledger.qubits


def checkqarrlist(ledger: Ledger, a: ArrayHandle) -> bool:
    return any(key == a for key, _ in ledger.arrays)


def delq(ledger: Ledger, q: QubitHandle) -> Ledger:
    """Remove ``q`` from Q."""
    if q not in ledger.qubits:
        raise LedgerFault(f"qubit {q} is not in Q")
    return Ledger(tuple(x for x in ledger.qubits if x != q), ledger.arrays)


def delqarr(ledger: Ledger, a: ArrayHandle) -> Ledger:
    """Remove the row of ``a`` from QA.

    Members of the row that are also in Q are removed from Q as well: once
    the array is released its qubits are unusable through any name.
    """
    members = ledger.row(a)
    gone = set(members)
    return Ledger(
        tuple(q for q in ledger.qubits if q not in gone),
        tuple((k, row) for k, row in ledger.arrays if k != a),
    )


def appqarr(ledger: Ledger, a: ArrayHandle, q: QubitHandle) -> Ledger:
    """Append ``q`` to the row of ``a``; no-op if it is already there."""
    members = ledger.row(a)
    if q in members:
        return ledger
    return Ledger(
        ledger.qubits,
        tuple((k, row + (q,)) if k == a else (k, row) for k, row in ledger.arrays),
    )


def checkqarr(ledger: Ledger, a: ArrayHandle, q: QubitHandle) -> bool:
    for key, members in ledger.arrays:
        if key == a:
            return q in members
    return False


def findqarr(ledger: Ledger, q: QubitHandle) -> Optional[ArrayHandle]:
    """First row (insertion order) containing ``q``, else ``None``."""
    for key, members in ledger.arrays:
        if q in members:
            return key
    return None


# --------------------------------------------------------------------------
# Derived queries used by the rule engine


def arrays_containing(ledger: Ledger, q: QubitHandle) -> list[ArrayHandle]:
    return [key for key, members in ledger.arrays if q in members]


def owning_array(ledger: Ledger, q: QubitHandle) -> Optional[ArrayHandle]:
    """First live row that owns ``q``; reference-only rows are skipped."""
    for key, members in ledger.arrays:
        if key.owns_members and q in members:
            return key
    return None


def is_live(ledger: Ledger, q: QubitHandle) -> bool:
    """``checkq(Q, q) or findqarr(QA, q)``, counting only owning rows."""
    return checkq(ledger, q) or owning_array(ledger, q) is not None
