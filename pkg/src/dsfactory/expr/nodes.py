"""
Expression tree nodes.

Nodes are immutable. `type` is filled in by the type checker and is ignored by
equality, so a parsed tree and its typed counterpart compare equal.
"""

from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

from dsfactory.table.schema import ColumnType

ARITHMETIC_OPS = ("+", "-", "*", "/")
COMPARISON_OPS = ("<", "<=", ">", ">=", "==", "!=")
LOGICAL_OPS = ("and", "or")
FUNCTIONS = ("cos_dist", "len", "abs", "min", "max")


@dataclass(frozen=True)
class Literal:
    value: Any
    kind: str  # int, float, bool, text or vector
    type: Optional[ColumnType] = field(default=None, compare=False)


@dataclass(frozen=True)
class Column:
    name: str
    type: Optional[ColumnType] = field(default=None, compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    type: Optional[ColumnType] = field(default=None, compare=False)
    value: Any = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: Any
    type: Optional[ColumnType] = field(default=None, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: Any
    right: Any
    type: Optional[ColumnType] = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple[Any, ...]
    type: Optional[ColumnType] = field(default=None, compare=False)


def children(node):
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Call):
        return tuple(node.args)
    return ()


def walk(node):
    """Yield every node of a tree, parents first."""
    yield node
    for child in children(node):
        yield from walk(child)


def referenced_columns(node):
    """Column names a tree reads, in first-seen order."""
    names = []
    for n in walk(node):
        if isinstance(n, Column) and n.name not in names:
            names.append(n.name)
    return names


def referenced_params(node):
    names = []
    for n in walk(node):
        if isinstance(n, Param) and n.name not in names:
            names.append(n.name)
    return names
