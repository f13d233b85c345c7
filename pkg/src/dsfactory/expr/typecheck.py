"""
Type checker for expression trees.

Resolves column references against a schema, binds `@name` parameters to their
values, and annotates every node with its result type.
"""

import dataclasses
import math

import numpy as np

from dsfactory.errors import BadParam, DimMismatch, TypeMismatch, UnknownColumn, UnknownParam
from dsfactory.expr.nodes import COMPARISON_OPS, Binary, Call, Column, Literal, Param, Unary
from dsfactory.table.schema import BOOL, BYTES, FLOAT64, INT64, UTF8, fvec


def value_type(value, name="value"):
    """
    Infer the column type of a bound parameter value.

    Args:
        value: Python value (bool, int, float, str, bytes or a list of numbers)
        name (str): Parameter name for error messages

    Returns:
        ColumnType: Inferred type
    """
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        if not -(1 << 63) <= value < (1 << 63):
            raise BadParam(f"parameter @{name} is outside the int64 range")
        return INT64
    if isinstance(value, float):
        if not math.isfinite(value):
            raise BadParam(f"parameter @{name} is not finite")
        return FLOAT64
    if isinstance(value, str):
        return UTF8
    if isinstance(value, (bytes, bytearray)):
        return BYTES
    if isinstance(value, (list, tuple, np.ndarray)):
        items = list(np.asarray(value).reshape(-1).tolist()) if isinstance(value, np.ndarray) else list(value)
        if not items or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in items):
            raise BadParam(f"parameter @{name} must be a non-empty list of numbers")
        return fvec(len(items))
    raise BadParam(f"parameter @{name} has unsupported value {value!r}")


def normalize_param(value):
    """Vectors become float64 tuples so bound trees stay hashable."""
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(float(v) for v in np.asarray(value, dtype=np.float64).reshape(-1))
    return value


def _mismatch(op, left, right):
    return TypeMismatch(f"operator '{op}' cannot combine {left} and {right}")


def _numeric_result(a, b):
    return INT64 if a == INT64 and b == INT64 else FLOAT64


class TypeChecker:
    """Annotates trees against one schema and one parameter binding."""

    def __init__(self, schema, params=None):
        self.schema = schema
        self.params = dict(params or {})

    def check(self, node):
        method = getattr(self, f"_check_{type(node).__name__.lower()}")
        return method(node)

    def _check_literal(self, node):
        kinds = {"int": INT64, "float": FLOAT64, "bool": BOOL, "text": UTF8}
        col_type = kinds.get(node.kind) or fvec(len(node.value))
        return dataclasses.replace(node, type=col_type)

    def _check_column(self, node):
        col_type = self.schema.type_of(node.name)
        if col_type is None:
            raise UnknownColumn(f"unknown column '{node.name}'")
        return dataclasses.replace(node, type=col_type)

    def _check_param(self, node):
        if node.name not in self.params:
            raise UnknownParam(f"parameter @{node.name} is not bound")
        value = self.params[node.name]
        if value is None:
            raise BadParam(f"parameter @{node.name} is null")
        return dataclasses.replace(node, type=value_type(value, node.name), value=normalize_param(value))

    def _check_unary(self, node):
        operand = self.check(node.operand)
        if node.op == "not":
            if operand.type != BOOL:
                raise TypeMismatch(f"'not' requires bool, got {operand.type}")
            return dataclasses.replace(node, operand=operand, type=BOOL)
        if not operand.type.is_numeric:
            raise TypeMismatch(f"unary '-' requires a numeric operand, got {operand.type}")
        return dataclasses.replace(node, operand=operand, type=operand.type)

    def _check_binary(self, node):
        left = self.check(node.left)
        right = self.check(node.right)
        lt, rt = left.type, right.type
        op = node.op

        if op in ("and", "or"):
            if lt != BOOL or rt != BOOL:
                raise _mismatch(op, lt, rt)
            result = BOOL
        elif op in ("+", "-", "*", "/"):
            if not (lt.is_numeric and rt.is_numeric):
                raise _mismatch(op, lt, rt)
            result = FLOAT64 if op == "/" else _numeric_result(lt, rt)
        elif op in ("==", "!="):
            if lt.tag == "fvec" and rt.tag == "fvec":
                if lt.dim != rt.dim:
                    raise DimMismatch(f"cannot compare {lt} with {rt}")
            elif not (lt == rt or (lt.is_numeric and rt.is_numeric)):
                raise _mismatch(op, lt, rt)
            result = BOOL
        elif op in COMPARISON_OPS:
            numeric = lt.is_numeric and rt.is_numeric
            text = lt == UTF8 and rt == UTF8
            if not (numeric or text):
                raise _mismatch(op, lt, rt)
            result = BOOL
        else:
            raise TypeMismatch(f"unknown operator '{op}'")
        return dataclasses.replace(node, left=left, right=right, type=result)

    def _check_call(self, node):
        args = tuple(self.check(a) for a in node.args)
        types = [a.type for a in args]
        name = node.name

        if name == "cos_dist":
            if len(args) != 2:
                raise TypeMismatch(f"cos_dist takes 2 arguments, got {len(args)}")
            if types[0].tag != "fvec" or types[1].tag != "fvec":
                raise TypeMismatch(f"cos_dist requires fvec arguments, got {types[0]} and {types[1]}")
            if types[0].dim != types[1].dim:
                raise DimMismatch(f"cos_dist arguments differ in dimension: {types[0]} vs {types[1]}")
            result = FLOAT64
        elif name == "len":
            if len(args) != 1 or types[0] not in (UTF8, BYTES):
                raise TypeMismatch(f"len requires one utf8 or bytes argument, got {', '.join(map(str, types))}")
            result = INT64
        elif name == "abs":
            if len(args) != 1 or not types[0].is_numeric:
                raise TypeMismatch(f"abs requires one numeric argument, got {', '.join(map(str, types))}")
            result = types[0]
        elif name in ("min", "max"):
            if len(args) < 2 or not all(t.is_numeric for t in types):
                raise TypeMismatch(f"{name} requires two or more numeric arguments, got {', '.join(map(str, types))}")
            result = INT64 if all(t == INT64 for t in types) else FLOAT64
        else:
            raise TypeMismatch(f"unknown function '{name}'")
        return dataclasses.replace(node, args=args, type=result)


def typecheck(node, schema, params=None):
    """
    Type-check an expression tree.

    Args:
        node (Node): Parsed tree
        schema (Schema): Columns the tree may reference
        params (dict): Parameter name -> value

    Returns:
        Node: Tree with every node's `type` set and parameters bound
    """
    return TypeChecker(schema, params).check(node)
