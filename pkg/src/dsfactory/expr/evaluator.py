"""
Row evaluator for typed expression trees.

Evaluation never raises for data reasons: a null operand yields null (except for
three-valued `and`/`or`), division by zero yields null, and cos_dist of a zero
vector yields null.
"""

import math

import numpy as np

from dsfactory.expr.nodes import Binary, Call, Column, Literal, Param, Unary, referenced_columns
from dsfactory.table.schema import INT64

_U64 = 1 << 64
_I64 = 1 << 63


def wrap_int64(value):
    """Two's-complement wraparound into the int64 range."""
    return ((value + _I64) % _U64) - _I64


def cos_dist(a, b):
    """
    Cosine distance 1 - a.b / (|a| |b|), computed in float64.

    Returns None when either vector has zero norm. Results are clamped to [0, 2].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if denom == 0.0 or not math.isfinite(denom):
        return None
    result = 1.0 - float(np.dot(a, b)) / denom
    if math.isnan(result):
        return None
    return min(2.0, max(0.0, result))


def _arith(op, left, right, result_type):
    if op == "/":
        right = float(right)
        if right == 0.0:
            return None
        return float(left) / right
    if result_type == INT64:
        if op == "+":
            return wrap_int64(left + right)
        if op == "-":
            return wrap_int64(left - right)
        return wrap_int64(left * right)
    left, right = float(left), float(right)
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    return left * right


def _compare(op, left, right, left_type, right_type):
    if left_type.tag == "fvec":
        equal = bool(np.array_equal(np.asarray(left, dtype=np.float64), np.asarray(right, dtype=np.float64)))
        return equal if op == "==" else not equal
    if left_type.is_numeric and right_type.is_numeric and left_type != right_type:
        left, right = float(left), float(right)
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def evaluate(node, row):
    """
    Evaluate a typed tree against one row.

    Args:
        node (Node): Tree returned by typecheck
        row (dict): Column name -> value (None for null)

    Returns:
        Value of the node's type, or None for null
    """
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Column):
        return row.get(node.name)
    if isinstance(node, Param):
        return node.value

    if isinstance(node, Unary):
        value = evaluate(node.operand, row)
        if value is None:
            return None
        if node.op == "not":
            return not value
        if node.type == INT64:
            return wrap_int64(-value)
        return -float(value)

    if isinstance(node, Binary):
        if node.op in ("and", "or"):
            left = evaluate(node.left, row)
            right = evaluate(node.right, row)
            if node.op == "and":
                if left is False or right is False:
                    return False
                if left is None or right is None:
                    return None
                return True
            if left is True or right is True:
                return True
            if left is None or right is None:
                return None
            return False
        left = evaluate(node.left, row)
        if left is None:
            return None
        right = evaluate(node.right, row)
        if right is None:
            return None
        if node.op in ("+", "-", "*", "/"):
            return _arith(node.op, left, right, node.type)
        return _compare(node.op, left, right, node.left.type, node.right.type)

    if isinstance(node, Call):
        args = [evaluate(a, row) for a in node.args]
        if any(a is None for a in args):
            return None
        if node.name == "cos_dist":
            return cos_dist(args[0], args[1])
        if node.name == "len":
            return len(args[0])
        if node.name == "abs":
            return wrap_int64(abs(args[0])) if node.type == INT64 else abs(float(args[0]))
        if node.type != INT64:
            args = [float(a) for a in args]
        return min(args) if node.name == "min" else max(args)

    raise TypeError(f"not an expression node: {node!r}")


def evaluate_table(node, table):
    """
    Evaluate a typed tree over every row of a table.

    Args:
        node (Node): Tree returned by typecheck
        table (Table): Rows to evaluate

    Returns:
        list: One value per row, in row order
    """
    names = referenced_columns(node)
    return [evaluate(node, row) for row in table.rows(names)]
