"""
Expression Module

Parser, type checker and row evaluator for the filter/mutate expression language.
"""

from dsfactory.expr.nodes import Binary, Call, Column, Literal, Param, Unary, referenced_columns, referenced_params
from dsfactory.expr.parser import parse, to_source
from dsfactory.expr.typecheck import typecheck
from dsfactory.expr.evaluator import cos_dist, evaluate, evaluate_table
from dsfactory.expr.params import bind_params, parse_param, params_text

__all__ = [
    "Binary", "Call", "Column", "Literal", "Param", "Unary",
    "referenced_columns", "referenced_params",
    "parse", "to_source", "typecheck",
    "cos_dist", "evaluate", "evaluate_table",
    "bind_params", "parse_param", "params_text",
]
