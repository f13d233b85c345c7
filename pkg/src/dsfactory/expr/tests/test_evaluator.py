#!/usr/bin/env python3
"""
Unit tests for expression type checking and evaluation.
"""

import math
import unittest

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from dsfactory.errors import BadParam, DimMismatch, TypeMismatch, UnknownColumn, UnknownParam
from dsfactory.expr import cos_dist, evaluate, evaluate_table, parse, parse_param, to_source, typecheck
from dsfactory.expr.nodes import Binary, Call, Column, Literal, Unary
from dsfactory.table import ColumnVector, Field, SampleRef, Schema, Table
from dsfactory.table.schema import BOOL, FLOAT64, INT64, UTF8, fvec

SCHEMA = Schema.for_samples([
    Field(name="a", type=INT64),
    Field(name="b", type=INT64),
    Field(name="x", type=FLOAT64),
    Field(name="f", type=BOOL),
    Field(name="s", type=UTF8),
    Field(name="v", type=fvec(3)),
    Field(name="w", type=fvec(3)),
    Field(name="embed", type=fvec(64)),
    Field(name="size", type=INT64),
    Field(name="caption", type=UTF8),
])


def check(src, params=None):
    return typecheck(parse(src), SCHEMA, params or {})


class TestTypecheck(unittest.TestCase):
    """Test cases for typecheck."""

    def test_comparison_is_bool(self):
        """Test that comparisons type as bool."""
        self.assertEqual(check("size > 1000").type, BOOL)

    def test_text_vs_int(self):
        """Test that comparing text with an integer is a type error."""
        with self.assertRaises(TypeMismatch) as ctx:
            check("caption > 5")
        self.assertIn("utf8", str(ctx.exception))
        self.assertIn("int64", str(ctx.exception))

    def test_dim_mismatch(self):
        """Test that vectors of different dimensions are a type error."""
        with self.assertRaises(DimMismatch):
            check("cos_dist(embed, @t)", {"t": [0.5] * 32})

    def test_promotion(self):
        """Test that int and float arithmetic promotes to float64."""
        self.assertEqual(check("a + x").type, FLOAT64)
        self.assertEqual(check("a + b").type, INT64)
        self.assertEqual(check("a / b").type, FLOAT64)
        self.assertEqual(check("min(a, b)").type, INT64)
        self.assertEqual(check("max(a, x)").type, FLOAT64)
        self.assertEqual(check("len(caption)").type, INT64)
        self.assertEqual(check("cos_dist(v, w)").type, FLOAT64)

    def test_unknown_column(self):
        """Test that an unknown column raises UnknownColumn."""
        with self.assertRaises(UnknownColumn):
            check("height > 1")

    def test_unknown_param(self):
        """Test that an unbound parameter raises UnknownParam."""
        with self.assertRaises(UnknownParam):
            check("size > @min")

    def test_logic_requires_bool(self):
        """Test that logical operators require bool operands."""
        with self.assertRaises(TypeMismatch):
            check("a and f")
        with self.assertRaises(TypeMismatch):
            check("not a")

    def test_vector_equality(self):
        """Test that vectors cannot be compared for equality."""
        self.assertEqual(check("v == w").type, BOOL)
        with self.assertRaises(DimMismatch):
            check("v == embed")

    def test_unknown_function(self):
        """Test that an unknown function is rejected."""
        with self.assertRaises(TypeMismatch):
            check("sqrt(x)")

    def test_param_types(self):
        """Test that parameter values type like literals."""
        tree = check("size > @n and caption == @c", {"n": 3, "c": "cat"})
        self.assertEqual(tree.type, BOOL)
        with self.assertRaises(BadParam):
            check("size > @n", {"n": {"nested": 1}})


class TestEvaluate(unittest.TestCase):
    """Test cases for evaluate."""

    def test_null_propagation(self):
        """Test that null operands give null results."""
        self.assertIsNone(evaluate(check("size > 1000"), {"size": None}))
        self.assertIsNone(evaluate(check("a + 1"), {"a": None}))

    def test_three_valued_logic(self):
        """Test that and, or and not follow three-valued logic."""
        row = {"f": None}
        self.assertIs(evaluate(check("f and false"), row), False)
        self.assertIs(evaluate(check("f or true"), row), True)
        self.assertIsNone(evaluate(check("f and true"), row))
        self.assertIsNone(evaluate(check("not f"), row))

    def test_division(self):
        """Test that division is real-valued and null on a zero divisor."""
        self.assertIsNone(evaluate(check("a / b"), {"a": 1, "b": 0}))
        self.assertEqual(evaluate(check("a / b"), {"a": 7, "b": 2}), 3.5)

    def test_int64_wraps(self):
        """Test that int64 arithmetic wraps around."""
        self.assertEqual(evaluate(check("a + 1"), {"a": 2 ** 63 - 1}), -(2 ** 63))
        self.assertEqual(evaluate(check("a * 2"), {"a": 2 ** 62}), -(2 ** 63))

    def test_int64_minimum_literal(self):
        """Test that the smallest int64 literal evaluates without overflow."""
        self.assertEqual(evaluate(check("-9223372036854775808"), {}), -(2 ** 63))
        self.assertTrue(evaluate(check("a > -9223372036854775808"), {"a": 0}))

    def test_constant(self):
        """Test that constant expressions evaluate without a row."""
        self.assertEqual(evaluate(check("1 + 1"), {}), 2)

    def test_cos_dist_examples(self):
        """Test that cos_dist matches known distances and is null for zero vectors."""
        self.assertAlmostEqual(cos_dist([1, 0], [0, 1]), 1.0)
        self.assertAlmostEqual(cos_dist([1, 0], [-1, 0]), 2.0)
        self.assertAlmostEqual(cos_dist([0.3, 0.1, 2.0], [0.3, 0.1, 2.0]), 0.0, delta=1e-6)
        self.assertIsNone(cos_dist([0, 0], [1, 0]))

    def test_cos_dist_against_param(self):
        """Test that cos_dist works against a bound vector parameter."""
        tree = check("cos_dist(v, @t)", {"t": [1.0, 2.0, 3.0]})
        row = {"v": np.array([1.0, 2.0, 3.0], dtype=np.float32)}
        self.assertLess(abs(evaluate(tree, row)), 1e-6)

    def test_text_ordering(self):
        """Test that text compares by code point."""
        self.assertTrue(evaluate(check("s < 'b'"), {"s": "a"}))

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-100, 100, width=32), min_size=3, max_size=3),
        st.lists(st.floats(-100, 100, width=32), min_size=3, max_size=3),
    )
    def test_cos_dist_properties(self, a, b):
        """Test that cos_dist is symmetric and within [0, 2]."""
        ab = cos_dist(a, b)
        ba = cos_dist(b, a)
        if ab is None:
            self.assertIsNone(ba)
            return
        self.assertLessEqual(abs(ab - ba), 1e-9)
        self.assertGreaterEqual(ab, 0.0)
        self.assertLessEqual(ab, 2.0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
    def test_ranking_is_scale_invariant(self, seed, scale):
        """Test that scaling the query vector keeps the ranking."""
        rng = np.random.default_rng(seed)
        embeds = rng.integers(-4, 5, size=(30, 3)).astype(np.float32)
        target = rng.integers(-4, 5, size=3).astype(np.float64)
        if not target.any():
            target[0] = 1.0

        def ranking(t):
            dists = [cos_dist(e, t) for e in embeds]
            keyed = [(d is None, d if d is not None else 0.0, i) for i, d in enumerate(dists)]
            return [k[2] for k in sorted((n, round(d, 6), i) for n, d, i in keyed)]

        self.assertEqual(ranking(target), ranking(target * scale))


class TestParseParam(unittest.TestCase):
    """Test cases for command-line parameter bindings."""

    def test_json_and_text(self):
        """Test that parameters parse from JSON and fall back to text."""
        self.assertEqual(parse_param("n=3"), ("n", 3))
        self.assertEqual(parse_param("x=2.5"), ("x", 2.5))
        self.assertEqual(parse_param("c=cat"), ("c", "cat"))
        self.assertEqual(parse_param("t=[1,2]"), ("t", [1.0, 2.0]))

    def test_malformed(self):
        """Test that malformed parameter values raise BadParam."""
        with self.assertRaises(BadParam):
            parse_param("novalue")
        with self.assertRaises(BadParam):
            parse_param("t=@/definitely/missing.json")


# Naive oracle: an independent tree walk over the same semantics.

INT_MIN, INT_MAX = -(2 ** 63), 2 ** 63 - 1


def oracle(node, row):
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Column):
        return row[node.name]
    if isinstance(node, Unary):
        v = oracle(node.operand, row)
        if v is None:
            return None
        if node.op == "not":
            return not v
        if isinstance(v, int):
            return INT_MIN if v == INT_MIN else -v
        return -v
    if isinstance(node, Binary):
        l, r = oracle(node.left, row), oracle(node.right, row)
        if node.op == "and":
            return False if False in (l, r) else (None if None in (l, r) else True)
        if node.op == "or":
            return True if True in (l, r) else (None if None in (l, r) else False)
        if l is None or r is None:
            return None
        if node.op == "/":
            return None if r == 0 else float(l) / float(r)
        if isinstance(l, float) or isinstance(r, float):
            l, r = float(l), float(r)
        if node.op in ("+", "-", "*"):
            result = {"+": lambda: l + r, "-": lambda: l - r, "*": lambda: l * r}[node.op]()
            if isinstance(result, int):
                result = (result - INT_MIN) % (2 ** 64) + INT_MIN
            return result
        if isinstance(l, np.ndarray):
            same = bool(np.all(l.astype(np.float64) == r.astype(np.float64)))
            return same if node.op == "==" else not same
        return {"<": l < r, "<=": l <= r, ">": l > r, ">=": l >= r, "==": l == r, "!=": l != r}[node.op]
    if isinstance(node, Call):
        args = [oracle(a, row) for a in node.args]
        if None in args:
            return None
        if node.name == "cos_dist":
            a, b = (np.asarray(x, dtype=np.float64) for x in args)
            na, nb = math.sqrt(float(np.dot(a, a))), math.sqrt(float(np.dot(b, b)))
            if na * nb == 0:
                return None
            return min(2.0, max(0.0, 1.0 - float(np.dot(a, b)) / (na * nb)))
        if node.name == "len":
            return len(args[0])
        if node.name == "abs":
            v = args[0]
            return INT_MIN if v == INT_MIN else abs(v)
        if any(isinstance(a, float) for a in args):
            args = [float(a) for a in args]
        return min(args) if node.name == "min" else max(args)
    raise AssertionError(node)


def int_leaf():
    return st.one_of(st.sampled_from([Column("a"), Column("b")]),
                     st.integers(0, 2 ** 63 - 1).map(lambda v: Literal(v, "int")),
                     st.integers(0, 9).map(lambda v: Literal(v, "int")))


def float_leaf():
    return st.one_of(st.just(Column("x")),
                     st.floats(0, 1e6, allow_nan=False).map(lambda v: Literal(v, "float")),
                     st.just(Call("cos_dist", (Column("v"), Column("w")))))


int_expr = st.deferred(lambda: st.one_of(
    int_leaf(),
    st.tuples(st.sampled_from(["+", "-", "*"]), int_expr, int_expr).map(lambda t: Binary(*t)),
    int_expr.map(lambda e: Unary("-", e)),
    int_expr.map(lambda e: Call("abs", (e,))),
    st.tuples(st.sampled_from(["min", "max"]), int_expr, int_expr).map(lambda t: Call(t[0], (t[1], t[2]))),
    st.just(Call("len", (Column("s"),))),
))
num_expr = st.deferred(lambda: st.one_of(
    int_expr,
    float_leaf(),
    st.tuples(st.sampled_from(["+", "-", "*", "/"]), num_expr, num_expr).map(lambda t: Binary(*t)),
    st.tuples(st.sampled_from(["min", "max"]), num_expr, num_expr).map(lambda t: Call(t[0], (t[1], t[2]))),
))
bool_expr = st.deferred(lambda: st.one_of(
    st.just(Column("f")),
    st.booleans().map(lambda v: Literal(v, "bool")),
    st.tuples(st.sampled_from(["<", "<=", ">", ">=", "==", "!="]), num_expr, num_expr).map(lambda t: Binary(*t)),
    st.tuples(st.sampled_from(["<", "=="]), st.just(Column("s")),
              st.sampled_from(["", "a", "m", "zz"]).map(lambda v: Literal(v, "text"))).map(lambda t: Binary(*t)),
    st.just(Binary("==", Column("v"), Column("w"))),
    st.tuples(st.sampled_from(["and", "or"]), bool_expr, bool_expr).map(lambda t: Binary(*t)),
    bool_expr.map(lambda e: Unary("not", e)),
))


def random_table(seed, n):
    rng = np.random.default_rng(seed)

    def nullable(values):
        mask = rng.random(n) < 0.1
        return [None if m else v for m, v in zip(mask, values)]

    columns = {
        "a": ColumnVector.from_pylist(INT64, nullable([int(v) for v in rng.integers(-5, 6, n)])),
        "b": ColumnVector.from_pylist(INT64, nullable([int(v) for v in rng.integers(-(2 ** 62), 2 ** 62, n)])),
        "x": ColumnVector.from_pylist(FLOAT64, nullable([float(v) for v in rng.normal(0, 10, n)])),
        "f": ColumnVector.from_pylist(BOOL, nullable([bool(v) for v in rng.integers(0, 2, n)])),
        "s": ColumnVector.from_pylist(UTF8, nullable([str(v) for v in rng.choice(["", "a", "b", "m", "zz"], n)])),
        "v": ColumnVector.from_pylist(fvec(3), nullable([list(r) for r in rng.integers(-2, 3, (n, 3))])),
        "w": ColumnVector.from_pylist(fvec(3), nullable([list(r) for r in rng.integers(-2, 3, (n, 3))])),
        "embed": ColumnVector.from_pylist(fvec(64), [None] * n),
        "size": ColumnVector.from_pylist(INT64, [None] * n),
        "caption": ColumnVector.from_pylist(UTF8, [None] * n),
    }
    refs = [SampleRef("file:///t.tar", f"{i}.jpg", 512 * (i + 1), 1) for i in range(n)]
    return Table.from_refs(refs, SCHEMA.attribute_fields, columns)


def same_value(got, expected):
    if isinstance(expected, float) and isinstance(got, float):
        if math.isnan(expected) or math.isnan(got):
            return math.isnan(expected) and math.isnan(got)
        return got == expected or math.isclose(got, expected, rel_tol=1e-9)
    return got == expected and type(got) is type(expected)


class TestOracle(unittest.TestCase):
    """Evaluation agrees with a naive tree walk on random expressions and rows."""

    @settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.one_of(bool_expr, num_expr), st.integers(0, 2 ** 32 - 1))
    def test_matches_naive_oracle(self, tree, seed):
        """Test that evaluation agrees with a naive tree walk."""
        typed = typecheck(parse(to_source(tree)), SCHEMA, {})
        table = random_table(seed, 1000)
        got = evaluate_table(typed, table)
        for i, row in enumerate(table.rows()):
            expected = oracle(tree, row)
            self.assertTrue(same_value(got[i], expected), f"{to_source(tree)} row {i}: {got[i]!r} != {expected!r}")


if __name__ == "__main__":
    unittest.main()
