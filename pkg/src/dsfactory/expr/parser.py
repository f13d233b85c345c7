#!/usr/bin/env python3
"""
Expression Parser

Recursive-descent parser for the filter/mutate expression language, plus the
printer that turns a tree back into source text.

Precedence, lowest first: or, and, not, comparison (non-associative),
additive, multiplicative, unary minus, primary.
"""

import json
import math
import re

from dsfactory.errors import ExprSyntaxError
from dsfactory.expr.nodes import Binary, Call, Column, Literal, Param, Unary

KEYWORDS = ("and", "or", "not", "true", "false")
INT64_MAX = (1 << 63) - 1

TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<float>\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<param>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|!=|[-+*/<>(),\[\]])
""", re.VERBOSE)

ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "0": "\0", "\\": "\\", "'": "'", '"': '"'}

PRIMARY_START = ("number", "string", "identifier", "@parameter", "(", "[", "-", "true", "false")


class Token:
    __slots__ = ("kind", "text", "value", "pos")

    def __init__(self, kind, text, value, pos):
        self.kind = kind
        self.text = text
        self.value = value
        self.pos = pos

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.pos})"


class Parser:
    """Parses one expression source string."""

    def __init__(self, src):
        self.src = src
        self.tokens = self._tokenize(src)
        self.index = 0

    def _byte_offset(self, pos):
        return len(self.src[:pos].encode("utf-8"))

    def error(self, message, pos, expected=()):
        return ExprSyntaxError(message, self._byte_offset(pos), expected)

    def _read_string(self, src, pos):
        quote = src[pos]
        out = []
        i = pos + 1
        while i < len(src):
            ch = src[i]
            if ch == quote:
                return "".join(out), i + 1
            if ch == "\\":
                if i + 1 >= len(src):
                    break
                esc = src[i + 1]
                if esc in ESCAPES:
                    out.append(ESCAPES[esc])
                    i += 2
                    continue
                if esc == "u" and re.fullmatch(r"[0-9a-fA-F]{4}", src[i + 2:i + 6]):
                    out.append(chr(int(src[i + 2:i + 6], 16)))
                    i += 6
                    continue
                raise self.error(f"unknown escape '\\{esc}'", i, ("escape sequence",))
            out.append(ch)
            i += 1
        raise self.error("unterminated string", pos, (quote,))

    def _tokenize(self, src):
        tokens = []
        pos = 0
        while pos < len(src):
            if src[pos] in "'\"":
                value, end = self._read_string(src, pos)
                tokens.append(Token("string", src[pos:end], value, pos))
                pos = end
                continue
            match = TOKEN_RE.match(src, pos)
            if match is None:
                if src[pos] == "=":
                    raise self.error("unexpected '='", pos, ("==",))
                raise self.error(f"unexpected character {src[pos]!r}", pos, PRIMARY_START)
            kind = match.lastgroup
            text = match.group()
            if kind == "int":
                value = int(text)
                # one past INT64_MAX is only valid as the operand of a unary minus
                if value > INT64_MAX + 1:
                    raise self.error(f"integer literal {text} out of int64 range", pos)
                tokens.append(Token("int", text, value, pos))
            elif kind == "float":
                value = float(text)
                if not math.isfinite(value):
                    raise self.error(f"float literal {text} out of range", pos)
                tokens.append(Token("float", text, value, pos))
            elif kind == "ident":
                tokens.append(Token("keyword" if text in KEYWORDS else "ident", text, text, pos))
            elif kind == "param":
                tokens.append(Token("param", text, text[1:], pos))
            elif kind == "op":
                tokens.append(Token("op", text, text, pos))
            pos = match.end()
        tokens.append(Token("eof", "", None, len(src)))
        return tokens

    @property
    def current(self):
        return self.tokens[self.index]

    def _advance(self):
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _at(self, *texts):
        tok = self.current
        return tok.kind in ("op", "keyword") and tok.text in texts

    def _expect(self, text, expected=None):
        if not self._at(text):
            raise self.error(f"unexpected {self._describe(self.current)}", self.current.pos,
                             expected or (text,))
        return self._advance()

    @staticmethod
    def _describe(token):
        return "end of input" if token.kind == "eof" else f"'{token.text}'"

    def parse(self):
        expr = self._or()
        if self.current.kind != "eof":
            expected = ("and", "or", "end of input", "+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!=")
            raise self.error(f"unexpected {self._describe(self.current)}", self.current.pos, expected)
        return expr

    def _or(self):
        left = self._and()
        while self._at("or"):
            self._advance()
            left = Binary("or", left, self._and())
        return left

    def _and(self):
        left = self._not()
        while self._at("and"):
            self._advance()
            left = Binary("and", left, self._not())
        return left

    def _not(self):
        if self._at("not"):
            self._advance()
            return Unary("not", self._not())
        return self._comparison()

    def _comparison(self):
        left = self._additive()
        if self._at("<", "<=", ">", ">=", "==", "!="):
            op = self._advance().text
            left = Binary(op, left, self._additive())
            if self._at("<", "<=", ">", ">=", "==", "!="):
                raise self.error("comparison operators do not chain", self.current.pos,
                                 ("and", "or", ")", "end of input"))
        return left

    def _additive(self):
        left = self._multiplicative()
        while self._at("+", "-"):
            op = self._advance().text
            left = Binary(op, left, self._multiplicative())
        return left

    def _multiplicative(self):
        left = self._unary()
        while self._at("*", "/"):
            op = self._advance().text
            left = Binary(op, left, self._unary())
        return left

    def _unary(self):
        if self._at("-"):
            self._advance()
            tok = self.current
            if tok.kind == "int" and tok.value == INT64_MAX + 1:
                self._advance()
                return Literal(-tok.value, "int")
            return Unary("-", self._unary())
        return self._primary()

    def _primary(self):
        tok = self.current
        if tok.kind == "int":
            if tok.value > INT64_MAX:
                raise self.error(f"integer literal {tok.text} out of int64 range", tok.pos)
            self._advance()
            return Literal(tok.value, "int")
        if tok.kind == "float":
            self._advance()
            return Literal(tok.value, "float")
        if tok.kind == "string":
            self._advance()
            return Literal(tok.value, "text")
        if tok.kind == "param":
            self._advance()
            return Param(tok.value)
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self._advance()
            return Literal(tok.text == "true", "bool")
        if tok.kind == "ident":
            self._advance()
            if self._at("("):
                return Call(tok.text, self._call_args())
            return Column(tok.text)
        if self._at("("):
            self._advance()
            inner = self._or()
            self._expect(")", (")", "and", "or", "+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!="))
            return inner
        if self._at("["):
            return self._vector()
        raise self.error(f"unexpected {self._describe(tok)}", tok.pos, PRIMARY_START)

    def _call_args(self):
        self._expect("(")
        args = []
        if self._at(")"):
            self._advance()
            return tuple(args)
        while True:
            args.append(self._or())
            if self._at(","):
                self._advance()
                continue
            self._expect(")", (",", ")"))
            return tuple(args)

    def _vector(self):
        self._expect("[")
        items = []
        while True:
            negative = False
            if self._at("-"):
                self._advance()
                negative = True
            tok = self.current
            if tok.kind not in ("int", "float"):
                raise self.error(f"unexpected {self._describe(tok)} in vector literal", tok.pos,
                                 ("number",) if negative else ("number", "-"))
            self._advance()
            value = float(tok.value)
            items.append(-value if negative else value)
            if self._at(","):
                self._advance()
                continue
            self._expect("]", (",", "]"))
            return Literal(tuple(items), "vector")


def parse(src):
    """
    Parse expression source text.

    Args:
        src (str): Expression such as "size > 1000"

    Returns:
        Node: Untyped expression tree

    Raises:
        ExprSyntaxError: With the byte offset and the set of expected tokens
    """
    return Parser(src).parse()


def _quote(text):
    return json.dumps(text, ensure_ascii=False)


def to_source(node):
    """
    Print a tree as source text that parses back to an equal tree.

    Compound nodes are fully parenthesized.

    Args:
        node (Node): Expression tree

    Returns:
        str: Source text
    """
    if isinstance(node, Literal):
        if node.kind == "bool":
            return "true" if node.value else "false"
        if node.kind == "int":
            return str(node.value)
        if node.kind == "float":
            return repr(float(node.value))
        if node.kind == "text":
            return _quote(node.value)
        return "[" + ", ".join(repr(float(v)) for v in node.value) + "]"
    if isinstance(node, Column):
        return node.name
    if isinstance(node, Param):
        return f"@{node.name}"
    if isinstance(node, Unary):
        sep = " " if node.op == "not" else ""
        return f"({node.op}{sep}{to_source(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")
