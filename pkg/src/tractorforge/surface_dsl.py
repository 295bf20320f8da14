"""Expression language for defining functions and ambient vector fields.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' int)?
    base   := number | ident | 'conj(' expr ')' | '|' expr '|^2'
            | '(' expr ')' | 're(' expr ')' | 'im(' expr ')'

A leading '-' on a factor is accepted as shorthand for ``0 - factor``.

Variables are ``z1 .. z(n+1)``; extra real parameters may be declared.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .errors import DSLSyntaxError, UnknownIdentifier
from .geom_core import Jet, jet_space


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Conj:
    child: "Ast"


@dataclass(frozen=True)
class Re:
    child: "Ast"


@dataclass(frozen=True)
class Im:
    child: "Ast"


@dataclass(frozen=True)
class Abs2:
    child: "Ast"


@dataclass(frozen=True)
class Pow:
    child: "Ast"
    exponent: int


@dataclass(frozen=True)
class Add:
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Sub:
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Mul:
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Div:
    left: "Ast"
    right: "Ast"


Ast = Union[Const, Var, Conj, Re, Im, Abs2, Pow, Add, Sub, Mul, Div]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()|]))"
)
_FUNCS = {"conj": Conj, "re": Re, "im": Im}


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    data = src.encode("utf-8")
    text = data.decode("utf-8")
    # byte offsets: map character index -> byte offset
    byte_at = np.cumsum([0] + [len(ch.encode("utf-8")) for ch in text]).tolist()
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise DSLSyntaxError(byte_at[start], {"number", "identifier", "operator"}, text[start])
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), byte_at[m.start(kind)]))
        pos = m.end()
    toks.append(_Tok("eof", "", byte_at[len(text)]))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: set[str]):
        t = self.tok
        raise DSLSyntaxError(t.offset, expected, t.text or "<end>")

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            self.fail({repr(text)})

    def expr(self) -> Ast:
        node = self.term()
        while True:
            if self.accept("+"):
                node = Add(node, self.term())
            elif self.accept("-"):
                node = Sub(node, self.term())
            else:
                return node

    def term(self) -> Ast:
        node = self.factor()
        while True:
            if self.accept("*"):
                node = Mul(node, self.factor())
            elif self.accept("/"):
                node = Div(node, self.factor())
            else:
                return node

    def factor(self) -> Ast:
        if self.accept("-"):
            return Sub(Const(0.0), self.factor())
        node = self.base()
        if self.accept("^"):
            neg = self.accept("-")
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                self.fail({"integer"})
            k = int(t.text)
            if k == 0:
                self.fail({"nonzero integer"})
            self.i += 1
            node = Pow(node, -k if neg else k)
        return node

    def base(self) -> Ast:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(float(t.text))
        if t.kind == "id":
            self.i += 1
            if t.text in _FUNCS and self.tok.kind == "op" and self.tok.text == "(":
                self.i += 1
                inner = self.expr()
                self.expect(")")
                return _FUNCS[t.text](inner)
            return Var(t.text)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        if self.accept("|"):
            inner = self.expr()
            self.expect("|")
            self.expect("^")
            t = self.tok
            if t.kind != "num" or t.text != "2":
                self.fail({"2"})
            self.i += 1
            return Abs2(inner)
        self.fail({"number", "identifier", "'('", "'|'", "'conj('", "'re('", "'im('"})


def parse(source: str) -> Ast:
    """Parse ``source`` into an AST; raises DSLSyntaxError with a byte offset."""
    p = _Parser(source)
    node = p.expr()
    if p.tok.kind != "eof":
        p.fail({"'+'", "'-'", "'*'", "'/'", "'^'", "<end>"})
    return node


_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Pow: 3}


def to_source(node: Ast) -> str:
    """Print an AST so that parsing the text gives the same AST back."""

    def wrap(child: Ast, prec: int, strict: bool) -> str:
        cp = _PREC.get(type(child), 4)
        s = to_source(child)
        if cp < prec or (strict and cp == prec):
            return f"({s})"
        return s

    if isinstance(node, Const):
        v = node.value
        if v < 0:
            return f"(0 - {repr(-v)})"
        return repr(float(v))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Conj):
        return f"conj({to_source(node.child)})"
    if isinstance(node, Re):
        return f"re({to_source(node.child)})"
    if isinstance(node, Im):
        return f"im({to_source(node.child)})"
    if isinstance(node, Abs2):
        return f"|{to_source(node.child)}|^2"
    if isinstance(node, Pow):
        return f"{wrap(node.child, 4, False)}^{node.exponent}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
    prec = _PREC[type(node)]
    return f"{wrap(node.left, prec, False)} {op} {wrap(node.right, prec, True)}"


def evaluate(node: Ast, env: Mapping[str, Any]) -> Any:
    """Direct recursive evaluation (reference semantics for the compiler)."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.name not in env:
            raise UnknownIdentifier(node.name)
        return env[node.name]
    if isinstance(node, Conj):
        return _conj(evaluate(node.child, env))
    if isinstance(node, Re):
        return _re(evaluate(node.child, env))
    if isinstance(node, Im):
        return _im(evaluate(node.child, env))
    if isinstance(node, Abs2):
        v = evaluate(node.child, env)
        return _re(v * _conj(v))
    if isinstance(node, Pow):
        return _pow(evaluate(node.child, env), node.exponent)
    a, b = evaluate(node.left, env), evaluate(node.right, env)
    if isinstance(node, Add):
        return a + b
    if isinstance(node, Sub):
        return a - b
    if isinstance(node, Mul):
        return a * b
    return a / b


def _conj(x):
    if isinstance(x, (int, float)):
        return x
    if isinstance(x, complex):
        return x.conjugate()
    return x.conj()


def _re(x):
    return x.real


def _im(x):
    if isinstance(x, (int, float)):
        return 0.0
    return x.imag


def _pow(x, k: int):
    if k > 0:
        out = x
        for _ in range(k - 1):
            out = out * x
        return out
    return 1.0 / _pow(x, -k)


# stack-machine opcodes
_UNARY = {"conj": _conj, "re": _re, "im": _im}


@dataclass(frozen=True)
class CompiledExpression:
    """Flattened postfix program over ``arity`` complex variables z1..z(arity)."""

    arity: int
    program: tuple
    params: tuple[tuple[str, float], ...] = ()
    source: str = ""

    def __call__(self, zs: Sequence[Any]) -> Any:
        if len(zs) != self.arity:
            raise ValueError(f"expected {self.arity} complex arguments, got {len(zs)}")
        stack: list[Any] = []
        for op, arg in self.program:
            if op == "const":
                stack.append(arg)
            elif op == "var":
                stack.append(zs[arg])
            elif op in _UNARY:
                stack.append(_UNARY[op](stack.pop()))
            elif op == "abs2":
                v = stack.pop()
                stack.append(_re(v * _conj(v)))
            elif op == "pow":
                stack.append(_pow(stack.pop(), arg))
            else:
                b = stack.pop()
                a = stack.pop()
                if op == "+":
                    stack.append(a + b)
                elif op == "-":
                    stack.append(a - b)
                elif op == "*":
                    stack.append(a * b)
                else:
                    stack.append(a / b)
        return stack[0]

    def at_real(self, x: Sequence[float]) -> complex:
        """Evaluate at a real point ``(x1, y1, x2, y2, ...)``."""
        x = np.asarray(x, dtype=float)
        return complex(self([complex(x[2 * j], x[2 * j + 1]) for j in range(self.arity)]))


def variable_names(nvars: int) -> list[str]:
    return [f"z{j + 1}" for j in range(nvars)]


def compile_ast(ast: Ast, nvars: int, params: Mapping[str, float] | None = None,
                source: str = "") -> CompiledExpression:
    params = dict(params or {})
    names = {name: j for j, name in enumerate(variable_names(nvars))}
    prog: list[tuple[str, Any]] = []

    def emit(node: Ast):
        if isinstance(node, Const):
            prog.append(("const", node.value))
        elif isinstance(node, Var):
            if node.name in names:
                prog.append(("var", names[node.name]))
            elif node.name in params:
                prog.append(("const", float(params[node.name])))
            else:
                raise UnknownIdentifier(node.name)
        elif isinstance(node, (Conj, Re, Im)):
            emit(node.child)
            prog.append(({Conj: "conj", Re: "re", Im: "im"}[type(node)], None))
        elif isinstance(node, Abs2):
            emit(node.child)
            prog.append(("abs2", None))
        elif isinstance(node, Pow):
            emit(node.child)
            prog.append(("pow", node.exponent))
        else:
            emit(node.left)
            emit(node.right)
            prog.append(({Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)], None))

    emit(ast)
    return CompiledExpression(nvars, tuple(prog), tuple(sorted(params.items())), source)


def compile_expr(source: str, nvars: int, params: Mapping[str, float] | None = None) -> CompiledExpression:
    return compile_ast(parse(source), nvars, params, source)


def complex_coordinates(x: Jet) -> list[Jet]:
    """z_j = x_{2j} + i x_{2j+1} from a vector jet of real ambient coordinates."""
    m = x.shape[0] // 2
    return [x[2 * j] + 1j * x[2 * j + 1] for j in range(m)]


def jet_lift(expr: CompiledExpression, point: Sequence[float], order: int) -> Jet:
    """Jet of ``expr`` in the real ambient coordinates about ``point``."""
    if order < 1:
        raise ValueError("order must be at least 1")
    point = np.asarray(point, dtype=float)
    if point.shape != (2 * expr.arity,):
        raise ValueError(f"point must have {2 * expr.arity} real coordinates")
    sp = jet_space(2 * expr.arity, order)
    x = sp.variables(point)
    out = expr(complex_coordinates(x))
    if not isinstance(out, Jet):
        out = sp.constant(complex(out))
    return out
