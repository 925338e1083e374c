"""One-variable real expressions for coefficient definitions.

Grammar (``^`` and ``**`` are both power, right associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | 't' | NAME | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Named parameters are bound when parsing, so a parsed :class:`Expression` is a
pure function of ``t``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

import numpy as np

__all__ = [
    "DomainError",
    "ExprSyntaxError",
    "UnknownIdentifier",
    "Expression",
    "Tabulated",
    "parse_expression",
    "evaluate",
    "constant_value",
]


class DomainError(ArithmeticError):
    """Evaluation left the domain of the expression (ln of t <= 0, x/0, overflow)."""

    def __init__(self, message: str, t=None):
        super().__init__(message)
        self.t = t


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, source: str, position: int):
        pointer = " " * position + "^"
        super().__init__(f"{message} at position {position}\n  {source}\n  {pointer}")
        self.source = source
        self.position = position


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, name: str, source: str, position: int):
        super().__init__(f"unknown identifier {name!r}", source, position)
        self.name = name


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Param:
    name: str
    value: float


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Const, Var, Param, Neg, BinOp, Call]

CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "ln": 1,
    "sqrt": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}
RESERVED = set(CONSTANTS) | set(FUNCTIONS) | {"t"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", src, bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, params: Mapping[str, float]):
        self.src = src
        self.params = params
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self.src, pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", self.src, pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        text = self.peek()[1]
        if text == "-":
            self.take()
            return Neg(self.unary())
        if text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text == "t":
                return Var()
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExprSyntaxError(f"function {text!r} needs parentheses", self.src, self.peek()[2])
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}", self.src, pos
                    )
                return Call(text, tuple(args))
            if text in CONSTANTS:
                return Param(text, CONSTANTS[text])
            if text in self.params:
                return Param(text, float(self.params[text]))
            raise UnknownIdentifier(text, self.src, pos)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", self.src, pos)


# ---------------------------------------------------------------------------
# scalar evaluation (compiled closures)
# ---------------------------------------------------------------------------


def _check(value: float, what: str, t: float) -> float:
    if not math.isfinite(value):
        raise DomainError(f"{what} is not finite at t={t!r}", t)
    return value


def _ln(x: float, t: float) -> float:
    if x <= 0.0:
        raise DomainError(f"ln of nonpositive value {x!r} at t={t!r}", t)
    return math.log(x)


def _sqrt(x: float, t: float) -> float:
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r} at t={t!r}", t)
    return math.sqrt(x)


def _exp(x: float, t: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise DomainError(f"exp overflow at t={t!r}", t) from None


def _div(a: float, b: float, t: float) -> float:
    if b == 0.0:
        raise DomainError(f"division by zero at t={t!r}", t)
    return _check(a / b, "quotient", t)


def _pow(a: float, b: float, t: float) -> float:
    try:
        r = a**b
    except ZeroDivisionError:
        raise DomainError(f"0 raised to negative power at t={t!r}", t) from None
    except OverflowError:
        raise DomainError(f"power overflow at t={t!r}", t) from None
    if isinstance(r, complex):
        raise DomainError(f"negative base {a!r} with fractional exponent at t={t!r}", t)
    return _check(r, "power", t)


_SCALAR_FUNCS: dict[str, Callable] = {
    "sin": lambda x, t: math.sin(x),
    "cos": lambda x, t: math.cos(x),
    "tan": lambda x, t: _check(math.tan(x), "tan", t),
    "exp": _exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "abs": lambda x, t: abs(x),
}


def _compile(node: Node) -> Callable[[float], float]:
    if isinstance(node, (Const, Param)):
        v = node.value
        return lambda t: v
    if isinstance(node, Var):
        return lambda t: t
    if isinstance(node, Neg):
        f = _compile(node.arg)
        return lambda t: -f(t)
    if isinstance(node, BinOp):
        f, g = _compile(node.left), _compile(node.right)
        if node.op == "+":
            return lambda t: _check(f(t) + g(t), "sum", t)
        if node.op == "-":
            return lambda t: _check(f(t) - g(t), "difference", t)
        if node.op == "*":
            return lambda t: _check(f(t) * g(t), "product", t)
        if node.op == "/":
            return lambda t: _div(f(t), g(t), t)
        return lambda t: _pow(f(t), g(t), t)
    if isinstance(node, Call):
        if node.func in ("min", "max"):
            f, g = _compile(node.args[0]), _compile(node.args[1])
            pick = min if node.func == "min" else max
            return lambda t: pick(f(t), g(t))
        f = _compile(node.args[0])
        fn = _SCALAR_FUNCS[node.func]
        return lambda t: fn(f(t), t)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# array evaluation
# ---------------------------------------------------------------------------


def _first_bad(mask: np.ndarray, t: np.ndarray):
    idx = int(np.flatnonzero(mask)[0])
    return float(np.broadcast_to(t, mask.shape)[idx])


def _eval_array(node: Node, t: np.ndarray) -> np.ndarray:
    if isinstance(node, (Const, Param)):
        return np.full_like(t, node.value)
    if isinstance(node, Var):
        return t
    if isinstance(node, Neg):
        return -_eval_array(node.arg, t)
    if isinstance(node, BinOp):
        a = _eval_array(node.left, t)
        b = _eval_array(node.right, t)
        with np.errstate(all="ignore"):
            if node.op == "+":
                r = a + b
            elif node.op == "-":
                r = a - b
            elif node.op == "*":
                r = a * b
            elif node.op == "/":
                zero = b == 0.0
                if zero.any():
                    raise DomainError("division by zero", _first_bad(zero, t))
                r = a / b
            else:
                bad = (a < 0) & (b != np.round(b))
                if bad.any():
                    raise DomainError("negative base with fractional exponent", _first_bad(bad, t))
                bad = (a == 0) & (b < 0)
                if bad.any():
                    raise DomainError("0 raised to negative power", _first_bad(bad, t))
                r = np.power(a, b)
        return r
    if isinstance(node, Call):
        if node.func in ("min", "max"):
            a = _eval_array(node.args[0], t)
            b = _eval_array(node.args[1], t)
            return np.minimum(a, b) if node.func == "min" else np.maximum(a, b)
        x = _eval_array(node.args[0], t)
        if node.func == "ln":
            bad = x <= 0
            if bad.any():
                raise DomainError("ln of nonpositive value", _first_bad(bad, t))
            return np.log(x)
        if node.func == "sqrt":
            bad = x < 0
            if bad.any():
                raise DomainError("sqrt of negative value", _first_bad(bad, t))
            return np.sqrt(x)
        with np.errstate(over="ignore"):
            return getattr(np, {"abs": "abs"}.get(node.func, node.func))(x)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _serialize(node: Node) -> str:
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_serialize(node.arg)})"
    if isinstance(node, BinOp):
        return f"({_serialize(node.left)}{node.op}{_serialize(node.right)})"
    return f"{node.func}({', '.join(_serialize(a) for a in node.args)})"


@dataclass(frozen=True)
class Expression:
    """A parsed coefficient ``f(t)``. Call it with a float or a numpy array."""

    ast: Node
    params: Mapping[str, float] = field(default_factory=dict)
    source: str = ""
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", _compile(self.ast))

    def evaluate(self, t: float) -> float:
        return self._fn(float(t))

    def evaluate_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.asarray(_eval_array(self.ast, t), dtype=float)
        out = np.broadcast_to(out, t.shape).copy()
        bad = ~np.isfinite(out)
        if bad.any():
            raise DomainError("non-finite value", _first_bad(bad, t))
        return out

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return self.evaluate_array(t)
        return self._fn(float(t))

    def serialize(self) -> str:
        return _serialize(self.ast)

    @property
    def is_constant(self) -> bool:
        return not _mentions_t(self.ast)

    def __str__(self) -> str:
        return self.source or self.serialize()


def _mentions_t(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _mentions_t(node.arg)
    if isinstance(node, BinOp):
        return _mentions_t(node.left) or _mentions_t(node.right)
    if isinstance(node, Call):
        return any(_mentions_t(a) for a in node.args)
    return False


class Tabulated:
    """Coefficient given by samples on an increasing grid, linearly interpolated.

    Evaluation outside ``[grid[0], grid[-1]]`` raises :class:`DomainError`.
    """

    is_constant = False

    def __init__(self, grid, values):
        self.grid = np.asarray(grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape or len(self.grid) < 2:
            raise ValueError("grid and values must be 1-D of equal length >= 2")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("tabulated values must be finite")
        self.source = f"table[{self.grid[0]!r}..{self.grid[-1]!r}, n={len(self.grid)}]"

    def _check_range(self, t):
        lo, hi = self.grid[0], self.grid[-1]
        bad = (t < lo) | (t > hi)
        if np.any(bad):
            where = float(np.asarray(t)[bad][0]) if np.ndim(t) else float(t)
            raise DomainError(f"t={where!r} outside tabulated range [{lo!r}, {hi!r}]", where)

    def evaluate(self, t: float) -> float:
        self._check_range(t)
        return float(np.interp(t, self.grid, self.values))

    def evaluate_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        return np.interp(t, self.grid, self.values)

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return self.evaluate_array(t)
        return self.evaluate(t)

    def serialize(self) -> str:
        return self.source

    def __str__(self) -> str:
        return self.source


def parse_expression(src: str, params: Mapping[str, float] | None = None) -> Expression:
    """Parse ``src`` into an :class:`Expression` with ``params`` bound."""
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", str(src), 0)
    params = dict(params or {})
    for name in params:
        if name in RESERVED:
            raise ValueError(f"parameter name {name!r} is reserved")
    ast = _Parser(src, params).parse()
    used = {}
    _collect_params(ast, params, used)
    return Expression(ast, used, src)


def _collect_params(node: Node, params, used):
    if isinstance(node, Param) and node.name in params:
        used[node.name] = node.value
    elif isinstance(node, Neg):
        _collect_params(node.arg, params, used)
    elif isinstance(node, BinOp):
        _collect_params(node.left, params, used)
        _collect_params(node.right, params, used)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_params(a, params, used)


def evaluate(expr, t: float) -> float:
    return expr.evaluate(t)


def constant_value(src, params: Mapping[str, float] | None = None) -> float:
    """Evaluate a constant expression such as ``"(2*m + 1/6)*pi"``."""
    if isinstance(src, (int, float)):
        return float(src)
    e = parse_expression(src, params)
    if not e.is_constant:
        raise ValueError(f"expected a constant expression, got {src!r} (mentions t)")
    return e.evaluate(0.0)
