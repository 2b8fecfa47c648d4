"""Small expression language for generator functions U(x).

Expressions are immutable trees (DAGs, since subtrees are shared freely) over
the variable ``x``, named parameters, real constants, ``+ - * /``, integer
powers and a handful of intrinsics.  Differentiation is exact and symbolic;
evaluation works on numpy arrays or on mpmath scalars.

Grammar (EBNF)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = ("-" | "+") unary | power ;
    power    = atom [ "^" exponent ] ;
    exponent = [ "-" ] INTEGER | "(" [ "-" ] INTEGER ")" ;
    atom     = NUMBER | "x" | PARAM | FUNC "(" expr ")" | "(" expr ")" ;
    FUNC     = "exp" | "log" | "sqrt" | "sin" | "cos" | "sinh" | "cosh" | "tanh" ;

Power binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.
"""

from __future__ import annotations

import re
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Param",
    "Neg",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Pow",
    "Func",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "INTRINSICS",
    "parse",
    "differentiate",
    "evaluate",
    "to_text",
    "const",
    "X",
    "MAX_DERIVATIVE_ORDER",
]

MAX_DERIVATIVE_ORDER = 6
INTRINSICS = ("exp", "log", "sqrt", "sin", "cos", "sinh", "cosh", "tanh")
# sqrt0 is sqrt with a tolerance for tiny negative round-off; it is not part of
# the parser's vocabulary and only appears in expressions built in code.
SQRT_CLAMP = 1e-10


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ExprDomainError(ExprError, ArithmeticError):
    pass


class Expr:
    """Base node.  Nodes compare by identity; use :func:`evaluate` to compare values."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError("only integer powers are supported")
        return power(self, int(n))

    def __call__(self, x, bindings: Mapping[str, float] | None = None):
        return evaluate(self, x, bindings)

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return f"Expr({to_text(self)!r})"


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Var(Expr):
    pass


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Param(Expr):
    name: str


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, eq=False, slots=True, repr=False)
class Func(Expr):
    name: str
    arg: Expr


X = Var()
ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(float(value))


def _wrap(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool):
        return Const(float(v))
    raise TypeError(f"cannot combine Expr with {type(v).__name__}")


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Const) and e.value == value


# -- smart constructors: constant folding and the 0/1 identities only ---------

def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value == 0.0:
        raise ExprDomainError("division by constant zero")
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        if a.value == 0.0 and n < 0:
            raise ExprDomainError("zero raised to a negative power")
        return Const(a.value**n)
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        # fold through the same evaluator so domain errors surface here
        return Const(float(_FLOAT_FUNCS[name](np.float64(a.value))))
    return Func(name, a)


def exp(a: Expr) -> Expr:
    return func("exp", _wrap(a))


def log(a: Expr) -> Expr:
    return func("log", _wrap(a))


def sqrt(a: Expr) -> Expr:
    return func("sqrt", _wrap(a))


def sqrt0(a: Expr) -> Expr:
    """Square root tolerating radicands down to ``-SQRT_CLAMP`` (treated as 0)."""
    return func("sqrt0", _wrap(a))


def sinh(a: Expr) -> Expr:
    return func("sinh", _wrap(a))


def cosh(a: Expr) -> Expr:
    return func("cosh", _wrap(a))


def tanh(a: Expr) -> Expr:
    return func("tanh", _wrap(a))


def sin(a: Expr) -> Expr:
    return func("sin", _wrap(a))


def cos(a: Expr) -> Expr:
    return func("cos", _wrap(a))


# -- parsing --------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[pos + stripped]!r}", pos + stripped, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, params: frozenset[str]):
        self.text = text
        self.params = params
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def error(self, message: str):
        raise ExprSyntaxError(message, self.peek()[2], self.text)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            self.error("empty expression")
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            inner = self.unary()
            return neg(inner) if val == "-" else inner
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            return power(base, self.exponent())
        return base

    def exponent(self) -> int:
        kind, val, pos = self.peek()
        if kind == "op" and val == "(":
            self.take()
            n = self._signed_int()
            kind, val, pos = self.peek()
            if val != ")" or kind != "op":
                raise ExprSyntaxError("exponent must be an integer literal", pos, self.text)
            self.take()
            return n
        return self._signed_int()

    def _signed_int(self) -> int:
        sign = 1
        kind, val, pos = self.peek()
        if kind == "op" and val == "-":
            self.take()
            sign = -1
            kind, val, pos = self.peek()
        if kind != "num" or not val.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos, self.text)
        self.take()
        return sign * int(val)

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in INTRINSICS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(val, arg)
            if val == "x":
                return X
            if val in self.params:
                return Param(val)
            if val in INTRINSICS:
                raise ExprSyntaxError(f"function {val!r} needs an argument", pos, self.text)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", pos, self.text)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos, self.text)


def parse(text: str, params: Iterable[str] = ()) -> Expr:
    """Parse ``text`` into an expression over ``x`` and the declared ``params``."""
    params = frozenset(params)
    bad = [p for p in params if p == "x" or p in INTRINSICS]
    if bad:
        raise ValueError(f"reserved parameter name(s): {sorted(bad)}")
    return _Parser(text, params).parse()


# -- printing -------------------------------------------------------------------

_BINARY_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}


def to_text(e: Expr) -> str:
    """Fully parenthesised text that :func:`parse` reads back to the same function."""
    memo: dict[int, str] = {}

    def walk(n: Expr) -> str:
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Const):
            s = repr(n.value)
            if n.value < 0 or s.startswith("-"):
                s = f"(-{repr(-n.value)})"
            elif "inf" in s or "nan" in s:
                raise ExprError(f"cannot print non-finite constant {s}")
        elif isinstance(n, Var):
            s = "x"
        elif isinstance(n, Param):
            s = n.name
        elif isinstance(n, Neg):
            s = f"(-{walk(n.arg)})"
        elif isinstance(n, Pow):
            s = f"({walk(n.base)})^({n.exponent})"
        elif isinstance(n, Func):
            name = "sqrt" if n.name == "sqrt0" else n.name
            s = f"{name}({walk(n.arg)})"
        else:
            s = f"({walk(n.left)}{_BINARY_SYMBOL[type(n)]}{walk(n.right)})"
        memo[key] = s
        return s

    return walk(e)


# -- differentiation --------------------------------------------------------------

def _d(e: Expr, memo: dict[int, Expr]) -> Expr:
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(e, (Const, Param)):
        out = ZERO
    elif isinstance(e, Var):
        out = ONE
    elif isinstance(e, Neg):
        out = neg(_d(e.arg, memo))
    elif isinstance(e, Add):
        out = add(_d(e.left, memo), _d(e.right, memo))
    elif isinstance(e, Sub):
        out = sub(_d(e.left, memo), _d(e.right, memo))
    elif isinstance(e, Mul):
        out = add(mul(_d(e.left, memo), e.right), mul(e.left, _d(e.right, memo)))
    elif isinstance(e, Div):
        du, dv = _d(e.left, memo), _d(e.right, memo)
        out = sub(div(du, e.right), div(mul(e, dv), e.right))
    elif isinstance(e, Pow):
        n = e.exponent
        out = mul(mul(Const(float(n)), power(e.base, n - 1)), _d(e.base, memo))
    elif isinstance(e, Func):
        du = _d(e.arg, memo)
        u = e.arg
        name = e.name
        if name == "exp":
            inner = e
        elif name == "log":
            out = div(du, u)
            memo[key] = out
            return out
        elif name in ("sqrt", "sqrt0"):
            out = div(du, mul(Const(2.0), e))
            memo[key] = out
            return out
        elif name == "sin":
            inner = func("cos", u)
        elif name == "cos":
            inner = neg(func("sin", u))
        elif name == "sinh":
            inner = func("cosh", u)
        elif name == "cosh":
            inner = func("sinh", u)
        elif name == "tanh":
            # cosh^-2 rather than 1 - tanh^2, which is exactly 0 once tanh rounds to 1
            inner = power(func("cosh", u), -2)
        else:  # pragma: no cover - closed set of node kinds
            raise ExprError(f"cannot differentiate {name}")
        out = mul(inner, du)
    else:  # pragma: no cover
        raise ExprError(f"unsupported node {type(e).__name__}")
    memo[key] = out
    return out


def differentiate(e: Expr, order: int = 1) -> Expr:
    """Exact d^order/dx^order by repeated first-order differentiation (order 1..6)."""
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order must be in [1, {MAX_DERIVATIVE_ORDER}], got {order}")
    for _ in range(order):
        e = _d(e, {})
    return e


def derivatives(e: Expr, order: int) -> list[Expr]:
    """[e, e', ..., e^(order)] with shared subtrees across orders; order may be 0..6."""
    if not 0 <= order <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order must be in [0, {MAX_DERIVATIVE_ORDER}]")
    out = [e]
    for _ in range(order):
        out.append(_d(out[-1], {}))
    return out


def bind(e: Expr, bindings: Mapping[str, float]) -> Expr:
    """Substitute parameter values and fold constants."""
    memo: dict[int, Expr] = {}

    def walk(n: Expr) -> Expr:
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Param):
            out = Const(float(bindings[n.name])) if n.name in bindings else n
        elif isinstance(n, (Const, Var)):
            out = n
        elif isinstance(n, Neg):
            out = neg(walk(n.arg))
        elif isinstance(n, Add):
            out = add(walk(n.left), walk(n.right))
        elif isinstance(n, Sub):
            out = sub(walk(n.left), walk(n.right))
        elif isinstance(n, Mul):
            out = mul(walk(n.left), walk(n.right))
        elif isinstance(n, Div):
            out = div(walk(n.left), walk(n.right))
        elif isinstance(n, Pow):
            out = power(walk(n.base), n.exponent)
        elif isinstance(n, Func):
            out = func(n.name, walk(n.arg))
        else:  # pragma: no cover
            raise ExprError(f"unsupported node {type(n).__name__}")
        memo[key] = out
        return out

    return walk(e)


def parameters(e: Expr) -> set[str]:
    return {n.name for n in _nodes(e) if isinstance(n, Param)}


def node_count(e: Expr) -> int:
    """Number of distinct nodes in the DAG."""
    return len(_nodes(e))


def _nodes(e: Expr) -> list[Expr]:
    seen: dict[int, Expr] = {}
    stack = [e]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen[id(n)] = n
        if isinstance(n, (Neg, Func)):
            stack.append(n.arg)
        elif isinstance(n, Pow):
            stack.append(n.base)
        elif isinstance(n, (Add, Sub, Mul, Div)):
            stack.extend((n.left, n.right))
    return list(seen.values())


# -- evaluation -------------------------------------------------------------------

def _sqrt0_float(u):
    if np.any(u < -SQRT_CLAMP):
        raise ExprDomainError("square root of a negative value")
    return np.sqrt(np.maximum(u, 0.0))


def _checked(name: str, fn: Callable, bad: Callable, message: str):
    def wrapped(u):
        if np.any(bad(u)):
            raise ExprDomainError(message)
        return fn(u)

    wrapped.__name__ = name
    return wrapped


_FLOAT_FUNCS: dict[str, Callable] = {
    "exp": np.exp,
    "log": _checked("log", np.log, lambda u: u <= 0, "log of a non-positive value"),
    "sqrt": _checked("sqrt", np.sqrt, lambda u: u < 0, "square root of a negative value"),
    "sqrt0": _sqrt0_float,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
}


def _nan_where(fn: Callable, bad: Callable):
    def wrapped(u):
        return np.where(bad(u), np.nan, fn(np.where(bad(u), 1.0, u)))

    return wrapped


_LENIENT_FUNCS: dict[str, Callable] = dict(
    _FLOAT_FUNCS,
    log=_nan_where(np.log, lambda u: u <= 0),
    sqrt=_nan_where(np.sqrt, lambda u: u < 0),
    sqrt0=_nan_where(lambda u: np.sqrt(np.maximum(u, 0.0)), lambda u: u < -SQRT_CLAMP),
)


def _mp_funcs():
    import mpmath

    def mlog(u):
        if u <= 0:
            raise ExprDomainError("log of a non-positive value")
        return mpmath.log(u)

    def msqrt(u):
        if u < 0:
            raise ExprDomainError("square root of a negative value")
        return mpmath.sqrt(u)

    def msqrt0(u):
        if u < -SQRT_CLAMP:
            raise ExprDomainError("square root of a negative value")
        return mpmath.sqrt(max(u, 0))

    return {
        "exp": mpmath.exp,
        "log": mlog,
        "sqrt": msqrt,
        "sqrt0": msqrt0,
        "sin": mpmath.sin,
        "cos": mpmath.cos,
        "sinh": mpmath.sinh,
        "cosh": mpmath.cosh,
        "tanh": mpmath.tanh,
    }


def evaluate(e: Expr, x, bindings: Mapping[str, float] | None = None, strict: bool = True):
    """Evaluate at ``x`` (scalar or array).

    With ``strict`` a domain error (log or sqrt of a bad value, division by
    zero) raises ExprDomainError; otherwise the affected points come back NaN.
    """
    bindings = bindings or {}
    xa = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        if strict:
            out = _run(_plan(e), xa, bindings, _FLOAT_FUNCS, _float_div, _float_pow, float)
        else:
            out = _run(_plan(e), xa, bindings, _LENIENT_FUNCS, _lenient_div, _lenient_pow, float)
    out = np.asarray(out, dtype=float)
    if out.shape != xa.shape:
        out = np.broadcast_to(out, xa.shape).copy()
    if strict and np.isnan(out).any():
        raise ExprDomainError("evaluation produced NaN")
    if not strict:
        out = np.where(np.isfinite(out), out, np.nan)
    return float(out) if out.ndim == 0 else out


def evaluate_mp(e: Expr, x, bindings: Mapping[str, float] | None = None):
    """Scalar evaluation in mpmath arithmetic at the current ``mpmath.mp.dps``."""
    import mpmath

    bindings = bindings or {}

    def mdiv(a, b):
        if b == 0:
            raise ExprDomainError("division by zero")
        return a / b

    def mpow(a, n):
        if a == 0 and n < 0:
            raise ExprDomainError("division by zero")
        return a**n

    return _run(_plan(e), mpmath.mpf(x), bindings, _mp_funcs(), mdiv, mpow, mpmath.mpf)


def _float_div(a, b):
    if np.any(np.asarray(b) == 0):
        raise ExprDomainError("division by zero")
    return a / b


def _float_pow(a, n):
    if n < 0 and np.any(np.asarray(a) == 0):
        raise ExprDomainError("division by zero")
    return a**n if n >= 0 else 1.0 / a ** (-n)


def _lenient_div(a, b):
    return a / b


def _lenient_pow(a, n):
    return a**n if n >= 0 else 1.0 / a ** (-n)


# op codes of a compiled plan
_CONST, _VAR, _PARAM, _NEG, _ADD, _SUB, _MUL, _DIV, _POW, _FUNC = range(10)
_BINARY = {Add: _ADD, Sub: _SUB, Mul: _MUL, Div: _DIV}
_PLAN_CACHE: OrderedDict[int, tuple[Expr, list]] = OrderedDict()
_PLAN_CACHE_SIZE = 512


def _plan(e: Expr) -> list[tuple]:
    """Flat post-order op list with structurally equal subtrees merged.

    Repeated differentiation creates many distinct but identical nodes, so
    merging them by structure rather than identity shrinks the work a lot.
    """
    hit = _PLAN_CACHE.get(id(e))
    if hit is not None and hit[0] is e:
        _PLAN_CACHE.move_to_end(id(e))
        return hit[1]
    ops: list[tuple] = []
    index: dict[tuple, int] = {}
    slot: dict[int, int] = {}

    def emit(key):
        i = index.get(key)
        if i is None:
            i = index[key] = len(ops)
            ops.append(key)
        return i

    stack: list[tuple[Expr, bool]] = [(e, False)]
    while stack:
        n, ready = stack.pop()
        if id(n) in slot:
            continue
        if isinstance(n, Const):
            slot[id(n)] = emit((_CONST, float(n.value)))
            continue
        if isinstance(n, Var):
            slot[id(n)] = emit((_VAR,))
            continue
        if isinstance(n, Param):
            slot[id(n)] = emit((_PARAM, n.name))
            continue
        if isinstance(n, (Neg, Func)):
            kids = (n.arg,)
        elif isinstance(n, Pow):
            kids = (n.base,)
        else:
            kids = (n.left, n.right)
        if not ready:
            stack.append((n, True))
            stack.extend((k, False) for k in kids if id(k) not in slot)
            continue
        ks = [slot[id(k)] for k in kids]
        if isinstance(n, Neg):
            key = (_NEG, ks[0])
        elif isinstance(n, Pow):
            key = (_POW, ks[0], n.exponent)
        elif isinstance(n, Func):
            key = (_FUNC, ks[0], n.name)
        else:
            key = (_BINARY[type(n)], ks[0], ks[1])
        slot[id(n)] = emit(key)
    # the root is emitted last by the post-order walk unless it merged earlier
    root = slot[id(e)]
    if root != len(ops) - 1:
        ops = ops[: root + 1]
    _PLAN_CACHE[id(e)] = (e, ops)
    if len(_PLAN_CACHE) > _PLAN_CACHE_SIZE:
        _PLAN_CACHE.popitem(last=False)
    return ops


def _run(ops, x, bindings, funcs, fdiv, fpow, num):
    vals: list = []
    push = vals.append
    for op in ops:
        code = op[0]
        if code == _ADD:
            push(vals[op[1]] + vals[op[2]])
        elif code == _MUL:
            push(vals[op[1]] * vals[op[2]])
        elif code == _SUB:
            push(vals[op[1]] - vals[op[2]])
        elif code == _DIV:
            push(fdiv(vals[op[1]], vals[op[2]]))
        elif code == _POW:
            push(fpow(vals[op[1]], op[2]))
        elif code == _NEG:
            push(-vals[op[1]])
        elif code == _FUNC:
            push(funcs[op[2]](vals[op[1]]))
        elif code == _CONST:
            push(num(op[1]))
        elif code == _VAR:
            push(x)
        else:
            if op[1] not in bindings:
                raise ExprError(f"unbound parameter {op[1]!r}")
            push(num(bindings[op[1]]))
    return vals[-1]


def lambdify(e: Expr, bindings: Mapping[str, float] | None = None) -> Callable:
    """Return ``f(x)`` evaluating ``e`` with fixed bindings."""
    bound = dict(bindings or {})
    return lambda x: evaluate(e, x, bound)
