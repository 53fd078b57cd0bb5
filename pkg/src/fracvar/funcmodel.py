"""Function models: parsed expressions, tabular data, and closed-form oracles.

A single small expression language serves Lagrangians, dynamics, and test
functions.  Variables are fixed: ``t`` (time), ``x`` (state), ``xp`` (first
derivative of the state), ``Dx`` (fractional derivative of the state,
treated as an opaque input), and ``u`` (control).  Expressions are
immutable and safe to evaluate concurrently, on scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Union

import numpy as np

from .errors import DomainError, EvaluationError, GridError, ParseError, UnsupportedProblemError
from .special import gamma, mittag_leffler

__all__ = [
    "Expression",
    "Num",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "FunctionModel",
    "TabularFunction",
    "parse_expr",
    "print_expr",
    "eval_expr",
    "diff_expr",
    "expr_variables",
    "tabular_first_derivative",
    "reference_frac_op",
]

VARIABLES = ("t", "x", "xp", "Dx", "u")
FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, Bin, Call]


# ---------------------------------------------------------------------------
# parsing

_TOKEN_NUM = "num"
_TOKEN_IDENT = "ident"
_TOKEN_OP = "op"
_TOKEN_END = "end"
_DIGITS = "0123456789"


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def _tokenize(source: str):
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _DIGITS or (c == "." and i + 1 < n and source[i + 1] in _DIGITS):
            j = i
            seen_dot = False
            while j < n and (source[j] in _DIGITS or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            # exponent part
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k] in _DIGITS:
                    while k < n and source[k] in _DIGITS:
                        k += 1
                    j = k
            tokens.append((_TOKEN_NUM, source[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append((_TOKEN_IDENT, source[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            tokens.append((_TOKEN_OP, c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", _byte_offset(source, i))
    tokens.append((_TOKEN_END, "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, index: int):
        raise ParseError(message, _byte_offset(self.source, index))

    def expect_op(self, symbol: str):
        kind, text, index = self.peek()
        if kind != _TOKEN_OP or text != symbol:
            self.error(f"expected {symbol!r}", index)
        self.next()

    # expr := term (("+"|"-") term)*
    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == _TOKEN_OP and text in "+-":
                self.next()
                node = Bin(text, node, self.parse_term())
            else:
                return node

    # term := unary (("*"|"/") unary)*
    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == _TOKEN_OP and text in "*/":
                self.next()
                node = Bin(text, node, self.parse_unary())
            else:
                return node

    # unary := "-" unary | power
    def parse_unary(self) -> Expression:
        kind, text, _ = self.peek()
        if kind == _TOKEN_OP and text == "-":
            self.next()
            return Neg(self.parse_unary())
        return self.parse_power()

    # power := atom ("^" unary)?   (right-associative via the unary recursion)
    def parse_power(self) -> Expression:
        node = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == _TOKEN_OP and text == "^":
            self.next()
            return Bin("^", node, self.parse_unary())
        return node

    def parse_atom(self) -> Expression:
        kind, text, index = self.next()
        if kind == _TOKEN_NUM:
            return Num(float(text))
        if kind == _TOKEN_IDENT:
            if text == "pi":
                return Num(math.pi)
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in VARIABLES:
                return Var(text)
            self.error(f"unknown identifier {text!r}", index)
        if kind == _TOKEN_OP and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        self.error("expected a number, name, or parenthesized expression", index)


def parse_expr(source: str) -> Expression:
    """Parse ``source`` into an expression tree.

    Precedence, loosest first: + -, then * /, then unary minus, then ^
    (right-associative).  Raises ParseError with a byte offset on bad
    input.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(source)
    node = parser.parse_expr()
    kind, text, index = parser.peek()
    if kind != _TOKEN_END:
        parser.error(f"unexpected trailing input {text!r}", index)
    return node


# ---------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _precedence(e: Expression) -> int:
    if isinstance(e, Bin):
        if e.op in "+-":
            return _PREC_ADD
        if e.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(e, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def print_expr(e: Expression) -> str:
    """Render an expression so that parsing the result reproduces the tree."""

    def wrap(child: Expression, minimum: int) -> str:
        text = print_expr(child)
        return f"({text})" if _precedence(child) < minimum else text

    if isinstance(e, Num):
        if e.value < 0 or (e.value == 0 and math.copysign(1.0, e.value) < 0):
            return f"({e.value!r})"
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, _PREC_NEG)
    if isinstance(e, Call):
        return f"{e.fn}({print_expr(e.arg)})"
    if isinstance(e, Bin):
        if e.op in "+-":
            left = wrap(e.left, _PREC_ADD)
            right = wrap(e.right, _PREC_ADD + 1)
            return f"{left} {e.op} {right}"
        if e.op in "*/":
            left = wrap(e.left, _PREC_MUL)
            right = wrap(e.right, _PREC_MUL + 1)
            return f"{left}{e.op}{right}"
        # ^ binds tighter than unary minus and is right-associative
        left = wrap(e.left, _PREC_ATOM)
        right = wrap(e.right, _PREC_POW)
        return f"{left}^{right}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation

def _as_error(message: str) -> EvaluationError:
    return EvaluationError(message)


def eval_expr(e: Expression, env: dict):
    """Evaluate on scalars or numpy arrays; ln/sqrt of non-positive values,
    division by zero, and fractional powers of negatives are evaluation
    errors."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise _as_error(f"variable {e.name!r} has no value here") from None
    if isinstance(e, Neg):
        return -eval_expr(e.arg, env)
    if isinstance(e, Call):
        arg = eval_expr(e.arg, env)
        if e.fn == "exp":
            return np.exp(arg)
        if e.fn == "sin":
            return np.sin(arg)
        if e.fn == "cos":
            return np.cos(arg)
        if e.fn == "ln":
            if np.any(np.asarray(arg) <= 0.0):
                raise _as_error("ln of a non-positive value")
            return np.log(arg)
        if e.fn == "sqrt":
            if np.any(np.asarray(arg) < 0.0):
                raise _as_error("sqrt of a negative value")
            return np.sqrt(arg)
        raise _as_error(f"unknown function {e.fn!r}")
    if isinstance(e, Bin):
        left = eval_expr(e.left, env)
        right = eval_expr(e.right, env)
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        if e.op == "/":
            if np.any(np.asarray(right) == 0.0):
                raise _as_error("division by zero")
            return left / right
        if e.op == "^":
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.power(np.asarray(left, dtype=float), right)
            if np.any(~np.isfinite(np.atleast_1d(out))):
                raise _as_error("power produced a non-finite value")
            return out if np.ndim(left) or np.ndim(right) else float(out)
        raise _as_error(f"unknown operator {e.op!r}")
    raise TypeError(f"not an expression node: {e!r}")


def expr_variables(e: Expression) -> set:
    """Names of the variables that actually occur in ``e``."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return expr_variables(e.arg)
    if isinstance(e, Call):
        return expr_variables(e.arg)
    if isinstance(e, Bin):
        return expr_variables(e.left) | expr_variables(e.right)
    return set()


# ---------------------------------------------------------------------------
# symbolic differentiation

def _is_num(e: Expression, value=None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def _add(a: Expression, b: Expression) -> Expression:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def _sub(a: Expression, b: Expression) -> Expression:
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_num(a, 0.0):
        return Neg(b)
    return Bin("-", a, b)


def _mul(a: Expression, b: Expression) -> Expression:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def _div(a: Expression, b: Expression) -> Expression:
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    return Bin("/", a, b)


def _pow(a: Expression, b: Expression) -> Expression:
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    if isinstance(a, Num) and isinstance(b, Num):
        try:
            return Num(float(a.value) ** b.value)
        except (OverflowError, ValueError, ZeroDivisionError):
            pass
    return Bin("^", a, b)


def diff_expr(e: Expression, var: str = "t") -> Expression:
    """Exact symbolic derivative of ``e`` with respect to ``var``.

    Light constant folding keeps repeated differentiation from blowing up
    the tree, so d^5/dt^5 of t^4 really is the literal 0.
    """
    if var not in VARIABLES:
        raise DomainError(f"cannot differentiate with respect to {var!r}")
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.name == var else 0.0)
    if isinstance(e, Neg):
        inner = diff_expr(e.arg, var)
        return Num(0.0) if _is_num(inner, 0.0) else Neg(inner)
    if isinstance(e, Call):
        inner = diff_expr(e.arg, var)
        if _is_num(inner, 0.0):
            return Num(0.0)
        if e.fn == "exp":
            outer = Call("exp", e.arg)
        elif e.fn == "sin":
            outer = Call("cos", e.arg)
        elif e.fn == "cos":
            outer = Neg(Call("sin", e.arg))
        elif e.fn == "ln":
            outer = _div(Num(1.0), e.arg)
        elif e.fn == "sqrt":
            outer = _div(Num(0.5), Call("sqrt", e.arg))
        else:
            raise DomainError(f"unknown function {e.fn!r}")
        return _mul(outer, inner)
    if isinstance(e, Bin):
        if e.op == "+":
            return _add(diff_expr(e.left, var), diff_expr(e.right, var))
        if e.op == "-":
            return _sub(diff_expr(e.left, var), diff_expr(e.right, var))
        if e.op == "*":
            return _add(
                _mul(diff_expr(e.left, var), e.right),
                _mul(e.left, diff_expr(e.right, var)),
            )
        if e.op == "/":
            num = _sub(
                _mul(diff_expr(e.left, var), e.right),
                _mul(e.left, diff_expr(e.right, var)),
            )
            return _div(num, _pow(e.right, Num(2.0)))
        if e.op == "^":
            base_d = diff_expr(e.left, var)
            expo_d = diff_expr(e.right, var)
            if _is_num(expo_d, 0.0):
                # power rule: b * u^(b-1) * u'
                if isinstance(e.right, Num):
                    reduced = _pow(e.left, Num(e.right.value - 1.0))
                else:
                    reduced = _pow(e.left, _sub(e.right, Num(1.0)))
                return _mul(_mul(e.right, reduced), base_d)
            if _is_num(base_d, 0.0):
                # exponential rule: u^v * ln(u) * v'
                return _mul(_mul(e, Call("ln", e.left)), expo_d)
            # general rule: u^v (v' ln u + v u'/u)
            bracket = _add(
                _mul(expo_d, Call("ln", e.left)),
                _div(_mul(e.right, base_d), e.left),
            )
            return _mul(e, bracket)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# function models

class FunctionModel:
    """A function t -> x(t) with integer-order derivatives up to ``n_max``.

    Backed either by an expression (exact symbolic derivatives) or by
    caller-supplied evaluators.  Evaluators accept scalars or arrays.
    """

    def __init__(self, evaluators: list, domain: tuple, n_max: int, source: str | None = None):
        if not evaluators:
            raise DomainError("FunctionModel needs at least the value evaluator")
        a, b = float(domain[0]), float(domain[1])
        if not a < b:
            raise DomainError("FunctionModel domain must satisfy a < b")
        self._evaluators = list(evaluators)
        self.domain = (a, b)
        self.n_max = int(n_max)
        self.source = source

    @classmethod
    def from_expression(cls, source, domain=(0.0, 1.0), n_max: int = 12) -> "FunctionModel":
        expr = parse_expr(source) if isinstance(source, str) else source
        extra = expr_variables(expr) - {"t"}
        if extra:
            raise UnsupportedProblemError(
                f"a test function may only depend on t; found {sorted(extra)}"
            )
        chain = [expr]
        for _ in range(n_max):
            chain.append(diff_expr(chain[-1], "t"))
        evaluators = [
            (lambda ee: (lambda t: eval_expr(ee, {"t": t})))(e) for e in chain
        ]
        text = source if isinstance(source, str) else print_expr(expr)
        return cls(evaluators, domain, n_max, source=text)

    @classmethod
    def from_callables(cls, evaluators: Iterable[Callable], domain, source=None) -> "FunctionModel":
        evaluators = list(evaluators)
        return cls(evaluators, domain, len(evaluators) - 1, source=source)

    def derivative(self, k: int) -> Callable:
        if k < 0:
            raise DomainError("derivative order must be >= 0")
        if k >= len(self._evaluators):
            raise DomainError(
                f"derivative order {k} exceeds the declared maximum {self.n_max}"
            )
        return self._evaluators[k]

    def eval(self, t, k: int = 0):
        value = self.derivative(k)(t)
        if np.ndim(t):
            return np.asarray(value, dtype=float) * np.ones_like(np.asarray(t, dtype=float))
        return float(value)

    def __call__(self, t):
        return self.eval(t, 0)


@dataclass(frozen=True, eq=False)
class TabularFunction:
    """Uniformly sampled values x_i at strictly increasing nodes t_i."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        if nodes.ndim != 1 or nodes.size < 2:
            raise GridError("TabularFunction needs at least 2 nodes")
        if values.shape != nodes.shape:
            raise GridError("nodes and values must have the same length")
        steps = np.diff(nodes)
        if np.any(steps <= 0.0):
            raise GridError("nodes must be strictly increasing")
        h = steps[0]
        if np.any(np.abs(steps - h) > 1e-12 * max(abs(h), 1.0)):
            raise GridError("nodes must be uniformly spaced (to 1e-12 relative)")
        nodes.setflags(write=False)
        values.setflags(write=False)

    @property
    def spacing(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    def __len__(self) -> int:
        return len(self.nodes)


def tabular_first_derivative(f: TabularFunction) -> TabularFunction:
    """Second-order first derivative of tabular data.

    Centered differences at interior nodes; one-sided three-point stencils
    at the two endpoints (exact for quadratics everywhere).
    """
    if len(f) < 3:
        raise GridError("tabular_first_derivative needs at least 3 nodes")
    x = f.values
    h = f.spacing
    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) / (2.0 * h)
    d[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * h)
    d[-1] = (3.0 * x[-1] - 4.0 * x[-2] + x[-3]) / (2.0 * h)
    return TabularFunction(f.nodes, d)


# ---------------------------------------------------------------------------
# closed-form fractional operators for the benchmark probes

_FAMILIES = ("rl_deriv", "rl_integral", "hadamard_deriv", "hadamard_integral")


def _power_coefficient(nu: float, shift: float) -> float:
    """Gamma(nu+1)/Gamma(nu+1+shift), with 0 at reciprocal-gamma poles."""
    target = nu + 1.0 + shift
    if target <= 0.0 and target == math.floor(target):
        return 0.0
    return gamma(nu + 1.0) / gamma(target)


def probe_model(probe: tuple, domain=(0.0, 1.0), n_max: int = 12) -> FunctionModel:
    """FunctionModel for a named probe, sharing the oracle's registry."""
    kind = probe[0]
    if kind == "power":
        nu = float(probe[1])

        def _monomial(c: float, e: float) -> Callable:
            def evaluate(t):
                ts = np.asarray(t, dtype=float)
                if c == 0.0:
                    out = np.zeros_like(ts)
                elif e == 0.0:
                    out = np.full_like(ts, c)
                else:
                    out = c * np.power(ts, e)
                return out if np.ndim(t) else float(out)

            return evaluate

        evaluators = []
        for k in range(n_max + 1):
            coef = 1.0
            for j in range(k):
                coef *= nu - j
            evaluators.append(_monomial(coef, nu - k))
        return FunctionModel(evaluators, domain, n_max, source=f"t^{nu:g}")
    if kind == "exp":
        lam = float(probe[1])
        evaluators = [
            (lambda c: (lambda t: c * np.exp(lam * np.asarray(t, dtype=float)) if np.ndim(t) else c * math.exp(lam * t)))(lam ** k)
            for k in range(n_max + 1)
        ]
        return FunctionModel(evaluators, domain, n_max, source=f"exp({lam:g}*t)")
    if kind == "constant":
        c = float(probe[1])
        return FunctionModel.from_expression(print_expr(Num(c)), domain, n_max)
    if kind == "log":
        return FunctionModel.from_expression("ln(t)", domain, n_max)
    raise UnsupportedProblemError(f"unknown probe kind {kind!r}")


def reference_frac_op(family: str, alpha: float, base: float, probe: tuple, t):
    """Closed-form value of a fractional operator on a registry probe.

    ``probe`` is a tuple: ("power", nu), ("exp", lam), ("constant", c), or
    ("log",).  Riemann-Liouville probes accept any base point; Hadamard
    probes require base 1 except for the constant.  Hadamard power probes
    use the erf closed forms, which this registry carries for alpha = 1/2
    only.
    """
    if family not in _FAMILIES:
        raise UnsupportedProblemError(f"unknown family {family!r}")
    if not 0.0 < alpha < 1.0:
        raise DomainError("reference_frac_op covers orders in (0, 1)")
    kind = probe[0]
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)

    if family in ("rl_deriv", "rl_integral"):
        shift = -alpha if family == "rl_deriv" else alpha
        s = t - base
        if np.any(np.asarray(s) <= 0.0):
            raise DomainError("evaluation requires t > base")
        if kind == "power":
            nu = float(probe[1])
            return _power_coefficient(nu, shift) * s ** (nu + shift)
        if kind == "constant":
            c = float(probe[1])
            return c * s ** shift / gamma(1.0 + shift)
        if kind == "exp":
            lam = float(probe[1])
            beta = 1.0 + shift
            scale = math.exp(lam * base)
            if np.ndim(s):
                ml = np.array([mittag_leffler(1.0, beta, lam * si) for si in np.ravel(s)])
                ml = ml.reshape(np.shape(s))
            else:
                ml = mittag_leffler(1.0, beta, lam * s)
            return scale * s ** shift * ml
        raise UnsupportedProblemError(f"probe {kind!r} has no {family} closed form")

    # Hadamard families
    sign = -1.0 if family == "hadamard_deriv" else 1.0
    shift = sign * alpha
    if kind == "constant":
        if np.any(np.asarray(t) <= base):
            raise DomainError("evaluation requires t > base")
        L = np.log(t / base)
        return float(probe[1]) * L ** shift / gamma(1.0 + shift)
    if base != 1.0:
        raise UnsupportedProblemError("Hadamard closed forms are registered for base 1")
    if np.any(np.asarray(t) <= 1.0):
        raise DomainError("evaluation requires t > 1 for base-1 Hadamard probes")
    L = np.log(t)
    if kind == "log":
        return L ** (1.0 + shift) / gamma(2.0 + shift)
    if kind == "power":
        if alpha != 0.5:
            raise UnsupportedProblemError("Hadamard power probes carry erf forms for alpha = 1/2 only")
        k = float(probe[1])
        if k <= 0.0:
            raise UnsupportedProblemError("Hadamard power probes need a positive exponent")
        root = np.sqrt(k * L)
        erf = np.vectorize(math.erf)(root) if np.ndim(t) else math.erf(root)
        tail = math.sqrt(math.pi / k) * t ** k * erf / gamma(0.5)
        if family == "hadamard_integral":
            return tail
        return L ** -0.5 / gamma(0.5) + k * tail
    raise UnsupportedProblemError(f"probe {kind!r} has no {family} closed form")
