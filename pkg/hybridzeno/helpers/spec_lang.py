"""
Expression language for flow/jump sets, flow/jump maps, distances and Lyapunov candidates.

Expressions are parsed into immutable ASTs, compiled to Python callables for
evaluation (scalar or vectorized over numpy arrays) and can be differentiated
symbolically with respect to a state variable.
"""

import math
import re
from dataclasses import dataclass
from functools import singledispatch
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import HybridZenoError

EQ_TOL = 1e-9

UNARY_FUNCTIONS = ("sqrt", "exp", "abs", "atan", "sin", "cos")
BINARY_FUNCTIONS = ("min", "max")
FUNCTION_ARITY = {**{name: 1 for name in UNARY_FUNCTIONS}, **{name: 2 for name in BINARY_FUNCTIONS}}
RESERVED_NAMES = ("if", "true", "false") + UNARY_FUNCTIONS + BINARY_FUNCTIONS

_STATE_RE = re.compile(r"^x([1-9][0-9]*)$")
_INPUT_RE = re.compile(r"^u([1-9][0-9]*)$")


class ExprError(HybridZenoError):
    """Base class for parse and evaluation errors; carries an optional position and field."""

    exit_code = 1

    def __init__(self, message: str, position: Optional[int] = None, field: Optional[str] = None):
        self.message = message
        self.position = position
        self.field = field
        text = message
        if position is not None:
            text = f"{text} (at position {position})"
        if field is not None:
            text = f"{field}: {text}"
        super().__init__(text)

    def with_field(self, field: str) -> "ExprError":
        return type(self)(self.message, position=self.position, field=field)


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifier(ExprError):
    pass


class ArityMismatch(ExprError):
    pass


class TypeMismatch(ExprError):
    pass


class NotDifferentiable(ExprError):
    pass


class DivisionByZero(ExprError):
    pass


class DomainError(ExprError):
    pass


class IndexOutOfRange(ExprError):
    pass


class SchemaError(HybridZenoError):
    """Raised when a system document does not follow the SystemSpec schema."""

    exit_code = 1


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


class Expr:
    """Base class of all expression nodes."""

    is_bool = False


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Bool(Expr):
    value: bool
    is_bool = True


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class StateVar(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class InputVar(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: Tuple[Expr, ...]


@dataclass(frozen=True)
class Compare(Expr):
    op: str  # one of < <= > >= ==
    left: Expr
    right: Expr
    is_bool = True


@dataclass(frozen=True)
class Logic(Expr):
    op: str  # && or ||
    left: Expr
    right: Expr
    is_bool = True


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr
    is_bool = True


@dataclass(frozen=True)
class If(Expr):
    cond: Expr
    then: Expr
    otherwise: Expr

    @property
    def is_bool(self):
        return self.then.is_bool


# ---------------------------------------------------------------------------
# Tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||<=|>=|==|[<>!+\-*/^(),]|−)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, eof
    text: str
    position: int  # 1-based


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExprSyntaxError(f"Unexpected character {text[pos]!r}", position=pos + 1)
        kind = match.lastgroup
        if kind != "ws":
            value = match.group()
            if value == "−":
                value = "-"
            tokens.append(_Token(kind, value, pos + 1))
        pos = match.end()
    tokens.append(_Token("eof", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text, *, dim, n_inputs, params, aliases):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dim = dim
        self.n_inputs = n_inputs
        self.params = set(params) if params is not None else set()
        self.aliases = dict(aliases or {})

    # token helpers

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            self.i += 1
            return tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"Expected {text!r}, found {found}", position=tok.position)

    # grammar

    def parse(self) -> Expr:
        expr = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise ExprSyntaxError(f"Unexpected token {tok.text!r}", position=tok.position)
        return expr

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while True:
            tok = self.peek()
            if not self.accept("||"):
                return left
            right = self.and_expr()
            self._require_bool(left, tok)
            self._require_bool(right, tok)
            left = Logic("||", left, right)

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while True:
            tok = self.peek()
            if not self.accept("&&"):
                return left
            right = self.not_expr()
            self._require_bool(left, tok)
            self._require_bool(right, tok)
            left = Logic("&&", left, right)

    def not_expr(self) -> Expr:
        tok = self.peek()
        if self.accept("!"):
            operand = self.not_expr()
            self._require_bool(operand, tok)
            return Not(operand)
        return self.cmp()

    def cmp(self) -> Expr:
        left = self.sum()
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("<", "<=", ">", ">=", "=="):
            self.next()
            right = self.sum()
            self._require_real(left, tok)
            self._require_real(right, tok)
            return Compare(tok.text, left, right)
        return left

    def sum(self) -> Expr:
        left = self.term()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("+", "-"):
                self.next()
                right = self.term()
                self._require_real(left, tok)
                self._require_real(right, tok)
                left = BinOp(tok.text, left, right)
            else:
                return left

    def term(self) -> Expr:
        left = self.factor()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in ("*", "/"):
                self.next()
                right = self.factor()
                self._require_real(left, tok)
                self._require_real(right, tok)
                left = BinOp(tok.text, left, right)
            else:
                return left

    def factor(self) -> Expr:
        tok = self.peek()
        negate = self.accept("-")
        node = self.atom()
        caret = self.peek()
        if self.accept("^"):
            exp_tok = self.next()
            if exp_tok.kind != "number":
                found = "end of input" if exp_tok.kind == "eof" else repr(exp_tok.text)
                raise ExprSyntaxError(f"Expected integer exponent, found {found}", position=exp_tok.position)
            value = float(exp_tok.text)
            if not value.is_integer():
                raise ExprSyntaxError("Exponent must be an integer", position=exp_tok.position)
            self._require_real(node, caret)
            node = Pow(node, int(value))
        if negate:
            self._require_real(node, tok)
            node = Neg(node)
        return node

    def atom(self) -> Expr:
        tok = self.next()
        if tok.kind == "number":
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "ident":
            return self.identifier(tok)
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ExprSyntaxError(f"Expected a value, found {found}", position=tok.position)

    def identifier(self, tok: _Token) -> Expr:
        name = tok.text
        if name == "if":
            return self.conditional(tok)
        if name in ("true", "false"):
            return Bool(name == "true")
        if name in FUNCTION_ARITY:
            return self.call(tok)
        if name in self.aliases:
            return StateVar(self.aliases[name])
        match = _STATE_RE.match(name)
        if match:
            index = int(match.group(1))
            if self.dim is not None and index > self.dim:
                raise UnknownIdentifier(f"State variable {name} exceeds dimension {self.dim}", position=tok.position)
            return StateVar(index)
        match = _INPUT_RE.match(name)
        if match:
            index = int(match.group(1))
            if self.n_inputs is not None and index > self.n_inputs:
                raise UnknownIdentifier(
                    f"Input variable {name} exceeds input dimension {self.n_inputs}", position=tok.position
                )
            return InputVar(index)
        if name in self.params:
            return Param(name)
        raise UnknownIdentifier(f"Unknown identifier {name!r}", position=tok.position)

    def arguments(self) -> List[Expr]:
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        return args

    def call(self, tok: _Token) -> Expr:
        args = self.arguments()
        arity = FUNCTION_ARITY[tok.text]
        if len(args) != arity:
            raise ArityMismatch(f"{tok.text} takes {arity} argument(s), got {len(args)}", position=tok.position)
        for arg in args:
            self._require_real(arg, tok)
        return Call(tok.text, tuple(args))

    def conditional(self, tok: _Token) -> Expr:
        args = self.arguments()
        if len(args) != 3:
            raise ArityMismatch(f"if takes 3 arguments, got {len(args)}", position=tok.position)
        cond, then, otherwise = args
        self._require_bool(cond, tok)
        if then.is_bool != otherwise.is_bool:
            raise TypeMismatch("Branches of if must have the same type", position=tok.position)
        return If(cond, then, otherwise)

    # typing

    @staticmethod
    def _require_bool(node: Expr, tok: _Token):
        if not node.is_bool:
            raise TypeMismatch(f"Operator {tok.text!r} expects a boolean operand", position=tok.position)

    @staticmethod
    def _require_real(node: Expr, tok: _Token):
        if node.is_bool:
            raise TypeMismatch(f"Operator {tok.text!r} expects a real operand", position=tok.position)


def parse_expr(
    text: str,
    *,
    dim: Optional[int] = None,
    n_inputs: Optional[int] = 0,
    params: Optional[Iterable[str]] = None,
    aliases: Optional[Dict[str, int]] = None,
) -> Expr:
    """
    Parse an expression.

    Parameters
    ----------
    text : str
        Expression source text
    dim : int, optional
        State dimension; x-indices above it are rejected. None disables the check.
    n_inputs : int, optional
        Input dimension; None disables the check (default: 0, no inputs allowed)
    params : iterable of str, optional
        Declared parameter names
    aliases : dict, optional
        Extra names bound to state indices (e.g. {"s": 1} for scalar comparison functions)

    Returns
    -------
    Expr
        The typed AST
    """
    if not isinstance(text, str):
        raise ExprSyntaxError(f"Expression must be a string, got {type(text).__name__}", position=1)
    return _Parser(text, dim=dim, n_inputs=n_inputs, params=params, aliases=aliases).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _format_number(value: float) -> str:
    text = repr(float(value))
    if value < 0:
        return f"(-{repr(-float(value))})"
    return text


def _atom_text(node: Expr) -> str:
    if isinstance(node, (StateVar, InputVar, Param, Call, Bool)):
        return to_text(node)
    if isinstance(node, Num) and node.value >= 0:
        return to_text(node)
    return f"({to_text(node)})"


def to_text(node: Expr) -> str:
    """Render an expression so that parse_expr(to_text(e)) reproduces e."""
    if isinstance(node, Num):
        return _format_number(node.value)
    if isinstance(node, Bool):
        return "true" if node.value else "false"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, StateVar):
        return f"x{node.index}"
    if isinstance(node, InputVar):
        return f"u{node.index}"
    if isinstance(node, Neg):
        if isinstance(node.operand, (StateVar, InputVar, Param, Call, Pow)) or (
            isinstance(node.operand, Num) and node.operand.value >= 0
        ):
            return f"-{to_text(node.operand)}"
        return f"-({to_text(node.operand)})"
    if isinstance(node, (BinOp, Compare, Logic)):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"{_atom_text(node.base)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_text(arg) for arg in node.args)})"
    if isinstance(node, Not):
        return f"!({to_text(node.operand)})"
    if isinstance(node, If):
        return f"if({to_text(node.cond)}, {to_text(node.then)}, {to_text(node.otherwise)})"
    raise TypeError(f"Unknown expression node {type(node).__name__}")


# ---------------------------------------------------------------------------
# Traversal helpers
# ---------------------------------------------------------------------------


def children(node: Expr) -> Tuple[Expr, ...]:
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    if isinstance(node, (BinOp, Compare, Logic)):
        return (node.left, node.right)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, Call):
        return node.args
    if isinstance(node, If):
        return (node.cond, node.then, node.otherwise)
    return ()


def walk(node: Expr):
    """Yield every node of the tree (pre-order)."""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(children(current)))


def max_state_index(node: Expr) -> int:
    return max((n.index for n in walk(node) if isinstance(n, StateVar)), default=0)


def max_input_index(node: Expr) -> int:
    return max((n.index for n in walk(node) if isinstance(n, InputVar)), default=0)


def param_names(node: Expr) -> set:
    return {n.name for n in walk(node) if isinstance(n, Param)}


def substitute(
    node: Expr,
    *,
    states: Optional[Dict[int, Expr]] = None,
    inputs: Optional[Dict[int, Expr]] = None,
    params: Optional[Dict[str, str]] = None,
) -> Expr:
    """
    Replace state variables, input variables and parameter names.

    states/inputs map 1-based indices to replacement expressions; params maps
    old parameter names to new names. Unmapped leaves are kept.
    """
    states = states or {}
    inputs = inputs or {}
    params = params or {}

    def rec(n: Expr) -> Expr:
        if isinstance(n, StateVar):
            return states.get(n.index, n)
        if isinstance(n, InputVar):
            if n.index not in inputs:
                raise IndexOutOfRange(f"No substitution for input u{n.index}")
            return inputs[n.index]
        if isinstance(n, Param):
            return Param(params.get(n.name, n.name))
        if isinstance(n, (Num, Bool)):
            return n
        if isinstance(n, Neg):
            return Neg(rec(n.operand))
        if isinstance(n, Not):
            return Not(rec(n.operand))
        if isinstance(n, BinOp):
            return BinOp(n.op, rec(n.left), rec(n.right))
        if isinstance(n, Compare):
            return Compare(n.op, rec(n.left), rec(n.right))
        if isinstance(n, Logic):
            return Logic(n.op, rec(n.left), rec(n.right))
        if isinstance(n, Pow):
            return Pow(rec(n.base), n.exponent)
        if isinstance(n, Call):
            return Call(n.func, tuple(rec(a) for a in n.args))
        if isinstance(n, If):
            return If(rec(n.cond), rec(n.then), rec(n.otherwise))
        raise TypeError(f"Unknown expression node {type(n).__name__}")

    return rec(node)


# ---------------------------------------------------------------------------
# Compilation and evaluation
# ---------------------------------------------------------------------------

_SCALAR_FUNCS = {
    "exp": math.exp,
    "abs": abs,
    "atan": math.atan,
    "sin": math.sin,
    "cos": math.cos,
    "min": min,
    "max": max,
}

_VECTOR_FUNCS = {
    "exp": np.exp,
    "abs": np.abs,
    "atan": np.arctan,
    "sin": np.sin,
    "cos": np.cos,
    "min": np.minimum,
    "max": np.maximum,
}


def _scalar_sqrt(v):
    if v < 0:
        raise DomainError(f"sqrt of negative value {v}")
    return math.sqrt(v)


def _vector_sqrt(v):
    if np.any(v < 0):
        raise DomainError("sqrt of negative value")
    return np.sqrt(v)


def _compile(node: Expr, params: Dict[str, float], eq_tol: float, vectorized: bool) -> Callable:
    rec = lambda n: _compile(n, params, eq_tol, vectorized)  # noqa: E731

    if isinstance(node, (Num, Bool)):
        value = node.value
        return lambda x, u: value

    if isinstance(node, Param):
        if node.name not in params:
            raise UnknownIdentifier(f"Parameter {node.name!r} has no value")
        value = float(params[node.name])
        return lambda x, u: value

    if isinstance(node, (StateVar, InputVar)):
        idx = node.index - 1
        label = f"x{node.index}" if isinstance(node, StateVar) else f"u{node.index}"
        use_inputs = isinstance(node, InputVar)

        def var(x, u):
            source = u if use_inputs else x
            if idx >= len(source):
                raise IndexOutOfRange(f"{label} is out of range for a vector of length {len(source)}")
            return source[idx]

        return var

    if isinstance(node, Neg):
        a = rec(node.operand)
        return lambda x, u: -a(x, u)

    if isinstance(node, BinOp):
        a, b = rec(node.left), rec(node.right)
        if node.op == "+":
            return lambda x, u: a(x, u) + b(x, u)
        if node.op == "-":
            return lambda x, u: a(x, u) - b(x, u)
        if node.op == "*":
            return lambda x, u: a(x, u) * b(x, u)

        def div(x, u):
            den = b(x, u)
            if np.any(den == 0):
                raise DivisionByZero(f"Division by zero in {to_text(node)}")
            return a(x, u) / den

        return div

    if isinstance(node, Pow):
        a = rec(node.base)
        n = node.exponent

        def power(x, u):
            base = a(x, u)
            if n < 0 and np.any(base == 0):
                raise DivisionByZero(f"Zero raised to negative power in {to_text(node)}")
            try:
                return base ** n
            except OverflowError:
                return math.inf if (n % 2 == 0 or base > 0) else -math.inf

        return power

    if isinstance(node, Call):
        args = [rec(arg) for arg in node.args]
        if node.func == "sqrt":
            fn = _vector_sqrt if vectorized else _scalar_sqrt
        else:
            fn = (_VECTOR_FUNCS if vectorized else _SCALAR_FUNCS)[node.func]
        if len(args) == 1:
            a = args[0]
            if node.func == "exp" and not vectorized:
                def exp_(x, u):
                    try:
                        return math.exp(a(x, u))
                    except OverflowError:
                        return math.inf

                return exp_
            return lambda x, u: fn(a(x, u))
        a, b = args
        return lambda x, u: fn(a(x, u), b(x, u))

    if isinstance(node, Compare):
        a, b = rec(node.left), rec(node.right)
        op = node.op
        if op == "==":
            if vectorized:
                return lambda x, u: np.abs(a(x, u) - b(x, u)) <= eq_tol
            return lambda x, u: abs(a(x, u) - b(x, u)) <= eq_tol
        if op == "<":
            return lambda x, u: a(x, u) < b(x, u)
        if op == "<=":
            return lambda x, u: a(x, u) <= b(x, u)
        if op == ">":
            return lambda x, u: a(x, u) > b(x, u)
        return lambda x, u: a(x, u) >= b(x, u)

    if isinstance(node, Logic):
        a, b = rec(node.left), rec(node.right)
        if vectorized:
            fn = np.logical_and if node.op == "&&" else np.logical_or
            return lambda x, u: fn(a(x, u), b(x, u))
        if node.op == "&&":
            return lambda x, u: bool(a(x, u)) and bool(b(x, u))
        return lambda x, u: bool(a(x, u)) or bool(b(x, u))

    if isinstance(node, Not):
        a = rec(node.operand)
        if vectorized:
            return lambda x, u: np.logical_not(a(x, u))
        return lambda x, u: not a(x, u)

    if isinstance(node, If):
        c, a, b = rec(node.cond), rec(node.then), rec(node.otherwise)
        if not vectorized:
            return lambda x, u: a(x, u) if c(x, u) else b(x, u)
        dtype = bool if node.is_bool else float

        def select(x, u):
            count = x.shape[1]
            mask = np.broadcast_to(c(x, u), (count,))
            out = np.empty(count, dtype=dtype)
            if mask.any():
                out[mask] = a(x[:, mask], u[:, mask])
            if not mask.all():
                rest = ~mask
                out[rest] = b(x[:, rest], u[:, rest])
            return out

        return select

    raise TypeError(f"Unknown expression node {type(node).__name__}")


def compile_expr(
    expr: Expr,
    params: Optional[Dict[str, float]] = None,
    *,
    eq_tol: float = EQ_TOL,
    vectorized: bool = False,
) -> Callable:
    """
    Compile an expression into a callable.

    Scalar callables take (x, u) sequences and return a float or bool.
    Vectorized callables take arrays of shape (n, N) and (m, N) and return
    an array of shape (N,).
    """
    fn = _compile(expr, dict(params or {}), eq_tol, vectorized)
    if not vectorized:
        return fn
    dtype = bool if expr.is_bool else float

    def batch(x, u=None):
        x = np.asarray(x, dtype=float)
        count = x.shape[1]
        if u is None:
            u = np.zeros((0, count))
        with np.errstate(over="ignore", invalid="ignore"):
            value = fn(x, u)
        return np.broadcast_to(np.asarray(value, dtype=dtype), (count,)).copy()

    return batch


def eval_expr(
    expr: Expr,
    state: Sequence[float],
    inputs: Sequence[float] = (),
    params: Optional[Dict[str, float]] = None,
    *,
    eq_tol: float = EQ_TOL,
):
    """Evaluate an expression at one point."""
    fn = compile_expr(expr, params, eq_tol=eq_tol)
    x = [float(v) for v in state]
    u = [float(v) for v in inputs]
    try:
        value = fn(x, u)
    except ZeroDivisionError:
        raise DivisionByZero(f"Division by zero in {to_text(expr)}")
    if expr.is_bool:
        return bool(value)
    return float(value)


# ---------------------------------------------------------------------------
# Symbolic differentiation
# ---------------------------------------------------------------------------

ZERO = Num(0.0)
ONE = Num(1.0)


def _is_num(node: Expr, value: Optional[float] = None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def make_add(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def make_sub(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return make_neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def make_mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def make_div(a: Expr, b: Expr) -> Expr:
    if _is_num(a, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def make_neg(a: Expr) -> Expr:
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def make_pow(base: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return base
    if _is_num(base):
        return Num(base.value ** n)
    return Pow(base, n)


@singledispatch
def _derive(node: Expr, wrt: int) -> Expr:
    raise NotDifferentiable(f"Cannot differentiate {type(node).__name__}")


@_derive.register(Num)
@_derive.register(Param)
@_derive.register(InputVar)
def _(node, wrt):
    return ZERO


@_derive.register(StateVar)
def _(node, wrt):
    return ONE if node.index == wrt else ZERO


@_derive.register(Neg)
def _(node, wrt):
    return make_neg(_derive(node.operand, wrt))


@_derive.register(BinOp)
def _(node, wrt):
    a, b = node.left, node.right
    da, db = _derive(a, wrt), _derive(b, wrt)
    if node.op == "+":
        return make_add(da, db)
    if node.op == "-":
        return make_sub(da, db)
    if node.op == "*":
        return make_add(make_mul(da, b), make_mul(a, db))
    # (a/b)' = a'/b when b does not depend on wrt
    if _is_num(db, 0.0):
        return make_div(da, b)
    return make_div(make_sub(make_mul(da, b), make_mul(a, db)), make_pow(b, 2))


@_derive.register(Pow)
def _(node, wrt):
    n = node.exponent
    db = _derive(node.base, wrt)
    return make_mul(make_mul(Num(float(n)), make_pow(node.base, n - 1)), db)


@_derive.register(Call)
def _(node, wrt):
    if node.func in BINARY_FUNCTIONS:
        a, b = node.args
        da, db = _derive(a, wrt), _derive(b, wrt)
        # ties take the second argument's branch
        cond = Compare("<", a, b) if node.func == "min" else Compare(">", a, b)
        return da if da == db else If(cond, da, db)
    (a,) = node.args
    da = _derive(a, wrt)
    if _is_num(da, 0.0):
        return ZERO
    if node.func == "sqrt":
        return make_div(da, make_mul(Num(2.0), node))
    if node.func == "exp":
        return make_mul(node, da)
    if node.func == "abs":
        return If(Compare(">=", a, ZERO), da, make_neg(da))
    if node.func == "atan":
        return make_div(da, make_add(ONE, make_pow(a, 2)))
    if node.func == "sin":
        return make_mul(Call("cos", (a,)), da)
    if node.func == "cos":
        return make_neg(make_mul(Call("sin", (a,)), da))
    raise NotDifferentiable(f"No derivative rule for {node.func}")


@_derive.register(If)
def _(node, wrt):
    da, db = _derive(node.then, wrt), _derive(node.otherwise, wrt)
    if da == db:
        return da
    return If(node.cond, da, db)


def differentiate(expr: Expr, wrt: int) -> Expr:
    """
    Partial derivative of a real-valued expression with respect to x_wrt (1-based).

    Conditionals differentiate branchwise; abs/min/max kinks take the
    right-hand branch.
    """
    if expr.is_bool:
        raise NotDifferentiable("Cannot differentiate a boolean expression")
    return _derive(expr, wrt)


def gradient(expr: Expr, dim: int) -> Tuple[Expr, ...]:
    return tuple(differentiate(expr, i) for i in range(1, dim + 1))


# ---------------------------------------------------------------------------
# System documents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SystemSpec:
    """Textual system description as stored in JSON."""

    name: str
    dim: int
    params: Dict[str, float]
    flow_set: str
    jump_set: str
    flow_map: Tuple[str, ...]
    jump_map: Tuple[str, ...]


def parse_system_spec(document: dict) -> SystemSpec:
    """Validate a SystemSpec document (already decoded from JSON)."""
    if not isinstance(document, dict):
        raise SchemaError("System document must be a JSON object")
    required = ["name", "dim", "flow_set", "jump_set", "flow_map", "jump_map"]
    for field in required:
        if field not in document:
            raise SchemaError(f"Missing required field '{field}'")
    unknown = set(document) - set(required) - {"params"}
    if unknown:
        raise SchemaError(f"Unknown field(s): {', '.join(sorted(unknown))}")

    dim = document["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise SchemaError("dim must be a positive integer")
    if not isinstance(document["name"], str):
        raise SchemaError("name must be a string")

    params = document.get("params", {}) or {}
    if not isinstance(params, dict):
        raise SchemaError("params must be an object of name -> number")
    for name, value in params.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"Parameter '{name}' must be numeric")
        if not re.match(r"^[A-Za-z_][A-Za-z0-9_]*$", name):
            raise SchemaError(f"Invalid parameter name '{name}'")
        if name in RESERVED_NAMES or _STATE_RE.match(name) or _INPUT_RE.match(name):
            raise SchemaError(f"Parameter name '{name}' is reserved")

    for field in ("flow_set", "jump_set"):
        if not isinstance(document[field], str):
            raise SchemaError(f"{field} must be an expression string")
    for field in ("flow_map", "jump_map"):
        entries = document[field]
        if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
            raise SchemaError(f"{field} must be a list of expression strings")
        if len(entries) != dim:
            raise SchemaError(f"{field} has {len(entries)} entries, expected dim={dim}")

    return SystemSpec(
        name=document["name"],
        dim=dim,
        params={name: float(value) for name, value in params.items()},
        flow_set=document["flow_set"],
        jump_set=document["jump_set"],
        flow_map=tuple(document["flow_map"]),
        jump_map=tuple(document["jump_map"]),
    )


def _parse_field(text, field, *, dim, params, want_bool, n_inputs=0):
    try:
        expr = parse_expr(text, dim=dim, n_inputs=n_inputs, params=params)
    except ExprError as err:
        raise err.with_field(field) from err
    if expr.is_bool != want_bool:
        kind = "boolean" if want_bool else "real"
        raise TypeMismatch(f"Expected a {kind} expression", field=field)
    return expr


def load_system(document: dict, *, eq_tol: float = EQ_TOL):
    """Parse and dimension-check a SystemSpec document into SystemData."""
    from .dynamics import SystemData

    spec = parse_system_spec(document)
    names = list(spec.params)
    flow_set = _parse_field(spec.flow_set, "flow_set", dim=spec.dim, params=names, want_bool=True)
    jump_set = _parse_field(spec.jump_set, "jump_set", dim=spec.dim, params=names, want_bool=True)
    flow_map = tuple(
        _parse_field(text, f"flow_map[{i}]", dim=spec.dim, params=names, want_bool=False)
        for i, text in enumerate(spec.flow_map)
    )
    jump_map = tuple(
        _parse_field(text, f"jump_map[{i}]", dim=spec.dim, params=names, want_bool=False)
        for i, text in enumerate(spec.jump_map)
    )
    return SystemData(
        name=spec.name,
        dim=spec.dim,
        params=dict(spec.params),
        flow_set=flow_set,
        jump_set=jump_set,
        flow_map=flow_map,
        jump_map=jump_map,
        eq_tol=eq_tol,
    )


def dump_system(sys) -> dict:
    """Inverse of load_system: SystemData -> SystemSpec document."""
    return {
        "name": sys.name,
        "dim": sys.dim,
        "params": dict(sys.params),
        "flow_set": to_text(sys.flow_set),
        "jump_set": to_text(sys.jump_set),
        "flow_map": [to_text(e) for e in sys.flow_map],
        "jump_map": [to_text(e) for e in sys.jump_map],
    }
