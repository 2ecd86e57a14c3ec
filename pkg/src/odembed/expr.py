"""Expression trees for scalar and vector maps with exact symbolic derivatives.

Every map and vector field in the package is a :class:`FuncSpec`: a named
bundle of expression trees over variables ``x0, x1, ...`` together with a
per-dimension :class:`Domain`. Expressions are immutable; evaluation and
differentiation are pure.

Grammar accepted by :func:`parse_expr`::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' number)?
    base   := number | 'x' index | func '(' expr ')' | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp' | 'ln' | 'neg'

Printing is canonical: fully parenthesized, no simplification beyond
constant folding, so printed forms are stable for golden tests.
"""

import json
import math
import re
from dataclasses import dataclass
from itertools import product as _cartesian

import numpy as np

from .errors import DomainError, ParseError, PreconditionError

UNARY_OPS = ("neg", "exp", "ln", "sin", "cos")
BINARY_OPS = ("add", "sub", "mul", "div")


@dataclass(frozen=True)
class Expr:
    """One node of an expression tree.

    ``value`` holds the constant for ``const`` nodes, the variable index for
    ``var`` nodes and the (real) exponent for ``pow`` nodes; it is ``None``
    otherwise.
    """

    op: str
    args: tuple = ()
    value: float | int | None = None

    def __post_init__(self):
        if self.op == "const":
            if self.args or not isinstance(self.value, float):
                raise PreconditionError("const node takes a float value and no children")
        elif self.op == "var":
            if self.args or not isinstance(self.value, int) or self.value < 0:
                raise PreconditionError("var node takes a non-negative index and no children")
        elif self.op == "pow":
            if len(self.args) != 1 or not isinstance(self.value, float):
                raise PreconditionError("pow node takes one child and a float exponent")
        elif self.op in UNARY_OPS:
            if len(self.args) != 1 or self.value is not None:
                raise PreconditionError(f"{self.op} node takes exactly one child")
        elif self.op in BINARY_OPS:
            if len(self.args) != 2 or self.value is not None:
                raise PreconditionError(f"{self.op} node takes exactly two children")
        else:
            raise PreconditionError(f"unknown node kind {self.op!r}")

    def __str__(self):
        return print_expr(self)


# -- smart constructors (fold operations on constants, nothing more) --------

def const(v: float) -> Expr:
    return Expr("const", value=float(v))


def var(i: int) -> Expr:
    return Expr("var", value=int(i))


def _is_const(e: Expr) -> bool:
    return e.op == "const"


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        if b.value == 0.0:
            raise DomainError("division by zero in constant expression")
        return const(a.value / b.value)
    return Expr("div", (a, b))


def neg(e: Expr) -> Expr:
    if _is_const(e):
        return const(-e.value)
    return Expr("neg", (e,))


def exp(e: Expr) -> Expr:
    if _is_const(e):
        return const(math.exp(e.value))
    return Expr("exp", (e,))


def ln(e: Expr) -> Expr:
    if _is_const(e):
        if e.value <= 0.0:
            raise DomainError("ln of a non-positive constant")
        return const(math.log(e.value))
    return Expr("ln", (e,))


def sin(e: Expr) -> Expr:
    if _is_const(e):
        return const(math.sin(e.value))
    return Expr("sin", (e,))


def cos(e: Expr) -> Expr:
    if _is_const(e):
        return const(math.cos(e.value))
    return Expr("cos", (e,))


def power(base: Expr, exponent: float) -> Expr:
    exponent = float(exponent)
    if _is_const(base):
        return const(_pow_value(base.value, exponent))
    return Expr("pow", (base,), exponent)


def _pow_value(b: float, p: float) -> float:
    """Real power. Integer exponents act as repeated multiplication (any
    base); non-integer exponents require a non-negative base."""
    if p.is_integer():
        n = int(p)
        if n < 0 and b == 0.0:
            raise DomainError("zero base with negative exponent")
        return float(b) ** n
    if b < 0.0:
        raise DomainError("negative base with non-integer exponent")
    if b == 0.0 and p < 0.0:
        raise DomainError("zero base with negative exponent")
    return b ** p


# -- evaluation --------------------------------------------------------------

def eval_expr(e: Expr, x) -> float:
    """Evaluate ``e`` at point ``x`` (indexable by variable index)."""
    op = e.op
    if op == "const":
        return e.value
    if op == "var":
        return float(x[e.value])
    if op == "add":
        return eval_expr(e.args[0], x) + eval_expr(e.args[1], x)
    if op == "sub":
        return eval_expr(e.args[0], x) - eval_expr(e.args[1], x)
    if op == "mul":
        return eval_expr(e.args[0], x) * eval_expr(e.args[1], x)
    if op == "div":
        d = eval_expr(e.args[1], x)
        if d == 0.0:
            raise DomainError("division by zero")
        return eval_expr(e.args[0], x) / d
    if op == "neg":
        return -eval_expr(e.args[0], x)
    if op == "exp":
        v = eval_expr(e.args[0], x)
        try:
            return math.exp(v)
        except OverflowError:
            raise DomainError("overflow in exp") from None
    if op == "ln":
        v = eval_expr(e.args[0], x)
        if v <= 0.0:
            raise DomainError(f"ln of non-positive value {v}")
        return math.log(v)
    if op == "sin":
        return math.sin(eval_expr(e.args[0], x))
    if op == "cos":
        return math.cos(eval_expr(e.args[0], x))
    if op == "pow":
        return _pow_value(eval_expr(e.args[0], x), e.value)
    raise PreconditionError(f"unknown node kind {op!r}")


def uses_var(e: Expr, i: int) -> bool:
    if e.op == "var":
        return e.value == i
    return any(uses_var(a, i) for a in e.args)


def max_var_index(e: Expr) -> int:
    """Largest variable index appearing in ``e``, or -1 if none."""
    if e.op == "var":
        return e.value
    return max((max_var_index(a) for a in e.args), default=-1)


# -- differentiation ---------------------------------------------------------

def _simplified(e: Expr) -> Expr:
    """Drop multiplicative zeros/ones and double negations.

    Used internally to keep repeated derivatives from blowing up in size;
    canonical printing of user-built expressions is untouched by this.
    """
    if not e.args:
        return e
    args = tuple(_simplified(a) for a in e.args)
    op = e.op
    if op == "add":
        a, b = args
        if _is_const(a) and a.value == 0.0:
            return b
        if _is_const(b) and b.value == 0.0:
            return a
        return add(a, b)
    if op == "sub":
        a, b = args
        if _is_const(b) and b.value == 0.0:
            return a
        if _is_const(a) and a.value == 0.0:
            return neg(b)
        return sub(a, b)
    if op == "mul":
        a, b = args
        if (_is_const(a) and a.value == 0.0) or (_is_const(b) and b.value == 0.0):
            return const(0.0)
        if _is_const(a) and a.value == 1.0:
            return b
        if _is_const(b) and b.value == 1.0:
            return a
        return mul(a, b)
    if op == "div":
        a, b = args
        if _is_const(a) and a.value == 0.0:
            return const(0.0)
        if _is_const(b) and b.value == 1.0:
            return a
        return div(a, b)
    if op == "neg":
        (a,) = args
        if a.op == "neg":
            return a.args[0]
        return neg(a)
    if op == "pow":
        (a,) = args
        if e.value == 1.0:
            return a
        if e.value == 0.0:
            return const(1.0)
        return power(a, e.value)
    return Expr(op, args)


def diff_expr(e: Expr, wrt: int) -> Expr:
    """Exact symbolic derivative of ``e`` with respect to variable ``wrt``."""
    return _simplified(_diff(e, wrt))


def _diff(e: Expr, i: int) -> Expr:
    op = e.op
    if op == "const":
        return const(0.0)
    if op == "var":
        return const(1.0 if e.value == i else 0.0)
    if op == "add":
        return add(_diff(e.args[0], i), _diff(e.args[1], i))
    if op == "sub":
        return sub(_diff(e.args[0], i), _diff(e.args[1], i))
    if op == "mul":
        u, v = e.args
        return add(mul(_diff(u, i), v), mul(u, _diff(v, i)))
    if op == "div":
        u, v = e.args
        return div(sub(mul(_diff(u, i), v), mul(u, _diff(v, i))), mul(v, v))
    if op == "neg":
        return neg(_diff(e.args[0], i))
    if op == "exp":
        return mul(exp(e.args[0]), _diff(e.args[0], i))
    if op == "ln":
        return div(_diff(e.args[0], i), e.args[0])
    if op == "sin":
        return mul(cos(e.args[0]), _diff(e.args[0], i))
    if op == "cos":
        return mul(neg(sin(e.args[0])), _diff(e.args[0], i))
    if op == "pow":
        u = e.args[0]
        p = e.value
        if p == 0.0:
            return const(0.0)
        return mul(mul(const(p), power(u, p - 1.0)), _diff(u, i))
    raise PreconditionError(f"unknown node kind {op!r}")


# -- printing ----------------------------------------------------------------

def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def print_expr(e: Expr) -> str:
    """Canonical fully parenthesized rendering; re-parses to an equal tree."""
    op = e.op
    if op == "const":
        if e.value < 0:
            return f"neg({_fmt_number(-e.value)})"
        return _fmt_number(e.value)
    if op == "var":
        return f"x{e.value}"
    if op in UNARY_OPS:
        return f"{op}({print_expr(e.args[0])})"
    if op == "pow":
        return f"({print_expr(e.args[0])}^{_fmt_number(e.value)})"
    sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
    return f"({print_expr(e.args[0])} {sym} {print_expr(e.args[1])})"


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<word>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

_FUNCS = {"sin": sin, "cos": cos, "exp": exp, "ln": ln, "neg": neg}


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items = []  # (kind, lexeme, position)
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                ws = len(text[pos:]) - len(text[pos:].lstrip())
                raise ParseError(f"unexpected character {text[pos + ws]!r}", pos + ws)
            for kind in ("num", "word", "op"):
                lex = m.group(kind)
                if lex is not None:
                    self.items.append((kind, lex, m.start(kind)))
                    break
            pos = m.end()
        self.i = 0

    def peek(self):
        if self.i < len(self.items):
            return self.items[self.i]
        return ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok


def parse_expr(text: str, n_in: int) -> Expr:
    """Parse ``text`` into an expression over at most ``n_in`` variables."""
    toks = _Tokens(text)
    e = _parse_sum(toks, n_in)
    kind, lex, pos = toks.peek()
    if kind != "eof":
        raise ParseError(f"unexpected token {lex!r}", pos)
    return e


def _parse_sum(toks, n_in):
    e = _parse_term(toks, n_in)
    while True:
        kind, lex, _ = toks.peek()
        if kind == "op" and lex in "+-":
            toks.next()
            rhs = _parse_term(toks, n_in)
            e = add(e, rhs) if lex == "+" else sub(e, rhs)
        else:
            return e


def _parse_term(toks, n_in):
    e = _parse_factor(toks, n_in)
    while True:
        kind, lex, _ = toks.peek()
        if kind == "op" and lex in "*/":
            toks.next()
            rhs = _parse_factor(toks, n_in)
            e = mul(e, rhs) if lex == "*" else div(e, rhs)
        else:
            return e


def _parse_factor(toks, n_in):
    e = _parse_base(toks, n_in)
    kind, lex, _ = toks.peek()
    if kind == "op" and lex == "^":
        toks.next()
        sign = 1.0
        kind, lex, pos = toks.peek()
        if kind == "op" and lex in "+-":
            toks.next()
            sign = -1.0 if lex == "-" else 1.0
            kind, lex, pos = toks.peek()
        if kind != "num":
            raise ParseError("expected a numeric exponent after '^'", pos)
        toks.next()
        e = power(e, sign * float(lex))
    return e


def _parse_base(toks, n_in):
    kind, lex, pos = toks.next()
    if kind == "num":
        return const(float(lex))
    if kind == "word":
        m = re.fullmatch(r"x(\d+)", lex)
        if m:
            idx = int(m.group(1))
            if idx >= n_in:
                raise ParseError(f"variable x{idx} out of range for dimension {n_in}", pos)
            return var(idx)
        if lex in _FUNCS:
            kind2, lex2, pos2 = toks.next()
            if not (kind2 == "op" and lex2 == "("):
                raise ParseError(f"expected '(' after {lex!r}", pos2)
            inner = _parse_sum(toks, n_in)
            kind3, lex3, pos3 = toks.next()
            if not (kind3 == "op" and lex3 == ")"):
                raise ParseError("expected ')'", pos3)
            return _FUNCS[lex](inner)
        raise ParseError(f"unknown identifier {lex!r}", pos)
    if kind == "op" and lex == "(":
        inner = _parse_sum(toks, n_in)
        kind2, lex2, pos2 = toks.next()
        if not (kind2 == "op" and lex2 == ")"):
            raise ParseError("expected ')'", pos2)
        return inner
    raise ParseError(f"expected a number, variable, function or '('", pos)


# -- domains and function specifications -------------------------------------

@dataclass(frozen=True)
class DomainDim:
    """One coordinate interval [lo, hi] with open/closed endpoint flags."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False
    positive: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise PreconditionError(f"empty interval [{self.lo}, {self.hi}]")
        if self.positive and self.lo < 0:
            raise PreconditionError("positivity flag requires lo >= 0")

    def contains(self, v: float) -> bool:
        if self.positive and v <= 0.0:
            return False
        if self.lo_open:
            if v <= self.lo:
                return False
        elif v < self.lo:
            return False
        if self.hi_open:
            if v >= self.hi:
                return False
        elif v > self.hi:
            return False
        return True

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


@dataclass(frozen=True)
class Domain:
    dims: tuple

    def __post_init__(self):
        if not all(isinstance(d, DomainDim) for d in self.dims):
            raise PreconditionError("Domain takes a tuple of DomainDim")

    @property
    def n(self) -> int:
        return len(self.dims)

    def contains(self, x) -> bool:
        return all(d.contains(float(v)) for d, v in zip(self.dims, x))


def interval(lo: float, hi: float, lo_open: bool = False, hi_open: bool = False,
             positive: bool = False) -> Domain:
    """1-D domain shorthand."""
    return Domain((DomainDim(lo, hi, lo_open, hi_open, positive),))


def box(*bounds) -> Domain:
    """n-D domain from (lo, hi) pairs, all endpoints closed."""
    return Domain(tuple(DomainDim(lo, hi) for lo, hi in bounds))


def reals(n: int = 1) -> Domain:
    return Domain(tuple(DomainDim(-math.inf, math.inf, True, True) for _ in range(n)))


def positive_axis() -> Domain:
    return interval(0.0, math.inf, lo_open=True, hi_open=True, positive=True)


@dataclass(frozen=True)
class FuncSpec:
    """A named map R^n_in -> R^n_out given by one expression per component."""

    name: str
    n_in: int
    n_out: int
    components: tuple
    domain: Domain

    def __post_init__(self):
        if len(self.components) != self.n_out:
            raise PreconditionError(
                f"{self.name}: {len(self.components)} components for n_out={self.n_out}")
        if self.domain.n != self.n_in:
            raise PreconditionError(f"{self.name}: domain dimension != n_in")
        for c in self.components:
            if max_var_index(c) >= self.n_in:
                raise PreconditionError(
                    f"{self.name}: component references x{max_var_index(c)} "
                    f"but n_in={self.n_in}")

    def eval(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.n_in,):
            raise PreconditionError(
                f"{self.name}: expected point of dimension {self.n_in}, got {x.shape}")
        if not self.domain.contains(x):
            raise DomainError(f"{self.name}: point {x.tolist()} outside domain")
        out = np.empty(self.n_out)
        for i, c in enumerate(self.components):
            try:
                v = eval_expr(c, x)
            except DomainError as err:
                raise DomainError(str(err), component=i) from None
            if not math.isfinite(v):
                raise DomainError(f"non-finite value {v}", component=i)
            out[i] = v
        return out

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def component(self, i: int) -> "FuncSpec":
        return FuncSpec(f"{self.name}[{i}]", self.n_in, 1, (self.components[i],), self.domain)


def scalar_spec(name: str, e: Expr, domain: Domain) -> FuncSpec:
    return FuncSpec(name, domain.n, 1, (e,), domain)


def diff(spec: FuncSpec, wrt: int) -> FuncSpec:
    """Componentwise symbolic derivative with respect to variable ``wrt``."""
    if not 0 <= wrt < spec.n_in:
        raise PreconditionError(f"wrt={wrt} out of range for n_in={spec.n_in}")
    comps = tuple(diff_expr(c, wrt) for c in spec.components)
    return FuncSpec(f"d{spec.name}/dx{wrt}", spec.n_in, spec.n_out, comps, spec.domain)


def jacobian(spec: FuncSpec) -> FuncSpec:
    """All first partials as one spec, row-major: component i*n_in + j is
    the derivative of output i with respect to x_j."""
    comps = tuple(diff_expr(c, j) for c in spec.components for j in range(spec.n_in))
    return FuncSpec(f"J[{spec.name}]", spec.n_in, spec.n_out * spec.n_in, comps, spec.domain)


def jacobian_matrix(spec: FuncSpec, x) -> np.ndarray:
    return jacobian(spec).eval(x).reshape(spec.n_out, spec.n_in)


def gradient(spec: FuncSpec, component: int = 0) -> FuncSpec:
    """Gradient of one scalar component as a spec with n_out = n_in."""
    c = spec.components[component]
    comps = tuple(diff_expr(c, j) for j in range(spec.n_in))
    return FuncSpec(f"grad[{spec.name}]", spec.n_in, spec.n_in, comps, spec.domain)


def hessian(spec: FuncSpec, component: int = 0) -> FuncSpec:
    """Hessian of one scalar component, row-major, symmetric by construction:
    entries (i, j) and (j, i) are the same expression object."""
    c = spec.components[component]
    n = spec.n_in
    firsts = [diff_expr(c, i) for i in range(n)]
    entries = {}
    for i in range(n):
        for j in range(i, n):
            entries[(i, j)] = diff_expr(firsts[i], j)
    comps = tuple(entries[(min(i, j), max(i, j))] for i in range(n) for j in range(n))
    return FuncSpec(f"H[{spec.name}]", n, n * n, comps, spec.domain)


def hessian_matrix(spec: FuncSpec, x, component: int = 0) -> np.ndarray:
    n = spec.n_in
    return hessian(spec, component).eval(x).reshape(n, n)


# -- sampling grids ----------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Cartesian sampling grid over a finite domain.

    Open endpoints are inset by ``inset`` times the span so that samples
    stay away from singularities sitting on the boundary.
    """

    domain: Domain
    counts: tuple
    inset: float = 1e-3

    def __post_init__(self):
        if len(self.counts) != self.domain.n:
            raise PreconditionError("one sample count per dimension required")
        if any(c < 2 for c in self.counts):
            raise PreconditionError("sample counts must be >= 2")
        for d in self.domain.dims:
            if not d.finite:
                raise PreconditionError("grids require finite domain bounds")

    def axes(self):
        out = []
        for d, c in zip(self.domain.dims, self.counts):
            span = d.hi - d.lo
            lo = d.lo + self.inset * span if d.lo_open else d.lo
            hi = d.hi - self.inset * span if d.hi_open else d.hi
            if d.positive and lo <= 0.0:
                lo = self.inset * span
            out.append(np.linspace(lo, hi, c))
        return out

    def points(self) -> np.ndarray:
        """All grid points as an array of shape (#points, n)."""
        axes = self.axes()
        return np.array([p for p in _cartesian(*axes)], dtype=float)

    @property
    def span(self) -> float:
        return max(d.hi - d.lo for d in self.domain.dims)


def grid_1d(lo: float, hi: float, count: int, **domain_flags) -> Grid:
    return Grid(interval(lo, hi, **domain_flags), (count,))


# -- JSON wire format ---------------------------------------------------------

def domain_to_list(domain: Domain) -> list:
    out = []
    for d in domain.dims:
        out.append({
            "lo": None if d.lo == -math.inf else d.lo,
            "hi": None if d.hi == math.inf else d.hi,
            "lo_open": d.lo_open,
            "hi_open": d.hi_open,
            "positive": d.positive,
        })
    return out


def domain_from_list(items: list) -> Domain:
    dims = []
    for d in items:
        lo = -math.inf if d.get("lo") is None else float(d["lo"])
        hi = math.inf if d.get("hi") is None else float(d["hi"])
        dims.append(DomainDim(lo, hi, bool(d.get("lo_open", False)),
                              bool(d.get("hi_open", False)), bool(d.get("positive", False))))
    return Domain(tuple(dims))


def funcspec_to_dict(spec: FuncSpec) -> dict:
    return {
        "name": spec.name,
        "n_in": spec.n_in,
        "n_out": spec.n_out,
        "components": [print_expr(c) for c in spec.components],
        "domain": domain_to_list(spec.domain),
    }


def funcspec_from_dict(d: dict) -> FuncSpec:
    n_in = int(d["n_in"])
    comps = tuple(parse_expr(s, n_in) for s in d["components"])
    return FuncSpec(str(d["name"]), n_in, int(d["n_out"]), comps,
                    domain_from_list(d["domain"]))


def load_funcspec(path) -> FuncSpec:
    with open(path) as fh:
        return funcspec_from_dict(json.load(fh))
