"""Expression trees: immutable arithmetic/transcendental ASTs over named
coordinates and parameters, with exact symbolic differentiation and fast
numeric evaluation.

Nodes are built through the smart constructors below, which fold constants
and prune additive/multiplicative identities.  Simplification is best-effort
only; nothing downstream relies on canonical forms.  Trees share subterms
freely (DAG), and both differentiation and compiled evaluation memoise on
node identity, so shared structure is processed once.

Evaluation is IEEE double precision throughout and deterministic: the same
tree at the same point always reproduces the same bits.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import DomainError, UnknownNameError

_UNARY_FUNCS = ("exp", "log", "sqrt", "sin", "cos", "tan", "sinh", "cosh", "tanh")
FUNCTION_NAMES = frozenset(_UNARY_FUNCS)

_OPS = frozenset(
    ("const", "coord", "param", "neg", "add", "sub", "mul", "div", "pow", "spline")
    + _UNARY_FUNCS
)


class SplineData:
    """Piecewise-cubic coefficients: on [knots[i], knots[i+1]] the value is
    c0 + c1*t + c2*t^2 + c3*t^3 with t = x - knots[i].  Queries outside the
    knot range extrapolate the end cubics."""

    __slots__ = ("knots", "coeffs")

    def __init__(self, knots, coeffs):
        self.knots = np.asarray(knots, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (len(self.knots) - 1, 4):
            raise ValueError("coeffs must have shape (len(knots)-1, 4)")

    def derivative(self) -> "SplineData":
        c = self.coeffs
        dc = np.zeros_like(c)
        dc[:, 0] = c[:, 1]
        dc[:, 1] = 2.0 * c[:, 2]
        dc[:, 2] = 3.0 * c[:, 3]
        return SplineData(self.knots, dc)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, len(self.knots) - 2)
        t = x - self.knots[idx]
        c = self.coeffs[idx]
        return c[..., 0] + t * (c[..., 1] + t * (c[..., 2] + t * c[..., 3]))


class Expr:
    """One node of an expression tree.  Immutable after construction (the
    derivative/program slots are pure caches)."""

    __slots__ = ("op", "args", "value", "name", "exponent", "data",
                 "_hash", "_dcache", "_prog")

    def __init__(self, op, args=(), value=None, name=None, exponent=None, data=None):
        self.op = op
        self.args = tuple(args)
        self.value = value
        self.name = name
        self.exponent = exponent
        self.data = data
        self._dcache = None
        self._prog = None
        self._hash = hash((op, value, name, exponent,
                           id(data) if data is not None else None,
                           tuple(a._hash for a in self.args)))

    # -- structural identity --------------------------------------------

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if (self._hash != other._hash or self.op != other.op
                or self.value != other.value or self.name != other.name
                or self.exponent != other.exponent):
            return False
        if self.data is not None or other.data is not None:
            if self.data is None or other.data is None:
                return False
            if not (np.array_equal(self.data.knots, other.data.knots)
                    and np.array_equal(self.data.coeffs, other.data.coeffs)):
                return False
        return self.args == other.args

    def __repr__(self):
        try:
            return f"Expr({render(self)})"
        except ValueError:
            return f"Expr(<{self.op}>)"

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return powi(self, k)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float)):
        return const(float(v))
    raise TypeError(f"cannot coerce {type(v)!r} to Expr")


# --- smart constructors ------------------------------------------------------

ZERO = Expr("const", value=0.0)
ONE = Expr("const", value=1.0)


def const(v: float) -> Expr:
    v = float(v)
    if v == 0.0:
        return ZERO
    if v == 1.0:
        return ONE
    return Expr("const", value=v)


def coord(name: str) -> Expr:
    return Expr("coord", name=name)


def param(name: str) -> Expr:
    return Expr("param", name=name)


def _is_const(e, v=None):
    return e.op == "const" and (v is None or e.value == v)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Expr("sub", (a, b))


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return const(a.value / b.value)
    return Expr("div", (a, b))


def powi(base: Expr, k) -> Expr:
    """Power with an integer or Fraction exponent (keeps the derivative
    closed over the node vocabulary; general x^y is exp(y*log(x)))."""
    if isinstance(k, Fraction) and k.denominator == 1:
        k = int(k)
    if not isinstance(k, (int, Fraction)):
        raise TypeError(f"exponent must be int or Fraction, got {type(k)!r}")
    if k == 0:
        return ONE
    if k == 1:
        return base
    if _is_const(base):
        v = base.value
        if isinstance(k, int):
            if not (v == 0.0 and k < 0):
                return const(float(v) ** k)
        elif v > 0.0:
            return const(float(v) ** float(k))
    return Expr("pow", (base,), exponent=k)


def func(fname: str, arg: Expr) -> Expr:
    if fname not in FUNCTION_NAMES:
        raise ValueError(f"unknown function '{fname}'")
    if _is_const(arg):
        v = arg.value
        ok = not ((fname == "log" and v <= 0.0) or (fname == "sqrt" and v < 0.0))
        if ok:
            return const(getattr(math, fname)(v))
    return Expr(fname, (arg,))


def exp(a):
    return func("exp", as_expr(a))


def log(a):
    return func("log", as_expr(a))


def sqrt(a):
    return func("sqrt", as_expr(a))


def sin(a):
    return func("sin", as_expr(a))


def cos(a):
    return func("cos", as_expr(a))


def tan(a):
    return func("tan", as_expr(a))


def sinh(a):
    return func("sinh", as_expr(a))


def cosh(a):
    return func("cosh", as_expr(a))


def tanh(a):
    return func("tanh", as_expr(a))


def spline(arg: Expr, data: SplineData) -> Expr:
    return Expr("spline", (arg,), data=data)


def add_many(terms) -> Expr:
    """Balanced sum; keeps tree depth logarithmic in the number of terms."""
    terms = [t for t in terms if not _is_const(t, 0.0)]
    if not terms:
        return ZERO
    while len(terms) > 1:
        terms = [add(terms[i], terms[i + 1]) if i + 1 < len(terms) else terms[i]
                 for i in range(0, len(terms), 2)]
    return terms[0]


# --- differentiation ---------------------------------------------------------

def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic partial derivative with respect to coordinate `var`.
    Derivatives of shared subterms are shared, so repeated differentiation
    (up to the 4th-order quantities the checks need) stays compact."""
    if e._dcache is None:
        e._dcache = {}
    cached = e._dcache.get(var)
    if cached is not None:
        return cached
    d = _diff(e, var)
    e._dcache[var] = d
    return d


def _diff(e: Expr, var: str) -> Expr:
    op = e.op
    if op in ("const", "param"):
        return ZERO
    if op == "coord":
        return ONE if e.name == var else ZERO
    if op == "neg":
        return neg(differentiate(e.args[0], var))
    if op == "add":
        return add(differentiate(e.args[0], var), differentiate(e.args[1], var))
    if op == "sub":
        return sub(differentiate(e.args[0], var), differentiate(e.args[1], var))
    if op == "mul":
        a, b = e.args
        return add(mul(differentiate(a, var), b), mul(a, differentiate(b, var)))
    if op == "div":
        a, b = e.args
        num = sub(mul(differentiate(a, var), b), mul(a, differentiate(b, var)))
        return div(num, powi(b, 2))
    if op == "pow":
        a = e.args[0]
        k = e.exponent
        return mul(const(float(k)), mul(powi(a, k - 1), differentiate(a, var)))
    a = e.args[0]
    da = differentiate(a, var)
    if op == "exp":
        return mul(e, da)
    if op == "log":
        return div(da, a)
    if op == "sqrt":
        return div(da, mul(const(2.0), e))
    if op == "sin":
        return mul(cos(a), da)
    if op == "cos":
        return neg(mul(sin(a), da))
    if op == "tan":
        return mul(add(ONE, powi(tan(a), 2)), da)
    if op == "sinh":
        return mul(cosh(a), da)
    if op == "cosh":
        return mul(sinh(a), da)
    if op == "tanh":
        return mul(sub(ONE, powi(tanh(a), 2)), da)
    if op == "spline":
        return mul(spline(a, e.data.derivative()), da)
    raise ValueError(f"cannot differentiate node '{op}'")


# --- compiled evaluation -----------------------------------------------------

class Program:
    """Topologically linearised DAG over one or more roots, evaluated with
    numpy so a whole batch of points goes through in one pass."""

    def __init__(self, roots):
        self.roots = list(roots)
        order = []
        seen = set()
        stack = [(r, False) for r in reversed(self.roots)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for a in reversed(node.args):
                if id(a) not in seen:
                    stack.append((a, False))
        self.order = order
        slot = {id(n): i for i, n in enumerate(order)}
        self.instructions = [(n, tuple(slot[id(a)] for a in n.args)) for n in order]
        self.root_slots = [slot[id(r)] for r in self.roots]

    def __call__(self, env):
        """`env` maps coordinate and parameter names to scalars or equally
        shaped arrays; returns a list of values, one per root."""
        vals = [None] * len(self.instructions)
        for i, (n, argslots) in enumerate(self.instructions):
            op = n.op
            if op == "const":
                vals[i] = n.value
            elif op in ("coord", "param"):
                try:
                    vals[i] = env[n.name]
                except KeyError:
                    raise UnknownNameError(n.name) from None
            elif op == "add":
                vals[i] = np.add(vals[argslots[0]], vals[argslots[1]])
            elif op == "sub":
                vals[i] = np.subtract(vals[argslots[0]], vals[argslots[1]])
            elif op == "mul":
                vals[i] = np.multiply(vals[argslots[0]], vals[argslots[1]])
            elif op == "div":
                b = vals[argslots[1]]
                if np.any(np.asarray(b) == 0.0):
                    raise DomainError("division by zero", node=n, point=_first_bad(b, np.asarray(b) == 0.0))
                vals[i] = np.divide(vals[argslots[0]], b)
            elif op == "neg":
                vals[i] = np.negative(vals[argslots[0]])
            elif op == "pow":
                base = vals[argslots[0]]
                k = n.exponent
                if isinstance(k, int):
                    if k < 0 and np.any(np.asarray(base) == 0.0):
                        raise DomainError("zero base with negative exponent", node=n,
                                          point=_first_bad(base, np.asarray(base) == 0.0))
                    vals[i] = np.power(base, k)
                else:
                    bad = np.asarray(base) < 0.0 if k > 0 else np.asarray(base) <= 0.0
                    if np.any(bad):
                        raise DomainError("fractional power of negative base", node=n,
                                          point=_first_bad(base, bad))
                    vals[i] = np.power(base, float(k))
            elif op == "log":
                a = vals[argslots[0]]
                bad = np.asarray(a) <= 0.0
                if np.any(bad):
                    raise DomainError("log of non-positive value", node=n, point=_first_bad(a, bad))
                vals[i] = np.log(a)
            elif op == "sqrt":
                a = vals[argslots[0]]
                bad = np.asarray(a) < 0.0
                if np.any(bad):
                    raise DomainError("sqrt of negative value", node=n, point=_first_bad(a, bad))
                vals[i] = np.sqrt(a)
            elif op == "spline":
                vals[i] = n.data(vals[argslots[0]])
            else:
                vals[i] = getattr(np, op)(vals[argslots[0]])
        return [vals[s] for s in self.root_slots]


def _first_bad(arr, mask):
    arr = np.asarray(arr)
    mask = np.asarray(mask)
    if arr.ndim == 0:
        return float(arr)
    return float(arr[np.argmax(mask)])


def compile_program(*roots) -> Program:
    return Program(roots)


def evaluate(e: Expr, point=None, params=None) -> float:
    """Value of the tree at `point` (coordinate map) with parameter bindings
    `params`.  Raises DomainError on log/div/sqrt violations, reporting the
    offending subtree and value."""
    if e._prog is None:
        e._prog = Program([e])
    env = {}
    if point:
        env.update(point)
    if params:
        env.update(params)
    return float(e._prog(env)[0])


# --- rendering ---------------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def render(e: Expr) -> str:
    """Source text that reparses to a structurally identical tree (for trees
    in the grammar vocabulary; spline nodes have no source form)."""
    return _render(e, 0)


def _prec_of(e: Expr) -> int:
    if e.op == "const" and e.value < 0.0:
        return 3
    return _PREC.get(e.op, 5)


def _render(e: Expr, need: int) -> str:
    op = e.op
    if op == "const":
        v = e.value
        if not math.isfinite(v):
            raise ValueError("non-finite constant has no source form")
        s = repr(v)
    elif op in ("coord", "param"):
        s = e.name
    elif op == "neg":
        s = "-" + _render(e.args[0], 3)
    elif op in ("add", "sub"):
        sym = " + " if op == "add" else " - "
        s = _render(e.args[0], 1) + sym + _render(e.args[1], 2)
    elif op in ("mul", "div"):
        sym = "*" if op == "mul" else "/"
        s = _render(e.args[0], 2) + sym + _render(e.args[1], 3)
    elif op == "pow":
        k = e.exponent
        if isinstance(k, int):
            ks = str(k)
        else:
            ks = f"({k.numerator}/{k.denominator})"
        s = _render(e.args[0], 5) + "^" + ks
    elif op == "spline":
        raise ValueError("spline nodes have no source form")
    else:
        s = f"{op}({_render(e.args[0], 0)})"
    if _prec_of(e) < need:
        return "(" + s + ")"
    return s


# --- python code generation (fast scalar path for ODE stepping) ---------------

def to_python_source(e: Expr, *, mathmod: str = "math") -> str:
    op = e.op
    if op == "const":
        return repr(e.value)
    if op in ("coord", "param"):
        return e.name
    if op == "neg":
        return f"(-{to_python_source(e.args[0])})"
    if op in ("add", "sub", "mul", "div"):
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
        return f"({to_python_source(e.args[0])}{sym}{to_python_source(e.args[1])})"
    if op == "pow":
        k = e.exponent
        ks = str(k) if isinstance(k, int) else f"({k.numerator}/{k.denominator})"
        return f"({to_python_source(e.args[0])}**{ks})"
    if op == "spline":
        raise ValueError("spline nodes cannot be code-generated")
    return f"{mathmod}.{op}({to_python_source(e.args[0])})"


def compile_scalar_function(e: Expr, arg_names) -> "callable":
    """eval()-compiled scalar function of the named arguments (deterministic;
    used for tight ODE stepping loops where numpy overhead dominates)."""
    src = f"lambda {', '.join(arg_names)}: {to_python_source(e)}"
    return eval(src, {"math": math})


# --- derived helpers ----------------------------------------------------------

def free_names(e: Expr):
    """Coordinate and parameter names referenced by the tree."""
    coords, params = set(), set()
    stack = [e]
    seen = set()
    while stack:
        n = stack.pop()
        if id(n) in seen:
            continue
        seen.add(id(n))
        if n.op == "coord":
            coords.add(n.name)
        elif n.op == "param":
            params.add(n.name)
        stack.extend(n.args)
    return coords, params
