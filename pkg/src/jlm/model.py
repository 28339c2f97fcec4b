"""Planar ODE systems, second-order equations and changes of variables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Mapping, Union

import sympy as sp

from . import expr as ex
from .errors import ModelError, NonInvertible, ParseError

Expr = sp.Expr


@dataclass(frozen=True, eq=False)
class ChangeOfVariables:
    """``old = forward(t, new)`` together with ``new = inverse(t, old)``."""

    old: tuple[str, str]
    new: tuple[str, str]
    forward: tuple[Expr, Expr]
    inverse: tuple[Expr, Expr]
    time: str = "t"

    @cached_property
    def jacobian(self) -> Expr:
        """det d(old)/d(new), expressed in the new variables."""
        J = sp.Matrix(2, 2, lambda i, j: sp.diff(self.forward[i], ex.symbol(self.new[j])))
        return ex.simplify(J.det())

    @cached_property
    def inverse_jacobian(self) -> Expr:
        """det d(new)/d(old), expressed in the old variables."""
        J = sp.Matrix(2, 2, lambda i, j: sp.diff(self.inverse[i], ex.symbol(self.old[j])))
        return ex.simplify(J.det())

    def inverted(self) -> "ChangeOfVariables":
        return ChangeOfVariables(self.new, self.old, self.inverse, self.forward, self.time)

    def to_new(self, e) -> Expr:
        """Rewrite an expression in the old variables in terms of the new ones."""
        return sp.sympify(e).xreplace({ex.symbol(o): f for o, f in zip(self.old, self.forward)})

    def to_old(self, e) -> Expr:
        return sp.sympify(e).xreplace({ex.symbol(n): f for n, f in zip(self.new, self.inverse)})

    def check(self, n: int = 20, seed: int = 0) -> None:
        """Verify forward∘inverse = identity and a nonsingular Jacobian."""
        for o, f in zip(self.old, self.forward):
            back = self.to_old(f)
            if not ex.is_zero(back - ex.symbol(o), n=n, seed=seed):
                raise NonInvertible(f"inverse map does not invert {o} -> {ex.to_str(f)}")
        if ex.is_zero(self.jacobian, n=n, seed=seed):
            raise NonInvertible("Jacobian determinant vanishes identically")

    @staticmethod
    def identity(variables: tuple[str, str], time: str = "t") -> "ChangeOfVariables":
        s = tuple(ex.symbol(v) for v in variables)
        return ChangeOfVariables(tuple(variables), tuple(variables), s, s, time)


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """``u1' = rhs[0](t, u1, u2)``, ``u2' = rhs[1](t, u1, u2)``."""

    variables: tuple[str, str]
    rhs: tuple[Expr, Expr]
    params: Mapping[str, Fraction | None] = field(default_factory=dict)
    time: str = "t"
    positive: frozenset[str] = frozenset()
    name: str = ""
    change: ChangeOfVariables | None = None

    def __post_init__(self):
        allowed = {self.time, *self.variables, *self.params}
        for v, r in zip(self.variables, self.rhs):
            bad = ex.free_names(r) - allowed
            if bad:
                raise ModelError(f"undeclared symbol(s) {sorted(bad)} in equation for {v}")

    @property
    def coords(self) -> tuple[sp.Symbol, sp.Symbol]:
        return tuple(ex.symbol(v) for v in self.variables)

    @property
    def velocities(self) -> tuple[sp.Symbol, sp.Symbol]:
        return tuple(ex.dot(v) for v in self.variables)

    @property
    def t(self) -> sp.Symbol:
        return ex.symbol(self.time)

    @property
    def state_symbols(self) -> list[sp.Symbol]:
        return [self.t, *self.coords]

    @property
    def param_values(self) -> dict[str, Fraction]:
        return {k: v for k, v in self.params.items() if v is not None}

    def on_shell(self, e) -> Expr:
        """Replace velocities by the right-hand sides."""
        return sp.sympify(e).xreplace(dict(zip(self.velocities, self.rhs)))

    def total_derivative(self, e) -> Expr:
        """d/dt along the flow."""
        e = sp.sympify(e)
        out = sp.diff(e, self.t)
        for u, f in zip(self.coords, self.rhs):
            out += f * sp.diff(e, u)
        return out

    def divergence(self) -> Expr:
        return sum(sp.diff(f, u) for u, f in zip(self.coords, self.rhs))

    def bind(self, **values) -> "OdeSystem":
        params = dict(self.params)
        for k, v in values.items():
            if k not in params:
                raise ModelError(f"unknown parameter {k!r}")
            params[k] = Fraction(v) if v is not None else None
        return replace(self, params=params)

    def describe(self) -> str:
        lines = [f"d{v}/d{self.time} = {ex.to_str(r)}" for v, r in zip(self.variables, self.rhs)]
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class Reduction:
    """How a second-order equation was obtained from a planar system."""

    system: OdeSystem
    kept: str
    eliminated: str
    back_substitution: Expr  # eliminated variable as a function of (t, x, x_dot)


@dataclass(frozen=True, eq=False)
class SecondOrderOde:
    """``x'' = rhs(t, x, x')``."""

    variable: str
    rhs: Expr
    params: Mapping[str, Fraction | None] = field(default_factory=dict)
    time: str = "t"
    positive: frozenset[str] = frozenset()
    name: str = ""
    origin: Reduction | None = None

    def __post_init__(self):
        allowed = {self.time, self.variable, ex.dot(self.variable).name, *self.params}
        bad = ex.free_names(self.rhs) - allowed
        if bad:
            raise ModelError(f"undeclared symbol(s) {sorted(bad)} in second-order equation")

    @property
    def x(self) -> sp.Symbol:
        return ex.symbol(self.variable)

    @property
    def xdot(self) -> sp.Symbol:
        return ex.dot(self.variable)

    @property
    def xddot(self) -> sp.Symbol:
        return ex.ddot(self.variable)

    @property
    def t(self) -> sp.Symbol:
        return ex.symbol(self.time)

    @property
    def state_symbols(self) -> list[sp.Symbol]:
        return [self.t, self.x, self.xdot]

    @property
    def variables(self) -> tuple[str, str]:
        return (self.variable, self.xdot.name)

    @property
    def param_values(self) -> dict[str, Fraction]:
        return {k: v for k, v in self.params.items() if v is not None}

    def total_derivative(self, e) -> Expr:
        e = sp.sympify(e)
        return sp.diff(e, self.t) + self.xdot * sp.diff(e, self.x) + self.rhs * sp.diff(e, self.xdot)

    def as_system(self) -> OdeSystem:
        """First-order form in (x, x_dot)."""
        return OdeSystem((self.variable, self.xdot.name), (self.xdot, self.rhs), self.params,
                         self.time, self.positive, self.name)

    def bind(self, **values) -> "SecondOrderOde":
        params = dict(self.params)
        for k, v in values.items():
            if k not in params:
                raise ModelError(f"unknown parameter {k!r}")
            params[k] = Fraction(v) if v is not None else None
        return replace(self, params=params)

    def describe(self) -> str:
        return f"{self.variable}'' = {ex.to_str(self.rhs)}"


Model = Union[OdeSystem, SecondOrderOde]


def apply_change(sys: OdeSystem, cov: ChangeOfVariables, name: str | None = None,
                 positive: frozenset[str] | None = None) -> OdeSystem:
    """Rewrite ``sys`` (in ``cov.old``) in the new variables of ``cov``."""
    if tuple(sys.variables) != tuple(cov.old):
        raise ModelError(f"change of variables expects {cov.old}, system has {sys.variables}")
    new = [ex.symbol(v) for v in cov.new]
    t = sys.t
    J = sp.Matrix(2, 2, lambda i, j: sp.diff(cov.forward[i], new[j]))
    det = ex.simplify(J.det())
    if det == 0 or ex.is_zero(det):
        raise NonInvertible("Jacobian determinant of the change of variables is identically zero")
    rhs_old = sp.Matrix([cov.to_new(f) - sp.diff(w, t) for f, w in zip(sys.rhs, cov.forward)])
    adj = sp.Matrix([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]])
    rhs_new = adj * rhs_old / det
    rhs = tuple(_tidy(r, [t, *new]) for r in rhs_new)
    return OdeSystem(tuple(cov.new), rhs, dict(sys.params), sys.time,
                     positive if positive is not None else frozenset(),
                     name if name is not None else sys.name, cov)


def _tidy(e: Expr, variables) -> Expr:
    e = ex.simplify(sp.cancel(sp.together(ex.simplify(e))), variables)
    return sp.factor_terms(e)


# ---------------------------------------------------------------------------
# model files

_ASSIGN = re.compile(r"^\s*(\w+)\s*(?:=\s*(.+?))?\s*$")


def _parse_value(text: str, lineno: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except ValueError as exc:
        raise ModelError(f"line {lineno}: bad parameter value {text!r}") from exc


def parse_model(text: str, name: str = "") -> OdeSystem:
    """Parse the line-oriented model format.

    Directives (one per line or separated by ``;``, ``#`` starts a comment)::

        name: my-model
        params: a=1, b=-1, A, B
        vars: u1, u2
        positive: u1, u2
        time: t
        dot u1 = <expr>
        dot u2 = <expr>
        map u1 -> <expr in new variables and t>
        inverse r1 -> <expr in old variables and t>

    ``map`` lines (one per old variable) attach a change of variables; the
    new variable names are read from the map expressions.  ``inverse`` lines
    are optional: give one per new variable, or none to have them solved for.
    """
    params: dict[str, Fraction | None] = {}
    variables: list[str] = []
    positive: set[str] = set()
    time = "t"
    rhs: dict[str, tuple[str, int]] = {}
    maps: dict[str, tuple[str, int]] = {}
    inverses: dict[str, tuple[str, int]] = {}
    directives = [(lineno, piece) for lineno, raw in enumerate(text.splitlines(), 1)
                  for piece in raw.split("#", 1)[0].split(";")]
    for lineno, raw in directives:
        line = raw.strip()
        if not line:
            continue
        m = re.match(r"^(name|params|vars|positive|time)\s*:\s*(.*)$", line)
        if m:
            key, body = m.groups()
            items = [s.strip() for s in body.split(",") if s.strip()]
            if key == "name":
                name = body.strip()
            elif key == "time":
                time = body.strip()
            elif key == "vars":
                variables = items
            elif key == "positive":
                positive.update(items)
            else:
                for item in items:
                    am = _ASSIGN.match(item)
                    if not am:
                        raise ModelError(f"line {lineno}: bad parameter declaration {item!r}")
                    pname, val = am.groups()
                    params[pname] = _parse_value(val, lineno) if val is not None else None
            continue
        m = re.match(r"^dot\s+(\w+)\s*=\s*(.+)$", line)
        if m:
            rhs[m.group(1)] = (m.group(2), lineno)
            continue
        m = re.match(r"^(map|inverse)\s+(\w+)\s*->\s*(.+)$", line)
        if m:
            target = maps if m.group(1) == "map" else inverses
            target[m.group(2)] = (m.group(3), lineno)
            continue
        raise ModelError(f"line {lineno}: unrecognized directive {raw.strip()!r}")

    if not variables:
        variables = list(rhs)
    if len(variables) != 2:
        raise ModelError(f"expected exactly two variables, got {variables}")
    for v in variables:
        if v not in rhs:
            raise ModelError(f"missing equation 'dot {v} = ...'")
    extra = set(rhs) - set(variables)
    if extra:
        raise ModelError(f"equations for undeclared variables {sorted(extra)}")

    def _expr(src: tuple[str, int]) -> Expr:
        text_, lineno = src
        try:
            return ex.parse(text_)
        except ParseError as exc:
            raise ModelError(f"line {lineno}: {exc}") from exc

    sys = OdeSystem(tuple(variables), tuple(_expr(rhs[v]) for v in variables), params, time,
                    frozenset(positive), name)
    if maps:
        cov = _change_from_directives(sys, maps, inverses, _expr)
        sys = replace(sys, change=cov)
    return sys


def _change_from_directives(sys, maps, inverses, _expr) -> ChangeOfVariables:
    if set(maps) != set(sys.variables):
        raise ModelError(f"map directives must cover exactly {sys.variables}")
    forward = tuple(_expr(maps[v]) for v in sys.variables)
    known = {sys.time, *sys.params}
    new = sorted(set().union(*(ex.free_names(f) for f in forward)) - known)
    if len(new) != 2:
        raise ModelError(f"map must use exactly two new variables, found {new}")
    if inverses:
        order = [v for v in inverses]
        if set(order) != set(new):
            raise ModelError(f"inverse directives must cover exactly {new}")
        new = order
        inverse = tuple(_expr(inverses[v]) for v in new)
    else:
        newsyms = [ex.symbol(v) for v in new]
        eqs = [sp.Eq(ex.symbol(o), f) for o, f in zip(sys.variables, forward)]
        sol = sp.solve(eqs, newsyms, dict=True)
        if not sol:
            raise NonInvertible("could not invert the change of variables; add 'inverse' lines")
        inverse = tuple(ex.simplify(sol[0][s]) for s in newsyms)
    cov = ChangeOfVariables(tuple(sys.variables), tuple(new), forward, inverse, sys.time)
    cov.check()
    return cov


def load_model(source: str | Path, variant: str | None = None) -> OdeSystem:
    """Load a catalog model (``"gompertz"``, ``"gompertz/transformed"``) or a model file."""
    from . import catalog

    text = str(source)
    base, _, var = text.partition("/")
    if base in catalog.MODELS and not Path(text).is_file():
        return catalog.system(base, variant or var or "original")
    path = Path(source)
    if not path.is_file():
        raise ModelError(f"no catalog model or file named {text!r} "
                         f"(catalog: {', '.join(sorted(catalog.MODELS))})")
    sys = parse_model(path.read_text(encoding="utf-8"), name=path.stem)
    if variant == "transformed":
        if sys.change is None:
            raise ModelError(f"{path} declares no change of variables")
        return apply_change(sys, sys.change)
    return sys


def vanishes(e, model: Model, n: int = 20, seed: int = 0, tol: float = 1e-9,
             symbolic: bool = True) -> bool:
    """True when ``e`` is identically zero for ``model`` (bound parameters held fixed)."""
    return ex.is_zero(e, n=n, tol=tol, seed=seed, symbolic=symbolic, fixed=model.param_values,
                      positive=model.positive)


def same_model(m1: Model, m2: Model) -> bool:
    if m1 is m2:
        return True
    if type(m1) is not type(m2):
        return False
    if isinstance(m1, OdeSystem):
        return (tuple(m1.variables) == tuple(m2.variables)
                and all(sp.simplify(a - b) == 0 for a, b in zip(m1.rhs, m2.rhs)))
    return m1.variable == m2.variable and sp.simplify(m1.rhs - m2.rhs) == 0
