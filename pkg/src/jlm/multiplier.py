"""Jacobi last multipliers of planar systems and second-order equations.

A multiplier ``M`` of ``u' = phi(t, u)`` solves

    dM/dt + d(M*phi1)/du1 + d(M*phi2)/du2 = 0,

and for ``x'' = phi(t, x, x')`` the same equation in the variables
``(x, x')`` with velocity field ``(x', phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from . import expr as ex
from .errors import (AnsatzInsufficient, ContextMismatch, DegenerateParameters, InconsistentIntegral,
                     NotAMultiplier)
from .integrals import FirstIntegral, is_conserved
from .model import ChangeOfVariables, Model, OdeSystem, SecondOrderOde, apply_change, same_model, vanishes


@dataclass(frozen=True, eq=False)
class Multiplier:
    """A verified multiplier; construction fails if the residual does not vanish."""

    value: sp.Expr
    context: Model
    provenance: str = "user"
    exponents: dict[str, sp.Expr] = field(default_factory=dict)
    constraints: tuple[str, ...] = ()
    verify: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.verify:
            return
        if ex.is_zero(self.value, symbolic=False, fixed=self.context.param_values):
            raise NotAMultiplier("a multiplier cannot vanish identically")
        if not vanishes(residual(self.value, self.context, tidy=False), self.context, symbolic=False):
            raise NotAMultiplier(f"{ex.to_str(self.value)} does not satisfy the multiplier equation")

    def __str__(self) -> str:
        return ex.to_str(self.value)


def multiplier_residual(M, sys: OdeSystem, tidy: bool = True) -> sp.Expr:
    M = ex.sympify(M)
    out = sp.diff(M, sys.t)
    for u, f in zip(sys.coords, sys.rhs):
        out += sp.diff(M * f, u)
    return ex.simplify(out, sys.state_symbols) if tidy else out


def multiplier_residual_2nd(M, eq: SecondOrderOde, tidy: bool = True) -> sp.Expr:
    M = ex.sympify(M)
    out = sp.diff(M, eq.t) + sp.diff(M * eq.xdot, eq.x) + sp.diff(M * eq.rhs, eq.xdot)
    return ex.simplify(out, eq.state_symbols) if tidy else out


def residual(M, model: Model, tidy: bool = True) -> sp.Expr:
    if isinstance(model, SecondOrderOde):
        return multiplier_residual_2nd(M, model, tidy)
    return multiplier_residual(M, model, tidy)


def _state(model: Model) -> list[sp.Symbol]:
    return model.state_symbols


def normalized(M: Multiplier) -> Multiplier:
    """Same multiplier with its variable-free constant factor removed."""
    value = ex.normalize(M.value, _state(M.context))
    return Multiplier(value, M.context, M.provenance, M.exponents, M.constraints, verify=False)


# ---------------------------------------------------------------------------
# ansatz


@dataclass(frozen=True)
class AnsatzSpec:
    """Which factors of ``exp(b3 t) u1^b1 u2^b2 exp(c1 u1) exp(c2 u2)`` to try."""

    time_exp: bool = True
    powers: tuple[bool, bool] = (True, True)
    exps: tuple[bool, bool] = (True, True)

    def __post_init__(self):
        if not (self.time_exp or any(self.powers) or any(self.exps)):
            raise ValueError("ansatz needs at least one factor")


def _unknowns(spec: AnsatzSpec) -> list[tuple[str, sp.Symbol]]:
    names = []
    if spec.time_exp:
        names.append("b3")
    names += [f"b{i + 1}" for i in range(2) if spec.powers[i]]
    names += [f"c{i + 1}" for i in range(2) if spec.exps[i]]
    return [(n, sp.Dummy(n)) for n in names]


def _log_derivative(sys: OdeSystem, spec: AnsatzSpec, unk: dict[str, sp.Symbol]) -> sp.Expr:
    """d/dt(log M) along the flow for the ansatz, plus div(phi)."""
    out = sys.divergence()
    if spec.time_exp:
        out += unk["b3"]
    for i, (u, f) in enumerate(zip(sys.coords, sys.rhs)):
        if spec.powers[i]:
            out += unk[f"b{i + 1}"] * f / u
        if spec.exps[i]:
            out += unk[f"c{i + 1}"] * f
    return out


def _collect_equations(e: sp.Expr, state: list[sp.Symbol], unknowns: list[sp.Symbol]):
    """Coefficient of every distinct state-dependent basis function."""
    e = sp.expand(ex.expand_logs(e), power_base=False, log=False)
    groups: dict[sp.Expr, sp.Expr] = {}
    for term in sp.Add.make_args(e):
        coeff, key = term.as_independent(*state, as_Add=False)
        groups[key] = groups.get(key, 0) + coeff
    rows = []
    for key, coeff in groups.items():
        coeff = sp.expand(coeff)
        row = [sp.cancel(coeff.coeff(x)) for x in unknowns]
        rhs = sp.cancel(-(coeff - sum(c * x for c, x in zip(row, unknowns))))
        rows.append((key, row, sp.expand(rhs)))
    return rows


def _constraint_factors(pivot: sp.Expr) -> list[sp.Expr]:
    num, den = sp.fraction(sp.cancel(pivot))
    out = []
    for part in (num, den):
        _, factors = sp.factor_list(part)
        out += [f for f, _ in factors if not f.is_Number]
    return out


def _denominator_factors(values, candidates) -> list[sp.Expr]:
    """Pivot factors that the solution actually divides by."""
    found = set()
    for v in values:
        found.update(_constraint_factors(sp.fraction(sp.cancel(v))[1]))
    found |= {sp.expand(-f) for f in found}
    return [c for c in candidates if sp.expand(c) in found]


def _solve_linear(rows, unknowns):
    """Gauss-Jordan elimination over rational functions of the parameters.

    Returns ``(solution, constraints)``; free unknowns are set to zero and
    every non-numeric pivot contributes its factors as ``!= 0`` constraints.
    """
    A = [list(r) + [b] for _, r, b in rows]
    m, n = len(A), len(unknowns)
    constraints: list[sp.Expr] = []
    pivots: list[int] = []
    r = 0
    for col in range(n):
        cands = [i for i in range(r, m) if A[i][col] != 0]
        if not cands:
            continue
        i = min(cands, key=lambda k: (not A[k][col].is_Number, sp.count_ops(A[k][col]), k))
        A[r], A[i] = A[i], A[r]
        piv = A[r][col]
        if not piv.is_Number:
            constraints += [c for c in _constraint_factors(piv) if c not in constraints]
        A[r] = [sp.cancel(x / piv) for x in A[r]]
        for k in range(m):
            if k != r and A[k][col] != 0:
                fac = A[k][col]
                A[k] = [sp.cancel(x - fac * y) for x, y in zip(A[k], A[r])]
        pivots.append(col)
        r += 1
        if r == m:
            break
    for k in range(r, m):
        if A[k][n] != 0:
            key = rows[k][0] if k < len(rows) else None
            raise AnsatzInsufficient(
                f"no multiplier of this form: incompatible condition {ex.to_str(A[k][n])} = 0"
                + (f" (basis term {ex.to_str(key)})" if key is not None else ""))
    solution = {x: sp.Integer(0) for x in unknowns}
    for k, col in enumerate(pivots):
        solution[unknowns[col]] = sp.factor(A[k][n])
    return solution, constraints


def solve_ansatz(sys: OdeSystem, spec: AnsatzSpec | None = None) -> Multiplier:
    """Find a multiplier ``exp(b3 t) u1^b1 u2^b2 exp(c1 u1 + c2 u2)``.

    The exponents are solved exactly, symbolically in the parameters, and
    the parameter factors they divide by are reported as ``constraints``.
    Bound parameter values that make one of those factors vanish raise
    :class:`DegenerateParameters`; the generic formula is not applied there.  :class:`AnsatzInsufficient` is raised when no exponents work.
    """
    spec = spec or AnsatzSpec()
    named = _unknowns(spec)
    unk = dict(named)
    unknowns = [s for _, s in named]
    rows = _collect_equations(_log_derivative(sys, spec, unk), sys.state_symbols, unknowns)
    bound = {ex.symbol(k): sp.Rational(v.numerator, v.denominator)
             for k, v in sys.param_values.items()}
    try:
        solution, constraints = _solve_linear(rows, unknowns)
    except AnsatzInsufficient:
        if not bound:
            raise
        # the generic case has no solution; the bound special case might
        exact = [(k, [sp.cancel(c.xreplace(bound)) for c in r], sp.cancel(v.xreplace(bound)))
                 for k, r, v in rows]
        solution, constraints = _solve_linear(exact, unknowns)
    constraints = _denominator_factors(solution.values(), constraints)
    if bound:
        broken = [f"{ex.to_str(c)} != 0" for c in constraints if sp.cancel(c.xreplace(bound)) == 0]
        if broken:
            raise DegenerateParameters("parameter values violate the multiplier solution", broken)
        solution = {k: sp.factor(sp.cancel(v.xreplace(bound))) for k, v in solution.items()}
        constraints = [c for c in (c.xreplace(bound) for c in constraints) if not c.is_Number]
    strings = tuple(f"{ex.to_str(c)} != 0" for c in constraints)
    exps = {name: solution[s] for name, s in named}
    value = sp.Integer(1)
    t = sys.t
    if spec.time_exp:
        value *= sp.exp(exps["b3"] * t)
    for i, u in enumerate(sys.coords):
        if spec.powers[i]:
            value *= u ** exps[f"b{i + 1}"]
    lin = sum((exps[f"c{i + 1}"] * u for i, u in enumerate(sys.coords) if spec.exps[i]), sp.Integer(0))
    value *= sp.exp(lin)
    return Multiplier(value, sys, "ansatz", exps, strings)


def exponent_values(M: Multiplier, **params) -> dict[str, Fraction]:
    """Evaluate the solved exponents exactly at rational parameter values."""
    sub = {ex.symbol(k): sp.Rational(Fraction(v).numerator, Fraction(v).denominator)
           for k, v in params.items()}
    out = {}
    for name, e in M.exponents.items():
        val = sp.cancel(e.xreplace(sub))
        if not val.is_Rational:
            raise ValueError(f"exponent {name} not fully determined by {sorted(params)}: {val}")
        out[name] = Fraction(int(val.p), int(val.q))
    return out


# ---------------------------------------------------------------------------
# transformations and Jacobi's product/ratio rules


def _tidy(e: sp.Expr) -> sp.Expr:
    e = sp.powsimp(sp.factor_terms(e))
    return e


def transform_multiplier(M: Multiplier, cov: ChangeOfVariables) -> Multiplier:
    """Carry ``M`` across ``cov`` (either direction) by the Jacobian rule."""
    sys = M.context
    if not isinstance(sys, OdeSystem):
        raise ContextMismatch("transform_multiplier needs a planar-system multiplier")
    if tuple(sys.variables) == tuple(cov.old):
        target = apply_change(sys, cov)
        value = cov.to_new(M.value) * cov.jacobian
    elif tuple(sys.variables) == tuple(cov.new):
        inv = cov.inverted()
        target = apply_change(sys, inv)
        value = inv.to_new(M.value) * inv.jacobian
    else:
        raise ContextMismatch(f"multiplier lives in {sys.variables}, map relates {cov.old} and {cov.new}")
    value = _tidy(ex.simplify(value))
    if sys.change is not None and target.change is None:
        target = OdeSystem(target.variables, target.rhs, target.params, target.time,
                           target.positive, target.name, sys.change)
    return Multiplier(value, target, "transformed", dict(M.exponents), M.constraints)


def product_multiplier(M: Multiplier, I: FirstIntegral) -> Multiplier:
    """Jacobi's rule: a multiplier times a first integral is a multiplier."""
    if not same_model(M.context, I.context):
        raise ContextMismatch("multiplier and first integral belong to different models")
    return Multiplier(M.value * I.value, M.context, "product", dict(M.exponents), M.constraints)


def ratio_first_integral(M1: Multiplier, M2: Multiplier) -> FirstIntegral:
    """Ratio of two multipliers of the same model: a (possibly trivial) first integral."""
    if not same_model(M1.context, M2.context):
        raise ContextMismatch("multipliers belong to different models")
    if ex.is_zero(M2.value, symbolic=False):
        raise ZeroDivisionError("second multiplier vanishes identically")
    value = ex.simplify(M1.value / M2.value)
    value = sp.factor_terms(sp.cancel(value)) if not value.has(sp.log) else value
    trivial = ex.is_constant(value, _state(M1.context), fixed=M1.context.param_values)
    return FirstIntegral(value, M1.context, "ratio", trivial)


def multiplier_from_integral(omega, sys: OdeSystem) -> Multiplier:
    """Multiplier from a first integral ``omega`` via ``M*phi1 = d(omega)/du2``."""
    omega = ex.sympify(omega)
    if not is_conserved(omega, sys):
        raise InconsistentIntegral(f"{ex.to_str(omega)} is not a first integral")
    u1, u2 = sys.coords
    phi1, phi2 = sys.rhs
    cand1 = None if vanishes(phi1, sys) else sp.diff(omega, u2) / phi1
    cand2 = None if vanishes(phi2, sys) else -sp.diff(omega, u1) / phi2
    if cand1 is None and cand2 is None:
        raise InconsistentIntegral("both right-hand sides vanish identically")
    value = cand1 if cand1 is not None else cand2
    if cand1 is not None and cand2 is not None:
        if not ex.numeric_equiv(cand1, cand2, fixed=sys.param_values):
            raise InconsistentIntegral("the two expressions for the multiplier disagree")
    if ex.is_zero(value, symbolic=False, fixed=sys.param_values):
        raise InconsistentIntegral("integral is constant; the multiplier would vanish")
    value = ex.simplify(value)
    try:
        value = sp.factor_terms(sp.cancel(value))
    except sp.PolynomialError:
        pass
    return Multiplier(value, sys, "from-integral")
