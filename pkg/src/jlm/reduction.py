"""Reduce a planar system to one second-order equation."""

from __future__ import annotations

import sympy as sp

from . import expr as ex
from .errors import ContextMismatch, NotAMultiplier, NotInvertible
from .model import OdeSystem, Reduction, SecondOrderOde, vanishes
from .multiplier import Multiplier


def _solve_for(rhs: sp.Expr, v: sp.Symbol, xdot: sp.Symbol) -> sp.Expr:
    """Solve ``xdot = k1 + k2*g(v)`` for ``v`` with ``g`` either ``exp`` or identity."""
    rhs = sp.expand(rhs, power_base=False, log=False)
    k1 = sp.Integer(0)
    k2 = sp.Integer(0)
    kind = None
    for term in sp.Add.make_args(rhs):
        coeff, part = term.as_independent(v, as_Add=False)
        if part == 1:
            k1 += term
            continue
        if part == v:
            this = "linear"
        elif isinstance(part, sp.exp) and sp.expand(part.args[0]) == v:
            this = "exp"
        elif isinstance(part, sp.exp) and sp.expand(part.args[0]).is_Add and v in sp.Add.make_args(sp.expand(part.args[0])):
            # exp(v + rest): fold exp(rest) into the coefficient
            rest = sp.expand(part.args[0]) - v
            if rest.has(v):
                raise NotInvertible(f"{v} enters {ex.to_str(rhs)} through {ex.to_str(part)}")
            this = "exp"
            coeff = coeff * sp.exp(rest)
        else:
            raise NotInvertible(f"{v} enters {ex.to_str(rhs)} through {ex.to_str(part)}")
        if kind not in (None, this):
            raise NotInvertible(f"{v} enters {ex.to_str(rhs)} both linearly and exponentially")
        kind = this
        k2 += coeff
    if kind is None:
        raise NotInvertible(f"{v} does not appear in {ex.to_str(rhs)}")
    k2 = sp.factor_terms(k2)
    sol = (xdot - k1) / k2
    if kind == "exp":
        return sp.log(sp.factor_terms(sp.together(sol)))
    return sp.factor_terms(sp.together(sol))


def eliminate(sys: OdeSystem, keep: str) -> SecondOrderOde:
    """Eliminate the other variable using the equation of ``keep``."""
    if keep not in sys.variables:
        raise NotInvertible(f"unknown variable {keep!r}; system variables are {sys.variables}")
    k = sys.variables.index(keep)
    other = sys.variables[1 - k]
    x, v = ex.symbol(keep), ex.symbol(other)
    xdot = ex.dot(keep)
    back = _solve_for(sys.rhs[k], v, xdot)
    f = sys.rhs[k]
    second = sp.diff(f, sys.t) + sp.diff(f, x) * xdot + sp.diff(f, v) * sys.rhs[1 - k]
    second = second.xreplace({v: back})
    phi = _tidy_rhs(second, [sys.t, x, xdot])
    eq = SecondOrderOde(keep, phi, dict(sys.params), sys.time,
                        frozenset(p for p in sys.positive if p != other), _reduced_name(sys, keep),
                        Reduction(sys, keep, other, back))
    # the back-substitution must also satisfy the eliminated variable's own equation
    lhs = eq.total_derivative(back)
    rhs_other = sys.rhs[1 - k].xreplace({v: back})
    if not vanishes(lhs - rhs_other, eq):
        raise NotInvertible(f"back-substitution for {other} is inconsistent with its equation")
    return eq


def _reduced_name(sys: OdeSystem, keep: str) -> str:
    return f"{sys.name} [{keep}]" if sys.name else f"reduced in {keep}"


def _tidy_rhs(e: sp.Expr, state) -> sp.Expr:
    e = ex.simplify(e, state)
    try:
        e = sp.factor_terms(sp.together(e))
    except sp.PolynomialError:
        pass
    return e


def push_multiplier(M: Multiplier, red: SecondOrderOde, normalize: bool = False) -> Multiplier:
    """Multiplier of the reduced equation: ``M`` times ``d(u1, u2)/d(x, x')``.

    The product is exact (no constant stripped) unless ``normalize``.
    """
    origin = red.origin
    if origin is None:
        raise ContextMismatch("second-order equation has no recorded reduction")
    sys = origin.system
    if tuple(M.context.variables) != tuple(sys.variables):
        raise ContextMismatch("multiplier does not belong to the reduced system")
    x, xdot = red.x, red.xdot
    back = origin.back_substitution
    # (u1, u2) as functions of (x, x')
    u = [x if name == origin.kept else back for name in sys.variables]
    J = sp.Matrix(2, 2, lambda i, j: sp.diff(u[i], (x, xdot)[j]))
    det = sp.simplify(J.det())
    if det == 0:
        raise NotAMultiplier("singular Jacobian of the reduction map")
    value = M.value.xreplace({ex.symbol(origin.eliminated): back}) * det
    value = _tidy_value(value, red.state_symbols)
    out = Multiplier(value, red, "transformed", dict(M.exponents), M.constraints)
    if normalize:
        from .multiplier import normalized
        out = normalized(out)
    return out


def _tidy_value(e: sp.Expr, state) -> sp.Expr:
    e = ex.simplify(e)
    if e.has(sp.exp) and e.has(sp.log):
        return ex.collapse_exp(sp.factor_terms(e), state)
    try:
        return sp.factor_terms(sp.cancel(sp.powsimp(e)))
    except sp.PolynomialError:
        return sp.factor_terms(e)
