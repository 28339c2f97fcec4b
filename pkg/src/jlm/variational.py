"""Lagrangians built from multipliers, and Euler-Lagrange checks.

Systems get a Lagrangian linear in the velocities,

    L = P*u2' - Q*u1' + g,   P = int M du1,  Q = int M du2,

with ``g`` fixed by the two first-order equations

    dg/du1 = -dQ/dt - 2*M*phi2,   dg/du2 = dP/dt + 2*M*phi1.

Second-order equations get ``L = L0 - int R dx`` where ``L0`` is the double
antiderivative of ``M`` in the velocity and ``R`` the on-shell Euler-Lagrange
residual of ``L0`` (which cannot depend on the velocity when ``M`` is a
multiplier).  Gauge terms are set to zero throughout.

The Euler-Lagrange residual is ``-d/dt(dL/dx') + dL/dx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from . import expr as ex
from .errors import ContextMismatch, DomainError, IncompatibleQuadratures, ResidualDependsOnVelocity
from .model import Model, OdeSystem, SecondOrderOde, same_model, vanishes
from .multiplier import Multiplier

LINEAR = "linear-system"
SECOND_ORDER = "second-order"


@dataclass(frozen=True, eq=False)
class Lagrangian:
    value: sp.Expr
    context: Model
    kind: str
    gauge: str = "zero gauge"
    multiplier: sp.Expr | None = None
    provenance: str = "constructed"

    def __post_init__(self):
        if self.kind not in (LINEAR, SECOND_ORDER):
            raise ValueError(f"unknown Lagrangian kind {self.kind!r}")
        if (self.kind == SECOND_ORDER) != isinstance(self.context, SecondOrderOde):
            raise ContextMismatch(f"{self.kind} Lagrangian on a {type(self.context).__name__}")

    def __str__(self) -> str:
        return ex.to_str(self.value)


def as_lagrangian(value, model: Model, provenance: str = "user") -> Lagrangian:
    """Wrap a bare expression (for example a reference form) as a Lagrangian."""
    kind = SECOND_ORDER if isinstance(model, SecondOrderOde) else LINEAR
    return Lagrangian(ex.sympify(value), model, kind, "unspecified", None, provenance)


# ---------------------------------------------------------------------------
# Euler-Lagrange


def _accelerations(sys: OdeSystem) -> tuple[sp.Symbol, sp.Symbol]:
    return tuple(ex.ddot(v) for v in sys.variables)


def _offshell_dt_system(e: sp.Expr, sys: OdeSystem) -> sp.Expr:
    out = sp.diff(e, sys.t)
    for u, v, a in zip(sys.coords, sys.velocities, _accelerations(sys)):
        out += sp.diff(e, u) * v + sp.diff(e, v) * a
    return out


def _el_system(L: sp.Expr, sys: OdeSystem, on_shell: bool, tidy: bool = True) -> tuple[sp.Expr, sp.Expr]:
    res = [-_offshell_dt_system(sp.diff(L, v), sys) + sp.diff(L, u)
           for u, v in zip(sys.coords, sys.velocities)]
    if on_shell:
        shell = dict(zip(sys.velocities, sys.rhs))
        acc = {a: sys.total_derivative(f) for a, f in zip(_accelerations(sys), sys.rhs)}
        res = [r.xreplace(acc).xreplace(shell) for r in res]
    return tuple(ex.simplify(r) if tidy else r for r in res)


def _el_second(L: sp.Expr, eq: SecondOrderOde, on_shell: bool, tidy: bool = True) -> sp.Expr:
    p = sp.diff(L, eq.xdot)
    acc = eq.rhs if on_shell else eq.xddot
    dt = sp.diff(p, eq.t) + eq.xdot * sp.diff(p, eq.x) + acc * sp.diff(p, eq.xdot)
    out = -dt + sp.diff(L, eq.x)
    return ex.simplify(out) if tidy else out


def el_residual(L: Lagrangian | sp.Expr, model: Model | None = None, on_shell: bool = True,
                tidy: bool = True):
    """On-shell (or, with ``on_shell=False``, off-shell) Euler-Lagrange residual.

    A second-order context gives one expression, a system a pair.  With
    ``tidy=False`` the raw derivative expression is returned unsimplified.
    """
    if isinstance(L, Lagrangian):
        model = model or L.context
        value = L.value
    else:
        value = ex.sympify(L)
    if model is None:
        raise ContextMismatch("el_residual needs a model")
    if isinstance(model, SecondOrderOde):
        return _el_second(value, model, on_shell, tidy)
    return _el_system(value, model, on_shell, tidy)


def _components(r) -> tuple:
    return r if isinstance(r, tuple) else (r,)


def satisfies_el(L: Lagrangian, n: int = 20, seed: int = 0, tol: float = 1e-9) -> bool:
    return all(vanishes(r, L.context, n=n, seed=seed, tol=tol, symbolic=False)
               for r in _components(el_residual(L, tidy=False)))


# ---------------------------------------------------------------------------
# construction


def _free_of(e: sp.Expr, v: sp.Symbol, model: Model, seed: int = 0) -> sp.Expr | None:
    """``e`` with ``v`` removed when ``e`` does not really depend on ``v``.

    Returns None when ``e`` depends on ``v``.
    """
    if not vanishes(sp.diff(e, v), model, seed=seed, symbolic=False):
        return None
    if vanishes(e, model, seed=seed, symbolic=False):
        return sp.Integer(0)
    e = ex.simplify(e, model.state_symbols)
    if not e.has(v):
        return e
    e = ex.simplify(ex.cancel_common(e), model.state_symbols)
    if not e.has(v):
        return e
    if not vanishes(sp.diff(e, v), model, seed=seed, symbolic=False):
        return None
    # numerically independent of v: pin v to a value where e is defined
    for ref in (1, 2, 3, 0):
        pinned = e.xreplace({v: sp.Integer(ref)})
        if not pinned.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
            return ex.simplify(pinned, model.state_symbols)
    raise DomainError(f"could not pin {v} in {ex.to_str(e)}")


def linear_lagrangian(sys: OdeSystem, M: Multiplier | sp.Expr, verify: bool = True,
                      first: int = 1) -> Lagrangian:
    """Linear Lagrangian ``P*u2' - Q*u1' + g`` of a planar system.

    ``first`` picks which of the two equations for ``g`` is integrated
    first (1: in ``u1``, 2: in ``u2``); the results differ by a gauge term.
    """
    if first not in (1, 2):
        raise ValueError("first must be 1 or 2")
    m = M.value if isinstance(M, Multiplier) else ex.sympify(M)
    if isinstance(M, Multiplier) and not same_model(M.context, sys):
        raise ContextMismatch("multiplier belongs to another model")
    t, (u1, u2), (v1, v2) = sys.t, sys.coords, sys.velocities
    phi1, phi2 = sys.rhs
    P = ex.antiderivative(m, u1)
    Q = ex.antiderivative(m, u2)
    grads = {u1: -sp.diff(Q, t) - 2 * m * phi2, u2: sp.diff(P, t) + 2 * m * phi1}
    a, b = (u1, u2) if first == 1 else (u2, u1)
    g1 = ex.antiderivative(grads[a], a)
    rest = _free_of(grads[b] - sp.diff(g1, b), a, sys)
    if rest is None:
        raise IncompatibleQuadratures("the two equations for the velocity-free part disagree")
    g = g1 + ex.antiderivative(rest, b)
    value = ex.simplify(P * v2 - Q * v1 + g, sys.state_symbols + [v1, v2])
    L = Lagrangian(value, sys, LINEAR, "G = 0", m)
    if verify and not satisfies_el(L):
        raise IncompatibleQuadratures("constructed Lagrangian fails its Euler-Lagrange check")
    return L


def second_order_lagrangian(eq: SecondOrderOde, M: Multiplier | sp.Expr, verify: bool = True) -> Lagrangian:
    """Lagrangian of ``x'' = phi`` whose velocity Hessian is ``M``."""
    m = M.value if isinstance(M, Multiplier) else ex.sympify(M)
    if isinstance(M, Multiplier) and not same_model(M.context, eq):
        raise ContextMismatch("multiplier belongs to another equation")
    L0 = ex.antiderivative(ex.antiderivative(m, eq.xdot), eq.xdot)
    R = _free_of(_el_second(L0, eq, on_shell=True, tidy=False), eq.xdot, eq)
    if R is None:
        raise ResidualDependsOnVelocity("on-shell residual of the double antiderivative depends on the velocity")
    value = ex.simplify(L0 - ex.antiderivative(R, eq.x), eq.state_symbols)
    L = Lagrangian(value, eq, SECOND_ORDER, "F = 0", m)
    if verify and not satisfies_el(L):
        raise ResidualDependsOnVelocity("constructed Lagrangian fails its Euler-Lagrange check")
    return L


def add_gauge(L: Lagrangian, F) -> Lagrangian:
    """``L + dF/dt`` for a gauge function ``F`` of time and positions."""
    F = ex.sympify(F)
    model = L.context
    if isinstance(model, SecondOrderOde):
        positions, velocities = [model.x], [model.xdot]
    else:
        positions, velocities = list(model.coords), list(model.velocities)
    if F.has(*velocities):
        raise ValueError("gauge function must not depend on velocities")
    if F == 0:
        return L
    dF = sp.diff(F, model.t) + sum(sp.diff(F, u) * v for u, v in zip(positions, velocities))
    note = f"{L.gauge}; plus d/dt({ex.to_str(F)})"
    return Lagrangian(ex.simplify(L.value + dF), model, L.kind, note, L.multiplier, L.provenance)


def lagrangian_multiplier(L: Lagrangian | sp.Expr, model: Model | None = None,
                          tidy: bool = True) -> sp.Expr:
    """The multiplier a Lagrangian encodes (invariant under gauge terms).

    Second order: the velocity Hessian.  System: half the antisymmetric
    position-velocity mixed derivative.
    """
    model = model or L.context
    value = L.value if isinstance(L, Lagrangian) else ex.sympify(L)
    if isinstance(model, SecondOrderOde):
        out = sp.diff(value, model.xdot, 2)
    else:
        (u1, u2), (v1, v2) = model.coords, model.velocities
        out = (sp.diff(value, u1, v2) - sp.diff(value, u2, v1)) / 2
    return ex.simplify(out) if tidy else out


def _velocity_hessian(value: sp.Expr, model: Model) -> list[sp.Expr]:
    vs = [model.xdot] if isinstance(model, SecondOrderOde) else list(model.velocities)
    return [sp.diff(value, a, b) for i, a in enumerate(vs) for b in vs[i:]]


def lagrangian_equiv(L1: Lagrangian, L2: Lagrangian, up_to_constant: bool = False,
                     n: int = 50, seed: int = 0, tol: float = 1e-9) -> bool:
    """True when ``L1 - L2`` is a null Lagrangian (a total time derivative).

    With ``up_to_constant`` the second Lagrangian is first rescaled by the
    constant ratio of the two encoded multipliers.  All checks are sampled
    at ``n`` points with the off-shell acceleration free.
    """
    if not same_model(L1.context, L2.context):
        raise ContextMismatch("Lagrangians belong to different models")
    model = L1.context

    def zero(e) -> bool:
        return vanishes(e, model, n=n, seed=seed, tol=tol, symbolic=False)

    other = L2.value
    if up_to_constant:
        m1 = lagrangian_multiplier(L1, tidy=False)
        m2 = lagrangian_multiplier(L2, tidy=False)
        if zero(m2):
            return False
        ratio = m1 / m2
        if not all(zero(sp.diff(ratio, v)) for v in model.state_symbols):
            return False
        other = ratio * other
    D = L1.value - other
    if not all(zero(h) for h in _velocity_hessian(D, model)):
        return False
    return all(zero(r) for r in _components(el_residual(D, model, on_shell=False, tidy=False)))
