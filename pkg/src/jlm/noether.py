"""Noether first integrals and the multiplier chain."""

from __future__ import annotations

from dataclasses import dataclass, field

import sympy as sp

from . import expr as ex
from .errors import ContextMismatch, JLMError, NotConserved
from .integrals import FirstIntegral, conservation_residual, is_conserved, verify_first_integral
from .model import Model, SecondOrderOde, vanishes
from .multiplier import Multiplier, product_multiplier
from .variational import LINEAR, SECOND_ORDER, Lagrangian, second_order_lagrangian

__all__ = [
    "SymmetryGenerator", "TIME_TRANSLATION", "FirstIntegral", "verify_first_integral",
    "conservation_residual", "noether_integral_system", "noether_integral_2nd",
    "ChainStep", "Chain", "multiplier_chain", "normalize_integral",
]


@dataclass(frozen=True)
class SymmetryGenerator:
    """``xi d/dt + eta1 d/du1 + eta2 d/du2`` (``eta2`` unused for one coordinate)."""

    xi: sp.Expr = sp.Integer(1)
    eta1: sp.Expr = sp.Integer(0)
    eta2: sp.Expr = sp.Integer(0)

    def __post_init__(self):
        for name in ("xi", "eta1", "eta2"):
            object.__setattr__(self, name, ex.sympify(getattr(self, name)))

    def check_context(self, model: Model) -> None:
        allowed = set(model.state_symbols) | {ex.symbol(p) for p in model.params}
        if isinstance(model, SecondOrderOde):
            if self.xi.has(model.xdot):
                raise ContextMismatch("xi may depend on time and position only")
        else:
            allowed |= set(model.velocities)
        stray = (self.xi.free_symbols | self.eta1.free_symbols | self.eta2.free_symbols) - allowed
        if stray:
            raise ContextMismatch(f"generator uses unknown symbols {sorted(s.name for s in stray)}")


TIME_TRANSLATION = SymmetryGenerator(1, 0, 0)


def normalize_integral(value, model: Model) -> sp.Expr:
    """Drop additive constants and the variable-free factor, so that the
    canonical leading term has coefficient +1."""
    state = model.state_symbols
    return ex.normalize(ex.drop_constant(ex.tidy(value, state), state), state)


def _finish(value: sp.Expr, model: Model, provenance: str, normalize: bool) -> FirstIntegral:
    value = ex.tidy(value, model.state_symbols)
    if not is_conserved(value, model):
        raise NotConserved(f"{ex.to_str(value)} is not conserved; the generator is not a Noether symmetry")
    trivial = not any(value.has(s) for s in model.state_symbols)
    if normalize and not trivial:
        value = normalize_integral(value, model)
    return FirstIntegral(value, model, provenance, trivial)


def noether_integral_system(L: Lagrangian, gamma: SymmetryGenerator = TIME_TRANSLATION, G=0,
                            normalize: bool = True) -> FirstIntegral:
    """``-xi*L - dL/du1'*(eta1 - xi*u1') - dL/du2'*(eta2 - xi*u2') + G``."""
    if L.kind != LINEAR:
        raise ContextMismatch("expected a Lagrangian of a planar system")
    sys = L.context
    gamma.check_context(sys)
    (v1, v2) = sys.velocities
    value = (-gamma.xi * L.value
             - sp.diff(L.value, v1) * (gamma.eta1 - gamma.xi * v1)
             - sp.diff(L.value, v2) * (gamma.eta2 - gamma.xi * v2)
             + ex.sympify(G))
    value = ex.simplify(value, sys.state_symbols + [v1, v2])
    if value.has(v1, v2):
        # for Lagrangians linear in the velocities they cancel identically
        if not all(vanishes(sp.diff(value, v), sys, symbolic=False) for v in (v1, v2)):
            raise ContextMismatch("velocities do not cancel; the Lagrangian is not linear in them")
        value = value.xreplace(dict(zip(sys.velocities, sys.rhs)))
    return _finish(value, sys, "noether", normalize)


def noether_integral_2nd(L: Lagrangian, gamma: SymmetryGenerator = TIME_TRANSLATION, F=0,
                         normalize: bool = True) -> FirstIntegral:
    """``-xi*L - (eta - xi*x')*dL/dx' + F``; for time translation the energy."""
    if L.kind != SECOND_ORDER:
        raise ContextMismatch("expected a Lagrangian of a second-order equation")
    eq = L.context
    gamma.check_context(eq)
    value = -gamma.xi * L.value - (gamma.eta1 - gamma.xi * eq.xdot) * sp.diff(L.value, eq.xdot) + ex.sympify(F)
    return _finish(value, eq, "noether", normalize)


@dataclass(frozen=True)
class ChainStep:
    multiplier: Multiplier
    lagrangian: Lagrangian
    integral: FirstIntegral


@dataclass
class Chain:
    """Steps of the multiplier chain; ``error`` says why it stopped early."""

    steps: list[ChainStep] = field(default_factory=list)
    error: str | None = None

    def __iter__(self):
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, i) -> ChainStep:
        return self.steps[i]

    @property
    def complete(self) -> bool:
        return self.error is None


def multiplier_chain(eq: SecondOrderOde, M0: Multiplier, gamma: SymmetryGenerator = TIME_TRANSLATION,
                     depth: int = 2) -> Chain:
    """Repeat: Lagrangian from ``M_k``, Noether integral ``I_k``, ``M_(k+1) = M_k*I_k``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    chain = Chain()
    M = M0
    for k in range(depth):
        try:
            L = second_order_lagrangian(eq, M)
            I = noether_integral_2nd(L, gamma)
            chain.steps.append(ChainStep(M, L, I))
            if k + 1 < depth:
                M = product_multiplier(M, I)
        except JLMError as err:
            chain.error = f"step {k + 1}: {type(err).__name__}: {err}"
            break
    return chain


def integral_vanishes_along(I: FirstIntegral, n: int = 20, seed: int = 0) -> bool:
    """Sampled check that ``dI/dt`` is zero along the flow."""
    return vanishes(conservation_residual(I.value, I.context, tidy=False), I.context,
                    n=n, seed=seed, symbolic=False)
