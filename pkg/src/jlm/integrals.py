"""First integrals and their conservation residual."""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

from . import expr as ex
from .model import Model, vanishes


@dataclass(frozen=True, eq=False)
class FirstIntegral:
    value: sp.Expr
    context: Model
    provenance: str = "user"
    trivial: bool = False

    def __str__(self) -> str:
        return ex.to_str(self.value)


def conservation_residual(value, model: Model, tidy: bool = True) -> sp.Expr:
    """Total time derivative of ``value`` along the flow of ``model``."""
    out = model.total_derivative(ex.sympify(value))
    return ex.simplify(out, model.state_symbols) if tidy else out


def verify_first_integral(I: FirstIntegral) -> sp.Expr:
    return conservation_residual(I.value, I.context)


def is_conserved(value, model: Model, seed: int = 0, n: int = 20, tol: float = 1e-9) -> bool:
    return vanishes(conservation_residual(value, model, tidy=False), model, n=n, seed=seed,
                    tol=tol, symbolic=False)
