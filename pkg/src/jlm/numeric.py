"""Fixed-step RK4 integration and conservation checks."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import mpmath
import numpy as np
import sympy as sp

from . import expr as ex
from .errors import ContextMismatch, DomainError, NonFinite, UnboundSymbol
from .integrals import FirstIntegral
from .model import Model, OdeSystem, SecondOrderOde, same_model

__all__ = ["Trajectory", "integrate", "drift", "compare_reduction", "sample_count"]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform time grid with one state column per variable."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), 2)
    variables: tuple[str, str]
    model: Model
    init: Mapping[str, float]
    dt: float

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.states[:, self.variables.index(name)]
        except ValueError:
            raise KeyError(f"trajectory has no variable {name!r}") from None

    def to_csv(self, target: str | Path | io.TextIOBase | None = None) -> str | None:
        """Write ``t, var1, var2`` rows at full double precision.

        With no target the CSV text is returned.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([self.model.time, *self.variables])
        for t, row in zip(self.times, self.states):
            writer.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
        text = buf.getvalue()
        if target is None:
            return text
        if isinstance(target, (str, Path)):
            Path(target).write_text(text, encoding="utf-8")
        else:
            target.write(text)
        return None


def sample_count(t0: float, t1: float, dt: float) -> int:
    # guard against 5/1e-3 evaluating to 4999.999...
    return int(math.floor((t1 - t0) / dt + 1e-9)) + 1


def _first_order(model: Model) -> OdeSystem:
    return model.as_system() if isinstance(model, SecondOrderOde) else model


def _bound(model: Model, e: sp.Expr) -> sp.Expr:
    values = {ex.symbol(k): sp.Rational(v.numerator, v.denominator)
              for k, v in model.param_values.items()}
    e = ex.sympify(e)
    e = e.xreplace({s: ex.symbol(s.name) for s in e.free_symbols})
    # logs act on |x|; keep log(-1/2) from turning into log(1/2) + i*pi
    e = e.replace(lambda z: isinstance(z, sp.log), lambda z: sp.log(sp.Abs(z.args[0])))
    return e.xreplace(values)


def _check_bound(model: Model, exprs, names) -> None:
    free = set().union(*(e.free_symbols for e in exprs)) - {ex.symbol(n) for n in names}
    if free:
        raise UnboundSymbol("unbound parameters: " + ", ".join(sorted(s.name for s in free)))


def _scalar_log(x: float) -> float:
    return math.log(abs(x))


def _compile_scalar(exprs, names):
    return sp.lambdify([ex.symbol(n) for n in names], list(exprs),
                       modules=[{"log": _scalar_log}, "math"])


def integrate(model: Model, init: Mapping[str, float], t0: float, t1: float, dt: float) -> Trajectory:
    """Classic RK4 with step ``dt`` from ``t0`` to ``t1``.

    Increments are accumulated with Kahan compensation so that roundoff
    stays below the truncation error down to small steps.
    Second-order equations run as the first-order system in ``(x, x_dot)``.
    Raises :class:`NonFinite` with the time of failure when the state stops
    being finite.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    sys = _first_order(model)
    names = list(sys.variables)
    missing = [v for v in names if v not in init]
    if missing:
        raise UnboundSymbol(f"initial value missing for {', '.join(missing)}")
    rhs = [_bound(model, f) for f in sys.rhs]
    _check_bound(model, rhs, [sys.time, *names])
    f = _compile_scalar(rhs, [sys.time, *names])

    def field(t, y):
        try:
            out = np.array(f(t, y[0], y[1]), dtype=float)
        except (ZeroDivisionError, OverflowError, ValueError) as err:
            raise NonFinite(f"right-hand side undefined ({err})", float(t)) from None
        return out

    n = sample_count(t0, t1, dt)
    times = t0 + dt * np.arange(n)
    states = np.empty((n, 2))
    y = np.array([float(init[v]) for v in names])
    if not np.all(np.isfinite(y)):
        raise NonFinite("initial state is not finite", float(t0))
    states[0] = y
    h = float(dt)
    carry = np.zeros(2)  # compensated summation of the increments
    with np.errstate(all="ignore"):
        for k in range(1, n):
            t = times[k - 1]
            k1 = field(t, y)
            k2 = field(t + h / 2, y + h / 2 * k1)
            k3 = field(t + h / 2, y + h / 2 * k2)
            k4 = field(t + h, y + h * k3)
            step = h / 6 * (k1 + 2 * k2 + 2 * k3 + k4) - carry
            nxt = y + step
            carry = (nxt - y) - step
            y = nxt
            if not np.all(np.isfinite(y)):
                raise NonFinite("state left the finite domain", float(times[k]))
            states[k] = y
    return Trajectory(times, states, tuple(names), model, dict(init), h)


def _mp_log(x):
    if x == 0:
        raise ZeroDivisionError("log of zero")
    return mpmath.log(abs(x))


_EXTRA_DIGITS = 40


def _integral_values(value: sp.Expr, traj: Trajectory) -> list:
    """Values of ``value`` along ``traj`` in extended precision, so that the
    measured drift reflects the trajectory and not evaluation roundoff."""
    model = traj.model
    names = [model.time, *traj.variables]
    e = _bound(model, value)
    _check_bound(model, [e], names)
    f = sp.lambdify([ex.symbol(n) for n in names], e, modules=[{"log": _mp_log}, "mpmath"])
    out = []
    with mpmath.workdps(_EXTRA_DIGITS):
        for t, (u, v) in zip(traj.times, traj.states):
            try:
                val = f(mpmath.mpf(float(t)), mpmath.mpf(float(u)), mpmath.mpf(float(v)))
            except (ZeroDivisionError, ValueError, OverflowError) as err:
                raise DomainError(f"{ex.to_str(value)} undefined at t={float(t)!r}: {err}") from None
            val = mpmath.mpmathify(val)
            if not isinstance(val, mpmath.mpf) or not mpmath.isfinite(val):
                raise DomainError(f"{ex.to_str(value)} undefined at t={float(t)!r}")
            out.append(val)
    return out


def drift(I: FirstIntegral | sp.Expr, traj: Trajectory) -> float:
    """``max |I(s) - I(s0)| / max(|I(s0)|, 1)`` over the samples."""
    if isinstance(I, FirstIntegral):
        if not same_model(I.context, traj.model):
            raise ContextMismatch("first integral belongs to another model")
        value = I.value
    else:
        value = ex.sympify(I)
    vals = _integral_values(value, traj)
    with mpmath.workdps(_EXTRA_DIGITS):
        worst = max(abs(v - vals[0]) for v in vals)
        return float(worst / max(abs(vals[0]), 1))


def compare_reduction(sys: OdeSystem, red: SecondOrderOde, init: Mapping[str, float],
                      t0: float, t1: float, dt: float) -> float:
    """Largest deviation of the kept variable between the system and its reduction.

    The reduced equation starts from ``x = init[kept]`` and
    ``x' = rhs_kept(t0, init)``.
    """
    origin = red.origin
    if origin is None or tuple(origin.system.variables) != tuple(sys.variables):
        raise ContextMismatch("second-order equation is not a reduction of this system")
    missing = {k: v for k, v in sys.param_values.items() if k not in red.param_values}
    if missing:
        red = red.bind(**missing)
    k = sys.variables.index(origin.kept)
    binding = {sys.time: t0, **{v: init[v] for v in sys.variables}}
    speed = ex.evaluate(_bound(sys, sys.rhs[k]), binding)
    red_init = {red.variable: float(init[origin.kept]), red.xdot.name: speed}
    a = integrate(sys, init, t0, t1, dt).column(origin.kept)
    b = integrate(red, red_init, t0, t1, dt).column(red.variable)
    return float(np.max(np.abs(a - b)))
