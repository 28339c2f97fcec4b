"""Built-in population models and their reference closed forms.

Each entry holds the original planar system (in the model-file format), the
change of variables to the simplified system, the variable kept when the
simplified system is reduced to one second-order equation, and reference
expressions (multipliers, Lagrangians, first integrals) used by
``--compare-paper`` and by the acceptance suite.  Reference Lagrangians omit
gauge terms.

Reference keys: ``M[w]``/``M[r]`` system multipliers in original/simplified
variables, ``L[w]``/``L[r]`` linear Lagrangians, ``I[w]`` first integral,
``backsub`` the eliminated variable, ``reduced`` the second-order right-hand
side, ``M1``/``L1``/``I1`` (and ``M2``/``L2``) for the reduced equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import sympy as sp

from . import expr as ex
from .errors import ModelError
from .model import OdeSystem, apply_change, parse_model


@dataclass(frozen=True)
class Entry:
    key: str
    title: str
    source: str
    transformed: tuple[str, str]
    transformed_positive: frozenset[str]
    keep: str
    forms: dict[str, str]
    aux: dict[str, str] = field(default_factory=dict)
    # numeric benchmark: parameter values, initial state (original variables), horizon
    bench_params: dict[str, str] = field(default_factory=dict)
    bench_init: dict[str, str] = field(default_factory=dict)
    horizon: tuple[float, float] = (0.0, 2.0)


_VL = Entry(
    key="volterra-lotka",
    title="Volterra-Lotka predator-prey",
    source="""
        params: a, b, A, B
        vars: w1, w2
        positive: w1, w2
        dot w1 = w1*(a + b*w2)
        dot w2 = w2*(A + B*w1)
        map w1 -> exp(r1)
        map w2 -> exp(r2)
        inverse r1 -> log(w1)
        inverse r2 -> log(w2)
    """,
    transformed=("b*exp(r2) + a", "B*exp(r1) + A"),
    transformed_positive=frozenset(),
    keep="r2",
    forms={
        "M[r]": "1",
        "M[w]": "1/(w1*w2)",
        "L[r]": "r1*r2_dot - r2*r1_dot + 2*(-B*exp(r1) + b*exp(r2) - A*r1 + a*r2)",
        "L[w]": "log(w1)*w2_dot/w2 - log(w2)*w1_dot/w1 + 2*(-A*log(w1) + a*log(w2) - B*w1 + b*w2)",
        "I[w]": "A*log(w1) - a*log(w2) + B*w1 - b*w2",
        "backsub": "log((r2_dot - A)/B)",
        "reduced": "-(b*exp(r2) + a)*(A - r2_dot)",
        "M1": "B/(r2_dot - A)",
        "L1": "B*((r2_dot - A)*log(A - r2_dot) - r2_dot + b*exp(r2) + a*r2)",
        "I1": "-a*r2 + r2_dot + A*log(A - r2_dot) - b*exp(r2)",
        "M2": "B/(A - r2_dot)*(a*r2 - r2_dot - A*log(A - r2_dot) + b*exp(r2))",
        "L2": ("-B/2*((A*log(A - r2_dot) - 2*a*r2)*(A - r2_dot)*log(A - r2_dot)"
               " - (2*a*r2 + r2_dot)*r2_dot"
               " - 2*b*exp(r2)*((A - r2_dot)*log(A - r2_dot) + r2_dot)"
               " + b^2*exp(2*r2) + 2*a*b*r2*exp(r2) + a^2*r2^2)"),
    },
    bench_params={"a": "1", "b": "-1", "A": "-1", "B": "1"},
    bench_init={"w1": "2", "w2": "1"},
    horizon=(0.0, 3.0),
)

_GOMPERTZ = Entry(
    key="gompertz",
    title="Gompertz competition",
    source="""
        params: A, B, a, b, m1, m2
        vars: w1, w2
        positive: w1, w2, m1, m2
        dot w1 = w1*(A*log(w1/m1) + B*w2)
        dot w2 = w2*(a*log(w2/m2) + b*w1)
        map w1 -> m1*exp(r1)
        map w2 -> m2*exp(r2)
        inverse r1 -> log(w1/m1)
        inverse r2 -> log(w2/m2)
    """,
    transformed=("m2*B*exp(r2) + A*r1", "m1*b*exp(r1) + a*r2"),
    transformed_positive=frozenset(),
    keep="r1",
    forms={
        "M[r]": "exp(-(a + A)*t)",
        "M[w]": "exp(-(a + A)*t)/(w1*w2)",
        "L[r]": ("exp(-(a + A)*t)*(r1*r2_dot - r2*r1_dot - 2*m1*b*exp(r1) + 2*m2*B*exp(r2)"
                 " + (A - a)*r1*r2)"),
        "L[w]": ("exp(-(a + A)*t)*(log(w1)*w2_dot/w2 - log(w2)*w1_dot/w1"
                 " - 2*a*log(w2/m2)*log(w1) + 2*B*w2 - 2*b*w1 + 2*A*log(w1/m1)*log(w2)"
                 " - (A - a)*log(w1)*log(w2))"),
        "backsub": "log((r1_dot - A*r1)/(B*m2))",
        "reduced": "(b*m1*exp(r1) + a*log((r1_dot - A*r1)/(B*m2)))*(r1_dot - A*r1) + A*r1_dot",
        "M1": "exp(-(a + A)*t)/(r1_dot - A*r1)",
        "L1": ("exp(-(a + A)*t)*((r1_dot - A*r1)*log(r1_dot - A*r1) + m1*b*exp(r1)"
               " - a*r1*log(B*m2) - a*r1)"),
    },
    bench_params={"A": "-1", "B": "-1/2", "a": "-1", "b": "-1/2", "m1": "1", "m2": "1"},
    bench_init={"w1": "1/2", "w2": "1/4"},
)

_VERHULST = Entry(
    key="verhulst",
    title="Verhulst logistic competition",
    source="""
        params: A, B, f1, a, b, f2
        vars: w1, w2
        positive: w1, w2
        dot w1 = w1*(A + B*w1 + f1*w2)
        dot w2 = w2*(a + b*w2 + f2*w1)
        map w1 -> exp(r1)
        map w2 -> exp(r2)
        inverse r1 -> log(w1)
        inverse r2 -> log(w2)
    """,
    transformed=("A + B*exp(r1) + f1*exp(r2)", "a + b*exp(r2) + f2*exp(r1)"),
    transformed_positive=frozenset(),
    keep="r1",
    aux={
        "b1": "(-2*B*b + b*f2 + f1*f2)/(B*b - f1*f2)",
        "b2": "(-2*B*b + B*f1 + f1*f2)/(B*b - f1*f2)",
        "b3": "(A*B*b - A*b*f2 + a*B*b - a*B*f1)/(B*b - f1*f2)",
    },
    forms={
        "M[w]": "w1^b1*w2^b2*exp(b3*t)",
        "M[r]": "exp((b1 + 1)*r1 + (b2 + 1)*r2 + b3*t)",
        "L[w]": ("exp(b3*t)*(w2^b2*w1^(b1 + 1)*w2_dot/(b1 + 1) - w2^(b2 + 1)*w1^b1*w1_dot/(b2 + 1)"
                 " - w2^(b2 + 1)*w1^(b1 + 1)*(2*f2*w1/(b1 + 2) + 2*b*w2/(b1 + 1)"
                 " + (2*a*(b2 + 1) + b3)/((b1 + 1)*(b2 + 1))))"),
        "L[r]": ("exp((b1 + 1)*r1 + (b2 + 1)*r2 + b3*t)*(r2_dot/(b1 + 1) - r1_dot/(b2 + 1)"
                 " - (2*f2*exp(r1)/(b1 + 2) + 2*b*exp(r2)/(b1 + 1)"
                 " + (2*a*(b2 + 1) + b3)/((b1 + 1)*(b2 + 1))))"),
        "backsub": "log((r1_dot - B*exp(r1) - A)/f1)",
        "reduced": ("1/f1*((a*f1 + b*r1_dot)*r1_dot + A^2*b + B*exp(2*r1)*(B*b - f1*f2)"
                    " - A*(a*f1 + 2*b*r1_dot)"
                    " - exp(r1)*(f1*(a*B - f2*r1_dot) + B*(2*b - f1)*r1_dot - A*(2*b*B - f1*f2)))"),
        "M1": "exp(b1*r1 + b3*t)*(r1_dot - A - B*exp(r1))^b2*(b2 + 2)*(b2 + 1)",
        "L1": "exp(b1*r1)*exp(b3*t)*(r1_dot - A - B*exp(r1))^(b2 + 2)",
    },
    bench_params={"A": "1", "B": "-1", "f1": "-1/2", "a": "1", "b": "-1", "f2": "-1/2"},
    bench_init={"w1": "1/2", "w2": "1/4"},
)

_HOST_PARASITE = Entry(
    key="host-parasite",
    title="host-parasite",
    source="""
        params: a, b, A, B
        vars: w1, w2
        positive: w1, w2
        dot w1 = (a - b*w2)*w1
        dot w2 = (A - B*w2/w1)*w2
        map w1 -> r1*exp(a*t)
        map w2 -> r2*exp(A*t)
        inverse r1 -> w1*exp(-a*t)
        inverse r2 -> w2*exp(-A*t)
    """,
    transformed=("-b*exp(A*t)*r1*r2", "-B*exp(A*t)*r2^2/(exp(a*t)*r1)"),
    transformed_positive=frozenset({"r1", "r2"}),
    keep="r1",
    forms={
        "M[w]": "exp(A*t)/(w1*w2^2)",
        "M[r]": "1/(r1*r2^2)",
        "L[w]": ("exp(A*t)*(log(w1)*w2_dot/w2^2 + w1_dot/(w1*w2) - 2*a/w2 - 2*B/w1"
                 " - log(w1)*A/w2 - 2*b*log(w2))"),
        "L[r]": ("log(r1)*r2_dot/r2^2 + r1_dot/(r1*r2)"
                 " - 2*exp(A*t)*(b*r1*log(r2)*exp(a*t) + B)/(r1*exp(a*t))"),
        "backsub": "-r1_dot/(b*exp(A*t)*r1)",
        "reduced": "(b*exp(a*t)*r1 + B)/(b*exp(a*t)*r1^2)*r1_dot^2 + A*r1_dot",
        "M1": "-b*exp(A*t)/r1_dot^2",
        "L1": "b*exp(A*t)*log(r1_dot) - b*exp(A*t)*log(r1) + B*exp(A*t)/(exp(a*t)*r1)",
    },
    bench_params={"a": "1", "b": "1", "A": "1", "B": "1"},
    bench_init={"w1": "1", "w2": "1/2"},
)

MODELS: dict[str, Entry] = {e.key: e for e in (_VL, _GOMPERTZ, _VERHULST, _HOST_PARASITE)}
VARIANTS = ("original", "transformed")


def entry(key: str) -> Entry:
    try:
        return MODELS[key]
    except KeyError:
        raise ModelError(f"unknown catalog model {key!r}; known: {', '.join(MODELS)}") from None


@lru_cache(maxsize=None)
def system(key: str, variant: str = "original") -> OdeSystem:
    e = entry(key)
    original = parse_model(e.source, name=f"{key}/original")
    if variant == "original":
        return original
    if variant == "transformed":
        return apply_change(original, original.change, name=f"{key}/transformed",
                            positive=e.transformed_positive)
    raise ModelError(f"unknown variant {variant!r}; use one of {VARIANTS}")


def aux_definitions(key: str) -> dict[sp.Symbol, sp.Expr]:
    return {ex.symbol(k): ex.parse(v) for k, v in entry(key).aux.items()}


def reference(key: str, form: str, expand_aux: bool = True) -> sp.Expr:
    """Reference expression ``form`` of model ``key`` (auxiliary constants substituted)."""
    e = entry(key)
    if form not in e.forms:
        raise ModelError(f"{key} has no reference form {form!r}")
    out = ex.parse(e.forms[form])
    if expand_aux and e.aux:
        out = out.xreplace(aux_definitions(key))
    return out


def reference_transformed(key: str) -> tuple[sp.Expr, sp.Expr]:
    return tuple(ex.parse(s) for s in entry(key).transformed)


def benchmark(key: str, variant: str = "original"):
    """``(bound system, initial state, (t0, t1))`` of the standard numeric run.

    For the transformed variant the initial state is mapped through the
    attached inverse change of variables.
    """
    e = entry(key)
    params = {k: Fraction(v) for k, v in e.bench_params.items()}
    sys = system(key, variant).bind(**params)
    init = {k: float(Fraction(v)) for k, v in e.bench_init.items()}
    if variant == "transformed":
        cov = sys.change
        binding = {sys.time: e.horizon[0], **init, **{k: float(v) for k, v in params.items()}}
        init = {name: ex.evaluate(expr, binding) for name, expr in zip(cov.new, cov.inverse)}
    return sys, init, e.horizon
