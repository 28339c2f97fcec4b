import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from jlm import expr as ex
from jlm.errors import ContextMismatch, IncompatibleQuadratures
from jlm.model import SecondOrderOde
from jlm.multiplier import Multiplier
from jlm.variational import (LINEAR, SECOND_ORDER, Lagrangian, add_gauge, as_lagrangian, el_residual,
                             lagrangian_equiv, lagrangian_multiplier, linear_lagrangian,
                             satisfies_el, second_order_lagrangian)

from _shared import E, MODELS, ansatz, linear, pushed, reduced, reference, reference_lagrangian, second, sym, system

x, t = sym("x"), sym("t")
FREE = SecondOrderOde("x", sp.Integer(0))


def _zero(e, model):
    return ex.is_zero(e, symbolic=False, fixed=model.param_values)


# -- linear Lagrangians -----------------------------------------------------------


def test_volterra_lotka_simplified_linear_lagrangian():
    L = linear("volterra-lotka", "transformed")
    assert L.kind == LINEAR
    want = E("r1*r2_dot - r2*r1_dot + 2*(-B*exp(r1) + b*exp(r2) - A*r1 + a*r2)")
    assert ex.is_zero(L.value - want)


def test_volterra_lotka_original_linear_lagrangian():
    L = linear("volterra-lotka")
    want = E("log(w1)*w2_dot/w2 - log(w2)*w1_dot/w1 + 2*(-A*log(w1) + a*log(w2) - B*w1 + b*w2)")
    assert ex.numeric_equiv(L.value, want, positive={"w1", "w2"})


def test_host_parasite_linear_lagrangian():
    assert lagrangian_equiv(linear("host-parasite"), reference_lagrangian("host-parasite", "L[w]"))


@pytest.mark.parametrize("key", MODELS)
@pytest.mark.parametrize("variant", ["original", "transformed"])
def test_integration_order_gives_equivalent_lagrangians(key, variant):
    L1 = linear(key, variant)
    L2 = linear_lagrangian(system(key, variant), ansatz(key, variant), first=2)
    assert lagrangian_equiv(L1, L2)


@pytest.mark.parametrize("key", MODELS)
@pytest.mark.parametrize("variant", ["original", "transformed"])
def test_linear_lagrangians_satisfy_el(key, variant):
    L = linear(key, variant)
    assert satisfies_el(L, n=50)
    for r in el_residual(L, tidy=False):
        assert _zero(r, L.context)


def test_linear_lagrangian_rejects_wrong_multiplier():
    with pytest.raises(IncompatibleQuadratures):
        linear_lagrangian(system("volterra-lotka"), E("1/w1"))


def test_linear_lagrangian_rejects_foreign_multiplier():
    with pytest.raises(ContextMismatch):
        linear_lagrangian(system("gompertz"), ansatz("volterra-lotka"))


def test_linear_lagrangian_bad_order():
    with pytest.raises(ValueError):
        linear_lagrangian(system("volterra-lotka"), ansatz("volterra-lotka"), first=3)


# -- second-order Lagrangians -------------------------------------------------------


def test_volterra_lotka_reduced_lagrangian_matches_up_to_constant():
    L = second("volterra-lotka")
    ref = reference_lagrangian("volterra-lotka", "L1")
    assert lagrangian_equiv(L, ref, up_to_constant=True)
    # built from M1 = 1/(A - r2_dot); the reference form carries -B
    assert not lagrangian_equiv(L, ref)


def test_host_parasite_reduced_lagrangian():
    assert lagrangian_equiv(second("host-parasite"), reference_lagrangian("host-parasite", "L1"))


def test_free_particle_lagrangian():
    L = second_order_lagrangian(FREE, Multiplier(sp.Integer(1), FREE))
    assert L.kind == SECOND_ORDER
    assert ex.is_zero(L.value - sym("x_dot") ** 2 / 2)


@pytest.mark.parametrize("key", MODELS)
def test_hessian_law(key):
    L = second(key)
    assert ex.numeric_equiv(sp.diff(L.value, reduced(key).xdot, 2), pushed(key).value,
                            fixed=L.context.param_values)


# -- Euler-Lagrange ------------------------------------------------------------------


@pytest.mark.parametrize("form", ["L1", "L2"])
def test_reference_volterra_lotka_lagrangians_are_on_shell(form):
    L = reference_lagrangian("volterra-lotka", form)
    assert _zero(el_residual(L, tidy=False), L.context)


def test_pure_gauge_is_null_off_shell():
    eq = reduced("volterra-lotka")
    r2, r2_dot = sym("r2"), sym("r2_dot")
    assert ex.is_zero(el_residual(r2 * r2_dot, eq, on_shell=False))
    assert el_residual(x * sym("x_dot"), FREE, on_shell=False) == 0


def test_system_residual_has_two_components():
    res = el_residual(linear("gompertz", "transformed"))
    assert isinstance(res, tuple) and len(res) == 2


def test_el_residual_needs_model():
    with pytest.raises(ContextMismatch):
        el_residual(x)


# -- gauge and equivalence --------------------------------------------------------------


def test_zero_gauge_keeps_value():
    L = second("gompertz")
    assert add_gauge(L, 0).value == L.value


def test_gompertz_gauge_shift_matches_reference_form():
    L = add_gauge(second("gompertz"), E("exp(-(a + A)*t)*r1"))
    assert lagrangian_equiv(L, reference_lagrangian("gompertz", "L1"))


def test_gauge_rejects_velocities():
    with pytest.raises(ValueError):
        add_gauge(second("gompertz"), E("r1_dot"))


def test_scaled_lagrangian_is_not_equivalent():
    L = second("host-parasite")
    doubled = Lagrangian(2 * L.value, L.context, L.kind)
    assert not lagrangian_equiv(L, doubled)
    assert lagrangian_equiv(L, doubled, up_to_constant=True)


def test_equiv_requires_same_model():
    with pytest.raises(ContextMismatch):
        lagrangian_equiv(second("gompertz"), second("host-parasite"))


def test_verhulst_reduced_lagrangian_matches_corrected_form():
    red = reduced("verhulst")
    catalog_form = reference("verhulst", "L1")
    assert not lagrangian_equiv(second("verhulst"), as_lagrangian(catalog_form, red), up_to_constant=True)
    corrected = as_lagrangian(catalog_form * sp.exp(sym("r1")), red)
    assert lagrangian_equiv(second("verhulst"), corrected, up_to_constant=True)


def test_lagrangian_multiplier_of_linear_lagrangian():
    L = linear("volterra-lotka")
    assert ex.numeric_equiv(lagrangian_multiplier(L), E("1/(w1*w2)"))


GAUGE_ATOMS = st.sampled_from(["t", "r1", "r2", "1", "A", "b"])


@st.composite
def gauge_functions(draw):
    """Random F(t, r1, r2) from products, powers, exp and log of atoms."""
    terms = []
    for _ in range(draw(st.integers(1, 3))):
        a, b = draw(GAUGE_ATOMS), draw(GAUGE_ATOMS)
        shape = draw(st.sampled_from(["{a}*{b}", "exp({a}/3)*{b}", "({a})^2*{b}", "log(2 + ({a})^2)*{b}"]))
        terms.append(shape.format(a=a, b=b))
    return E(" + ".join(terms))


@settings(max_examples=30, deadline=None)
@given(gauge_functions())
def test_gauge_invariance_of_system_residuals(F):
    L = linear("volterra-lotka", "transformed")
    before = el_residual(L, on_shell=False, tidy=False)
    after = el_residual(add_gauge(L, F), on_shell=False, tidy=False)
    for b, a in zip(before, after):
        assert ex.numeric_equiv(a, b)


@settings(max_examples=30, deadline=None)
@given(gauge_functions())
def test_gauge_invariance_of_second_order_residual(F):
    F = F.xreplace({sym("r1"): sym("r2")})
    L = second("volterra-lotka")
    before = el_residual(L, on_shell=False, tidy=False)
    after = el_residual(add_gauge(L, F), on_shell=False, tidy=False)
    assert ex.numeric_equiv(after, before)
