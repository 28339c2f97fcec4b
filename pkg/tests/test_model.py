import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from jlm import catalog
from jlm import expr as ex
from jlm.errors import ModelError, NonInvertible
from jlm.model import ChangeOfVariables, OdeSystem, apply_change, load_model, parse_model

from _shared import E, MODELS, sym

GOLDEN = {
    ("volterra-lotka", "original"): ("w1*(a + b*w2)", "w2*(A + B*w1)"),
    ("volterra-lotka", "transformed"): ("a + b*exp(r2)", "A + B*exp(r1)"),
    ("gompertz", "original"): ("w1*(A*log(w1/m1) + B*w2)", "w2*(a*log(w2/m2) + b*w1)"),
    ("gompertz", "transformed"): ("A*r1 + B*m2*exp(r2)", "a*r2 + b*m1*exp(r1)"),
    ("verhulst", "original"): ("w1*(A + B*w1 + f1*w2)", "w2*(a + b*w2 + f2*w1)"),
    ("verhulst", "transformed"): ("A + B*exp(r1) + f1*exp(r2)", "a + b*exp(r2) + f2*exp(r1)"),
    ("host-parasite", "original"): ("w1*(a - b*w2)", "w2*(A - B*w2/w1)"),
    ("host-parasite", "transformed"): ("-b*r1*r2*exp(A*t)", "-B*r2^2*exp(t*(A - a))/r1"),
}


@pytest.mark.parametrize("key, variant", sorted(GOLDEN))
def test_catalog_golden_strings(key, variant):
    sys = load_model(f"{key}/{variant}")
    assert tuple(ex.to_str(r) for r in sys.rhs) == GOLDEN[key, variant]


@pytest.mark.parametrize("key", MODELS)
def test_catalog_transformed_matches_closed_form(key):
    sys = catalog.system(key, "transformed")
    for got, want in zip(sys.rhs, catalog.reference_transformed(key)):
        assert ex.numeric_equiv(got, want, positive=sys.positive)


def test_load_named_variant_argument():
    assert load_model("gompertz", variant="transformed").variables == ("r1", "r2")


def test_zero_system_file(tmp_path):
    path = tmp_path / "zero.jlm"
    path.write_text("dot u1 = 0; dot u2 = 0\n")
    sys = load_model(path)
    assert sys.variables == ("u1", "u2")
    assert sys.rhs == (0, 0)


def test_parse_full_file():
    sys = parse_model("""
        # logistic pair
        name: demo
        params: a=1/2, b=-1, c
        vars: x, y
        positive: x
        dot x = a*x   # growth
        dot y = b*y + c
    """)
    assert sys.name == "demo"
    assert sys.params == {"a": sp.Rational(1, 2), "b": -1, "c": None}
    assert sys.param_values == {"a": sp.Rational(1, 2), "b": -1}
    assert sys.positive == frozenset({"x"})
    assert sys.rhs[1] == sym("b") * sym("y") + sym("c")


@pytest.mark.parametrize("text, fragment", [
    ("vars: u1, u2\ndot u1 = k*u1\ndot u2 = 0", "undeclared"),
    ("vars: u1, u2\ndot u1 = u1", "missing equation"),
    ("dot u1 = (u1\ndot u2 = 0", "line 1"),
    ("vars: u1\ndot u1 = 0", "two variables"),
    ("bogus line", "unrecognized"),
    ("params: a=x\ndot u1 = 0; dot u2 = 0", "bad parameter"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(ModelError, match=fragment):
        parse_model(text)


def test_unknown_model_name():
    with pytest.raises(ModelError):
        load_model("no-such-model")


def test_map_directives_attach_change():
    sys = parse_model("vars: w1, w2\ndot w1 = w1; dot w2 = -w2\nmap w1 -> exp(r1)\nmap w2 -> exp(r2)")
    assert sys.change.new == ("r1", "r2")
    assert ex.numeric_equiv(sys.change.inverse[0], E("log(w1)"), positive=["w1"])
    out = apply_change(sys, sys.change)
    assert out.rhs == (1, -1)


# -- changes of variables --------------------------------------------------------


def test_vl_exponential_change():
    out = apply_change(catalog.system("volterra-lotka"), catalog.system("volterra-lotka").change)
    assert out.rhs[0] == E("b*exp(r2) + a") and out.rhs[1] == E("B*exp(r1) + A")


def test_host_parasite_time_dependent_change():
    orig = catalog.system("host-parasite")
    out = apply_change(orig, orig.change)
    want = catalog.reference_transformed("host-parasite")
    for got, w in zip(out.rhs, want):
        assert ex.numeric_equiv(got, w)


def test_identity_change_is_structural():
    sys = catalog.system("verhulst")
    out = apply_change(sys, ChangeOfVariables.identity(sys.variables))
    assert out.rhs == sys.rhs


def test_singular_change_rejected():
    sys = catalog.system("volterra-lotka")
    r1, r2 = sym("r1"), sym("r2")
    cov = ChangeOfVariables(("w1", "w2"), ("r1", "r2"), (r1 + r2, 2 * (r1 + r2)), (r1, r2))
    with pytest.raises(NonInvertible):
        apply_change(sys, cov)


def test_change_expects_matching_variables():
    sys = OdeSystem(("x", "y"), (sp.Integer(0), sp.Integer(0)))
    with pytest.raises(ModelError):
        apply_change(sys, catalog.system("gompertz").change)


@pytest.mark.parametrize("key", MODELS)
def test_change_round_trip(key):
    orig = catalog.system(key)
    there = apply_change(orig, orig.change)
    back = apply_change(there, orig.change.inverted())
    for got, want in zip(back.rhs, orig.rhs):
        assert ex.numeric_equiv(got, want, positive=orig.positive | {"m1", "m2"})


@settings(max_examples=25, deadline=None)
@given(st.integers(-3, 3).filter(bool), st.integers(-3, 3), st.integers(-3, 3).filter(bool),
       st.integers(-2, 2))
def test_linear_change_round_trip(p, q, s, k):
    x, y, t = sym("x"), sym("y"), sym("t")
    X, Y = sym("X"), sym("Y")
    sys = OdeSystem(("x", "y"), (y, -x + t * y))
    # x = p*X + q*Y, y = s*Y + k*t : unimodular enough to invert in closed form
    fwd = (p * X + q * Y, s * Y + k * t)
    inv = ((x - q * (y - k * t) / s) / p, (y - k * t) / s)
    cov = ChangeOfVariables(("x", "y"), ("X", "Y"), fwd, inv)
    cov.check()
    back = apply_change(apply_change(sys, cov), cov.inverted())
    for got, want in zip(back.rhs, sys.rhs):
        assert ex.numeric_equiv(got, want)


def test_bind_rejects_unknown_parameter():
    with pytest.raises(ModelError):
        catalog.system("volterra-lotka").bind(z=1)
