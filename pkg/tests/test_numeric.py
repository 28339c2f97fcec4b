import io
import math

import numpy as np
import pytest
import sympy as sp

from jlm import catalog
from jlm import expr as ex
from jlm.errors import DomainError, NonFinite, UnboundSymbol
from jlm.model import OdeSystem, load_model, parse_model
from jlm.numeric import compare_reduction, drift, integrate, sample_count
from jlm.reduction import eliminate

from _shared import E, MODELS, reduced, sym

VL_INTEGRAL = E("-log(w1) - log(w2) + w1 + w2")
ZERO = parse_model("dot u1 = 0; dot u2 = 0")


@pytest.fixture(scope="module")
def vl_run():
    sys, init, _ = catalog.benchmark("volterra-lotka")
    return integrate(sys, init, 0.0, 5.0, 1e-3)


def test_sample_count():
    assert sample_count(0, 5, 1e-3) == 5001
    assert sample_count(0, 1, 0.3) == 4
    assert sample_count(0.5, 1.0, 0.5) == 2


def test_volterra_lotka_benchmark_is_bounded(vl_run):
    assert len(vl_run) == 5001
    assert np.all(np.diff(vl_run.times) > 0)
    assert np.all(np.isfinite(vl_run.states))
    assert vl_run.states.min() > 0 and vl_run.states.max() < 10


def test_halved_step_agrees(vl_run):
    sys, init, _ = catalog.benchmark("volterra-lotka")
    fine = integrate(sys, init, 0.0, 5.0, 5e-4)
    assert np.max(np.abs(fine.states[::2] - vl_run.states)) < 1e-7


def test_integrate_is_deterministic():
    sys, init, (t0, t1) = catalog.benchmark("gompertz")
    a = integrate(sys, init, t0, t1, 1e-2)
    b = integrate(sys, init, t0, t1, 1e-2)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.times, b.times)


def test_zero_system_is_constant():
    traj = integrate(ZERO, {"u1": 1.5, "u2": -2.0}, 0, 1, 0.1)
    assert np.all(traj.states == [1.5, -2.0])


def test_host_parasite_from_unit_state_stays_finite():
    sys = catalog.system("host-parasite").bind(a=1, b=1, A=1, B=1)
    for dt in (1e-3, 5e-4):
        traj = integrate(sys, {"w1": 1.0, "w2": 1.0}, 0, 2, dt)
        assert np.all(np.isfinite(traj.states))


def test_second_order_equation_runs_as_system():
    osc = eliminate(OdeSystem(("x", "y"), (sym("y"), -sym("x"))), "x")
    traj = integrate(osc, {"x": 1.0, "x_dot": 0.0}, 0, math.pi, 1e-3)
    assert traj.variables == ("x", "x_dot")
    assert abs(traj.column("x")[-1] + 1) < 1e-6


def test_csv_export(tmp_path):
    traj = integrate(ZERO, {"u1": 0.1, "u2": 1 / 3}, 0, 0.2, 0.1)
    text = traj.to_csv()
    lines = text.splitlines()
    assert lines[0] == "t,u1,u2"
    assert lines[1] == "0.0,0.1,0.3333333333333333"
    assert len(lines) == 4
    out = tmp_path / "traj.csv"
    traj.to_csv(out)
    assert out.read_text() == text
    buf = io.StringIO()
    traj.to_csv(buf)
    assert buf.getvalue() == text


def test_blow_up_reports_time():
    sys = parse_model("dot u1 = u1^2; dot u2 = 0")
    with pytest.raises(NonFinite) as info:
        integrate(sys, {"u1": 1.0, "u2": 0.0}, 0, 2, 1e-3)
    # exact blow-up at t = 1
    assert 0.9 < info.value.time < 1.2


@pytest.mark.parametrize("args", [(0, 1, 0), (0, 1, -1e-3), (1, 1, 1e-3)])
def test_bad_time_grid(args):
    with pytest.raises(ValueError):
        integrate(ZERO, {"u1": 0, "u2": 0}, *args)


def test_unbound_parameter():
    with pytest.raises(UnboundSymbol):
        integrate(catalog.system("volterra-lotka"), {"w1": 1, "w2": 1}, 0, 1, 0.1)


def test_missing_initial_value():
    with pytest.raises(UnboundSymbol):
        integrate(ZERO, {"u1": 0}, 0, 1, 0.1)


# -- drift ------------------------------------------------------------------------------


def test_volterra_lotka_integral_drift(vl_run):
    assert ex.evaluate(VL_INTEGRAL, {"w1": 2, "w2": 1}) == pytest.approx(3 - math.log(2))
    assert drift(VL_INTEGRAL, vl_run) < 1e-6


def test_constant_integral_has_zero_drift(vl_run):
    assert drift(sp.Integer(7), vl_run) == 0.0


def test_time_is_a_large_drift(vl_run):
    assert drift(sym("t"), vl_run) == pytest.approx(5.0)


def test_drift_domain_error():
    traj = integrate(ZERO, {"u1": 0.0, "u2": 1.0}, 0, 1, 0.5)
    with pytest.raises(DomainError):
        drift(E("log(u1)"), traj)


def test_drift_order_of_rk4():
    sys, init, _ = catalog.benchmark("volterra-lotka")
    coarse = drift(VL_INTEGRAL, integrate(sys, init, 0, 5, 1e-2))
    fine = drift(VL_INTEGRAL, integrate(sys, init, 0, 5, 5e-3))
    assert 8 <= coarse / fine <= 32


# -- reductions --------------------------------------------------------------------------


@pytest.mark.parametrize("key", MODELS)
def test_compare_reduction(key):
    sys, init, (t0, t1) = catalog.benchmark(key, "transformed")
    assert compare_reduction(sys, reduced(key), init, t0, t1, 1e-3) < 1e-6


def test_compare_reduction_of_zero_like_system():
    sys = parse_model("dot u1 = u2; dot u2 = 0")
    red = eliminate(sys, "u1")
    assert compare_reduction(sys, red, {"u1": 1.0, "u2": 0.0}, 0, 1, 0.1) == 0.0


def test_growth_file_blows_up():
    from pathlib import Path
    sys = load_model(Path(__file__).resolve().parent.parent / "models" / "decoupled-growth.jlm")
    with pytest.raises(NonFinite) as info:
        integrate(sys, {"u1": 1.0, "u2": 1.0}, 0, 2000, 0.1)
    assert 1400 < info.value.time < 1430
