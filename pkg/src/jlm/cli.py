"""``jlm``: batch driver for multipliers, Lagrangians, integrals and simulations.

Every command prints a human-readable report, or with ``--format json`` a
single JSON document::

    {"command": str, "model": str, "status": str,
     "expressions": {name: str}, "residuals": {name: str},
     "constraints": [str], "metrics": {name: number}}

``--all-models`` adds a ``"reports"`` list holding one such document per
catalog model.

Exit codes: 0 success, 1 input error, 2 method failure, 3 failed comparison
or verification.  Randomized checks use seed 0 unless ``--seed`` or the
``JLM_SEED`` environment variable says otherwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import sympy as sp

from . import catalog
from . import expr as ex
from .errors import (AnsatzInsufficient, DegenerateParameters, DomainError, JLMError, ModelError,
                     NonFinite, NotConserved, NotInvertible, ParseError, UnboundSymbol)
from .integrals import FirstIntegral, conservation_residual, is_conserved
from .model import OdeSystem, SecondOrderOde, load_model
from .multiplier import AnsatzSpec, Multiplier, residual, solve_ansatz
from .noether import multiplier_chain, noether_integral_system
from .numeric import drift, integrate
from .reduction import eliminate, push_multiplier
from .variational import (as_lagrangian, el_residual, lagrangian_equiv, linear_lagrangian,
                          satisfies_el, second_order_lagrangian)

OK, INPUT_ERROR, METHOD_FAILURE, COMPARISON_FAILURE = 0, 1, 2, 3
DEFAULT_SEED = 0

_INPUT_ERRORS = (ModelError, ParseError, UnboundSymbol, OSError, ValueError)


class InputError(Exception):
    pass


@dataclass
class Report:
    command: str
    model: str
    status: str = "ok"
    expressions: dict[str, str] = field(default_factory=dict)
    residuals: dict[str, str] = field(default_factory=dict)
    constraints: list[str] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)
    lines: list[str] = field(default_factory=list)
    exit_code: int = OK

    def say(self, text: str) -> None:
        self.lines.append(text)

    def fail(self, status: str, code: int, message: str) -> "Report":
        self.status = status
        self.exit_code = max(self.exit_code, code)
        self.say(message)
        self.expressions.setdefault("message", message)
        return self

    def as_json(self) -> dict:
        return {"command": self.command, "model": self.model, "status": self.status,
                "expressions": self.expressions, "residuals": self.residuals,
                "constraints": self.constraints, "metrics": self.metrics}


# ---------------------------------------------------------------------------
# argument helpers


def _assignments(text: str | None) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"expected name=value, got {item!r}")
        try:
            out[name.strip()] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise InputError(f"not a rational number: {value!r}") from None
    return out


def _catalog_key(name: str) -> str | None:
    base = name.partition("/")[0]
    return base if base in catalog.MODELS and not Path(name).is_file() else None


def _load(args, reduce_var: str | None = None) -> OdeSystem:
    """System named by ``--model``; switches to the simplified variant when the
    reduction variable lives there."""
    sys_ = load_model(args.model, args.variant)
    key = _catalog_key(args.model)
    if reduce_var and reduce_var not in sys_.variables and key and args.variant is None \
            and "/" not in args.model:
        alt = catalog.system(key, "transformed")
        if reduce_var in alt.variables:
            sys_ = alt
    if reduce_var and reduce_var not in sys_.variables:
        raise InputError(f"unknown variable {reduce_var!r}; model variables are {', '.join(sys_.variables)}")
    params = _assignments(getattr(args, "params", None))
    if params:
        sys_ = sys_.bind(**{k: v for k, v in params.items()})
    return sys_


def _spec(terms: str | None) -> AnsatzSpec:
    if not terms:
        return AnsatzSpec()
    chosen = {t.strip() for t in terms.split(",") if t.strip()}
    known = {"time", "pow1", "pow2", "exp1", "exp2"}
    if chosen - known:
        raise InputError(f"unknown ansatz terms {sorted(chosen - known)}; choose from {sorted(known)}")
    return AnsatzSpec("time" in chosen, ("pow1" in chosen, "pow2" in chosen),
                      ("exp1" in chosen, "exp2" in chosen))


def _read_expression(path: str) -> sp.Expr:
    text = Path(path).read_text(encoding="utf-8")
    body = " ".join(line.split("#", 1)[0] for line in text.splitlines()).strip()
    if not body:
        raise InputError(f"{path} holds no expression")
    return ex.parse(body)


def _ansatz_multiplier(sys_: OdeSystem, report: Report, spec: AnsatzSpec | None = None) -> Multiplier:
    M = solve_ansatz(sys_, spec)
    report.constraints.extend(M.constraints)
    return M


def _reduced(sys_: OdeSystem, var: str, report: Report) -> tuple[SecondOrderOde, Multiplier]:
    M = _ansatz_multiplier(sys_, report)
    red = eliminate(sys_, var)
    report.expressions["reduced"] = ex.to_str(red.rhs)
    report.expressions["back_substitution"] = ex.to_str(red.origin.back_substitution)
    report.say(f"{var}'' = {ex.to_str(red.rhs)}")
    return red, push_multiplier(M, red)


def _zero_status(ok: bool) -> str:
    return "0" if ok else "nonzero"


# ---------------------------------------------------------------------------
# commands


def cmd_multiplier(args) -> Report:
    report = Report("multiplier", args.model)
    sys_ = _load(args)
    report.say(sys_.describe())
    M = _ansatz_multiplier(sys_, report, _spec(args.terms))
    report.expressions["M"] = ex.to_str(M.value)
    for name, value in sorted(M.exponents.items()):
        report.expressions[name] = ex.to_str(value)
    report.residuals["multiplier"] = "0"
    report.say(f"M = {ex.to_str(M.value)}")
    for name, value in sorted(M.exponents.items()):
        report.say(f"  {name} = {ex.to_str(value)}")
    report.say("residual: 0 (verified)")
    for c in M.constraints:
        report.say(f"  requires {c}")
    return report


def _reference_form(sys_: OdeSystem, reduce_var: str | None, model_name: str) -> tuple[str, sp.Expr]:
    key = _catalog_key(model_name)
    if key is None:
        raise InputError("--compare-paper needs a catalog model")
    if reduce_var:
        if reduce_var != catalog.entry(key).keep:
            raise InputError(f"catalog holds a reduced Lagrangian for {catalog.entry(key).keep} only")
        form = "L1"
    else:
        form = "L[r]" if sys_.change is not None and sys_.variables != catalog.system(key).variables else "L[w]"
    return form, catalog.reference(key, form)


def cmd_lagrangian(args) -> Report:
    report = Report("lagrangian", args.model)
    sys_ = _load(args, args.reduce)
    if args.reduce:
        red, M = _reduced(sys_, args.reduce, report)
        L = second_order_lagrangian(red, M)
        context = red
    else:
        M = _ansatz_multiplier(sys_, report)
        L = linear_lagrangian(sys_, M)
        context = sys_
    report.expressions["M"] = ex.to_str(M.value)
    report.expressions["L"] = ex.to_str(L.value)
    report.expressions["L_latex"] = ex.to_latex(L.value)
    ok = satisfies_el(L)
    report.residuals["euler_lagrange"] = _zero_status(ok)
    report.say(f"M = {ex.to_str(M.value)}")
    report.say(f"L = {ex.to_str(L.value)}")
    report.say(f"    {ex.to_latex(L.value)}")
    report.say(f"Euler-Lagrange residual: {_zero_status(ok)}")
    if not ok:
        return report.fail("fail", METHOD_FAILURE, "constructed Lagrangian does not reproduce the equations")
    if args.compare_paper:
        form, ref = _reference_form(sys_, args.reduce, args.model)
        same = lagrangian_equiv(L, as_lagrangian(ref, context, "catalog"), up_to_constant=True)
        report.expressions[f"reference {form}"] = ex.to_str(ref)
        report.metrics["compare_pass"] = int(same)
        report.say(f"reference {form} = {ex.to_str(ref)}")
        if same:
            report.say("compare: PASS")
        else:
            return report.fail("fail", COMPARISON_FAILURE, "compare: FAIL")
    return report


def cmd_verify(args) -> Report:
    report = Report("verify", args.model)
    sys_ = _load(args, args.reduce)
    context = eliminate(sys_, args.reduce) if args.reduce else sys_
    if bool(args.lagrangian) == bool(args.integral):
        raise InputError("give exactly one of --lagrangian or --integral")
    if args.lagrangian:
        value = _read_expression(args.lagrangian)
        L = as_lagrangian(value, context)
        report.expressions["L"] = ex.to_str(value)
        ok = satisfies_el(L)
        report.say(f"L = {ex.to_str(value)}")
        if ok:
            report.residuals["euler_lagrange"] = "0"
        else:
            res = el_residual(L)
            parts = res if isinstance(res, tuple) else (res,)
            report.residuals["euler_lagrange"] = "; ".join(ex.to_str(ex.tidy(r)) for r in parts)
    else:
        value = _read_expression(args.integral)
        report.expressions["I"] = ex.to_str(value)
        ok = is_conserved(value, context)
        report.say(f"I = {ex.to_str(value)}")
        report.residuals["dI/dt"] = "0" if ok else ex.to_str(ex.tidy(conservation_residual(value, context)))
    for name, r in report.residuals.items():
        report.say(f"{name} residual: {r}")
    if not ok:
        return report.fail("fail", COMPARISON_FAILURE, "verify: FAIL")
    report.say("verify: PASS")
    return report


def cmd_chain(args) -> Report:
    report = Report("chain", args.model)
    key = _catalog_key(args.model)
    var = args.reduce or (catalog.entry(key).keep if key else None)
    if var is None:
        raise InputError("--reduce is required for model files")
    sys_ = _load(args, var)
    red, M0 = _reduced(sys_, var, report)
    chain = multiplier_chain(red, M0, depth=args.depth)
    for k, step in enumerate(chain, start=1):
        m_ok = _multiplier_vanishes(step.multiplier)
        l_ok = satisfies_el(step.lagrangian)
        i_ok = is_conserved(step.integral.value, red)
        for name, value in (("M", step.multiplier.value), ("L", step.lagrangian.value), ("I", step.integral.value)):
            report.expressions[f"{name}{k}"] = ex.to_str(value)
            report.say(f"{name}{k} = {ex.to_str(value)}")
        report.residuals[f"multiplier{k}"] = _zero_status(m_ok)
        report.residuals[f"euler_lagrange{k}"] = _zero_status(l_ok)
        report.residuals[f"dI{k}/dt"] = _zero_status(i_ok)
        report.say(f"  residuals: multiplier {_zero_status(m_ok)}, Euler-Lagrange {_zero_status(l_ok)}, "
                   f"dI/dt {_zero_status(i_ok)}")
        if not (m_ok and l_ok and i_ok):
            report.fail("fail", METHOD_FAILURE, f"step {k} failed verification")
    report.metrics["steps"] = len(chain)
    if not chain.complete:
        return report.fail("incomplete", METHOD_FAILURE, f"chain stopped at {chain.error}")
    return report


def _multiplier_vanishes(M: Multiplier) -> bool:
    from .model import vanishes

    return vanishes(residual(M.value, M.context, tidy=False), M.context, symbolic=False)


def cmd_simulate(args) -> Report:
    report = Report("simulate", args.model)
    key = _catalog_key(args.model)
    sys_ = load_model(args.model, args.variant)
    params = _assignments(args.params)
    init = {k: float(v) for k, v in _assignments(args.init).items()}
    t0, t1 = args.t0, args.t1
    if key is not None:
        variant = args.variant or (args.model.partition("/")[2] or "original")
        bench_sys, bench_init, horizon = catalog.benchmark(key, variant)
        if not params:
            sys_ = bench_sys
        if not init:
            init = bench_init
        t0 = horizon[0] if t0 is None else t0
        t1 = horizon[1] if t1 is None else t1
    if params:
        sys_ = sys_.bind(**params)
    t0 = 0.0 if t0 is None else t0
    if t1 is None:
        raise InputError("--t1 is required for model files")
    if not init:
        raise InputError("--init is required for model files")
    report.say(sys_.describe())
    report.say(f"init {init}, t in [{t0}, {t1}], dt = {args.dt}")
    try:
        traj = integrate(sys_, init, t0, t1, args.dt)
    except NonFinite as err:
        report.metrics["blowup_time"] = err.time
        return report.fail("nonfinite", METHOD_FAILURE, f"integration failed: {err}")
    report.metrics["samples"] = len(traj)
    for name in traj.variables:
        report.metrics[f"final_{name}"] = float(traj.column(name)[-1])
    if args.csv:
        traj.to_csv(args.csv)
        report.say(f"trajectory written to {args.csv}")
    if args.check_integrals:
        integrals = _integrals_for(sys_, args, report)
        if not integrals:
            report.say("no first integral to check")
        for name, I in integrals.items():
            try:
                d = drift(I, traj)
            except DomainError as err:
                report.fail("fail", METHOD_FAILURE, f"{name}: {err}")
                continue
            report.expressions[name] = ex.to_str(I.value)
            report.metrics[f"drift {name}"] = d
            report.say(f"{name} = {ex.to_str(I.value)}: drift {d:.3e}")
    return report


def _integrals_for(sys_: OdeSystem, args, report: Report) -> dict[str, FirstIntegral]:
    out: dict[str, FirstIntegral] = {}
    for k, text in enumerate(args.integral or [], start=1):
        out[f"I_user{k}"] = FirstIntegral(ex.parse(text), sys_, "user")
    try:
        M = solve_ansatz(sys_)
        I = noether_integral_system(linear_lagrangian(sys_, M))
        if not I.trivial:
            out["I_noether"] = I
    except NotConserved:
        report.say("time translation gives no Noether integral for this model")
    except JLMError as err:
        report.say(f"no Noether integral: {type(err).__name__}: {err}")
    return out


COMMANDS = {
    "multiplier": cmd_multiplier,
    "lagrangian": cmd_lagrangian,
    "verify": cmd_verify,
    "chain": cmd_chain,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------------------
# driver


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    target = common.add_mutually_exclusive_group(required=True)
    target.add_argument("--model", help="catalog name (e.g. gompertz, gompertz/transformed) or model file")
    target.add_argument("--all-models", action="store_true", help="run on every catalog model concurrently")
    common.add_argument("--variant", choices=catalog.VARIANTS, help="catalog variant")
    common.add_argument("--params", help="parameter values, e.g. 'a=1,b=-1'")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--seed", type=int, help=f"sampling seed (default {DEFAULT_SEED}, or JLM_SEED)")

    parser = argparse.ArgumentParser(prog="jlm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("multiplier", parents=[common], help="power-exponential multiplier by ansatz")
    p.add_argument("--terms", help="ansatz factors among time,pow1,pow2,exp1,exp2 (default all)")

    p = sub.add_parser("lagrangian", parents=[common], help="Lagrangian of the system or a reduction")
    how = p.add_mutually_exclusive_group()
    how.add_argument("--system", action="store_true", help="linear Lagrangian of the planar system (default)")
    how.add_argument("--reduce", metavar="VAR", help="reduce to a second-order equation in VAR")
    p.add_argument("--compare-paper", action="store_true", help="compare with the catalog reference form")

    p = sub.add_parser("verify", parents=[common], help="check a Lagrangian or first integral from a file")
    p.add_argument("--lagrangian", metavar="FILE")
    p.add_argument("--integral", metavar="FILE")
    p.add_argument("--reduce", metavar="VAR", help="expression lives on the reduction in VAR")

    p = sub.add_parser("chain", parents=[common], help="multiplier / Lagrangian / integral chain")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--reduce", metavar="VAR", help="variable kept (catalog default otherwise)")

    p = sub.add_parser("simulate", parents=[common], help="RK4 trajectory and integral drift")
    p.add_argument("--init", help="initial state, e.g. 'w1=2,w2=1'")
    p.add_argument("--t0", type=float, help="start time (default 0, or the catalog horizon)")
    p.add_argument("--t1", type=float)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--csv", metavar="PATH", help="write the trajectory as CSV")
    p.add_argument("--check-integrals", action="store_true", help="report drift of known first integrals")
    p.add_argument("--integral", action="append", metavar="EXPR", help="extra integral to check")
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("JLM_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"JLM_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def run(args) -> Report:
    """Run one command, turning errors into a report with the right exit code."""
    name = args.model or "all"
    try:
        ex.set_base_seed(_seed(args))
        return COMMANDS[args.command](args)
    except DegenerateParameters as err:
        report = Report(args.command, name, constraints=list(err.constraints))
        return report.fail("degenerate", METHOD_FAILURE,
                           f"DegenerateParameters: {err} ({'; '.join(err.constraints)})")
    except AnsatzInsufficient as err:
        return Report(args.command, name).fail("insufficient", METHOD_FAILURE, f"AnsatzInsufficient: {err}")
    except (InputError, NotInvertible) as err:
        return Report(args.command, name).fail("input-error", INPUT_ERROR, f"error: {err}")
    except JLMError as err:
        code = INPUT_ERROR if isinstance(err, _INPUT_ERRORS) else METHOD_FAILURE
        return Report(args.command, name).fail("error", code, f"{type(err).__name__}: {err}")
    except _INPUT_ERRORS as err:
        return Report(args.command, name).fail("input-error", INPUT_ERROR, f"error: {err}")


def _run_for(argv_and_model: tuple[list[str], str]) -> Report:
    argv, model = argv_and_model
    args = build_parser().parse_args(argv)
    args.all_models, args.model = False, model
    return run(args)


def _emit(report: Report, fmt: str, out) -> None:
    if fmt == "json":
        out.write(json.dumps(report.as_json(), indent=2, sort_keys=True) + "\n")
    else:
        out.write(f"[{report.command}] {report.model}: {report.status}\n")
        for line in report.lines:
            out.write(line + "\n")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.all_models:
        report = run(args)
        _emit(report, args.format, sys.stdout)
        return report.exit_code
    keys = list(catalog.MODELS)
    with ProcessPoolExecutor(max_workers=len(keys)) as pool:
        reports = list(pool.map(_run_for, [(argv, k) for k in keys]))
    code = max(r.exit_code for r in reports)
    if args.format == "json":
        doc = Report(args.command, "all", "ok" if code == OK else "fail").as_json()
        for r in reports:
            doc["constraints"] += [f"{r.model}: {c}" for c in r.constraints]
            doc["metrics"][f"{r.model} exit_code"] = r.exit_code
        doc["reports"] = [r.as_json() for r in reports]
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    else:
        for r in reports:
            _emit(r, "text", sys.stdout)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
