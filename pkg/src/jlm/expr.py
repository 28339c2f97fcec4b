"""Symbolic expressions: parsing, printing, calculus and numeric checks.

Expressions are plain :mod:`sympy` trees built from real symbols.  Every
symbol is created through :func:`symbol`, so two expressions that mention
``w1`` always share the same ``Symbol`` object.  Velocities are ordinary
symbols named ``<var>_dot`` (accelerations ``<var>_ddot``).

Logarithms are *formal*: symbolically ``log(x*y) == log(x) + log(y)`` is used
freely and numerically ``log`` is evaluated on ``|x|``.  The two conventions
agree on every nonzero real argument.

Grammar accepted by :func:`parse`::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom (("^" | "**") unary)?
    atom    := NUMBER | IDENT | IDENT "(" expr ")" | "(" expr ")"
    NUMBER  := digits ["." digits] [("e"|"E") ["+"|"-"] digits]
    IDENT   := letter (letter | digit | "_")*

Known functions are ``exp``, ``log`` (alias ``ln``) and ``sqrt``.  A letter
carrying a combining dot above (``ṙ2``) is read as the velocity ``r2_dot``.
"""

from __future__ import annotations

import math
import re
import unicodedata
from functools import lru_cache
from typing import Iterable, Mapping

import mpmath
import numpy as np
import sympy as sp
from sympy.printing.str import StrPrinter

from .errors import DomainError, NotElementary, ParseError, SamplingExhausted, UnboundSymbol

Expr = sp.Expr

DOT_SUFFIX = "_dot"
DDOT_SUFFIX = "_ddot"


@lru_cache(maxsize=None)
def symbol(name: str) -> sp.Symbol:
    return sp.Symbol(name, real=True)


def dot(name: str | sp.Symbol) -> sp.Symbol:
    """Velocity symbol of a coordinate."""
    return symbol(_name(name) + DOT_SUFFIX)


def ddot(name: str | sp.Symbol) -> sp.Symbol:
    return symbol(_name(name) + DDOT_SUFFIX)


def _name(v: str | sp.Symbol) -> str:
    return v if isinstance(v, str) else v.name


def as_symbol(v: str | sp.Symbol) -> sp.Symbol:
    return symbol(v) if isinstance(v, str) else v


def sympify(e) -> Expr:
    if isinstance(e, str):
        return parse(e)
    if isinstance(e, sp.Basic):
        return e
    return sp.sympify(e, rational=True)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[^\W\d]\w*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE | re.UNICODE,
)

_FUNCTIONS = {
    "exp": sp.exp,
    "log": sp.log,
    "ln": sp.log,
    "sqrt": sp.sqrt,
}


def _ident_to_name(raw: str) -> str:
    # letters decorated with a combining dot above become velocities
    decomposed = unicodedata.normalize("NFD", raw)
    if "\u0307\u0307" in decomposed or "\u0308" in decomposed:
        return decomposed.replace("\u0307", "").replace("\u0308", "") + DDOT_SUFFIX
    if "\u0307" in decomposed:
        return decomposed.replace("\u0307", "") + DOT_SUFFIX
    return raw


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, symbols: Mapping[str, sp.Symbol] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.symbols = symbols or {}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0, self.text)
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return sp.Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "number":
            return sp.Rational(val)
        if kind == "ident":
            if self.peek()[1] == "(":
                fn = _FUNCTIONS.get(val)
                if fn is None:
                    raise ParseError(f"unknown function {val!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return fn(arg)
            if val in _FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", pos, self.text)
            name = _ident_to_name(val)
            return self.symbols.get(name) or symbol(name)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos, self.text)


def parse(text: str, symbols: Mapping[str, sp.Symbol] | None = None) -> Expr:
    """Parse ``text`` into an expression; raises :class:`ParseError`."""
    return _Parser(text, symbols).parse()


# ---------------------------------------------------------------------------
# printing


class _PlainPrinter(StrPrinter):
    def _print_Exp1(self, expr):
        return "exp(1)"

    def _print_Pow(self, expr, rational=False):
        s = super()._print_Pow(expr, rational)
        return s.replace("**", "^")


_plain = _PlainPrinter({"order": None})


def to_str(e) -> str:
    """Plain infix form; re-parses to the same expression."""
    return _plain.doprint(sympify(e))


def to_latex(e) -> str:
    e = sympify(e)
    names = {}
    for s in e.free_symbols:
        n = s.name
        if n.endswith(DDOT_SUFFIX):
            names[s] = r"\ddot{%s}" % sp.latex(symbol(n[: -len(DDOT_SUFFIX)]))
        elif n.endswith(DOT_SUFFIX):
            names[s] = r"\dot{%s}" % sp.latex(symbol(n[: -len(DOT_SUFFIX)]))
    return sp.latex(e, symbol_names=names)


# ---------------------------------------------------------------------------
# calculus and rewriting


def diff(e, v) -> Expr:
    return simplify(sp.diff(sympify(e), as_symbol(v)))


def substitute(e, v, replacement) -> Expr:
    e = sympify(e)
    return simplify(e.xreplace({as_symbol(v): sympify(replacement)}))


def expand_logs(e: Expr) -> Expr:
    """Split logs of products/powers (formal branch) and drop log of -1."""
    e = sp.expand_log(e, force=True)
    e = e.replace(lambda x: isinstance(x, sp.log) and x.args[0].is_Number,
                  lambda x: sp.log(abs(x.args[0])))
    # log(-X) and log(X) coincide on |x|; keep the argument with no leading minus
    return e.replace(lambda x: isinstance(x, sp.log) and x.args[0].is_Add
                     and x.args[0].could_extract_minus_sign(),
                     lambda x: sp.log(-x.args[0]))


def simplify(e, variables: Iterable | None = None) -> Expr:
    """Canonical expanded form.

    Products are distributed, logs split, and like terms collected.  When
    ``variables`` is given, terms are grouped by their variable-dependent
    factor and each group's coefficient (a function of the remaining
    symbols only) is brought to a canonical rational form.
    """
    e = sympify(e)
    if e.is_Number:
        return e
    e = _expanded(expand_logs(e))
    if variables is None:
        return e
    vs = [as_symbol(v) for v in variables]
    groups: dict[Expr, Expr] = {}
    for term in sp.Add.make_args(e):
        coeff, part = term.as_independent(*vs, as_Add=False)
        groups[part] = groups.get(part, 0) + coeff
    out = []
    for part, coeff in groups.items():
        c = sp.cancel(sp.together(coeff))
        if c != 0:
            out.append(c * part)
    return sp.Add(*out)


def _split_integer_powers(e: Expr) -> Expr:
    # (X*Y)^n -> X^n*Y^n for integer n, so expansion leaves denominators alone
    return e.replace(lambda z: z.is_Pow and z.base.is_Mul and z.exp.is_integer,
                     lambda z: sp.Mul(*[f ** z.exp for f in z.base.args]))


@lru_cache(maxsize=8192)
def _canon_exponent(x: Expr) -> Expr:
    return x if x.is_Number else sp.cancel(sp.together(x))


@lru_cache(maxsize=8192)
def _canon_base(b: Expr) -> Expr:
    return sp.factor_terms(sp.together(b))


def _merge_powers(term: Expr) -> Expr:
    """Combine same-base factors of one product, including all exponentials."""
    factors = sp.Mul.make_args(term)
    if len(factors) < 2:
        return term
    exps: list[Expr] = []
    powers: dict[Expr, list[Expr]] = {}
    for f in factors:
        if isinstance(f, sp.exp):
            exps.append(f.args[0])
        elif f.is_Pow:
            powers.setdefault(f.base, []).append(f.exp)
        else:
            powers.setdefault(f, []).append(sp.Integer(1))
    out = sp.exp(sp.expand(sp.Add(*exps))) if len(exps) > 1 else (sp.exp(exps[0]) if exps else sp.Integer(1))
    for base, es in powers.items():
        if len(es) == 1:
            out *= base ** es[0]
            continue
        out *= base ** _canon_exponent(sp.Add(*es))
    return out


def _opaque(z: Expr) -> bool:
    return isinstance(z, sp.exp) or (z.is_Pow and not (z.exp.is_Integer and z.exp > 0))


def _tidy_base(z: Expr) -> Expr:
    if z.is_Pow and z.base.is_Add:
        return _canon_base(z.base) ** z.exp
    return z


def _expanded(e: Expr, **hints) -> Expr:
    """Distribute products over sums, leaving denominators, symbolic powers and
    exponentials intact; each term then carries one factor per base."""
    e = _split_integer_powers(e.replace(lambda z: z.is_Pow and z.base.is_Add
                                        and not (z.exp.is_Integer and z.exp > 0), _tidy_base))
    hidden = {z: sp.Dummy("H") for z in e.atoms(sp.exp, sp.Pow) if _opaque(z)}
    e = sp.expand(e.xreplace(hidden), power_base=False, power_exp=False, log=False, **hints)
    e = e.xreplace({d: z for z, d in hidden.items()})
    return sp.Add(*[_merge_powers(t) for t in sp.Add.make_args(e)])


_EXP = sp.Dummy("exp")


def _exponents(term: Expr) -> dict[Expr, Expr]:
    out: dict[Expr, Expr] = {}
    for f in sp.Mul.make_args(term):
        if isinstance(f, sp.exp):
            out[_EXP] = out.get(_EXP, 0) + f.args[0]
        elif f.is_Pow and not f.exp.is_Integer:
            out[f.base] = out.get(f.base, 0) + f.exp
    return out


def factor_common(e) -> tuple[Expr, Expr]:
    """Split ``e`` into ``common * rest`` where ``common`` collects the
    exponentials and symbolic powers shared by all terms (up to integer
    shifts), so that ``rest`` is free of them as far as possible."""
    terms = sp.Add.make_args(_expanded(expand_logs(sympify(e))))
    if len(terms) < 2:
        return sp.Integer(1), sp.Add(*terms)
    exps = [_exponents(t) for t in terms]
    reference: dict[Expr, Expr] = {}
    for d in exps:
        for base, x in d.items():
            reference.setdefault(base, x)
    common = sp.Integer(1)
    for base, x0 in reference.items():
        if base is _EXP:
            common *= sp.exp(x0)
            continue
        shifts = [_canon_exponent(d.get(base, 0) - x0) for d in exps]
        if all(sh.is_Integer for sh in shifts):
            common *= base ** x0
    rest = _expanded(sp.Add(*terms) / common)
    return common, rest


def _transcendental(f: Expr) -> bool:
    return (isinstance(f, (sp.exp, sp.log)) or (f.is_Pow and not f.exp.is_Integer)
            or (f.is_Pow and isinstance(f.base, (sp.exp, sp.log))))


def tidy(e, variables: Iterable | None = None) -> Expr:
    """Readable normal form: terms sharing the same exponential/log/power
    content get their rational cofactors combined and cancelled."""
    e = simplify(e)
    groups: dict[Expr, Expr] = {}
    for term in sp.Add.make_args(e):
        trans = sp.Mul(*[f for f in sp.Mul.make_args(term) if _transcendental(f)])
        groups[trans] = groups.get(trans, 0) + term / trans
    out = []
    for trans, coeff in groups.items():
        try:
            c = sp.cancel(sp.together(coeff))
        except sp.PolynomialError:
            c = coeff
        n, d = sp.fraction(c)
        c = sp.expand(n) / d if d != 1 else sp.expand(c)
        if c != 0:
            out.append(c * trans)
    out = sp.Add(*out)
    return simplify(out, variables) if variables is not None else out


def cancel_common(e) -> Expr:
    """Simplify by pulling out shared transcendental factors and cancelling
    the rational cofactor.  Much stronger than :func:`simplify` on sums whose
    terms differ by integer powers of a common symbolic power."""
    common, rest = factor_common(e)
    try:
        rest = sp.cancel(sp.together(rest))
    except sp.PolynomialError:
        pass
    if rest == 0:
        return sp.Integer(0)
    return simplify(common * rest)


def collapse_exp(e, variables: Iterable | None = None) -> Expr:
    """Merge exponentials and turn ``exp(c*log(X) + r)`` into ``X^c*exp(r)``.

    The remaining exponent is collected on ``variables`` when given.
    """
    e = sp.powsimp(sympify(e), combine="exp")
    vs = [as_symbol(v) for v in variables] if variables is not None else None

    def fold(z):
        arg = sp.expand(z.args[0])
        powers: dict[Expr, Expr] = {}
        rest = []
        for t in sp.Add.make_args(arg):
            logs = [f for f in sp.Mul.make_args(t) if isinstance(f, sp.log)]
            if len(logs) == 1:
                base = logs[0].args[0]
                powers[base] = powers.get(base, 0) + t / logs[0]
            else:
                rest.append(t)
        r = sp.Add(*rest)
        if vs is None:
            r = sp.factor_terms(r)
        else:
            r = sp.Add(*(sp.factor(sp.together(c)) * m
                         for m, c in sp.collect(r, vs, evaluate=False).items()))
        out = sp.exp(r)
        for base, c in powers.items():
            out *= base ** sp.factor(sp.together(c))
        return out

    return e.replace(lambda z: isinstance(z, sp.exp), fold)


def free_names(e) -> set[str]:
    return {s.name for s in sympify(e).free_symbols}


def constant_factor(e, variables: Iterable) -> Expr:
    """Variable-free multiplicative content of ``e``, chosen so that the
    remaining factor has a canonical leading term with coefficient +1."""
    e = sympify(e)
    vs = [as_symbol(v) for v in variables]
    if e == 0:
        return sp.Integer(1)
    e = sp.factor_terms(e)
    c, rest = e.as_independent(*vs, as_Add=False)
    if rest.is_Add:
        terms = sorted(sp.Add.make_args(sp.expand(rest)),
                       key=lambda t: sp.default_sort_key(t.as_independent(*vs, as_Add=False)[1]))
        lead = None
        for t in terms:
            k = t.as_independent(*vs, as_Add=False)[0]
            if k.is_Number:
                lead = k
                break
        if lead is None:
            lead = terms[0].as_independent(*vs, as_Add=False)[0]
            lead = sp.Integer(-1) if lead.could_extract_minus_sign() else sp.Integer(1)
        c = c * lead
    return c


def drop_constant(e, variables: Iterable) -> Expr:
    """Remove additive terms free of ``variables``."""
    vs = [as_symbol(v) for v in variables]
    return sp.Add(*[t for t in sp.Add.make_args(sympify(e)) if t.has(*vs)])


def normalize(e, variables: Iterable) -> Expr:
    """Divide out the variable-free content (inessential constant)."""
    e = sympify(e)
    c = constant_factor(e, variables)
    if c == 1:
        return e
    return sp.factor_terms(sp.expand(e / c))


def linear_in(e: Expr, v: sp.Symbol) -> tuple[Expr, Expr] | None:
    """Return ``(slope, offset)`` if ``e`` is affine in ``v`` with nonzero slope."""
    s = sp.diff(e, v)
    if s == 0 or s.has(v):
        return None
    return s, sp.expand(e - s * v)


# ---------------------------------------------------------------------------
# antiderivatives

_L = sp.Dummy("ell")
_G = sp.Dummy("logell")


def antiderivative(e, v) -> Expr:
    """Antiderivative of ``e`` in ``v`` without integration constant.

    Each additive term must be ``c * v^n * exp(k*v + m)`` or a product of
    powers and logs of one affine form ``ell = s*v + q`` (``v`` itself counts
    as affine, and bases proportional to ``ell`` are rescaled).  Anything
    else raises :class:`NotElementary`.
    """
    e = sympify(e)
    v = as_symbol(v)
    if not e.has(v):
        return e * v
    e = _expanded(expand_logs(e), multinomial=False)
    return sp.Add(*[_integrate_term(t, v) for t in sp.Add.make_args(e)])


def _integrate_term(term: Expr, v: sp.Symbol) -> Expr:
    c, f = term.as_independent(v, as_Add=False)
    if f == 1:
        return c * v
    factors = sp.Mul.make_args(f)
    exps = [x for x in factors if isinstance(x, sp.exp)]
    if exps:
        return c * _integrate_poly_exp(factors, v, term)
    return c * _integrate_affine(factors, v, term)


def _integrate_poly_exp(factors, v, term) -> Expr:
    n = 0
    arg = sp.Integer(0)
    for x in factors:
        if isinstance(x, sp.exp):
            arg += x.args[0]
        elif x == v:
            n += 1
        elif x.is_Pow and x.base == v and x.exp.is_Integer and x.exp > 0:
            n += int(x.exp)
        else:
            raise NotElementary(f"cannot integrate {term} in {v}")
    lin = linear_in(arg, v)
    if lin is None:
        raise NotElementary(f"exponent not linear in {v}: {arg}")
    k = sp.factor(sp.together(lin[0]))
    # integral of v^n e^{kv} = e^{kv} * sum_j (-1)^j n!/(n-j)! v^(n-j) / k^(j+1)
    total = sum((-1) ** j * sp.factorial(n) / sp.factorial(n - j) * v ** (n - j) / k ** (j + 1)
                for j in range(n + 1))
    return sp.exp(arg) * total


def _formal_log(x: Expr) -> Expr:
    return expand_logs(sp.log(x))


def _integrate_affine(factors, v, term) -> Expr:
    # collect (base, exponent) pairs and logs
    powers: list[tuple[Expr, Expr]] = []
    logs: list[tuple[Expr, int]] = []
    for x in factors:
        if isinstance(x, sp.log):
            logs.append((x.args[0], 1))
        elif x.is_Pow and isinstance(x.base, sp.log):
            if not (x.exp.is_Integer and x.exp > 0):
                raise NotElementary(f"cannot integrate {term} in {v}")
            logs.append((x.base.args[0], int(x.exp)))
        elif x.is_Pow:
            if x.exp.has(v):
                raise NotElementary(f"exponent depends on {v}: {x}")
            powers.append((x.base, x.exp))
        else:
            powers.append((x, sp.Integer(1)))
    for base, _ in powers + [(b, 0) for b, _ in logs]:
        if linear_in(base, v) is None:
            raise NotElementary(f"{base} is not affine in {v} (term {term})")
    # reference affine form: prefer a base with non-integer power, then a log argument
    ref = None
    for base, ex in powers:
        if not ex.is_Integer:
            ref = base
            break
    if ref is None and logs:
        ref = logs[0][0]
    if ref is None:
        nonvar = [b for b, _ in powers if b != v]
        ref = nonvar[0] if nonvar else v
    s, q = linear_in(ref, v)

    def ratio(base):
        bs, bq = linear_in(base, v)
        lam = sp.cancel(bs / s)
        if sp.cancel(bq - lam * q) != 0:
            return None
        return lam

    body = sp.Integer(1)
    for base, ex in powers:
        lam = ratio(base)
        if lam is not None:
            if lam == 1:
                body *= _L ** ex
            elif ex.is_Integer or (lam.is_Number and lam > 0):
                body *= lam ** ex * _L ** ex
            else:
                raise NotElementary(f"branch of {base}^{ex} relative to {ref} is ambiguous")
        elif base == v or (ex.is_Integer and ex >= 0):
            # polynomial factor: rewrite v (or the base) in terms of ell
            body *= base.xreplace({v: (_L - q) / s}) ** ex
        else:
            raise NotElementary(f"two distinct affine singular factors in {term}")
    for base, k in logs:
        lam = ratio(base)
        if lam is None:
            raise NotElementary(f"log of a second affine form in {term}")
        body *= (_G + (_formal_log(lam) if lam != 1 else 0)) ** k
    body = sp.expand(body, power_base=False)
    out = sp.Integer(0)
    for t in sp.Add.make_args(body):
        coeff, rest = t.as_independent(_L, _G, as_Add=False)
        beta = sp.Integer(0)
        m = 0
        for x in sp.Mul.make_args(rest):
            if x == _L:
                beta += 1
            elif x == _G:
                m += 1
            elif x.is_Pow and x.base == _L:
                beta += x.exp
            elif x.is_Pow and x.base == _G:
                m += int(x.exp)
            elif x != 1:
                raise NotElementary(f"cannot integrate {term} in {v}")
        out += coeff * _int_power_log(beta, m)
    return (out / s).xreplace({_L: ref, _G: sp.log(ref)})


def _int_power_log(beta: Expr, m: int) -> Expr:
    """Integral of ell^beta * log(ell)^m in ell."""
    if sp.cancel(beta + 1) == 0:
        return _G ** (m + 1) / (m + 1)
    first = _L ** (beta + 1) * _G ** m / (beta + 1)
    if m == 0:
        return first
    return first - sp.Integer(m) / (beta + 1) * _int_power_log(beta, m - 1)


# ---------------------------------------------------------------------------
# numerics


def _as_binding(binding: Mapping) -> dict[sp.Symbol, float]:
    return {as_symbol(k): float(val) for k, val in binding.items()}


def evaluate(e, binding: Mapping) -> float:
    """Evaluate ``e`` in double precision.

    ``log`` is taken of the absolute value.  Raises :class:`UnboundSymbol`
    for a missing symbol and :class:`DomainError` for ``log(0)``, a division
    by zero, or a non-integer power of a negative number.
    """
    e = sympify(e)
    vals = _as_binding(binding)
    missing = e.free_symbols - vals.keys()
    if missing:
        raise UnboundSymbol("unbound symbols: " + ", ".join(sorted(s.name for s in missing)))
    return _ev(e, vals)


def _ev(e: Expr, vals) -> float:
    if e.is_Symbol:
        return vals[e]
    if e.is_Number:
        return float(e)
    if e is sp.E:
        return math.e
    if e.is_Add:
        return math.fsum(_ev(a, vals) for a in e.args)
    if e.is_Mul:
        out = 1.0
        for a in e.args:
            out *= _ev(a, vals)
        return out
    if e.is_Pow:
        b = _ev(e.base, vals)
        x = _ev(e.exp, vals)
        if b == 0 and x < 0:
            raise DomainError(f"division by zero in {e}")
        if float(x).is_integer():
            try:
                return b ** int(x)
            except OverflowError as exc:
                raise DomainError(f"overflow in {e}") from exc
        if b < 0:
            raise DomainError(f"non-integer power of negative base in {e}")
        return b ** x
    if isinstance(e, sp.exp):
        try:
            return math.exp(_ev(e.args[0], vals))
        except OverflowError as exc:
            raise DomainError(f"overflow in {e}") from exc
    if isinstance(e, sp.log):
        a = _ev(e.args[0], vals)
        if a == 0:
            raise DomainError(f"log of zero in {e}")
        return math.log(abs(a))
    raise DomainError(f"unsupported node {type(e).__name__}")


def _abslog(x):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.abs(x))


_NUMERIC_MODULES = [{"log": _abslog, "exp": np.exp}, "numpy"]


def compile_numeric(e, names: Iterable):
    """Vectorized numpy callable ``f(*columns)`` for ``e`` (logs act on ``|x|``).

    Fed complex columns, non-integer powers take the principal branch.
    """
    syms = [as_symbol(n) for n in names]
    return sp.lambdify(syms, sympify(e), modules=_NUMERIC_MODULES)


@lru_cache(maxsize=256)
def _compiled_terms(terms: sp.Tuple, syms: tuple):
    return compile_numeric(terms, syms)


# offset added to every sampling seed; the CLI sets it from --seed / JLM_SEED
_BASE_SEED = 0


def set_base_seed(seed: int) -> None:
    global _BASE_SEED
    _BASE_SEED = int(seed)


def base_seed() -> int:
    return _BASE_SEED


def _sample(symbols, size, rng, box, positive, signed):
    lo, hi = box
    cols = {}
    for s in symbols:
        col = rng.uniform(lo, hi, size)
        if signed and s.name not in positive:
            col = col * rng.choice([-1.0, 1.0], size)
        cols[s] = col
    return cols


def _mp_abslog(x):
    return mpmath.log(abs(x))


@lru_cache(maxsize=256)
def _precise_callable(terms: tuple, syms: tuple):
    return sp.lambdify(list(syms), sp.Tuple(*terms), modules=[{"log": _mp_abslog}, "mpmath"])


def _precise_agree(t1, t2, syms, point, tol, digits: int = 50) -> bool:
    f = _precise_callable(tuple(t1) + tuple(t2), tuple(syms))
    with mpmath.workdps(digits):
        try:
            vals = [mpmath.mpmathify(v) for v in f(*[mpmath.mpc(complex(x)) for x in point])]
        except (ZeroDivisionError, ValueError):
            return True  # singular point; the float pass already rejected these
        v1 = mpmath.fsum(vals[: len(t1)])
        v2 = mpmath.fsum(vals[len(t1):])
        scale = max(mpmath.mpf(1), mpmath.fsum(abs(v) for v in vals))
        return abs(v1 - v2) <= tol * scale


def numeric_equiv(e1, e2, vars: Iterable | None = None, n: int = 20, tol: float = 1e-9,
                  seed: int = 0, *, fixed: Mapping | None = None, box=(0.5, 2.0),
                  positive: Iterable[str] = (), signed: bool = False,
                  max_rounds: int = 50) -> bool:
    """Compare two expressions at ``n`` random points.

    Symbols listed in ``fixed`` keep their value; all others are drawn from
    ``box`` (with random sign when ``signed``, except names in ``positive``).
    Arithmetic is complex so non-integer powers of negative bases take the
    principal branch; logs act on ``|x|``.  Points where either side is
    undefined or larger than 1e10 are rejected.
    """
    e1, e2 = sympify(e1), sympify(e2)
    fixed = _as_binding(fixed or {})
    free = e1.free_symbols | e2.free_symbols | {as_symbol(v) for v in (vars or ())}
    free -= fixed.keys()
    syms = sorted(free, key=lambda s: s.name)
    allsyms = syms + list(fixed)
    # terms are evaluated separately so cancellation is judged against their size
    t1, t2 = sp.Add.make_args(e1), sp.Add.make_args(e2)
    if any(t.has(sp.zoo, sp.nan, sp.oo) for t in t1 + t2):
        raise SamplingExhausted("expression is undefined at every point")
    f = _compiled_terms(sp.Tuple(*t1, *t2), tuple(allsyms))
    rng = np.random.default_rng(seed + _BASE_SEED)
    positive = set(positive)
    accepted = 0
    batch = max(4 * n, 16)
    with np.errstate(all="ignore"):
        for _ in range(max_rounds):
            cols = _sample(syms, batch, rng, box, positive, signed)
            args = [cols[s].astype(complex) for s in syms]
            args += [np.full(batch, fixed[s], dtype=complex) for s in fixed]
            vals = np.array([np.broadcast_to(np.asarray(v, dtype=complex), (batch,))
                             for v in f(*args)])
            ok = np.all(np.isfinite(vals) & (np.abs(vals) < 1e10), axis=0)
            vals = vals[:, ok][:, : n - accepted]
            v1 = vals[: len(t1)].sum(axis=0)
            v2 = vals[len(t1):].sum(axis=0)
            scale = np.maximum(1.0, np.abs(vals).sum(axis=0))
            bad = np.flatnonzero(np.abs(v1 - v2) > tol * scale)
            if bad.size:
                # large cancelling terms can lose the comparison to roundoff:
                # re-evaluate the offending points in extended precision
                points = [[a[ok][i] for a in args] for i in bad]
                if not all(_precise_agree(t1, t2, allsyms, pt, tol) for pt in points):
                    return False
            accepted += vals.shape[1]
            if accepted >= n:
                return True
    raise SamplingExhausted(f"found only {accepted} of {n} valid sample points")


def is_zero(e, vars: Iterable | None = None, n: int = 20, tol: float = 1e-9, seed: int = 0,
            symbolic: bool = True, **kw) -> bool:
    """Structural test first, numeric sampling as the authoritative fallback."""
    e = sympify(e)
    if e == 0:
        return True
    if symbolic:
        try:
            if simplify(e) == 0:
                return True
        except Exception:  # pragma: no cover - simplification is best effort
            pass
    return numeric_equiv(e, sp.Integer(0), vars, n=n, tol=tol, seed=seed, **kw)


def is_constant(e, variables: Iterable, n: int = 20, tol: float = 1e-9, seed: int = 0, **kw) -> bool:
    """True when ``e`` does not depend on any of ``variables``."""
    e = sympify(e)
    vs = [as_symbol(v) for v in variables]
    return all(is_zero(sp.diff(e, v), n=n, tol=tol, seed=seed, **kw) for v in vs if e.has(v))
