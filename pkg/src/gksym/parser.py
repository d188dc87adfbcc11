"""Text DSL for expressions, generators and substitutions.

Grammar (see docs/grammar.ebnf for the formal file):

    expr    = term { ("+"|"-") term }
    term    = unary { ("*"|"/") unary }
    unary   = ["+"|"-"] power
    power   = atom [ "^" unary ]
    atom    = INT | "(" expr ")" | call | name
    call    = NAME "(" expr {"," expr} ")"        function application
            | ("exp"|"sin"|"cos"|"sqrt") "(" expr ")"
            | "diff" "(" expr "," name ["," INT] ")"
            | "Int" "(" NAME "(u)" "," "u" ")"

Identifiers: independent variables x y t; dependent u; the nonlocal
variable v; jets u_xxy (suffix letters canonicalized so u_yx == u_xy,
likewise for v); parameters alpha beta gamma delta epsilon zeta c c1..c4;
unknown functions f g h r phi F F0 F1 F11 F12 F13 F15 xi1 xi2 xi3 eta with
primes (f'') or derivative suffixes (F1_t, phi_xu); generator basis
markers d_x d_y d_t d_u.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Tuple

from . import expr as ex
from .expr import Expr

PARAMETERS = ("alpha", "beta", "gamma", "delta", "epsilon", "zeta",
              "c", "c1", "c2", "c3", "c4", "lam")

DEFAULT_FUNCTIONS: Dict[str, Tuple[str, ...]] = {
    "f": ("u",), "g": ("u",), "h": ("u",), "r": ("u",),
    "phi": ("x", "y", "t", "u"),
    "F": ("y", "t"), "F0": ("x", "y", "t"), "F1": ("x", "y", "t"),
    "F11": ("t",), "F12": ("t",), "F13": ("t",), "F15": ("y", "t"),
    "xi1": ("x", "y", "t", "u"), "xi2": ("x", "y", "t", "u"),
    "xi3": ("x", "y", "t", "u"), "eta": ("x", "y", "t", "u"),
}

_ELEMENTARY = {"exp", "sin", "cos", "sqrt"}


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise ValueError("invalid span")


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan, src: str = ""):
        self.span = span
        self.src = src
        pointer = ""
        if src:
            pointer = f"\n  {src}\n  " + " " * span.start + "^" * max(1, span.end - span.start)
        super().__init__(f"{message} at {span.start}..{span.end}{pointer}")


@dataclass
class ParseContext:
    """Function signatures and macro bindings active while parsing."""
    functions: Dict[str, Tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_FUNCTIONS))
    macros: Dict[str, Expr] = field(default_factory=dict)
    allow_dvec: bool = False

    def with_functions(self, **sigs) -> "ParseContext":
        fns = dict(self.functions)
        fns.update({k: tuple(v) for k, v in sigs.items()})
        return ParseContext(fns, dict(self.macros), self.allow_dvec)


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z][A-Za-z0-9]*(?:_[xytu]+)?'*)|(?P<op>[-+*/^(),]))")


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m or m.end() == m.start():
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            at = len(src) - len(stripped)
            raise ParseError(f"unexpected character {src[at]!r}",
                             SourceSpan(at, at + 1), src)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), SourceSpan(m.start(kind), m.end(kind))))
        pos = m.end()
    tokens.append(("eof", "", SourceSpan(len(src), len(src))))
    return tokens


class _Parser:
    def __init__(self, src: str, ctx: ParseContext):
        self.src = src
        self.ctx = ctx
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, span = self.next()
        if val != text:
            raise ParseError(f"expected {text!r}, found {val or 'end of input'!r}",
                             span, self.src)
        return span

    def fail(self, msg: str, span: SourceSpan):
        raise ParseError(msg, span, self.src)

    # -- grammar -----------------------------------------------------------

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, span = self.peek()
        if kind != "eof":
            self.fail(f"trailing input {val!r}", span)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op, _, span = self.next()[1], None, self.peek()[2]
            rhs = self.unary()
            if op == "*":
                e = e * rhs
            else:
                try:
                    e = e / rhs
                except ex.StructuralError as err:
                    self.fail(str(err), span)
        return e

    def unary(self) -> Expr:
        if self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            e = self.unary()
            return e if op == "+" else -e
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.next()
            span = self.peek()[2]
            exponent = self.unary()
            try:
                q = exponent.constant_value()
                return base ** q
            except ex.StructuralError as err:
                self.fail(f"exponent must be rational ({err})", span)
        return base

    def atom(self) -> Expr:
        kind, val, span = self.next()
        if kind == "num":
            return ex.rational(int(val))
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind != "name":
            self.fail(f"unexpected {val or 'end of input'!r}", span)
        return self.name_atom(val, span)

    # -- identifiers ---------------------------------------------------------

    def name_atom(self, name: str, span: SourceSpan) -> Expr:
        primes = len(name) - len(name.rstrip("'"))
        if primes:
            name = name[:-primes]
        base, _, suffix = name.partition("_")

        if base in self.ctx.macros and not suffix and not primes:
            return self.ctx.macros[base]

        if base == "diff" and not suffix:
            return self.diff_call(span)
        if base == "Int" and not suffix:
            return self.int_call(span)
        if base in _ELEMENTARY and not suffix and not primes:
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return {"exp": ex.exp_, "sin": ex.sin_, "cos": ex.cos_,
                    "sqrt": ex.sqrt_}[base](arg)

        if base == "d" and suffix:
            if not self.ctx.allow_dvec:
                self.fail("generator basis marker outside generator syntax", span)
            if suffix not in ("x", "y", "t", "u"):
                self.fail(f"unknown basis marker d_{suffix}", span)
            return Expr.from_kernel(("dv", suffix))

        if base in ("u", "v"):
            if primes:
                self.fail("prime derivative on a jet variable", span)
            idx = [0, 0, 0]
            for ch in suffix:
                if ch == "u":
                    self.fail("jet suffix may only contain x, y, t", span)
                idx[ex.DIR_INDEX[ch]] += 1
            return ex.jet(*idx, dep=base)

        if base in self.ctx.functions:
            return self.function_atom(base, suffix, primes, span)

        if suffix:
            self.fail(f"jet suffix on non-dependent symbol {base!r}", span)
        if primes:
            self.fail(f"prime derivative on non-function symbol {base!r}", span)
        if base in ("x", "y", "t"):
            return ex.var(base)
        if base in PARAMETERS:
            return ex.par(base)
        self.fail(f"unknown identifier {base!r}", span)

    def function_atom(self, name: str, suffix: str, primes: int,
                      span: SourceSpan) -> Expr:
        args = self.ctx.functions[name]
        deriv = [0] * len(args)
        if primes:
            if args != ("u",):
                self.fail(f"prime derivative on multivariate function {name!r}", span)
            deriv[0] = primes
        for ch in suffix:
            if ch not in args:
                self.fail(f"{name!r} does not depend on {ch!r}", span)
            deriv[args.index(ch)] += 1
        # optional explicit argument list; must match the declaration
        if self.peek()[1] == "(":
            self.next()
            got = [self.expr()]
            while self.peek()[1] == ",":
                self.next()
                got.append(self.expr())
            close = self.expect(")")
            expected = [ex.var(a) if a in ex.DIRS else ex.jet() for a in args]
            if got != expected:
                self.fail(f"arguments of {name!r} must be ({','.join(args)})",
                          SourceSpan(span.start, close.end))
        return ex.mfunc(name, args, deriv)

    def diff_call(self, span: SourceSpan) -> Expr:
        self.expect("(")
        body = self.expr()
        self.expect(",")
        kind, val, vspan = self.next()
        if kind != "name" or val not in ("x", "y", "t", "u", "v"):
            self.fail("diff variable must be x, y, t, u or v", vspan)
        wrt = ex.jet(dep=val) if val in ("u", "v") else ex.var(val)
        order = 1
        if self.peek()[1] == ",":
            self.next()
            kind, val2, ospan = self.next()
            if kind != "num":
                self.fail("diff order must be an integer", ospan)
            order = int(val2)
        self.expect(")")
        for _ in range(order):
            body = ex.partial_derivative(body, wrt)
        return body

    def int_call(self, span: SourceSpan) -> Expr:
        self.expect("(")
        kind, val, nspan = self.next()
        if kind != "name" or self.ctx.functions.get(val) != ("u",):
            self.fail("Int expects a one-argument function of u", nspan)
        self.expect("(")
        kind2, val2, uspan = self.next()
        if val2 != "u":
            self.fail("Int integrand must be applied to u", uspan)
        self.expect(")")
        self.expect(",")
        kind3, val3, uspan2 = self.next()
        if val3 != "u":
            self.fail("Int integration variable must be u", uspan2)
        self.expect(")")
        return ex.anti(val)


def parse_expr(src: str, ctx: Optional[ParseContext] = None) -> Expr:
    return _Parser(src, ctx or ParseContext()).parse()


def parse_generator(src: str, ctx: Optional[ParseContext] = None):
    """Parse generator syntax like ``x*d_y - y*d_x + 2*u*d_u``.

    Returns the coefficient 4-tuple (xi1, xi2, xi3, eta) of d_x, d_y, d_t,
    d_u.  The basis markers must occur linearly.
    """
    from .symmetry import Generator

    base_ctx = ctx or ParseContext()
    gctx = ParseContext(dict(base_ctx.functions), dict(base_ctx.macros), True)
    e = _Parser(src, gctx).parse()
    coeffs = {d: ex.ZERO for d in ("x", "y", "t", "u")}
    for mono, c in e.terms:
        markers = [(k, p) for k, p in mono if k[0] == "dv"]
        if len(markers) != 1 or markers[0][1] != 1:
            raise ParseError("generator must be linear in d_x, d_y, d_t, d_u",
                             SourceSpan(0, len(src)), src)
        rest = tuple(kp for kp in mono if kp[0][0] != "dv")
        coeffs[markers[0][0][1]] = coeffs[markers[0][0][1]] + \
            Expr._from_dict({rest: c})
    return Generator(coeffs["x"], coeffs["y"], coeffs["t"], coeffs["u"])
