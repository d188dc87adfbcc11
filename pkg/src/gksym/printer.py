"""Canonical infix printer; inverse of the DSL grammar in parser.py."""

from __future__ import annotations

from fractions import Fraction

from .expr import Expr, as_expr

_SUFFIX = {"x": "x", "y": "y", "t": "t", "u": "u"}


def _jet_name(dep: str, ix: int, iy: int, it: int) -> str:
    if ix == iy == it == 0:
        return dep
    return dep + "_" + "x" * ix + "y" * iy + "t" * it


def _fn_name(name: str, args: tuple, deriv: tuple) -> str:
    if not any(deriv):
        return f"{name}({','.join(args)})"
    if args == ("u",):
        return name + "'" * deriv[0] + "(u)"
    suffix = "".join(_SUFFIX[a] * d for a, d in zip(args, deriv))
    return f"{name}_{suffix}"


def _kernel_str(k: tuple) -> str:
    kind = k[0]
    if kind == "par":
        return k[1]
    if kind == "var":
        return k[1]
    if kind == "jet":
        return _jet_name(k[1], k[2], k[3], k[4])
    if kind == "fn":
        return _fn_name(k[1], k[2], k[3])
    if kind == "anti":
        return f"Int({k[1]}(u),u)"
    if kind == "rp":
        return str(k[1])
    if kind in ("exp", "sin", "cos"):
        return f"{kind}({print_expr(k[1])})"
    if kind == "dv":
        return f"d_{k[1]}"
    raise ValueError(f"unprintable kernel {k}")


def _power_str(k: tuple, p) -> str:
    base = _kernel_str(k)
    p = Fraction(p)
    if p == 1:
        return base
    if p.denominator == 1 and p > 0:
        return f"{base}^{p.numerator}"
    return f"{base}^({p})"


def print_expr(e) -> str:
    e = as_expr(e)
    if e.is_zero():
        return "0"
    pieces = []
    # print leading (highest-order) terms first
    for mono, c in reversed(e.terms):
        factors = [_power_str(k, p) for k, p in mono]
        mag = abs(c)
        if not factors:
            body = str(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = str(mag) + "*" + "*".join(factors)
        pieces.append(("-" if c < 0 else "+", body))
    sign, body = pieces[0]
    out = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out
