"""Exact symbolic expression kernel.

Expressions are kept permanently in a canonical normal form: an expanded
sum of monomials with Fraction coefficients over a totally ordered set of
atomic kernels (jet variables, parameters, unknown-function derivative
nodes, elementary transcendental applications).  Two expressions are
mathematically equal within the supported fragment iff they are
structurally equal, so ``a == b`` and ``(a - b).is_zero()`` agree.

Kernels are plain tuples; the first element is a kind tag:

    ('par', name)                    named parameter (alpha, beta, ..., c1..c4)
    ('var', name)                    independent variable x, y or t
    ('jet', dep, ix, iy, it)         derivative coordinate of u or v (nonlocal)
    ('fn', name, args, deriv)        unknown-function derivative node;
                                     args/deriv are parallel tuples
    ('anti', base)                   the antiderivative  Int(base(u), u)
    ('exp', Expr) ('sin', Expr) ('cos', Expr)
    ('rp', prime)                    prime base carrying a fractional power,
                                     e.g. sqrt(2) == ('rp', 2) ** (1/2)

Products of exp kernels merge (exp(a)*exp(b) -> exp(a+b)) and integral
powers of ('rp', p) fold back into the rational coefficient; no other
identities are applied during normalization.  sin^2 + cos^2 is *not*
rewritten here; see :func:`pythagoras` for the dedicated post-pass.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional, Sequence, Union

__all__ = [
    "Expr", "StructuralError", "SizeLimitError", "UnknownAtomError",
    "ZERO", "ONE", "rational", "integer", "par", "var", "jet", "vjet",
    "ufunc", "mfunc", "anti", "exp_", "sin_", "cos_", "sqrt_",
    "normalize", "partial_derivative", "total_derivative", "substitute",
    "collect_jet_coefficients", "euler_operator", "pythagoras",
    "to_json", "from_json", "set_size_limit", "get_size_limit",
    "DIRS", "DIR_INDEX",
]

DIRS = ("x", "y", "t")
DIR_INDEX = {"x": 0, "y": 1, "t": 2}

ExprLike = Union["Expr", int, Fraction]


class StructuralError(ValueError):
    """Raised for operations outside the supported expression fragment."""


class SizeLimitError(RuntimeError):
    """Raised when an intermediate expression exceeds the size limit."""


class UnknownAtomError(KeyError):
    """Raised by numeric evaluation when an atom has no assigned value."""


_SIZE_LIMIT = 10 ** 6


def set_size_limit(n: int) -> None:
    global _SIZE_LIMIT
    if n <= 0:
        raise ValueError("size limit must be positive")
    _SIZE_LIMIT = n


def get_size_limit() -> int:
    return _SIZE_LIMIT


# ---------------------------------------------------------------------------
# kernel ordering

_KIND_RANK = {"rp": 0, "par": 1, "var": 2, "anti": 3, "fn": 4,
              "exp": 5, "sin": 6, "cos": 7, "jet": 8, "dv": 9}

_kernel_key_cache: dict = {}


def kernel_key(k: tuple) -> tuple:
    key = _kernel_key_cache.get(k)
    if key is not None:
        return key
    kind = k[0]
    rank = _KIND_RANK[kind]
    if kind == "jet":
        dep = 0 if k[1] == "u" else 1
        key = (rank, dep, k[2] + k[3] + k[4], k[2], k[3], k[4])
    elif kind == "fn":
        key = (rank, k[1], k[2], k[3])
    elif kind in ("exp", "sin", "cos"):
        key = (rank, k[1].key())
    elif kind == "var":
        key = (rank, DIR_INDEX[k[1]])
    else:
        key = (rank,) + tuple(k[1:])
    _kernel_key_cache[k] = key
    return key


def _exp_key(e) -> tuple:
    f = Fraction(e)
    return (f.numerator, f.denominator)


def _mono_key(mono: tuple) -> tuple:
    return tuple((kernel_key(k), _exp_key(p)) for k, p in mono)


# ---------------------------------------------------------------------------
# monomial canonicalization

def _factor_rational_power(c: Fraction, q: Fraction):
    """c**q for positive rational c: returns (rational part, extra kernels)."""
    if c < 0:
        raise StructuralError("fractional power of a negative rational")
    if c == 0:
        return Fraction(0), ()
    coef = Fraction(1)
    kernels = []
    for n, sign in ((c.numerator, 1), (c.denominator, -1)):
        d = 2
        while d * d <= n:
            while n % d == 0:
                e = q * sign
                whole, frac = divmod(e, 1)
                coef *= Fraction(d) ** int(whole)
                if frac:
                    kernels.append((("rp", d), frac))
                n //= d
            d += 1
        if n > 1:
            e = q * sign
            whole, frac = divmod(e, 1)
            coef *= Fraction(n) ** int(whole)
            if frac:
                kernels.append((("rp", n), frac))
    return coef, tuple(kernels)


def _canon_monomial(pairs: Iterable[tuple]) -> tuple:
    """Merge duplicate kernels, fold rp/exp identities; returns (mono, coef)."""
    merged: dict = {}
    for k, p in pairs:
        if p == 0:
            continue
        merged[k] = merged.get(k, 0) + p
    coef = Fraction(1)
    out = []
    exp_arg = None
    for k, p in merged.items():
        if p == 0:
            continue
        kind = k[0]
        if kind == "rp":
            whole, frac = divmod(Fraction(p), 1)
            coef *= Fraction(k[1]) ** int(whole)
            if frac:
                out.append((k, frac))
        elif kind == "exp":
            arg = k[1] if p == 1 else k[1] * p
            exp_arg = arg if exp_arg is None else exp_arg + arg
        else:
            if isinstance(p, Fraction) and p.denominator == 1:
                p = p.numerator
            out.append((k, p))
    if exp_arg is not None and not exp_arg.is_zero():
        out.append((("exp", exp_arg), 1))
    out.sort(key=lambda kp: kernel_key(kp[0]))
    return tuple(out), coef


# ---------------------------------------------------------------------------
# the expression class

class Expr:
    """Immutable normalized expression: sum of (monomial, Fraction) terms."""

    __slots__ = ("terms", "_hash", "_key")

    def __init__(self, terms: tuple):
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_hash", None)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, *a):
        raise AttributeError("Expr is immutable")

    # -- construction ------------------------------------------------------

    @staticmethod
    def _from_dict(d: dict) -> "Expr":
        items = [(m, c) for m, c in d.items() if c != 0]
        if len(items) > _SIZE_LIMIT:
            raise SizeLimitError(
                f"expression with {len(items)} terms exceeds the size limit "
                f"({_SIZE_LIMIT}); raise it with set_size_limit or "
                f"GKSYM_SIZE_LIMIT")
        items.sort(key=lambda mc: _mono_key(mc[0]))
        return Expr(tuple(items))

    @staticmethod
    def from_kernel(k: tuple) -> "Expr":
        mono, coef = _canon_monomial([(k, 1)])
        return Expr._from_dict({mono: coef})

    # -- basic protocol ----------------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = rational(other)
        if not isinstance(other, Expr):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash(self.terms)
            object.__setattr__(self, "_hash", h)
        return h

    def key(self) -> tuple:
        k = self._key
        if k is None:
            k = tuple((_mono_key(m), (c.numerator, c.denominator))
                      for m, c in self.terms)
            object.__setattr__(self, "_key", k)
        return k

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __repr__(self) -> str:
        from .printer import print_expr
        return print_expr(self)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other: ExprLike) -> "Expr":
        other = as_expr(other)
        d = dict(self.terms)
        for m, c in other.terms:
            nc = d.get(m, 0) + c
            if nc:
                d[m] = nc
            else:
                d.pop(m, None)
        return Expr._from_dict(d)

    __radd__ = __add__

    def __neg__(self) -> "Expr":
        return Expr(tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other: ExprLike) -> "Expr":
        return self + (-as_expr(other))

    def __rsub__(self, other: ExprLike) -> "Expr":
        return as_expr(other) + (-self)

    def __mul__(self, other: ExprLike) -> "Expr":
        other = as_expr(other)
        if not self.terms or not other.terms:
            return ZERO
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        d: dict = {}
        for m1, c1 in a:
            for m2, c2 in b:
                mono, extra = _canon_monomial(m1 + m2)
                c = c1 * c2 * extra
                nc = d.get(mono, 0) + c
                if nc:
                    d[mono] = nc
                else:
                    d.pop(mono, None)
                if len(d) > _SIZE_LIMIT:
                    raise SizeLimitError("product exceeds size limit")
        return Expr._from_dict(d)

    __rmul__ = __mul__

    def __truediv__(self, other: ExprLike) -> "Expr":
        return self * as_expr(other) ** -1

    def __rtruediv__(self, other: ExprLike) -> "Expr":
        return as_expr(other) * self ** -1

    def __pow__(self, q) -> "Expr":
        q = Fraction(q)
        if q == 0:
            return ONE
        if q == 1:
            return self
        if q.denominator == 1 and q > 0:
            n = q.numerator
            result = ONE
            base = self
            while n:
                if n & 1:
                    result = result * base
                base = base * base if n > 1 else base
                n >>= 1
            return result
        if len(self.terms) != 1:
            raise StructuralError(
                "only a single-term expression can carry a negative or "
                "fractional power")
        (mono, c), = self.terms
        if c < 0 and q.denominator != 1:
            raise StructuralError("fractional power of a negative term")
        if q.denominator == 1:
            coef = c ** q.numerator
            extra_kernels: tuple = ()
        else:
            coef, extra_kernels = _factor_rational_power(c, q)
        new_mono, extra = _canon_monomial(
            tuple((k, Fraction(p) * q) for k, p in mono) + extra_kernels)
        return Expr._from_dict({new_mono: coef * extra})

    # -- structure queries ---------------------------------------------------

    def kernels(self) -> Iterator[tuple]:
        for m, _ in self.terms:
            for k, _p in m:
                yield k

    def atoms(self) -> set:
        """All kernels appearing anywhere, including inside exp/sin/cos args."""
        seen: set = set()
        stack = [self]
        while stack:
            e = stack.pop()
            for k in e.kernels():
                if k in seen:
                    continue
                seen.add(k)
                if k[0] in ("exp", "sin", "cos"):
                    stack.append(k[1])
        return seen

    def max_jet_order(self, dep: str = "u") -> int:
        order = -1
        for k in self.atoms():
            if k[0] == "jet" and k[1] == dep:
                order = max(order, k[2] + k[3] + k[4])
        return order

    def jet_indices(self, dep: str = "u") -> set:
        return {(k[2], k[3], k[4]) for k in self.atoms()
                if k[0] == "jet" and k[1] == dep}

    def has_kernel(self, pred: Callable[[tuple], bool]) -> bool:
        return any(pred(k) for k in self.atoms())

    def constant_value(self) -> Fraction:
        if self.is_zero():
            return Fraction(0)
        if len(self.terms) == 1 and self.terms[0][0] == ():
            return self.terms[0][1]
        raise StructuralError("expression is not a rational constant")

    def leading_coefficient(self) -> Fraction:
        if not self.terms:
            raise StructuralError("zero expression has no leading coefficient")
        return self.terms[-1][1]

    def monic(self) -> "Expr":
        """Scale so the leading (maximal) monomial has coefficient +1."""
        if not self.terms:
            return self
        lc = self.terms[-1][1]
        if lc == 1:
            return self
        return Expr(tuple((m, c / lc) for m, c in self.terms))


def as_expr(v: ExprLike) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return rational(v)
    raise TypeError(f"cannot interpret {v!r} as an expression")


# ---------------------------------------------------------------------------
# atom factories

ZERO = Expr(())
ONE = Expr((((), Fraction(1)),))


def rational(p, q: int = 1) -> Expr:
    c = Fraction(p, q) if q != 1 else Fraction(p)
    if c == 0:
        return ZERO
    return Expr((((), c),))


integer = rational


def par(name: str) -> Expr:
    return Expr.from_kernel(("par", name))


def var(name: str) -> Expr:
    if name not in DIRS:
        raise ValueError(f"unknown independent variable {name!r}")
    return Expr.from_kernel(("var", name))


def jet(ix: int = 0, iy: int = 0, it: int = 0, dep: str = "u") -> Expr:
    if min(ix, iy, it) < 0:
        raise ValueError("jet indices must be nonnegative")
    return Expr.from_kernel(("jet", dep, ix, iy, it))


def vjet(ix: int = 0, iy: int = 0, it: int = 0) -> Expr:
    return jet(ix, iy, it, dep="v")


def ufunc(name: str, k: int = 0) -> Expr:
    """Derivative node of a one-argument unknown function of u."""
    return Expr.from_kernel(("fn", name, ("u",), (k,)))


def mfunc(name: str, args: Sequence[str], deriv: Optional[Sequence[int]] = None) -> Expr:
    args = tuple(args)
    if deriv is None:
        deriv = (0,) * len(args)
    deriv = tuple(deriv)
    if len(deriv) != len(args):
        raise ValueError("derivative multi-index must match declared arguments")
    return Expr.from_kernel(("fn", name, args, deriv))


def anti(base: str) -> Expr:
    """The antiderivative symbol Int(base(u), u); its u-derivative is base(u)."""
    return Expr.from_kernel(("anti", base))


def exp_(e: ExprLike) -> Expr:
    e = as_expr(e)
    if e.is_zero():
        return ONE
    return Expr.from_kernel(("exp", e))


def sin_(e: ExprLike) -> Expr:
    e = as_expr(e)
    if e.is_zero():
        return ZERO
    return Expr.from_kernel(("sin", e))


def cos_(e: ExprLike) -> Expr:
    e = as_expr(e)
    if e.is_zero():
        return ONE
    return Expr.from_kernel(("cos", e))


def sqrt_(e: ExprLike) -> Expr:
    return as_expr(e) ** Fraction(1, 2)


def normalize(e: ExprLike) -> Expr:
    """Recanonicalize; a no-op for well-formed Expr values (idempotent)."""
    e = as_expr(e)
    d: dict = {}
    for m, c in e.terms:
        mono, extra = _canon_monomial(m)
        c = c * extra
        nc = d.get(mono, 0) + c
        if nc:
            d[mono] = nc
        else:
            d.pop(mono, None)
    return Expr._from_dict(d)


# ---------------------------------------------------------------------------
# differentiation

def _diff_terms(e: Expr, diff_kernel: Callable[[tuple], Expr]) -> Expr:
    out = ZERO
    for mono, c in e.terms:
        for i, (k, p) in enumerate(mono):
            dk = diff_kernel(k)
            if dk.is_zero():
                continue
            rest = mono[:i] + ((k, Fraction(p) - 1),) + mono[i + 1:]
            rmono, extra = _canon_monomial(rest)
            out = out + Expr._from_dict({rmono: c * Fraction(p) * extra}) * dk
    return out


def total_derivative(e: ExprLike, d: str) -> Expr:
    """Total derivative D_d: jets shift their multi-index, u-functions chain."""
    e = as_expr(e)
    i = DIR_INDEX[d]
    shift = [0, 0, 0]
    shift[i] = 1

    def dk(k: tuple) -> Expr:
        kind = k[0]
        if kind == "var":
            return ONE if k[1] == d else ZERO
        if kind == "jet":
            return jet(k[2] + shift[0], k[3] + shift[1], k[4] + shift[2], dep=k[1])
        if kind == "fn":
            out = ZERO
            for pos, a in enumerate(k[2]):
                if a == d:
                    darg = ONE
                elif a in DIRS:
                    continue
                elif a == "u":
                    darg = jet(*shift)
                else:
                    raise StructuralError(f"unknown function argument {a!r}")
                nd = list(k[3])
                nd[pos] += 1
                out = out + Expr.from_kernel(("fn", k[1], k[2], tuple(nd))) * darg
            return out
        if kind == "anti":
            return ufunc(k[1]) * jet(*shift)
        if kind == "exp":
            return Expr.from_kernel(k) * total_derivative(k[1], d)
        if kind == "sin":
            return cos_(k[1]) * total_derivative(k[1], d)
        if kind == "cos":
            return -sin_(k[1]) * total_derivative(k[1], d)
        return ZERO

    return _diff_terms(e, dk)


def partial_derivative(e: ExprLike, v: ExprLike) -> Expr:
    """Partial derivative treating every other atom as an independent symbol.

    ``v`` must be a single atom: an independent variable, a jet variable of
    u or v, or a parameter.  Unknown-function nodes chain only through the
    arguments they declare (so d f(u)/du = f'(u) while d u_xx / d u = 0).
    """
    e = as_expr(e)
    v = as_expr(v)
    if len(v.terms) != 1 or len(v.terms[0][0]) != 1 or v.terms[0][1] != 1 \
            or v.terms[0][0][0][1] != 1:
        raise StructuralError("differentiation variable must be a bare atom")
    target = v.terms[0][0][0][0]
    if target[0] not in ("var", "jet", "par"):
        raise StructuralError(f"cannot take a partial derivative by {target}")
    is_u = target == ("jet", "u", 0, 0, 0)
    tname = target[1] if target[0] == "var" else ("u" if is_u else None)

    def dk(k: tuple) -> Expr:
        if k == target:
            return ONE
        kind = k[0]
        if kind == "fn" and tname is not None and tname in k[2]:
            pos = k[2].index(tname)
            nd = list(k[3])
            nd[pos] += 1
            return Expr.from_kernel(("fn", k[1], k[2], tuple(nd)))
        if kind == "anti" and is_u:
            return ufunc(k[1])
        if kind in ("exp", "sin", "cos"):
            da = partial_derivative(k[1], v)
            if da.is_zero():
                return ZERO
            if kind == "exp":
                return Expr.from_kernel(k) * da
            if kind == "sin":
                return cos_(k[1]) * da
            return -sin_(k[1]) * da
        return ZERO

    return _diff_terms(e, dk)


# ---------------------------------------------------------------------------
# substitution

class SubstitutionWarning(UserWarning):
    pass


def _atom_of(e: Expr) -> Optional[tuple]:
    if len(e.terms) == 1 and e.terms[0][1] == 1 and len(e.terms[0][0]) == 1 \
            and e.terms[0][0][0][1] == 1:
        return e.terms[0][0][0][0]
    return None


def substitute(e: ExprLike, rules: Sequence[tuple], warn: bool = True) -> Expr:
    """Simultaneous substitution followed by normalization.

    Each rule is ``(target, replacement)`` where target is an atom Expr
    (parameter, jet variable, or the nonlocal variable v) or a function
    name given as a string.  Replacing v rewrites every v-jet by the
    corresponding total derivative of the replacement; replacing a
    function name rewrites all of its derivative nodes consistently by
    differentiating the replacement with respect to the declared
    arguments.  Replacing a function by something independent of its
    argument is permitted but emits a SubstitutionWarning unless
    ``warn=False``.
    """
    import warnings

    e = as_expr(e)
    atom_rules: dict = {}
    fn_rules: dict = {}
    v_repl: Optional[Expr] = None
    for target, repl in rules:
        repl = as_expr(repl)
        if isinstance(target, str):
            fn_rules[target] = repl
            continue
        k = _atom_of(as_expr(target))
        if k is None:
            raise StructuralError("substitution target must be a bare atom or a function name")
        if k == ("jet", "v", 0, 0, 0):
            v_repl = repl
        elif k[0] in ("par", "jet", "var", "fn", "anti"):
            # fn/anti targets replace that exact derivative node only;
            # use a name rule for consistent whole-function rewriting
            atom_rules[k] = repl
        else:
            raise StructuralError(f"cannot substitute target atom {k}")

    if warn:
        for name, repl in fn_rules.items():
            if not any(kk[0] == "jet" and kk[1] == "u" or
                       (kk[0] in ("fn", "anti"))
                       for kk in repl.atoms()):
                warnings.warn(
                    f"replacement for function {name!r} does not depend on "
                    f"its argument", SubstitutionWarning, stacklevel=2)

    v_jets: dict = {}

    def v_value(idx: tuple) -> Expr:
        val = v_jets.get(idx)
        if val is None:
            if idx == (0, 0, 0):
                val = v_repl
            else:
                for axis, d in enumerate(DIRS):
                    if idx[axis]:
                        prev = list(idx)
                        prev[axis] -= 1
                        val = total_derivative(v_value(tuple(prev)), d)
                        break
            v_jets[idx] = val
        return val

    fn_derivs: dict = {}

    def fn_value(name: str, args: tuple, deriv: tuple) -> Expr:
        key = (name, args, deriv)
        val = fn_derivs.get(key)
        if val is None:
            if not any(deriv):
                val = fn_rules[name]
            else:
                for pos in range(len(args)):
                    if deriv[pos]:
                        prev = list(deriv)
                        prev[pos] -= 1
                        base = fn_value(name, args, tuple(prev))
                        wrt = jet() if args[pos] == "u" else var(args[pos])
                        val = partial_derivative(base, wrt)
                        break
            fn_derivs[key] = val
        return val

    def replace_kernel(k: tuple) -> Optional[Expr]:
        kind = k[0]
        if kind == "jet" and k[1] == "v" and v_repl is not None:
            return v_value((k[2], k[3], k[4]))
        if k in atom_rules:
            return atom_rules[k]
        if kind == "fn" and k[1] in fn_rules:
            return fn_value(k[1], k[2], k[3])
        if kind in ("exp", "sin", "cos"):
            new_arg = substitute(k[1], rules, warn=False)
            if new_arg == k[1]:
                return None
            return {"exp": exp_, "sin": sin_, "cos": cos_}[kind](new_arg)
        return None

    out: dict = {}
    for mono, c in e.terms:
        factor = None  # lazily built product for substituted kernels
        plain = []
        for k, p in mono:
            repl = replace_kernel(k)
            if repl is None:
                plain.append((k, p))
            else:
                piece = repl ** p
                factor = piece if factor is None else factor * piece
        pmono, extra = _canon_monomial(plain)
        term = Expr._from_dict({pmono: c * extra})
        if factor is not None:
            term = term * factor
        for m2, c2 in term.terms:
            nc = out.get(m2, 0) + c2
            if nc:
                out[m2] = nc
            else:
                out.pop(m2, None)
    return Expr._from_dict(out)


# ---------------------------------------------------------------------------
# jet-coefficient collection

def collect_jet_coefficients(e: ExprLike, min_order: int = 1,
                             dep: str = "u") -> dict:
    """Split ``e`` as sum(coeff * m) over monomials m in jets of order >= min_order.

    The returned mapping sends each jet monomial (an Expr) to its
    coefficient.  The key ONE collects everything free of such jets.
    Non-polynomial dependence on a qualifying jet (a fractional or negative
    power, or a jet buried inside a transcendental argument) is a
    structural error.
    """
    e = as_expr(e)
    out: dict = {}
    for mono, c in e.terms:
        jet_part = []
        coeff_part = []
        for k, p in mono:
            if k[0] == "jet" and k[1] == dep and k[2] + k[3] + k[4] >= min_order:
                if not isinstance(p, int) or p < 0:
                    raise StructuralError(
                        f"non-polynomial dependence on jet {k}")
                jet_part.append((k, p))
            else:
                if k[0] in ("exp", "sin", "cos") and k[1].has_kernel(
                        lambda kk: kk[0] == "jet" and kk[1] == dep
                        and kk[2] + kk[3] + kk[4] >= min_order):
                    raise StructuralError(
                        f"jet variable inside transcendental argument {k}")
                coeff_part.append((k, p))
        jmono = Expr._from_dict({tuple(jet_part): Fraction(1)})
        cmono, extra = _canon_monomial(coeff_part)
        coeff = Expr._from_dict({cmono: c * extra})
        out[jmono] = out.get(jmono, ZERO) + coeff
    return {m: c for m, c in out.items() if not c.is_zero()}


def collect_monomials_in(e: ExprLike, atom: ExprLike) -> dict:
    """Split by powers of a single polynomial atom (e.g. explicit x)."""
    e = as_expr(e)
    target = _atom_of(as_expr(atom))
    if target is None:
        raise StructuralError("collection atom must be a bare kernel")
    out: dict = {}
    for mono, c in e.terms:
        power = 0
        rest = []
        for k, p in mono:
            if k == target:
                if not isinstance(p, int) or p < 0:
                    raise StructuralError("non-polynomial dependence")
                power = p
            else:
                rest.append((k, p))
        rmono, extra = _canon_monomial(rest)
        piece = Expr._from_dict({rmono: c * extra})
        out[power] = out.get(power, ZERO) + piece
    return {p: c for p, c in out.items() if not c.is_zero()}


# ---------------------------------------------------------------------------
# spatial Euler operator (used by the triviality test) and Pythagorean pass

def euler_operator(e: ExprLike, dirs: Sequence[str] = ("x", "y"),
                   dep: str = "u") -> Expr:
    """Variational derivative of ``e`` w.r.t. ``dep`` over the given directions.

    Annihilates total divergences in those directions; used to extract the
    characteristic of a conserved density.
    """
    e = as_expr(e)
    axes = [DIR_INDEX[d] for d in dirs]
    result = ZERO
    for idx in sorted(e.jet_indices(dep)):
        if any(idx[a] for a in range(3) if a not in axes):
            raise StructuralError("density contains jets outside the "
                                  "collection directions")
        term = partial_derivative(e, jet(*idx, dep=dep))
        sign = 1
        for a in axes:
            for _ in range(idx[a]):
                term = total_derivative(term, DIRS[a])
                sign = -sign
        result = result + (term if sign > 0 else -term)
    return result


def pythagoras(e: ExprLike) -> Expr:
    """Rewrite cos(a)^(2k+r) -> (1 - sin(a)^2)^k cos(a)^r and renormalize.

    Applied only by the conservation verifier; normalize itself never
    touches trigonometric identities.
    """
    e = as_expr(e)
    out: dict = {}
    for mono, c in e.terms:
        factor = None
        plain = []
        for k, p in mono:
            if k[0] == "cos" and isinstance(p, int) and p >= 2:
                piece = (ONE - sin_(k[1]) ** 2) ** (p // 2)
                if p % 2:
                    piece = piece * cos_(k[1])
                factor = piece if factor is None else factor * piece
            else:
                plain.append((k, p))
        pmono, extra = _canon_monomial(plain)
        term = Expr._from_dict({pmono: c * extra})
        if factor is not None:
            term = term * factor
        for m2, c2 in term.terms:
            nc = out.get(m2, 0) + c2
            if nc:
                out[m2] = nc
            else:
                out.pop(m2, None)
    return Expr._from_dict(out)


# ---------------------------------------------------------------------------
# JSON serialization

def _kernel_to_json(k: tuple):
    kind = k[0]
    if kind in ("exp", "sin", "cos"):
        return {"kind": kind, "arg": to_json(k[1])}
    if kind == "jet":
        return {"kind": "jet", "dep": k[1], "index": [k[2], k[3], k[4]]}
    if kind == "fn":
        return {"kind": "fn", "name": k[1], "args": list(k[2]),
                "deriv": list(k[3])}
    if kind == "anti":
        return {"kind": "anti", "base": k[1]}
    if kind == "rp":
        return {"kind": "rp", "base": k[1]}
    return {"kind": kind, "name": k[1]}


def _kernel_from_json(d: dict) -> tuple:
    kind = d["kind"]
    if kind in ("exp", "sin", "cos"):
        return (kind, from_json(d["arg"]))
    if kind == "jet":
        return ("jet", d["dep"], *d["index"])
    if kind == "fn":
        return ("fn", d["name"], tuple(d["args"]), tuple(d["deriv"]))
    if kind == "anti":
        return ("anti", d["base"])
    if kind == "rp":
        return ("rp", d["base"])
    return (kind, d["name"])


def to_json(e: ExprLike):
    """Canonical JSON tree for a normalized expression."""
    e = as_expr(e)
    return {"sum": [
        {"coeff": str(c),
         "factors": [{"kernel": _kernel_to_json(k), "power": str(Fraction(p))}
                     for k, p in m]}
        for m, c in e.terms]}


def from_json(d) -> Expr:
    out = ZERO
    for term in d["sum"]:
        mono = [( _kernel_from_json(f["kernel"]), Fraction(f["power"]))
                for f in term["factors"]]
        cmono, extra = _canon_monomial(mono)
        out = out + Expr._from_dict({cmono: Fraction(term["coeff"]) * extra})
    return out
