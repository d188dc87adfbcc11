"""The generalized anisotropic Kuramoto-Sivashinsky family and its
evolutionary normal form.

The family is

    u_t = 1/2 u_x^2 + h(u) u_y^2 + r(u) u_xx + g(u) u_yy
          - u_xxxx - 2 u_xxyy - u_yyyy + f(u)

with f, g, h, r either abstract one-argument functions of u or concrete
expressions in u.  ``delta`` is the left side of Delta = 0, which carries
u_t linearly with coefficient -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

from . import expr as ex
from .expr import Expr, as_expr

FuncSpec = Union[str, Expr, int]

_ABSTRACT = "abstract"


def _coerce_spec(name: str, spec: FuncSpec) -> Union[str, Expr]:
    if isinstance(spec, str):
        if spec != _ABSTRACT:
            from .parser import parse_expr
            spec = parse_expr(spec)
        else:
            return _ABSTRACT
    spec = as_expr(spec)
    bad = [k for k in spec.atoms()
           if k[0] == "var"
           or (k[0] == "jet" and (k[1] != "u" or k[2] or k[3] or k[4]))
           or (k[0] == "fn" and k[2] != ("u",))]
    if bad:
        raise ValueError(f"{name} must be a function of u alone, found {bad}")
    return spec


@dataclass(frozen=True)
class PDEFamily:
    delta: Expr
    f: Union[str, Expr]
    g: Union[str, Expr]
    h: Union[str, Expr]
    r: Union[str, Expr]
    assumptions: Tuple[Tuple[str, str], ...] = ()

    def spec(self, name: str) -> Union[str, Expr]:
        return getattr(self, name)

    def is_abstract(self, name: str) -> bool:
        return isinstance(self.spec(name), str)

    def substitution_rules(self):
        """Rules rewriting the abstract f,g,h,r nodes to their bound values."""
        return [(name, self.spec(name)) for name in "fghr"
                if not self.is_abstract(name)]

    def to_json(self) -> dict:
        from .printer import print_expr
        return {
            **{name: (_ABSTRACT if self.is_abstract(name)
                      else print_expr(self.spec(name))) for name in "fghr"},
            "assumptions": [list(a) for a in self.assumptions],
        }


def _generic_delta() -> Expr:
    return (ex.rational(1, 2) * ex.jet(1) ** 2
            + ex.ufunc("h") * ex.jet(0, 1) ** 2
            + ex.ufunc("r") * ex.jet(2)
            + ex.ufunc("g") * ex.jet(0, 2)
            - ex.jet(4) - 2 * ex.jet(2, 2) - ex.jet(0, 4)
            - ex.jet(0, 0, 1) + ex.ufunc("f"))


def build_gks(f: FuncSpec = _ABSTRACT, g: FuncSpec = _ABSTRACT,
              h: FuncSpec = _ABSTRACT, r: FuncSpec = _ABSTRACT,
              assumptions: Sequence[Tuple[str, str]] = ()) -> PDEFamily:
    """Assemble the family; concrete f,g,h,r are substituted into the one
    abstract delta rather than re-derived."""
    specs = {n: _coerce_spec(n, s) for n, s in
             zip("fghr", (f, g, h, r))}
    delta = _generic_delta()
    rules = [(n, s) for n, s in specs.items() if not isinstance(s, str)]
    if rules:
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # constants are fine here
            delta = ex.substitute(delta, rules)
    return PDEFamily(delta=delta, assumptions=tuple(tuple(a) for a in assumptions),
                     **specs)


GENERIC = build_gks()


@dataclass
class NormalForm:
    """The solved form u_t = rhs; rhs contains no t-indexed jets."""
    rhs: Expr
    _jet_cache: Dict[Tuple[int, int, int], Expr] = field(default_factory=dict)
    _dt_cache: Dict[int, Expr] = field(default_factory=dict)

    @staticmethod
    def of(fam: PDEFamily) -> "NormalForm":
        ut = ex.jet(0, 0, 1)
        coeff = ex.partial_derivative(fam.delta, ut)
        if coeff != ex.rational(-1):
            raise ValueError("delta must carry u_t linearly with coefficient -1")
        rhs = fam.delta + ut
        if any(k[0] == "jet" and k[1] == "u" and k[4] for k in rhs.atoms()):
            raise ValueError("normal form right side contains t-jets")
        return NormalForm(rhs)

    def _dtn(self, n: int) -> Expr:
        """On-shell value of the pure n-th t-derivative of u."""
        if n == 1:
            return self.rhs
        val = self._dt_cache.get(n)
        if val is None:
            prev = self._dtn(n - 1)
            raw = ex.total_derivative(prev, "t")
            val = self._eliminate(raw)
            self._dt_cache[n] = val
        return val

    def jet_value(self, idx: Tuple[int, int, int]) -> Expr:
        """On-shell value of u_idx; t-free."""
        ix, iy, it = idx
        if it == 0:
            return ex.jet(ix, iy, it)
        val = self._jet_cache.get(idx)
        if val is None:
            val = self._dtn(it)
            for _ in range(ix):
                val = ex.total_derivative(val, "x")
            for _ in range(iy):
                val = ex.total_derivative(val, "y")
            self._jet_cache[idx] = val
        return val

    def _eliminate(self, e: Expr) -> Expr:
        while True:
            tjets = sorted(idx for idx in e.jet_indices() if idx[2])
            if not tjets:
                return e
            # rewrite the t-jet of lowest total order first
            idx = min(tjets, key=lambda j: (sum(j), j))
            e = ex.substitute(e, [(ex.jet(*idx), self.jet_value(idx))])


def reduce_on_solutions(e: Expr, nf: NormalForm) -> Expr:
    """Eliminate every t-indexed jet of u using the evolutionary normal form."""
    return nf._eliminate(as_expr(e))


# ---------------------------------------------------------------------------
# constraint rewriting for unknown functions (Table 1 rows, section 5 aux PDEs)

@dataclass(frozen=True)
class ConstraintRule:
    """A PDE on an unknown function, solved for one leading derivative.

    ``lead`` is the derivative multi-index (over the function's declared
    arguments) being eliminated; every derivative node whose multi-index
    dominates ``lead`` is rewritten by the correspondingly differentiated
    ``value``.
    """
    func: str
    args: Tuple[str, ...]
    lead: Tuple[int, ...]
    value: Expr

    def __post_init__(self):
        if len(self.lead) != len(self.args):
            raise ValueError("lead index must match declared arguments")
        target = ("fn", self.func, self.args, self.lead)
        if target in self.value.atoms():
            raise ValueError("constraint value contains the solved derivative")

    def residual(self) -> Expr:
        """The constraint as an expression required to vanish."""
        return ex.mfunc(self.func, self.args, self.lead) - self.value

    def derived_value(self, deriv: Tuple[int, ...]) -> Expr:
        extra = tuple(d - l for d, l in zip(deriv, self.lead))
        val = self.value
        for pos, n in enumerate(extra):
            wrt = ex.var(self.args[pos]) if self.args[pos] in ex.DIRS else ex.jet()
            for _ in range(n):
                val = ex.partial_derivative(val, wrt)
        return val


def apply_constraints(e: Expr, rules: Sequence[ConstraintRule]) -> Expr:
    """Rewrite by each rule's solved derivative until no target remains.

    Rules are applied in order per pass; the usual pairs (a t-rule whose
    value is t-free, then a spatial rule lowering x-counts) terminate by a
    lexicographic argument on the remaining derivative counts.
    """
    e = as_expr(e)
    for _ in range(10_000):
        hit = None
        for k in e.atoms():
            if k[0] != "fn":
                continue
            for rule in rules:
                if k[1] == rule.func and k[2] == rule.args and \
                        all(d >= l for d, l in zip(k[3], rule.lead)):
                    hit = (k, rule)
                    break
            if hit:
                break
        if hit is None:
            return e
        k, rule = hit
        repl = rule.derived_value(k[3])
        e = ex.substitute(e, [(Expr.from_kernel(k), repl)])
    raise RuntimeError("constraint rewriting did not terminate")


def parse_constraint(src: str, func: str, args: Sequence[str],
                     lead: str, ctx=None) -> ConstraintRule:
    """Build a ConstraintRule from `expr = 0` text solved for func_lead.

    ``lead`` is a derivative suffix like "t" or "xx"; the constraint text
    must be linear in that derivative with a rational coefficient.
    """
    from .parser import parse_expr, ParseContext
    args = tuple(args)
    base = ctx or ParseContext()
    constraint = parse_expr(src, base.with_functions(**{func: args}))
    deriv = [0] * len(args)
    for chs in lead:
        deriv[args.index(chs)] += 1
    # linear solve: constraint = a * target + rest with rational a
    tk = ("fn", func, args, tuple(deriv))
    a = ex.ZERO
    rest = ex.ZERO
    for mono, c in constraint.terms:
        powers = dict(mono)
        if tk in powers:
            if powers[tk] != 1 or len(mono) != 1:
                raise ValueError("constraint must be linear in the solved derivative")
            a = a + ex.rational(c)
        else:
            rest = rest + Expr._from_dict({mono: c})
    if a.is_zero():
        raise ValueError(f"constraint does not contain {func}_{lead}")
    value = -(rest / a.constant_value())
    return ConstraintRule(func, args, tuple(deriv), value)
