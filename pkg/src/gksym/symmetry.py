"""Point-symmetry machinery: fourth-order prolongation, the linearized
symmetry condition, determining-system generation and splitting, and
verification of individual generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import expr as ex
from .expr import Expr, as_expr
from .linalg import solve_linear_combination
from .model import (PDEFamily, NormalForm, reduce_on_solutions,
                    ConstraintRule, apply_constraints)

JetIndex = Tuple[int, int, int]


@dataclass(frozen=True)
class Generator:
    """A point-symmetry candidate X = xi1 d_x + xi2 d_y + xi3 d_t + eta d_u.

    Coefficients live in (x, y, t, u); unknown functions are allowed and may
    carry constraint PDEs (stored as rewrite rules on a solved leading
    derivative).
    """
    xi1: Expr
    xi2: Expr
    xi3: Expr
    eta: Expr
    constraints: Tuple[ConstraintRule, ...] = ()

    def __post_init__(self):
        for name, e in self.coefficients().items():
            for k in e.atoms():
                if k[0] == "jet" and (k[1] != "u" or k[2] + k[3] + k[4] >= 1):
                    raise ValueError(
                        f"{name} depends on jet {k}: not a point symmetry")

    def coefficients(self) -> Dict[str, Expr]:
        return {"xi1": self.xi1, "xi2": self.xi2, "xi3": self.xi3,
                "eta": self.eta}

    def xi(self, axis: int) -> Expr:
        return (self.xi1, self.xi2, self.xi3)[axis]

    def characteristic(self) -> Expr:
        """W = eta - xi1 u_x - xi2 u_y - xi3 u_t."""
        return (self.eta - self.xi1 * ex.jet(1) - self.xi2 * ex.jet(0, 1)
                - self.xi3 * ex.jet(0, 0, 1))

    def with_constraints(self, constraints) -> "Generator":
        return Generator(self.xi1, self.xi2, self.xi3, self.eta,
                         tuple(constraints))

    def scale(self, c) -> "Generator":
        return Generator(self.xi1 * c, self.xi2 * c, self.xi3 * c,
                         self.eta * c, self.constraints)

    def __add__(self, other: "Generator") -> "Generator":
        return Generator(self.xi1 + other.xi1, self.xi2 + other.xi2,
                         self.xi3 + other.xi3, self.eta + other.eta,
                         self.constraints + other.constraints)

    def commutator(self, other: "Generator") -> "Generator":
        """[X, Y] acting on coefficient functions of x, y, t, u."""
        def apply(g: "Generator", e: Expr) -> Expr:
            out = g.eta * ex.partial_derivative(e, ex.jet())
            for axis, d in enumerate(ex.DIRS):
                out = out + g.xi(axis) * ex.partial_derivative(e, ex.var(d))
            return out
        coeffs = []
        for name in ("xi1", "xi2", "xi3", "eta"):
            a = getattr(self, name)
            b = getattr(other, name)
            coeffs.append(apply(self, b) - apply(other, a))
        return Generator(*coeffs)

    def to_json(self) -> dict:
        from .printer import print_expr
        return {name: print_expr(e) for name, e in self.coefficients().items()}


def unknown_generator() -> Generator:
    """The fully unknown generator with xi^i(x,y,t,u), eta(x,y,t,u)."""
    args = ("x", "y", "t", "u")
    return Generator(ex.mfunc("xi1", args), ex.mfunc("xi2", args),
                     ex.mfunc("xi3", args), ex.mfunc("eta", args))


@dataclass
class ProlongedGenerator:
    base: Generator
    eta_coeffs: Dict[JetIndex, Expr]

    def coeff(self, idx: JetIndex) -> Expr:
        return self.eta_coeffs[idx]


def _parents(idx: JetIndex):
    for axis in range(3):
        if idx[axis]:
            parent = list(idx)
            parent[axis] -= 1
            yield tuple(parent), axis


def prolong(X: Generator, order: int = 4) -> ProlongedGenerator:
    """Prolongation coefficients over symmetrized multi-indices.

    eta^(1)_i = D_i eta - (D_i xi^j) u_j and the order-s recursion
    eta^(s) = D_i eta^(s-1) - (D_i xi^j) u_{parent+j}; derivative jets
    commute, so any parent index gives the same coefficient (checked as a
    property test, not assumed silently).
    """
    if not 1 <= order <= 4:
        raise ValueError("prolongation order must be between 1 and 4")
    dxi = {(axis, d): ex.total_derivative(X.xi(axis), ex.DIRS[d])
           for axis in range(3) for d in range(3)}
    coeffs: Dict[JetIndex, Expr] = {(0, 0, 0): X.eta}
    for total in range(1, order + 1):
        for ix in range(total, -1, -1):
            for iy in range(total - ix, -1, -1):
                idx = (ix, iy, total - ix - iy)
                parent, axis = next(_parents(idx))
                val = ex.total_derivative(coeffs[parent], ex.DIRS[axis])
                for j in range(3):
                    bumped = list(parent)
                    bumped[j] += 1
                    val = val - dxi[(j, axis)] * ex.jet(*bumped)
                coeffs[idx] = val
    del coeffs[(0, 0, 0)]
    return ProlongedGenerator(X, coeffs)


def prolong_via(X: Generator, idx: JetIndex, path: Sequence[str]) -> Expr:
    """Prolongation coefficient at idx following an explicit direction path
    (independent route used by the path-independence property test)."""
    if tuple(sorted(path)) != tuple(sorted(
            "x" * idx[0] + "y" * idx[1] + "t" * idx[2])):
        raise ValueError("path does not realize the index")
    val = X.eta
    current = (0, 0, 0)
    for d in path:
        axis = ex.DIR_INDEX[d]
        new = ex.total_derivative(val, d)
        for j in range(3):
            bumped = list(current)
            bumped[j] += 1
            new = new - ex.total_derivative(X.xi(j), d) * ex.jet(*bumped)
        val = new
        nxt = list(current)
        nxt[axis] += 1
        current = tuple(nxt)
    return val


def lsc_parts(X: Generator, fam: PDEFamily,
              reduce: bool = True) -> List[Expr]:
    """Summands of X^(4)[Delta], each reduced on solutions (and rewritten
    by the generator's constraint rules).  Their sum is the LSC residual;
    keeping the parts separate feeds the numeric spot-checker."""
    nf = NormalForm.of(fam) if reduce else None
    pro = prolong(X, 4)
    parts = []

    def emit(e: Expr):
        if e.is_zero():
            return
        if nf is not None:
            e = reduce_on_solutions(e, nf)
        if X.constraints:
            e = apply_constraints(e, X.constraints)
        if not e.is_zero():
            parts.append(e)

    emit(X.eta * ex.partial_derivative(fam.delta, ex.jet()))
    for axis, d in enumerate(ex.DIRS):
        dd = ex.partial_derivative(fam.delta, ex.var(d))
        if not dd.is_zero():
            emit(X.xi(axis) * dd)
    for idx, coeff in pro.eta_coeffs.items():
        djet = ex.partial_derivative(fam.delta, ex.jet(*idx))
        if djet.is_zero():
            continue
        emit(coeff * djet)
    return parts


def apply_lsc(X: Generator, fam: PDEFamily) -> Expr:
    """X^(4)[Delta] restricted to solutions, normalized."""
    total = ex.ZERO
    for p in lsc_parts(X, fam):
        total = total + p
    return total


@dataclass
class SymmetryCheck:
    ok: bool
    residual: Expr
    parts: List[Expr]

    def to_json(self) -> dict:
        from .printer import print_expr
        return {"pass": self.ok, "residual": print_expr(self.residual)}


def check_symmetry(X: Generator, fam: PDEFamily) -> SymmetryCheck:
    parts = lsc_parts(X, fam)
    residual = ex.ZERO
    for p in parts:
        residual = residual + p
    return SymmetryCheck(residual.is_zero(), residual, parts)


# ---------------------------------------------------------------------------
# determining systems

@dataclass
class DeterminingSystem:
    """Equations required to vanish identically in (x, y, t, u).

    Canonical set form: normalized, scaled so the leading coefficient is
    +1, duplicates removed, sorted.  ``provenance`` maps each equation to
    the jet monomial it came from (where known).
    """
    equations: Tuple[Expr, ...]
    provenance: Dict[Expr, Expr] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.equations)

    def __iter__(self):
        return iter(self.equations)

    def contains(self, e: Expr) -> bool:
        e = as_expr(e)
        return e.is_zero() or e.monic() in set(self.equations)

    def to_json(self) -> list:
        from .printer import print_expr
        return [{"equation": print_expr(e),
                 "monomial": print_expr(self.provenance.get(e, ex.ONE))}
                for e in self.equations]


def canonical_system(equations: Sequence[Expr],
                     provenance: Optional[Dict[Expr, Expr]] = None
                     ) -> DeterminingSystem:
    canon = []
    seen = set()
    for e in equations:
        if e.is_zero():
            continue
        m = e.monic()
        if m not in seen:
            seen.add(m)
            canon.append(m)
    canon.sort(key=Expr.key)
    return DeterminingSystem(tuple(canon), provenance or {})


def generate_determining_system(fam: PDEFamily,
                                X: Optional[Generator] = None
                                ) -> DeterminingSystem:
    """Split the LSC for the unknown generator by jet monomials.

    Coefficients of distinct monomials in jet variables of order >= 1 must
    vanish separately; each becomes one determining equation.
    """
    X = X or unknown_generator()
    residual = apply_lsc(X, fam)
    coeffs = ex.collect_jet_coefficients(residual, min_order=1)
    equations = []
    provenance = {}
    for mono, coeff in coeffs.items():
        m = coeff.monic()
        equations.append(coeff)
        provenance.setdefault(m, mono)
    return canonical_system(equations, provenance)


def split_polynomially(e: Expr) -> List[Expr]:
    """Split an equation by powers of any independent variable that occurs
    only polynomially (not as an argument of any unknown function in it).

    Used after ansatz substitution: coefficients of x^k are separate
    equations whenever no remaining unknown function depends on x.
    """
    pieces = [e]
    for d in ex.DIRS:
        blocked = False
        for k in e.atoms():
            if k[0] == "fn" and d in k[2]:
                blocked = True
                break
            if k[0] in ("exp", "sin", "cos") and k[1].has_kernel(
                    lambda kk: kk == ("var", d)):
                blocked = True
                break
        if blocked:
            continue
        nxt = []
        for p in pieces:
            nxt.extend(ex.collect_monomials_in(p, ex.var(d)).values())
        pieces = nxt
    return pieces


def substitute_ansatz(ds: DeterminingSystem, ansatz: Generator
                      ) -> DeterminingSystem:
    """Rewrite each equation under a solved generator ansatz.

    The unknown xi1..eta nodes are replaced by the ansatz coefficients;
    surviving equations are split by explicit powers of the independent
    variables and returned in canonical set form.
    """
    args = ("x", "y", "t", "u")
    rules = [("xi1", ansatz.xi1), ("xi2", ansatz.xi2),
             ("xi3", ansatz.xi3), ("eta", ansatz.eta)]
    out = []
    for e in ds.equations:
        reduced = ex.substitute(e, rules, warn=False)
        if reduced.is_zero():
            continue
        out.extend(split_polynomially(reduced))
    return canonical_system(out)


@dataclass
class SystemComparison:
    exact: List[Tuple[Expr, Fraction]]   # (reference equation, scale factor)
    span: List[Tuple[Expr, List[Fraction]]]
    failed: List[Expr]

    @property
    def exact_fraction(self) -> float:
        total = len(self.exact) + len(self.span) + len(self.failed)
        return len(self.exact) / total if total else 1.0

    def ok(self) -> bool:
        return not self.failed


def compare_with_reference(generated: DeterminingSystem,
                           reference: Sequence[Expr]) -> SystemComparison:
    """Match reference equations against the generated system.

    Exact matching up to a nonzero rational multiple is attempted first;
    the rest are tested for membership in the rational span of the
    generated equations.
    """
    gen_set = {}
    for e in generated.equations:
        gen_set[e] = e
    exact, span, failed = [], [], []
    basis = list(generated.equations)
    for ref in reference:
        if ref.is_zero():
            exact.append((ref, Fraction(1)))
            continue
        m = ref.monic()
        if m in gen_set:
            exact.append((ref, ref.leading_coefficient()))
            continue
        lam = solve_linear_combination(basis, ref)
        if lam is not None:
            span.append((ref, lam))
        else:
            failed.append(ref)
    return SystemComparison(exact, span, failed)
