"""Formal Lagrangian, Euler-Lagrange operator, adjoint equation and the
strict / quasi / nonlinear self-adjointness residual systems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import expr as ex
from .expr import Expr, as_expr
from .model import PDEFamily, NormalForm, reduce_on_solutions, apply_constraints
from .symmetry import DeterminingSystem, canonical_system


def multi_indices(max_order: int, min_order: int = 0):
    for total in range(min_order, max_order + 1):
        for ix in range(total, -1, -1):
            for iy in range(total - ix, -1, -1):
                yield (ix, iy, total - ix - iy)


def euler_lagrange(L: Expr, wrt: str = "u", max_order: Optional[int] = None) -> Expr:
    """delta L / delta w = dL/dw + sum (-1)^|J| D^J (dL/dw_J), |J| <= order(L).

    The formally infinite sum truncates at the Lagrangian's jet order
    (optionally overridden with ``max_order``).
    """
    L = as_expr(L)
    order = L.max_jet_order(wrt)
    if max_order is not None:
        order = max(order, max_order)
    result = ex.ZERO
    for idx in multi_indices(max(order, 0)):
        dL = ex.partial_derivative(L, ex.jet(*idx, dep=wrt))
        if dL.is_zero():
            continue
        sign = (-1) ** sum(idx)
        for axis, d in enumerate(ex.DIRS):
            for _ in range(idx[axis]):
                dL = ex.total_derivative(dL, d)
        result = result + (dL if sign > 0 else -dL)
    return result


def formal_lagrangian(fam: PDEFamily) -> Expr:
    return ex.vjet() * fam.delta


def adjoint_equation(fam: PDEFamily) -> Expr:
    """Left side of the adjoint equation delta(v*Delta)/delta u = 0.

    The sign is chosen so the v_t coefficient is -1, matching the
    evolutionary orientation of the family itself.
    """
    return -euler_lagrange(formal_lagrangian(fam), "u")


@dataclass
class SelfAdjointnessReport:
    mode: str                       # strict | quasi | nonlinear
    substitution: Expr              # the value substituted for v
    residual_system: DeterminingSystem
    verdict: str                    # holds | fails | holds-under-constraints
    constraints: List[dict] = field(default_factory=list)
    witness: Optional[dict] = None
    condition: Optional[Expr] = None
    condition_derivatives: Tuple[Expr, ...] = ()

    def to_json(self) -> dict:
        from .printer import print_expr
        out = {
            "mode": self.mode,
            "substitution": print_expr(self.substitution),
            "verdict": self.verdict,
            "residual_system": self.residual_system.to_json(),
            "constraints": self.constraints,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.condition is not None:
            out["condition"] = print_expr(self.condition)
        if self.condition_derivatives:
            out["condition_derivatives"] = [print_expr(e)
                                            for e in self.condition_derivatives]
        return out


def _split_residual(fam: PDEFamily, subst: Expr,
                    aux=()) -> Tuple[DeterminingSystem, Expr]:
    """Substitute v -> subst into the adjoint, reduce on solutions, split."""
    adj = adjoint_equation(fam)
    residual = ex.substitute(adj, [(ex.vjet(), subst)])
    residual = reduce_on_solutions(residual, NormalForm.of(fam))
    if aux:
        residual = apply_constraints(residual, aux)
    coeffs = ex.collect_jet_coefficients(residual, min_order=1)
    equations = []
    provenance = {}
    for mono, coeff in coeffs.items():
        equations.append(coeff)
        provenance[coeff.monic()] = mono
    return canonical_system(equations, provenance), residual


def check_strict(fam: PDEFamily) -> SelfAdjointnessReport:
    """Theorem: no choice of f, g, h, r is strictly self-adjoint.

    The witness is the constant coefficient 2 of u_xxxx in the reduced
    residual, which no choice of the four functions can cancel.
    """
    system, residual = _split_residual(fam, ex.jet())
    coeff_xxxx = ex.partial_derivative(residual, ex.jet(4))
    coeff_yyyy = ex.partial_derivative(residual, ex.jet(0, 4))
    verdict = "fails" if not residual.is_zero() else "holds"
    return SelfAdjointnessReport(
        mode="strict", substitution=ex.jet(), residual_system=system,
        verdict=verdict,
        witness={"u_xxxx": coeff_xxxx, "u_yyyy": coeff_yyyy,
                 "residual": residual})


_QUASI_PHI = ("fn", "phi", ("u",), (0,))


def check_quasi(fam: PDEFamily) -> SelfAdjointnessReport:
    """Quasi self-adjointness with unknown phi(u) != 0.

    Splitting the reduced residual by jet monomials gives a system in
    phi, f, g, h, r; under phi = const it collapses to the constraint set
    f' = 0, 1 - 2r' = 0, h = g'.
    """
    phi = ex.ufunc("phi")
    system, _ = _split_residual(fam, phi)

    # solve: the phi-derivative equations force phi = c != 0; substituting
    # phi = 1 is the same as dividing each equation by c
    solved = [ex.substitute(e, [("phi", ex.ONE)], warn=False)
              for e in system.equations]
    constraints = []
    for e in solved:
        if e.is_zero():
            continue
        constraints.append(e.monic())
    constraints = sorted(set(constraints), key=Expr.key)
    primary, derived = _recognize_quasi_constraints(constraints)
    verdict = "holds-under-constraints" if primary else "fails"
    report = SelfAdjointnessReport(
        mode="quasi", substitution=phi, residual_system=system,
        verdict=verdict,
        constraints=[{"equation": e, "solved": s} for e, s in primary] +
                    [{"equation": e, "solved": "consequence"} for e in derived])
    return report


def _recognize_quasi_constraints(constraints):
    """Pick out f'=0, 1-2r'=0, h-g'=0 and verify the rest are consequences."""
    fprime = ex.ufunc("f", 1).monic()
    rcond = (ex.ufunc("r", 1) - ex.rational(1, 2)).monic()
    hcond = (ex.ufunc("h") - ex.ufunc("g", 1)).monic()
    targets = {fprime: "f = c1", rcond: "r = u/2 + c2", hcond: "h = g'"}
    primary = []
    derived = []
    for e in constraints:
        if e in targets:
            primary.append((e, targets[e]))
        else:
            # consequence iff it vanishes under the solved family
            under = ex.substitute(e, [("f", ex.par("c1")),
                                      ("r", ex.jet() / 2 + ex.par("c2")),
                                      ("h", ex.ufunc("g", 1))], warn=False)
            if under.is_zero():
                derived.append(e)
            else:
                return [], constraints
    return primary, derived


def quasi_family() -> PDEFamily:
    """The solved quasi self-adjoint family f=c1, r=u/2+c2, h=g'."""
    from .model import build_gks
    return build_gks(f=ex.par("c1"), r=ex.jet() / 2 + ex.par("c2"),
                     h=ex.ufunc("g", 1))


def check_nonlinear(fam: PDEFamily) -> SelfAdjointnessReport:
    """Nonlinear self-adjointness with unknown phi(x, y, t, u) != 0.

    Emits the split residual system, the intermediate solution
    (phi = phi(x,y,t), r = u/2 + c, h = g'), the single surviving scalar
    condition on phi, and its two u-derivatives.
    """
    phi4 = ex.mfunc("phi", ("x", "y", "t", "u"))
    system, _ = _split_residual(fam, phi4)

    phi3 = ex.mfunc("phi", ("x", "y", "t"))
    first_solution = [("phi", phi3),
                      ("r", ex.jet() / 2 + ex.par("c")),
                      ("h", ex.ufunc("g", 1))]
    survivors = set()
    for e in system.equations:
        reduced = ex.substitute(e, first_solution)
        if not reduced.is_zero():
            survivors.add(reduced.monic())
    if len(survivors) != 1:
        condition = None
        verdict = "fails"
    else:
        condition = survivors.pop()
        verdict = "holds-under-constraints"
    report = SelfAdjointnessReport(
        mode="nonlinear", substitution=phi4, residual_system=system,
        verdict=verdict,
        constraints=[{"equation": None,
                      "solved": "phi = phi(x,y,t), r = u/2 + c, h = g'"}],
        condition=condition)
    if condition is not None:
        d1 = ex.partial_derivative(condition, ex.jet())
        d2 = ex.partial_derivative(d1, ex.jet())
        report.condition_derivatives = (d1.monic(), d2.monic())
    return report


def verify_substitution(fam: PDEFamily, subst: Expr, aux=()) -> Tuple[bool, Expr]:
    """Check that a concrete v-substitution zeroes the reduced adjoint."""
    _, residual = _split_residual(fam, subst, aux=aux)
    return residual.is_zero(), residual
