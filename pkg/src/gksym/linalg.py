"""Small exact linear algebra over Q used by the determining-system checks."""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence

from .expr import Expr, ZERO


def solve_linear_combination(basis: Sequence[Expr], target: Expr
                             ) -> Optional[List[Fraction]]:
    """Coefficients lam with sum(lam_i * basis_i) == target, or None.

    Exact Gaussian elimination over the monomials appearing in the basis
    and the target.
    """
    monomials = {}
    for e in list(basis) + [target]:
        for mono, _ in e.terms:
            monomials.setdefault(mono, len(monomials))
    n = len(basis)
    rows = []
    for mono, ridx in sorted(monomials.items(), key=lambda kv: kv[1]):
        row = [Fraction(0)] * (n + 1)
        for j, e in enumerate(basis):
            row[j] = dict(e.terms).get(mono, Fraction(0))
        row[n] = dict(target.terms).get(mono, Fraction(0))
        rows.append(row)

    pivots = []
    rank = 0
    for col in range(n):
        pivot_row = None
        for i in range(rank, len(rows)):
            if rows[i][col]:
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[rank], rows[pivot_row] = rows[pivot_row], rows[rank]
        pv = rows[rank][col]
        rows[rank] = [v / pv for v in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][col]:
                factor = rows[i][col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], rows[rank])]
        pivots.append(col)
        rank += 1
    # inconsistency: a zero row with nonzero rhs
    for i in range(rank, len(rows)):
        if rows[i][n]:
            return None
    lam = [Fraction(0)] * n
    for i, col in enumerate(pivots):
        lam[col] = rows[i][n]
    return lam


def proportionality_factor(a: Expr, b: Expr) -> Optional[Fraction]:
    """lam with a == lam * b, or None (a, b nonzero)."""
    if a.is_zero() and b.is_zero():
        return Fraction(1)
    if a.is_zero() or b.is_zero():
        return None
    da, db = dict(a.terms), dict(b.terms)
    if set(da) != set(db):
        return None
    lam = None
    for mono, ca in da.items():
        ratio = ca / db[mono]
        if lam is None:
            lam = ratio
        elif lam != ratio:
            return None
    return lam
