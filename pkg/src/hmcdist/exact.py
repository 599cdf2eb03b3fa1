"""Exact rational linear algebra and a two-phase simplex solver.

Everything here works on :class:`fractions.Fraction` values and never rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

Rat = Fraction

ZERO = Fraction(0)
ONE = Fraction(1)


def as_rat(value) -> Fraction:
    """Convert ints, Fractions and decimal/"p/q" strings exactly.

    Floats are rejected: they would silently import binary rounding error.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


class SingularMatrixError(ValueError):
    pass


class Basis:
    """Row-echelon basis of a growing set of exact vectors.

    Each stored row has a pivot column holding 1, and zeros in the pivot
    columns of all rows stored before it, so reducing a vector against the
    rows in insertion order removes every pivot component.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.rows: list[list[Fraction]] = []
        self.pivots: list[int] = []

    def __len__(self) -> int:
        return len(self.rows)

    def reduce(self, v: Sequence) -> list[Fraction]:
        if len(v) != self.dim:
            raise ValueError(f"dimension mismatch: expected {self.dim}, got {len(v)}")
        w = [as_rat(x) for x in v]
        for row, p in zip(self.rows, self.pivots):
            f = w[p]
            if f:
                w = [a - f * b for a, b in zip(w, row)]
        return w

    def contains(self, v: Sequence) -> bool:
        return not any(self.reduce(v))

    def try_extend(self, v: Sequence) -> bool:
        """Insert ``v`` if it lies outside the current span; report whether it did."""
        w = self.reduce(v)
        p = next((i for i, x in enumerate(w) if x), None)
        if p is None:
            return False
        piv = w[p]
        self.rows.append([x / piv for x in w])
        self.pivots.append(p)
        return True


def solve_linear(A: Sequence[Sequence], b: Sequence) -> list[Fraction]:
    """Solve the square system ``A x = b`` by Gauss-Jordan elimination."""
    n = len(A)
    if len(b) != n or any(len(row) != n for row in A):
        raise ValueError("solve_linear needs a square matrix and a matching right-hand side")
    M = [[as_rat(x) for x in row] + [as_rat(bi)] for row, bi in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            raise SingularMatrixError(f"matrix is singular (no pivot in column {col})")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def mat_vec(A: Sequence[Sequence[Fraction]], x: Sequence[Fraction]) -> list[Fraction]:
    return [sum((a * b for a, b in zip(row, x)), ZERO) for row in A]


def determinant(A: Sequence[Sequence]) -> Fraction:
    """Exact determinant by fraction-preserving elimination."""
    n = len(A)
    M = [[as_rat(x) for x in row] for row in A]
    det = ONE
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            return ZERO
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        for r in range(col + 1, n):
            if M[r][col]:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return det


# --------------------------------------------------------------------------
# Linear programming

LE, GE, EQ = "<=", ">=", "=="


@dataclass
class LpProblem:
    """Minimisation LP over named variables with exact coefficients.

    Variables default to the bounds ``[0, +inf)``; pass ``lo=None`` for a free
    variable.
    """

    lower: dict[str, Fraction | None] = field(default_factory=dict)
    upper: dict[str, Fraction | None] = field(default_factory=dict)
    constraints: list[tuple[dict[str, Fraction], str, Fraction]] = field(default_factory=list)
    objective: dict[str, Fraction] = field(default_factory=dict)

    @property
    def variables(self) -> list[str]:
        return list(self.lower)

    def add_var(self, name: str, lo=0, hi=None) -> str:
        if name in self.lower:
            raise ValueError(f"duplicate variable {name!r}")
        self.lower[name] = None if lo is None else as_rat(lo)
        self.upper[name] = None if hi is None else as_rat(hi)
        return name

    def add_constraint(self, coeffs: Mapping[str, object], sense: str, rhs) -> None:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"unknown constraint sense {sense!r}")
        unknown = set(coeffs) - set(self.lower)
        if unknown:
            raise ValueError(f"constraint mentions undeclared variables {sorted(unknown)}")
        self.constraints.append(({k: as_rat(v) for k, v in coeffs.items()}, sense, as_rat(rhs)))

    def minimize(self, coeffs: Mapping[str, object]) -> None:
        self.objective = {k: as_rat(v) for k, v in coeffs.items()}

    def evaluate(self, point: Mapping[str, Fraction]) -> Fraction:
        return sum((c * point[k] for k, c in self.objective.items()), ZERO)

    def is_feasible(self, point: Mapping[str, Fraction]) -> bool:
        """Exact feasibility check, used to certify solver output."""
        for k in self.lower:
            lo, hi = self.lower[k], self.upper[k]
            if lo is not None and point[k] < lo:
                return False
            if hi is not None and point[k] > hi:
                return False
        for coeffs, sense, rhs in self.constraints:
            lhs = sum((c * point[k] for k, c in coeffs.items()), ZERO)
            if sense == LE and lhs > rhs or sense == GE and lhs < rhs or sense == EQ and lhs != rhs:
                return False
        return True


OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass(frozen=True)
class LpOutcome:
    status: str
    value: Fraction | None = None
    point: dict[str, Fraction] | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _standard_form(p: LpProblem):
    """Rewrite ``p`` as ``min c.y  s.t.  A y = b, y >= 0, b >= 0``.

    Returns the row data plus the affine maps recovering original variables.
    """
    ncols = 0
    # original var -> (offset, [(column, coefficient)])
    subst: dict[str, tuple[Fraction, list[tuple[int, Fraction]]]] = {}
    extra_rows: list[tuple[dict[int, Fraction], str, Fraction]] = []
    for name in p.variables:
        lo, hi = p.lower[name], p.upper[name]
        if lo is not None:
            subst[name] = (lo, [(ncols, ONE)])
            if hi is not None:
                extra_rows.append(({ncols: ONE}, LE, hi - lo))
            ncols += 1
        elif hi is not None:
            subst[name] = (hi, [(ncols, -ONE)])
            ncols += 1
        else:
            subst[name] = (ZERO, [(ncols, ONE), (ncols + 1, -ONE)])
            ncols += 2

    rows: list[tuple[dict[int, Fraction], str, Fraction]] = []
    for coeffs, sense, rhs in p.constraints:
        row: dict[int, Fraction] = {}
        b = rhs
        for name, a in coeffs.items():
            off, terms = subst[name]
            b -= a * off
            for col, f in terms:
                row[col] = row.get(col, ZERO) + a * f
        rows.append((row, sense, b))
    rows.extend(extra_rows)

    cost = [ZERO] * ncols
    for name, a in p.objective.items():
        _, terms = subst[name]
        for col, f in terms:
            cost[col] += a * f

    # slack columns
    A: list[list[Fraction]] = []
    b: list[Fraction] = []
    nslack = sum(1 for _, s, _ in rows if s != EQ)
    width = ncols + nslack
    k = ncols
    for row, sense, rhs in rows:
        line = [ZERO] * width
        for col, a in row.items():
            line[col] = a
        if sense == LE:
            line[k] = ONE
            k += 1
        elif sense == GE:
            line[k] = -ONE
            k += 1
        if rhs < 0:
            line = [-x for x in line]
            rhs = -rhs
        A.append(line)
        b.append(rhs)
    cost.extend([ZERO] * nslack)
    return A, b, cost, subst


class _Tableau:
    """Dense simplex tableau; pivoting follows Bland's rule throughout."""

    def __init__(self, A, b, basis):
        self.T = [list(row) + [rhs] for row, rhs in zip(A, b)]
        self.basis = list(basis)

    def pivot(self, r: int, c: int) -> None:
        T = self.T
        inv = 1 / T[r][c]
        T[r] = [x * inv for x in T[r]]
        pr = T[r]
        for i, row in enumerate(T):
            if i != r and row[c]:
                f = row[c]
                T[i] = [a - f * b for a, b in zip(row, pr)]
        self.basis[r] = c

    def reduced_costs(self, cost: Sequence[Fraction], allowed: Sequence[bool]) -> list[Fraction]:
        n = len(cost)
        red = list(cost)
        for row, bv in zip(self.T, self.basis):
            cb = cost[bv]
            if cb:
                for j in range(n):
                    if row[j]:
                        red[j] -= cb * row[j]
        return [r if ok else ZERO for r, ok in zip(red, allowed)]

    def run(self, cost: Sequence[Fraction], allowed: Sequence[bool]) -> bool:
        """Minimise ``cost``; returns False if the objective is unbounded below."""
        while True:
            red = self.reduced_costs(cost, allowed)
            entering = next((j for j, r in enumerate(red) if r < 0), None)
            if entering is None:
                return True
            best = None
            for i, row in enumerate(self.T):
                a = row[entering]
                if a > 0:
                    ratio = row[-1] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return False
            self.pivot(best[1], entering)


def solve_lp(p: LpProblem) -> LpOutcome:
    """Solve ``p`` exactly with the two-phase simplex method (Bland's rule)."""
    A, b, cost, subst = _standard_form(p)
    m = len(A)
    n = len(cost)
    if m == 0:
        if any(c < 0 for c in cost):
            return LpOutcome(UNBOUNDED)
        y = [ZERO] * n
    else:
        # phase 1: one artificial per row
        A1 = [row + [ONE if i == j else ZERO for j in range(m)] for i, row in enumerate(A)]
        tab = _Tableau(A1, b, range(n, n + m))
        phase1_cost = [ZERO] * n + [ONE] * m
        tab.run(phase1_cost, [True] * (n + m))
        infeas = sum((tab.T[i][-1] for i in range(m) if tab.basis[i] >= n), ZERO)
        if infeas > 0:
            return LpOutcome(INFEASIBLE)
        # drive zero-level artificials out, dropping redundant rows
        i = 0
        while i < len(tab.T):
            if tab.basis[i] >= n:
                col = next((j for j in range(n) if tab.T[i][j]), None)
                if col is None:
                    del tab.T[i]
                    del tab.basis[i]
                    continue
                tab.pivot(i, col)
            i += 1
        tab.T = [row[:n] + [row[-1]] for row in tab.T]
        if not tab.run(cost, [True] * n):
            return LpOutcome(UNBOUNDED)
        y = [ZERO] * n
        for row, bv in zip(tab.T, tab.basis):
            y[bv] = row[-1]

    point = {}
    for name, (off, terms) in subst.items():
        point[name] = off + sum((f * y[col] for col, f in terms), ZERO)
    return LpOutcome(OPTIMAL, p.evaluate(point), point)
