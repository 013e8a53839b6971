"""Exact sparse linear algebra over Q (rows are dicts column -> Fraction)."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Hashable, Iterable


class SparseRREF:
    """Incrementally maintained reduced row echelon form.

    Columns are arbitrary hashable keys ranked by ``order``; every pivot is
    the highest-ranked column of its row, so reducing a vector eliminates the
    largest columns first.  Fully reduced: no pivot column occurs in any other
    row.
    """

    def __init__(self, order: Callable[[Hashable], object]):
        self.order = order
        self.rows: dict[Hashable, dict[Hashable, Fraction]] = {}

    def __len__(self):
        return len(self.rows)

    def reduce(self, vec: dict) -> dict:
        """Normal form of ``vec`` modulo the row space."""
        out = dict(vec)
        for col in [c for c in out if c in self.rows]:
            coef = out.get(col)
            if not coef:
                continue
            for c, v in self.rows[col].items():
                nv = out.get(c, 0) - coef * v
                if nv:
                    out[c] = nv
                else:
                    out.pop(c, None)
        return out

    def add(self, vec: dict) -> bool:
        """Insert a relation; returns False if it is already implied."""
        r = self.reduce({c: Fraction(v) for c, v in vec.items() if v})
        if not r:
            return False
        piv = max(r, key=self.order)
        inv = 1 / r[piv]
        r = {c: v * inv for c, v in r.items()}
        for key, row in self.rows.items():
            coef = row.get(piv)
            if coef:
                for c, v in r.items():
                    nv = row.get(c, 0) - coef * v
                    if nv:
                        row[c] = nv
                    else:
                        row.pop(c, None)
        self.rows[piv] = r
        return True

    def extend(self, vecs: Iterable[dict]) -> int:
        return sum(1 for v in vecs if self.add(v))


def rank(matrix: list[list]) -> int:
    """Exact rank of a dense matrix of ints/Fractions."""
    rows = [[Fraction(x) for x in row] for row in matrix]
    if not rows:
        return 0
    ncol = len(rows[0])
    r = 0
    for c in range(ncol):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pr = rows[r]
        inv = 1 / pr[c]
        for i in range(r + 1, len(rows)):
            f = rows[i][c]
            if f:
                f *= inv
                row = rows[i]
                for j in range(c, ncol):
                    if pr[j]:
                        row[j] -= f * pr[j]
        r += 1
        if r == len(rows):
            break
    return r
