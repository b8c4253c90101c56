"""Exact Wishart trace-moment coefficient tables via pairing enumeration.

For a Gaussian matrix W with IID N(0, sigma^2) entries and S = W W^T, the
expectation E[tr(S^k)] expands as a product of 2k Gaussian factors.  By the
Isserlis/Wick theorem it equals a sum over all perfect matchings of the 2k
factor positions; each matched pair forces its two row indices equal and its
two column indices equal, so a matching contributes sigma^(2k) n^a m^b where
a and b count the surviving independent column and row index components.
Aggregating over the (2k-1)!! matchings gives an exact integer table of
monomial coefficients.

Position encoding (frozen for reproducible enumeration order): the trace
product is written with factor W[i_t, j_t] at position 2t and factor
W[i_{t+1}, j_t] at position 2t+1, for t = 0..k-1, with i_k identified
with i_0.  So position p carries column variable p >> 1 and row variable
p >> 1 for even p, (p >> 1) + 1 mod k for odd p.

Enumeration of all matchings is only practical for small k; tables for
k = 1..10 are also shipped as data files (see ``reference_table``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterator, Sequence

import numpy as np
from numba import njit, prange

DEFAULT_ORDER_CAP = 12
SHIPPED_ORDERS = range(1, 11)

Matching = tuple[tuple[int, int], ...]


class OrderCapError(ValueError):
    """Moment order outside the supported enumeration range."""


class PersymmetryError(ValueError):
    """Partial table entries conflict with their anti-diagonal reflection."""


def double_factorial_odd(k: int) -> int:
    """(2k - 1)!! = 1 * 3 * ... * (2k - 1), the number of perfect matchings."""
    out = 1
    for i in range(3, 2 * k, 2):
        out *= i
    return out


@dataclass(frozen=True)
class MomentTable:
    """Integer coefficient table for E[tr(S^k)] = sigma^(2k) sum C[a,b] n^a m^b.

    Row r holds the n-exponent a = k - r (so row 0 is n^k), column c holds
    the m-exponent b = c + 1.  Entries are non-negative and sum to (2k-1)!!.
    """

    k: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"order must be >= 1, got {self.k}")
        arr = np.asarray(self.coeffs, dtype=np.int64)
        if arr.shape != (self.k, self.k):
            raise ValueError(f"coeffs must be {self.k}x{self.k}, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("coefficients must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    def coefficient(self, a: int, b: int) -> int:
        """Coefficient of n^a m^b; zero outside the 1..k exponent range."""
        if not (1 <= a <= self.k and 1 <= b <= self.k):
            return 0
        return int(self.coeffs[self.k - a, b - 1])

    def total(self) -> int:
        """Sum of all entries, as an exact Python integer."""
        return int(sum(int(v) for v in self.coeffs.ravel()))

    def is_persymmetric(self) -> bool:
        """True when entry(r, c) == entry(k-1-c, k-1-r) for all r, c."""
        return bool((self.coeffs == self.coeffs[::-1, ::-1].T).all())

    def monomials(self) -> Iterator[tuple[int, int, int]]:
        """Yield (a, b, coefficient) for every nonzero entry."""
        for r in range(self.k):
            for c in range(self.k):
                v = int(self.coeffs[r, c])
                if v:
                    yield self.k - r, c + 1, v

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "coeffs": [[int(v) for v in row] for row in self.coeffs],
            "row_basis": f"n^{self.k}..n^1",
            "col_basis": f"m^1..m^{self.k}",
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "MomentTable":
        return cls(k=int(doc["k"]), coeffs=np.array(doc["coeffs"], dtype=np.int64))

    def to_csv_rows(self) -> list[str]:
        """One comma-joined line per table row."""
        return [",".join(str(int(v)) for v in row) for row in self.coeffs]


def _check_order(k: int, cap: int) -> None:
    if k < 1:
        raise OrderCapError(f"moment order must be >= 1, got {k}")
    if k > cap:
        raise OrderCapError(
            f"order {k} exceeds cap {cap}: enumerating (2k-1)!! = "
            f"{double_factorial_odd(k)} matchings is impractical"
        )


def enumerate_matchings(k: int, cap: int = DEFAULT_ORDER_CAP) -> Iterator[Matching]:
    """Yield every perfect matching of positions 0..2k-1 exactly once.

    Canonical order: the smallest unmatched position is paired with each
    larger unmatched position in increasing order, recursing on the rest.
    A matching is a tuple of k (low, high) pairs in the order formed.
    """
    _check_order(k, cap)

    def rec(free: list[int], acc: list[tuple[int, int]]) -> Iterator[Matching]:
        if not free:
            yield tuple(acc)
            return
        p = free[0]
        for idx in range(1, len(free)):
            q = free[idx]
            acc.append((p, q))
            yield from rec(free[1:idx] + free[idx + 1:], acc)
            acc.pop()

    yield from rec(list(range(2 * k)), [])


def _row_var(p: int, k: int) -> int:
    t = p >> 1
    return t if (p & 1) == 0 else (t + 1) % k


def matching_weight(matching: Sequence[tuple[int, int]], k: int) -> tuple[int, int]:
    """Exponents (a, b) of the monomial n^a m^b contributed by one matching.

    Union-find over the 2k symbolic index variables (k row variables, k
    column variables, cyclic identification already encoded): each matched
    pair merges its two positions' row variables and column variables.
    a is the number of column components, b the number of row components.
    """
    if len(matching) != k:
        raise ValueError(f"expected {k} pairs, got {len(matching)}")
    # one union-find array: slots 0..k-1 row variables, k..2k-1 column variables
    parent = list(range(2 * k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x: int, y: int) -> int:
        rx, ry = find(x), find(y)
        if rx == ry:
            return 0
        parent[ry] = rx
        return 1

    row_merges = 0
    col_merges = 0
    for p, q in matching:
        row_merges += union(_row_var(p, k), _row_var(q, k))
        col_merges += union(k + (p >> 1), k + (q >> 1))
    return k - col_merges, k - row_merges


# --- compiled enumeration kernel -------------------------------------------
#
# Iterative backtracking over the canonical enumeration tree, restricted to
# one top-level branch (the partner chosen for position 0).  Free positions
# live in a doubly linked list; the two union-finds carry per-depth undo
# slots (at most one merge per pair per index family, union by rank, no path
# compression so undo is O(1)).  Leaves tally directly into the coefficient
# table, so aggregation never materializes matchings.


@njit(cache=True, nogil=True)
def _branch_table(k, first_choice, out):  # pragma: no cover - compiled
    two_k = 2 * k
    anchor = two_k
    nxt = np.empty(two_k + 1, np.int64)
    prv = np.empty(two_k + 1, np.int64)
    for i in range(two_k + 1):
        nxt[i] = i + 1
        prv[i] = i - 1
    nxt[anchor] = 0
    prv[0] = anchor
    nxt[two_k - 1] = anchor

    row_parent = np.arange(k)
    row_rank = np.zeros(k, np.int64)
    col_parent = np.arange(k)
    col_rank = np.zeros(k, np.int64)
    row_comps = k
    col_comps = k

    u_row_child = np.full(k, -1, np.int64)
    u_row_inc = np.zeros(k, np.int64)
    u_col_child = np.full(k, -1, np.int64)
    u_col_inc = np.zeros(k, np.int64)

    p_at = np.empty(k, np.int64)
    cand = np.empty(k, np.int64)

    # depth 0: fixed pair (0, first_choice)
    nxt[prv[0]] = nxt[0]
    prv[nxt[0]] = prv[0]
    q = first_choice
    nxt[prv[q]] = nxt[q]
    prv[nxt[q]] = prv[q]

    pa = 0
    ra = 0  # row var of position 0
    pb = q >> 1
    rb = pb if (q & 1) == 0 else (pb + 1) % k
    x = ra
    while row_parent[x] != x:
        x = row_parent[x]
    y = rb
    while row_parent[y] != y:
        y = row_parent[y]
    if x != y:
        if row_rank[x] < row_rank[y]:
            row_parent[x] = y
            u_row_child[0] = x
            u_row_inc[0] = 0
        elif row_rank[x] > row_rank[y]:
            row_parent[y] = x
            u_row_child[0] = y
            u_row_inc[0] = 0
        else:
            row_parent[y] = x
            row_rank[x] += 1
            u_row_child[0] = y
            u_row_inc[0] = 1
        row_comps -= 1
    else:
        u_row_child[0] = -1
    x = 0
    while col_parent[x] != x:
        x = col_parent[x]
    y = q >> 1
    while col_parent[y] != y:
        y = col_parent[y]
    if x != y:
        if col_rank[x] < col_rank[y]:
            col_parent[x] = y
            u_col_child[0] = x
            u_col_inc[0] = 0
        elif col_rank[x] > col_rank[y]:
            col_parent[y] = x
            u_col_child[0] = y
            u_col_inc[0] = 0
        else:
            col_parent[y] = x
            col_rank[x] += 1
            u_col_child[0] = y
            u_col_inc[0] = 1
        col_comps -= 1
    else:
        u_col_child[0] = -1

    if k == 1:
        out[k - col_comps, row_comps - 1] += 1
        return

    d = 1
    entering = True
    while d >= 1:
        if entering:
            p = nxt[anchor]
            p_at[d] = p
            nxt[prv[p]] = nxt[p]
            prv[nxt[p]] = prv[p]
            c = nxt[anchor]
        else:
            # undo the pair tried last at this depth, then advance
            ch = u_row_child[d]
            if ch >= 0:
                par = row_parent[ch]
                row_parent[ch] = ch
                if u_row_inc[d] == 1:
                    row_rank[par] -= 1
                row_comps += 1
            ch = u_col_child[d]
            if ch >= 0:
                par = col_parent[ch]
                col_parent[ch] = ch
                if u_col_inc[d] == 1:
                    col_rank[par] -= 1
                col_comps += 1
            q_old = cand[d]
            nxt[prv[q_old]] = q_old
            prv[nxt[q_old]] = q_old
            c = nxt[q_old]
            p = p_at[d]
        if c == anchor:
            p = p_at[d]
            nxt[prv[p]] = p
            prv[nxt[p]] = p
            d -= 1
            entering = False
            continue
        cand[d] = c
        nxt[prv[c]] = nxt[c]
        prv[nxt[c]] = prv[c]

        pa = p >> 1
        ra = pa if (p & 1) == 0 else (pa + 1) % k
        pb = c >> 1
        rb = pb if (c & 1) == 0 else (pb + 1) % k
        x = ra
        while row_parent[x] != x:
            x = row_parent[x]
        y = rb
        while row_parent[y] != y:
            y = row_parent[y]
        if x != y:
            if row_rank[x] < row_rank[y]:
                row_parent[x] = y
                u_row_child[d] = x
                u_row_inc[d] = 0
            elif row_rank[x] > row_rank[y]:
                row_parent[y] = x
                u_row_child[d] = y
                u_row_inc[d] = 0
            else:
                row_parent[y] = x
                row_rank[x] += 1
                u_row_child[d] = y
                u_row_inc[d] = 1
            row_comps -= 1
        else:
            u_row_child[d] = -1
        x = p >> 1
        while col_parent[x] != x:
            x = col_parent[x]
        y = c >> 1
        while col_parent[y] != y:
            y = col_parent[y]
        if x != y:
            if col_rank[x] < col_rank[y]:
                col_parent[x] = y
                u_col_child[d] = x
                u_col_inc[d] = 0
            elif col_rank[x] > col_rank[y]:
                col_parent[y] = x
                u_col_child[d] = y
                u_col_inc[d] = 0
            else:
                col_parent[y] = x
                col_rank[x] += 1
                u_col_child[d] = y
                u_col_inc[d] = 1
            col_comps -= 1
        else:
            u_col_child[d] = -1

        if d == k - 1:
            out[k - col_comps, row_comps - 1] += 1
            entering = False
        else:
            d += 1
            entering = True


@njit(cache=True)
def _table_serial(k):  # pragma: no cover - compiled
    out = np.zeros((k, k), np.int64)
    for q in range(1, 2 * k):
        _branch_table(k, q, out)
    return out


@njit(parallel=True, cache=True)
def _table_parallel(k):  # pragma: no cover - compiled
    nb = 2 * k - 1
    tables = np.zeros((nb, k, k), np.int64)
    for b in prange(nb):
        _branch_table(k, b + 1, tables[b])
    out = np.zeros((k, k), np.int64)
    for b in range(nb):
        out += tables[b]
    return out


def moment_table(
    k: int, cap: int = DEFAULT_ORDER_CAP, parallel: bool | None = None
) -> MomentTable:
    """Aggregate all (2k-1)!! matching weights into the coefficient table.

    Work is partitioned over the 2k-1 choices of partner for position 0;
    branch tables merge by integer addition, so serial and parallel runs
    produce bit-identical results.  ``parallel=None`` picks parallel for
    k >= 8.  The entry sum is checked against (2k-1)!! in exact integer
    arithmetic, which also rules out any silent accumulator overflow.
    """
    _check_order(k, cap)
    if parallel is None:
        parallel = k >= 8
    coeffs = _table_parallel(k) if parallel else _table_serial(k)
    table = MomentTable(k=k, coeffs=coeffs)
    expected = double_factorial_odd(k)
    if table.total() != expected:
        raise AssertionError(
            f"aggregation mismatch at k={k}: entry sum {table.total()} != "
            f"(2k-1)!! = {expected}"
        )
    return table


def complete_persymmetric(
    partial: Sequence[Sequence[int]], k: int
) -> MomentTable:
    """Fill the anti-diagonal reflection of a partially given table.

    ``partial`` holds one sequence per row; row r may carry either all k
    entries or only the k - r entries on and below the anti-diagonal.
    Missing entries are set from entry(k-1-c, k-1-r); entries given on both
    sides must agree, otherwise ``PersymmetryError`` is raised.
    """
    if len(partial) != k:
        raise ValueError(f"expected {k} rows, got {len(partial)}")
    known = np.zeros((k, k), dtype=bool)
    full = np.zeros((k, k), dtype=np.int64)
    for r, row in enumerate(partial):
        if len(row) not in (k, k - r):
            raise ValueError(
                f"row {r} must have {k} or {k - r} entries, got {len(row)}"
            )
        for c, v in enumerate(row):
            full[r, c] = int(v)
            known[r, c] = True
    for r in range(k):
        for c in range(k):
            rr, cc = k - 1 - c, k - 1 - r
            if known[r, c] and known[rr, cc]:
                if full[r, c] != full[rr, cc]:
                    raise PersymmetryError(
                        f"entry ({r},{c})={full[r, c]} conflicts with its "
                        f"reflection ({rr},{cc})={full[rr, cc]}"
                    )
            elif known[r, c]:
                full[rr, cc] = full[r, c]
                known[rr, cc] = True
    if not known.all():
        missing = np.argwhere(~known)[0]
        raise ValueError(f"entry ({missing[0]},{missing[1]}) is not determined")
    return MomentTable(k=k, coeffs=full)


def reference_table(k: int) -> MomentTable:
    """Load the shipped ground-truth table for k in 1..10.

    Orders 9 and 10 are stored as the printed lower anti-triangular halves
    and completed by persymmetric reflection on load.
    """
    if k not in SHIPPED_ORDERS:
        raise OrderCapError(f"no shipped table for k={k}; available: 1..10")
    path = resources.files("wishartvar.data").joinpath(f"moments_k{k:02d}.json")
    doc = json.loads(path.read_text())
    if "coeffs" in doc:
        return MomentTable.from_json_dict(doc)
    return complete_persymmetric(doc["partial_rows"], int(doc["k"]))
