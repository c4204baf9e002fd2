"""Exact linear algebra over Q, GF(p) and GF(2) on dense integer arrays.

Rational arithmetic is fraction-free: Bareiss elimination keeps every
intermediate an integer minor. Arrays start as int64 and are promoted to
Python-int object arrays when magnitudes approach the int64 range, so no
result ever depends on wrapped arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

_SAFE = 1 << 30  # products of two such values plus a sum stay inside int64


@dataclass(frozen=True)
class Field:
    kind: str  # "Q", "GF2", "GFP", "R"
    p: int = 0

    def __post_init__(self):
        if self.kind not in {"Q", "GF2", "GFP", "R"}:
            raise ValueError(f"unknown field {self.kind!r}")
        if self.kind == "GFP" and (self.p < 2 or any(self.p % q == 0 for q in range(2, math.isqrt(self.p) + 1))):
            raise ValueError(f"GF(p) needs a prime, got {self.p}")

    @property
    def tag(self) -> str:
        if self.kind == "GFP":
            return f"GF{self.p}"
        return self.kind

    @property
    def modulus(self) -> int:
        return 2 if self.kind == "GF2" else self.p

    @property
    def exact(self) -> bool:
        return self.kind != "R"


Q = Field("Q")
GF2 = Field("GF2")
R = Field("R")


def GFP(p: int) -> Field:
    return GF2 if p == 2 else Field("GFP", p)


def parse_field(name) -> Field:
    if isinstance(name, Field):
        return name
    s = str(name).strip().upper()
    if s in {"Q", "RATIONAL"}:
        return Q
    if s in {"R", "REAL"}:
        return R
    if s.startswith("GF"):
        return GFP(int(s[2:] or 2))
    raise ValueError(f"unknown field {name!r}")


def _promote(a: np.ndarray) -> np.ndarray:
    if a.dtype != object and a.size and np.abs(a).max() >= _SAFE:
        return a.astype(object)
    return a


def _as_int(m) -> np.ndarray:
    a = np.asarray(m)
    if a.dtype == object:
        return a.copy()
    if a.dtype.kind == "f":
        if not np.all(a == np.round(a)):
            raise ValueError("exact routines need integer matrices")
    return _promote(a.astype(np.int64))


def bareiss_rank(m) -> int:
    a = _as_int(m)
    if a.ndim != 2 or 0 in a.shape:
        return 0
    rows, cols = a.shape
    r, prev = 0, 1
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        a = _promote(a)
        piv = a[r, c]
        below = a[r + 1:, c]
        if r + 1 < rows:
            a[r + 1:, c + 1:] = (piv * a[r + 1:, c + 1:] - np.outer(below, a[r, c + 1:])) // prev
            a[r + 1:, c] = 0
        prev = piv
        r += 1
    return r


def sparse_rank_q(m) -> int:
    """Exact rank over Q by fraction-free row elimination touching only rows
    with a nonzero in the pivot column; each updated row is divided by its
    content so entries stay small. Falls back to Bareiss on large entries.
    """
    a = np.asarray(m)
    if a.ndim != 2 or 0 in a.shape:
        return 0
    if a.dtype == object:
        return bareiss_rank(a)
    a = a.astype(np.int64, copy=True)
    a = a[np.any(a != 0, axis=1)]
    a = a[:, np.any(a != 0, axis=0)]
    if a.shape[1] > a.shape[0]:
        a = np.ascontiguousarray(a.T)  # loop over the shorter side
    rows, cols = a.shape
    if rows == 0:
        return 0
    active = np.ones(rows, dtype=bool)
    r = 0
    for c in range(cols):
        if r == rows:
            break
        cand = np.flatnonzero(active & (a[:, c] != 0))
        if cand.size == 0:
            continue
        mags = np.abs(a[cand, c])
        p = cand[np.argmin(mags)]
        active[p] = False
        r += 1
        others = cand[cand != p]
        if others.size == 0:
            continue
        piv = a[p, c]
        f = a[others, c]
        g = np.gcd(f, piv)
        sub = (piv // g)[:, None] * a[others, c:] - (f // g)[:, None] * a[p, c:]
        cont = np.gcd.reduce(sub, axis=1)
        cont[cont == 0] = 1
        sub //= cont[:, None]
        if np.abs(sub).max(initial=0) >= _SAFE:
            # active rows vanish on columns <= c, so the rest is independent
            big = a.astype(object)
            big[others, c:] = sub.astype(object)
            return r + bareiss_rank(big[active][:, c + 1:])
        a[others, c:] = sub
    return r


def bareiss_rref(m) -> tuple[np.ndarray, list[int], int]:
    """Fraction-free Gauss-Jordan form.

    Returns (A, pivot_columns, d) where every pivot entry of A equals d and
    the reduced matrix represents RREF(m) scaled by d.
    """
    a = _as_int(m)
    rows, cols = a.shape
    pivots: list[int] = []
    r, prev = 0, 1
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        p = r + nz[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        a = _promote(a)
        piv = a[r, c]
        col = a[:, c].copy()
        others = np.ones(rows, dtype=bool)
        others[r] = False
        a[others] = (piv * a[others] - np.outer(col[others], a[r])) // prev
        prev = piv
        pivots.append(c)
        r += 1
    # rows above the last pivot were scaled at each later step; rows below r are zero
    d = prev if pivots else 1
    return a, pivots, d


def _gcd_normalize(v: np.ndarray) -> np.ndarray:
    vals = [int(x) for x in v if x != 0]
    if not vals:
        return v
    g = reduce(math.gcd, vals)
    if vals[0] < 0:
        g = -g
    return v // g


def integer_nullspace(m) -> np.ndarray:
    """Columns spanning ker(m) over Q, each with coprime integer entries."""
    a = np.asarray(m)
    cols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    red, pivots, d = bareiss_rref(a)
    free = [c for c in range(cols) if c not in set(pivots)]
    dtype = object if red.dtype == object else np.int64
    out = np.zeros((cols, len(free)), dtype=dtype)
    for t, f in enumerate(free):
        v = np.zeros(cols, dtype=dtype)
        v[f] = d
        for r, pc in enumerate(pivots):
            v[pc] = -red[r, f]
        out[:, t] = _gcd_normalize(v)
    return _promote(out) if dtype != object else out


def rank_mod_p(m, p: int) -> int:
    a = np.asarray(m)
    if a.ndim != 2 or 0 in a.shape:
        return 0
    a = np.mod(a.astype(object) if a.dtype == object else a.astype(np.int64), p).astype(np.int64)
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(a[r:, c])
        if nz.size == 0:
            continue
        piv_row = r + nz[0]
        if piv_row != r:
            a[[r, piv_row]] = a[[piv_row, r]]
        inv = pow(int(a[r, c]), -1, p)
        a[r] = (a[r] * inv) % p
        f = a[r + 1:, c].copy()
        if f.any():
            a[r + 1:] = (a[r + 1:] - np.outer(f, a[r])) % p
        r += 1
    return r


def rank_gf2(m) -> int:
    """Rank over GF(2) using Python ints as row bitsets."""
    a = np.asarray(m)
    if a.ndim != 2 or 0 in a.shape:
        return 0
    bits = np.mod(a.astype(np.int64) if a.dtype != object else a, 2)
    basis: dict[int, int] = {}
    for row in bits:
        v = int("".join("1" if x else "0" for x in row), 2)
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return len(basis)


def rank(m, field: Field = Q, tol: float | None = None) -> int:
    if field.kind == "Q":
        return sparse_rank_q(m)
    if field.kind == "GF2":
        return rank_gf2(m)
    if field.kind == "GFP":
        return rank_mod_p(m, field.p)
    a = np.asarray(m, dtype=float)
    if 0 in a.shape:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    cut = (tol if tol is not None else 1e-9) * (s[0] if s.size else 0.0)
    return int(np.sum(s > cut)) if s.size and s[0] > 0 else 0


@dataclass
class ColumnReduction:
    reduced: np.ndarray  # M @ Y
    y: np.ndarray        # invertible column-operation matrix
    zero_columns: list[int]
    pivot_of_low: dict[int, int]


def low_column_reduce(m, field: Field = Q) -> ColumnReduction:
    """Left-to-right reduction on the lowest nonzero row of each column.

    Column j is combined with the earlier column owning the same lowest row
    until its lowest row is new or the column vanishes. Y records the
    operations so that ``reduced == m @ y`` holds exactly in the field.
    """
    a = np.asarray(m)
    rows, cols = a.shape
    mod = field.modulus if field.kind in {"GF2", "GFP"} else 0
    if field.kind == "R":
        raise ValueError("column reduction is exact-only")
    red = _as_int(a)
    y = np.eye(cols, dtype=np.int64)
    if mod:
        red = np.mod(red, mod).astype(np.int64)
    pivot_of_low: dict[int, int] = {}
    zero_cols: list[int] = []
    for j in range(cols):
        while True:
            nz = np.flatnonzero(red[:, j])
            if nz.size == 0:
                zero_cols.append(j)
                break
            low = nz[-1]
            l = pivot_of_low.get(low)
            if l is None:
                pivot_of_low[low] = j
                break
            a_l, b_j = int(red[low, l]), int(red[low, j])
            if mod:
                f = (b_j * pow(a_l, -1, mod)) % mod
                red[:, j] = (red[:, j] - f * red[:, l]) % mod
                y[:, j] = (y[:, j] - f * y[:, l]) % mod
            else:
                g = math.gcd(a_l, b_j)
                s, t = a_l // g, b_j // g
                if s < 0:
                    s, t = -s, -t
                red, y = _promote(red), _promote(y)
                red[:, j] = s * red[:, j] - t * red[:, l]
                y[:, j] = s * y[:, j] - t * y[:, l]
                both = np.concatenate([red[:, j], y[:, j]])
                vals = [int(x) for x in both if x != 0]
                g2 = reduce(math.gcd, vals) if vals else 1
                if g2 > 1:
                    red[:, j] //= g2
                    y[:, j] //= g2
    return ColumnReduction(red, y, zero_cols, pivot_of_low)
