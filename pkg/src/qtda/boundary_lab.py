"""Boundary matrices, combinatorial Laplacians and the persistent Laplacian.

The persistent construction follows the change-of-basis route: the
(k+1)-chains at scale j whose boundary lies in the k-chains of scale i are
found by column-reducing the part of the boundary that leaves scale i.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from .complex_core import CliqueComplex, Simplex
from .exact import Q, Field, low_column_reduce, parse_field, sparse_rank_q


class NestingError(ValueError):
    pass


@dataclass(frozen=True)
class SparseSignedMatrix:
    rows: tuple
    cols: tuple
    entries: tuple[tuple[int, int, object], ...]
    field: Field = Q

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)

    def to_dense(self, dtype=None) -> np.ndarray:
        if dtype is None:
            dtype = float if self.field.kind == "R" else np.int64
        out = np.zeros(self.shape, dtype=dtype)
        for r, c, v in self.entries:
            out[r, c] = v
        return out

    @classmethod
    def from_dense(cls, a, rows, cols, field: Field = Q) -> SparseSignedMatrix:
        a = np.asarray(a)
        mod = field.modulus if field.kind in {"GF2", "GFP"} else 0
        entries = []
        for r, c in zip(*np.nonzero(a)):
            v = a[r, c]
            if mod:
                v = int(v) % mod
                if v == 0:
                    continue
            elif field.kind == "R":
                v = float(v)
            else:
                v = int(v) if not isinstance(v, Fraction) else v
            entries.append((int(r), int(c), v))
        return cls(tuple(rows), tuple(cols), tuple(entries), field)

    def rank(self) -> int:
        from .exact import rank
        return rank(self.to_dense(), self.field)

    def to_json(self, names=None) -> str:
        fmt = names or (lambda lab: lab if isinstance(lab, str) else "".join(str(v + 1) + "," for v in lab).rstrip(","))

        def val(v):
            f = Fraction(v) if not isinstance(v, float) else Fraction(v).limit_denominator(10**12)
            return f"{f.numerator}/{f.denominator}"

        doc = {
            "rows": [fmt(r) for r in self.rows],
            "cols": [fmt(c) for c in self.cols],
            "field": self.field.tag,
            "entries": [[r, c, val(v)] for r, c, v in sorted(self.entries, key=lambda e: (e[0], e[1]))],
        }
        return json.dumps(doc, sort_keys=True)


@dataclass(frozen=True)
class LaplacianBundle:
    delta: np.ndarray
    provenance: tuple  # (i, j or None, k)
    basis: tuple[Simplex, ...]

    def kernel_dim(self, exact: bool = True, tol: float = 1e-9) -> int:
        n = self.delta.shape[0]
        if n == 0:
            return 0
        if exact and self.delta.dtype != float:
            return n - sparse_rank_q(self.delta)
        w = np.linalg.eigvalsh(np.asarray(self.delta, dtype=float))
        scale = max(1.0, float(np.abs(w).max()))
        return int(np.sum(np.abs(w) <= tol * scale))


@dataclass(frozen=True)
class RestrictedBoundary:
    matrix: np.ndarray              # rows S_k^i, cols the selected chains
    change_of_basis: np.ndarray     # Y, square over S_{k+1}^j
    kernel_column_indices: tuple[int, ...]
    rows: tuple[Simplex, ...]
    cols_simplices: tuple[Simplex, ...]

    def chains(self) -> np.ndarray:
        """Selected chains expressed in the S_{k+1}^j basis (one per column)."""
        return self.change_of_basis[:, list(self.kernel_column_indices)]

    @property
    def rank(self) -> int:
        return sparse_rank_q(self.matrix)


def _facet_sign_pairs(s: Simplex):
    for l in range(len(s)):
        yield s[:l] + s[l + 1:], (-1) ** l


def boundary_dense(cx: CliqueComplex, k: int) -> np.ndarray:
    """Integer matrix of the k-th boundary map, rows S_{k-1}, cols S_k."""
    if k < 0:
        raise ValueError("boundary index must be non-negative")
    cols = cx.simplices(k)
    if k == 0:
        return np.zeros((0, len(cols)), dtype=np.int64)
    rows = cx.simplices(k - 1)
    out = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for c, s in enumerate(cols):
        for f, sign in _facet_sign_pairs(s):
            out[cx.index_of(f), c] = sign
    return out


def boundary_matrix(cx: CliqueComplex, k: int, field: Field | str = Q) -> SparseSignedMatrix:
    field = parse_field(field)
    if k < 0:
        raise ValueError("boundary index must be non-negative")
    if k > cx.k_max + 1:
        raise ValueError(f"complex only materialized to dimension {cx.k_max + 1}")
    dense = boundary_dense(cx, k)
    rows = cx.simplices(k - 1) if k > 0 else ()
    return SparseSignedMatrix.from_dense(dense, rows, cx.simplices(k), field)


def combinatorial_laplacian(cx: CliqueComplex, k: int) -> LaplacianBundle:
    """Integer Laplacian ``d_{k+1} d_{k+1}^T + d_k^T d_k`` on S_k."""
    up = boundary_dense(cx, k + 1)
    down = boundary_dense(cx, k)
    delta = up @ up.T + down.T @ down
    return LaplacianBundle(delta, (cx.scale_index, None, k), cx.simplices(k))


def _check_nested(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int):
    same_cloud = cx_i.dm is cx_j.dm or cx_i.dm.sq_raw == cx_j.dm.sq_raw
    if not same_cloud or cx_i.sq_threshold > cx_j.sq_threshold:
        raise NestingError("complexes are not nested")
    if k + 1 > min(cx_i.k_max, cx_j.k_max) + 1:
        raise ValueError("complexes not materialized to dimension k+1")


def _restrict_dense(dj: np.ndarray, in_i: np.ndarray, field: Field = Q):
    """Column-reduce the rows of ``dj`` outside scale i; return (Y, kept, restricted)."""
    outside = dj[~in_i]                        # (I - P_k^i) d_{k+1}^j, nonzero rows only
    red = low_column_reduce(outside, field)
    keep = tuple(red.zero_columns)
    chains = red.y[:, list(keep)]
    if chains.size:
        full = dj.astype(chains.dtype) @ chains
    else:
        full = np.zeros((dj.shape[0], 0), dtype=np.int64)
    restricted = full[in_i]
    if field.kind in {"GF2", "GFP"}:
        restricted = np.mod(restricted, field.modulus)
    return red.y, keep, restricted


def _membership_mask(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int) -> np.ndarray:
    return np.array([s in cx_i for s in cx_j.simplices(k)], dtype=bool)


def restricted_boundary(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int,
                        field: Field = Q) -> RestrictedBoundary:
    _check_nested(cx_i, cx_j, k)
    dj = boundary_dense(cx_j, k + 1)          # rows S_k^j, cols S_{k+1}^j
    in_i = _membership_mask(cx_i, cx_j, k)
    y, keep, restricted = _restrict_dense(dj, in_i, field)
    return RestrictedBoundary(restricted, y, keep, cx_i.simplices(k), cx_j.simplices(k + 1))


def persistent_laplacian_dense(dj: np.ndarray, in_i: np.ndarray, di: np.ndarray) -> np.ndarray:
    """Persistent Laplacian from d_{k+1}^j, the S_k^i row mask and d_k^i."""
    _, _, b = _restrict_dense(dj, in_i)
    up = b @ b.T if b.shape[1] else np.zeros((b.shape[0], b.shape[0]), dtype=np.int64)
    return up + (di.T @ di).astype(up.dtype)


def naive_restricted_boundary(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int,
                              field: Field = Q) -> SparseSignedMatrix:
    """Projection of d_{k+1}^j onto the S_k^i rows, every column kept.

    This drops the boundary components outside scale i instead of changing
    basis, so its rank overcounts the filled-in cycles.
    """
    _check_nested(cx_i, cx_j, k)
    dj = boundary_dense(cx_j, k + 1)
    in_i = _membership_mask(cx_i, cx_j, k)
    return SparseSignedMatrix.from_dense(dj[in_i], cx_i.simplices(k), cx_j.simplices(k + 1), field)


def persistent_laplacian(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int) -> LaplacianBundle:
    """Integer persistent Laplacian on S_k^i from the restricted boundary."""
    _check_nested(cx_i, cx_j, k)
    delta = persistent_laplacian_dense(boundary_dense(cx_j, k + 1), _membership_mask(cx_i, cx_j, k),
                                       boundary_dense(cx_i, k))
    return LaplacianBundle(delta, (cx_i.scale_index, cx_j.scale_index, k), cx_i.simplices(k))


def persistent_laplacian_schur(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int) -> LaplacianBundle:
    """Float persistent Laplacian via a Schur complement of d d^T at scale j.

    The up part is ``L_ii - L_iI pinv(L_II) L_Ii`` where ``I`` indexes the
    k-simplices present at j but not at i.
    """
    _check_nested(cx_i, cx_j, k)
    dj = boundary_dense(cx_j, k + 1).astype(float)
    in_i = _membership_mask(cx_i, cx_j, k)
    lap = dj @ dj.T
    a = lap[np.ix_(in_i, in_i)]
    if (~in_i).any():
        b = lap[np.ix_(in_i, ~in_i)]
        c = lap[np.ix_(~in_i, ~in_i)]
        a = a - b @ scipy.linalg.pinv(c, atol=1e-10) @ b.T
    down = boundary_dense(cx_i, k).astype(float)
    delta = a + down.T @ down
    delta = (delta + delta.T) / 2
    return LaplacianBundle(delta, (cx_i.scale_index, cx_j.scale_index, k), cx_i.simplices(k))


def persistent_kernel_dims(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int,
                           tol: float = 1e-8) -> tuple[int, int]:
    """Kernel dimensions from both constructions; raises if they disagree."""
    exact = persistent_laplacian(cx_i, cx_j, k).kernel_dim()
    schur = persistent_laplacian_schur(cx_i, cx_j, k).kernel_dim(exact=False, tol=tol)
    if exact != schur:
        raise ArithmeticError(f"persistent Laplacian routes disagree: {exact} vs {schur}")
    return exact, schur


def chain_vector(cx: CliqueComplex, terms: dict[Simplex, float], k: int) -> np.ndarray:
    """Dense coefficient vector over S_k for a chain given as {simplex: coeff}."""
    v = np.zeros(cx.count(k))
    for s, c in terms.items():
        v[cx.index_of(tuple(s))] += c
    return v


__all__ = [
    "SparseSignedMatrix", "LaplacianBundle", "RestrictedBoundary", "NestingError",
    "boundary_matrix", "boundary_dense", "combinatorial_laplacian", "restricted_boundary",
    "naive_restricted_boundary", "persistent_laplacian", "persistent_laplacian_schur",
    "persistent_kernel_dims", "chain_vector",
]
