"""Three independent classical routes to (persistent) Betti numbers.

* column reduction of the whole filtration over GF(2), read out from pairs
* the rank formula dim Ker d_k^i - dim(Ker d_k^i ∩ Im d_{k+1}^j)
* the kernel dimension of the persistent Laplacian, exact or by a
  deflated power method
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .boundary_lab import (
    LaplacianBundle, boundary_dense, combinatorial_laplacian, persistent_laplacian,
    persistent_laplacian_dense,
)
from .complex_core import (
    CliqueComplex, DistanceMatrix, FiltrationSchedule, Simplex, complex_at, filtration_order,
)
from .exact import Q, Field, integer_nullspace, low_column_reduce, rank

INF = math.inf


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: int
    death: float  # scale index, or inf for essential classes
    creator: Simplex
    destroyer: Simplex | None


@dataclass
class PersistencePairing:
    pairs: list[PersistencePair]
    n_scales: int
    k_max: int
    scales: list[float] = field(default_factory=list)

    def betti(self, i: int, j: int, k: int) -> int:
        return sum(1 for p in self.pairs if p.dim == k and p.birth <= i and p.death > j)

    def to_csv(self) -> str:
        lines = ["k,birth_scale,death_scale"]
        rows = sorted(self.pairs, key=lambda p: (p.dim, p.birth, p.death, p.creator))
        for p in rows:
            if p.death != INF and p.death == p.birth:
                continue
            b = repr(self.scales[p.birth]) if self.scales else str(p.birth)
            if p.death == INF:
                d = "inf"
            else:
                d = repr(self.scales[int(p.death)]) if self.scales else str(int(p.death))
            lines.append(f"{p.dim},{b},{d}")
        return "\n".join(lines) + "\n"


@dataclass
class BettiTable:
    entries: dict[tuple[int, int, int], int] = field(default_factory=dict)

    def to_json(self, extra: dict | None = None) -> str:
        doc = {"entries": [{"i": i, "j": j, "k": k, "beta": b}
                           for (i, j, k), b in sorted(self.entries.items())]}
        if extra:
            doc.update(extra)
        return json.dumps(doc, sort_keys=True, indent=1)


def persistence_column_reduction(schedule: FiltrationSchedule, dm: DistanceMatrix,
                                 k_max: int) -> PersistencePairing:
    """Standard left-to-right reduction of the filtration boundary over GF(2).

    Columns are Python ints used as bitsets over the filtration order.
    """
    order = filtration_order(dm, schedule, k_max)
    pos = {s: t for t, (_, _, s) in enumerate(order)}
    low_owner: dict[int, int] = {}
    paired: set[int] = set()
    pairs: list[PersistencePair] = []
    for t, (lvl, dim, s) in enumerate(order):
        col = 0
        if dim > 0:
            for l in range(len(s)):
                col |= 1 << pos[s[:l] + s[l + 1:]]
        while col:
            low = col.bit_length() - 1
            owner = low_owner.get(low)
            if owner is None:
                low_owner[low] = col
                lo_lvl, lo_dim, lo_s = order[low]
                pairs.append(PersistencePair(lo_dim, lo_lvl, lvl, lo_s, s))
                paired.add(low)
                paired.add(t)
                break
            col ^= owner
    for t, (lvl, dim, s) in enumerate(order):
        if t not in paired and dim <= k_max:
            pairs.append(PersistencePair(dim, lvl, INF, s, None))
    pairs = [p for p in pairs if p.dim <= k_max]
    return PersistencePairing(pairs, len(schedule), k_max, schedule.scales)


def betti_rank_formula(cx: CliqueComplex, k: int, field: Field = Q) -> int:
    dk = boundary_dense(cx, k)
    dk1 = boundary_dense(cx, k + 1)
    return (cx.count(k) - rank(dk, field)) - rank(dk1, field)


def _kernel_basis(m: np.ndarray, field: Field) -> np.ndarray:
    if field.kind == "Q":
        return integer_nullspace(m)
    red = low_column_reduce(m, field)
    return red.y[:, red.zero_columns]


def _embed_rows(v: np.ndarray, cx_i: CliqueComplex, cx_j: CliqueComplex, k: int) -> np.ndarray:
    out = np.zeros((cx_j.count(k), v.shape[1]), dtype=v.dtype)
    idx = [cx_j.index_of(s) for s in cx_i.simplices(k)]
    out[idx] = v
    return out


def persistent_betti_rank_formula(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int,
                                  field: Field = Q) -> int:
    """dim Ker - dim(Ker ∩ Im) with the intersection from a concatenated rank."""
    if not cx_i.is_subcomplex_of(cx_j):
        raise ValueError("complexes are not nested")
    ker = _kernel_basis(boundary_dense(cx_i, k), field)
    dim_ker = ker.shape[1]
    im = boundary_dense(cx_j, k + 1)
    dim_im = rank(im, field)
    joined = np.concatenate([_embed_rows(ker, cx_i, cx_j, k).astype(object),
                             im.astype(object)], axis=1) if ker.dtype == object else \
        np.concatenate([_embed_rows(ker, cx_i, cx_j, k), im], axis=1)
    inter = dim_ker + dim_im - rank(joined, field)
    return dim_ker - inter


class PowerMethodError(RuntimeError):
    """Deflated power iteration failed to converge; carries the partial count."""

    def __init__(self, msg: str, partial: int, matvecs: int):
        super().__init__(msg)
        self.partial = partial
        self.matvecs = matvecs


@dataclass(frozen=True)
class PowerMethodResult:
    kernel_dim: int
    matvecs: int
    shift: float
    tol: float


def smallest_nonzero_eigenvalue(delta: np.ndarray, rel: float = 1e-9) -> float | None:
    w = np.linalg.eigvalsh(np.asarray(delta, dtype=float))
    if w.size == 0:
        return None
    cut = rel * max(1.0, float(np.abs(w).max()))
    nz = w[w > cut]
    return float(nz.min()) if nz.size else None


def betti_power_method(lap: LaplacianBundle | np.ndarray, tol: float | None = None,
                       max_iter: int | None = None, seed: int = 0,
                       rel_change: float = 1e-10) -> PowerMethodResult:
    """Kernel dimension of a PSD matrix by deflated power iteration.

    Iterates on ``c I - delta`` with ``c`` the Gershgorin bound on the top
    eigenvalue, so kernel vectors are the dominant ones. Eigenvectors whose
    Rayleigh quotient lies within ``tol`` of ``c`` are counted and deflated.
    ``tol`` defaults to half the exact smallest nonzero eigenvalue, and the
    iteration cap grows with ``c / tol``.
    """
    delta = np.asarray(lap.delta if isinstance(lap, LaplacianBundle) else lap, dtype=float)
    n = delta.shape[0]
    if n == 0:
        return PowerMethodResult(0, 0, 0.0, 0.0)
    if tol is None:
        gap = smallest_nonzero_eigenvalue(delta)
        tol = gap / 2 if gap is not None else 0.5
    c = float(np.abs(delta).sum(axis=1).max())
    if c == 0.0:
        return PowerMethodResult(n, 0, 0.0, tol)
    # a kernel component (eigenvalue c, all others <= c - 2 tol) outgrows the rest by 100n after t_min steps
    t_min = math.ceil(c / (2 * tol) * math.log(100 * n))
    max_iter = max_iter or 10 * n + t_min + math.ceil(c / tol * math.log(1 / rel_change))
    m = c * np.eye(n) - delta
    rng = np.random.default_rng(seed)
    found: list[np.ndarray] = []
    matvecs = 0

    def deflate(v):
        for u in found:
            v = v - (u @ v) * u
        return v

    while len(found) < n:
        v = deflate(rng.standard_normal(n))
        v /= np.linalg.norm(v)
        rho = None
        for t in range(max_iter):
            w = deflate(m @ v)
            matvecs += 1
            rho_new = float(v @ w)
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                break
            # near-degenerate non-kernel eigenvalues stall the quotient, but the verdict is already clear
            settled_out = t >= t_min and rho_new < c - tol and np.linalg.norm(w - rho_new * v) <= tol / 4
            if settled_out or (rho is not None and abs(rho_new - rho) <= rel_change * max(abs(rho_new), 1e-300)):
                break
            rho = rho_new
            v = w / nrm
        else:
            raise PowerMethodError(f"no convergence after {max_iter} iterations",
                                   len(found), matvecs)
        if rho_new >= c - tol:
            found.append(v)
        else:
            break
    return PowerMethodResult(len(found), matvecs, c, tol)


def persistent_betti_via_laplacian(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int,
                                   method: str = "exact", tol: float = 1e-9) -> int:
    lap = persistent_laplacian(cx_i, cx_j, k)
    if method == "exact":
        return lap.kernel_dim()
    if method == "spectral":
        return lap.kernel_dim(exact=False, tol=tol)
    if method == "power":
        return betti_power_method(lap).kernel_dim
    raise ValueError(f"unknown method {method!r}")


def betti_via_laplacian(cx: CliqueComplex, k: int) -> int:
    return combinatorial_laplacian(cx, k).kernel_dim()


def euler_characteristic(cx: CliqueComplex, k_top: int) -> int:
    return sum((-1) ** k * cx.count(k) for k in range(k_top + 1))


class FiltrationOracle:
    """Cached access to complexes and all three engines over one filtration."""

    def __init__(self, dm: DistanceMatrix, schedule: FiltrationSchedule, k_max: int):
        self.dm = dm
        self.schedule = schedule
        self.k_max = k_max
        self._cx: dict[int, CliqueComplex] = {}
        self._bd: dict[tuple[int, int], np.ndarray] = {}
        self._rank: dict[tuple[int, int], int] = {}
        self._ker: dict[tuple[int, int], np.ndarray] = {}

    def complex(self, i: int) -> CliqueComplex:
        if i not in self._cx:
            self._cx[i] = complex_at(self.dm, self.schedule, i, self.k_max)
        return self._cx[i]

    def boundary(self, i: int, k: int) -> np.ndarray:
        key = (i, k)
        if key not in self._bd:
            self._bd[key] = boundary_dense(self.complex(i), k)
        return self._bd[key]

    def mask(self, i: int, j: int, k: int) -> np.ndarray:
        """Rows of S_k^j that are present at scale i."""
        cx_i = self.complex(i)
        return np.array([s in cx_i for s in self.complex(j).simplices(k)], dtype=bool)

    @cached_property
    def pairing(self) -> PersistencePairing:
        return persistence_column_reduction(self.schedule, self.dm, self.k_max)

    def betti_colred(self, i: int, j: int, k: int) -> int:
        return self.pairing.betti(i, j, k)

    def _boundary_rank(self, i: int, k: int) -> int:
        key = (i, k)
        if key not in self._rank:
            self._rank[key] = rank(self.boundary(i, k), Q)
        return self._rank[key]

    def _kernel(self, i: int, k: int) -> np.ndarray:
        key = (i, k)
        if key not in self._ker:
            self._ker[key] = integer_nullspace(self.boundary(i, k))
        return self._ker[key]

    def betti_rank(self, i: int, j: int, k: int) -> int:
        cx_i, cx_j = self.complex(i), self.complex(j)
        ker = self._kernel(i, k)
        dim_ker = ker.shape[1]
        if dim_ker == 0:
            return 0
        dim_im = self._boundary_rank(j, k + 1)
        if dim_im == 0:
            return dim_ker
        im = self.boundary(j, k + 1)
        emb = _embed_rows(ker, cx_i, cx_j, k)
        if emb.dtype == object:
            im = im.astype(object)
        joined = np.concatenate([emb, im], axis=1)
        inter = dim_ker + dim_im - rank(joined, Q)
        return dim_ker - inter

    def betti_laplacian(self, i: int, j: int, k: int) -> int:
        if self.complex(i).count(k) == 0:
            return 0
        delta = persistent_laplacian_dense(self.boundary(j, k + 1), self.mask(i, j, k),
                                           self.boundary(i, k))
        return delta.shape[0] - rank(delta, Q)


@dataclass(frozen=True)
class AgreementRow:
    i: int
    j: int
    k: int
    colred: int
    rank_formula: int
    laplacian: int

    @property
    def torsion(self) -> bool:
        return self.colred != self.rank_formula

    @property
    def agree(self) -> bool:
        return self.colred == self.rank_formula == self.laplacian


def scale_pairs(n_scales: int, skips: int = 0, rng: np.random.Generator | None = None):
    """Consecutive pairs (i, i+1) plus ``skips`` random pairs with j > i+1."""
    out = [(i, i + 1) for i in range(n_scales - 1)]
    far = [(i, j) for i in range(n_scales) for j in range(i + 2, n_scales)]
    if skips and far:
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(far), size=min(skips, len(far)), replace=False)
        out.extend(far[t] for t in sorted(pick))
    return out


def agreement_report(oracle: FiltrationOracle, pairs, ks) -> list[AgreementRow]:
    rows = []
    for i, j in pairs:
        for k in ks:
            rows.append(AgreementRow(i, j, k, oracle.betti_colred(i, j, k),
                                     oracle.betti_rank(i, j, k), oracle.betti_laplacian(i, j, k)))
    return rows


def betti_table(oracle: FiltrationOracle, pairs, ks) -> BettiTable:
    return BettiTable({(i, j, k): oracle.betti_colred(i, j, k) for i, j in pairs for k in ks})
