"""Spectral gap parameters, gap-scaling sweeps and the adiabatic counterexample."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .boundary_lab import boundary_dense, chain_vector, combinatorial_laplacian, persistent_laplacian
from .classical_engines import persistent_betti_rank_formula
from .complex_core import (
    CliqueComplex, PointCloud, build_clique_complex, distance_matrix_from_graph, filtration_scales,
    pairwise_distances,
)

ZERO_TOL = 1e-9  # relative split between zero and nonzero singular values

# Square of side 2 with an apex X above AB at distance 2.42 from A and B.
ZENO_APEX_DIST = 2.42
ZENO_POINTS = {
    "A": (0.0, 0.0),
    "B": (2.0, 0.0),
    "C": (2.0, -2.0),
    "D": (0.0, -2.0),
    "X": (1.0, math.sqrt(ZENO_APEX_DIST ** 2 - 1.0)),
}


@dataclass(frozen=True)
class GapReport:
    lambda_dk_i: float | None = None
    lambda_dk1_j: float | None = None
    lambda_pipi: float | None = None
    lambda_laplacian: float | None = None

    def min_boundary_gap(self) -> float | None:
        vals = [v for v in (self.lambda_dk_i, self.lambda_dk1_j) if v is not None]
        return min(vals) if vals else None

    def to_dict(self) -> dict:
        return asdict(self)


def nonzero_singular_values(m: np.ndarray, rel: float = ZERO_TOL) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.size == 0:
        return np.zeros(0)
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0:
        return np.zeros(0)
    return s[s > rel * s[0]]


def smallest_nonzero_singular(m: np.ndarray, rel: float = ZERO_TOL) -> float | None:
    s = nonzero_singular_values(m, rel)
    return float(s.min()) if s.size else None


def kernel_basis(m: np.ndarray, rel: float = ZERO_TOL) -> np.ndarray:
    """Orthonormal columns spanning the null space of ``m``."""
    a = np.asarray(m, dtype=float)
    if a.shape[0] == 0 or not a.any():
        return np.eye(a.shape[1])
    return scipy.linalg.null_space(a, rcond=rel)


def image_basis(m: np.ndarray, rel: float = ZERO_TOL) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.shape[1] == 0 or not a.any():
        return np.zeros((a.shape[0], 0))
    return scipy.linalg.orth(a, rcond=rel)


def embedding_indices(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int) -> np.ndarray:
    """Positions of the S_k^i simplices inside the S_k^j ordering."""
    return np.array([cx_j.index_of(s) for s in cx_i.simplices(k)], dtype=int)


def embed(v: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n,) + v.shape[1:])
    out[idx] = v
    return out


def boundary_gaps(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, rel: float = ZERO_TOL) -> GapReport:
    if not cx_i.is_subcomplex_of(cx_j):
        raise ValueError("complexes are not nested")
    return GapReport(
        lambda_dk_i=smallest_nonzero_singular(boundary_dense(cx_i, k), rel),
        lambda_dk1_j=smallest_nonzero_singular(boundary_dense(cx_j, k + 1), rel),
    )


def ker_im_bases(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, rel: float = ZERO_TOL):
    """Orthonormal bases of Ker d_k^i (embedded into S_k^j) and Im d_{k+1}^j."""
    idx = embedding_indices(cx_i, cx_j, k)
    ker = embed(kernel_basis(boundary_dense(cx_i, k), rel), idx, cx_j.count(k))
    im = image_basis(boundary_dense(cx_j, k + 1), rel)
    return ker, im


def ker_im_product_singular_values(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int,
                                   rel: float = ZERO_TOL) -> np.ndarray:
    ker, im = ker_im_bases(cx_i, cx_j, k, rel)
    prod = (ker @ ker.T) @ (im @ im.T)
    if prod.size == 0:
        return np.zeros(0)
    return np.linalg.svd(prod, compute_uv=False)


def pi_pi_gap(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, rel: float = ZERO_TOL) -> float:
    s = ker_im_product_singular_values(cx_i, cx_j, k, rel)
    below = s[(s < 1 - rel) & (s > rel)]  # numerically zero values count as exact zeros
    return 1.0 if below.size == 0 else float(1 - below.max())


def laplacian_gap(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, rel: float = ZERO_TOL) -> float | None:
    delta = persistent_laplacian(cx_i, cx_j, k).delta.astype(float)
    if delta.size == 0:
        return None
    w = np.linalg.eigvalsh(delta)
    top = np.abs(w).max()
    if top == 0:
        return None
    nz = w[w > rel * top]
    return float(nz.min()) if nz.size else None


def gap_report(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, rel: float = ZERO_TOL) -> GapReport:
    b = boundary_gaps(cx_i, cx_j, k, rel)
    return GapReport(b.lambda_dk_i, b.lambda_dk1_j, pi_pi_gap(cx_i, cx_j, k, rel),
                     laplacian_gap(cx_i, cx_j, k, rel))


# --- sweeps -----------------------------------------------------------------

SWEEP_HEADER = ("N", "k", "trial", "mu", "S_k", "lambda_dk", "lambda_dk1", "lambda_pipi", "lambda_lap", "beta")


@dataclass
class SweepTable:
    rows: list[dict]
    skipped: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in self.rows:
            w.writerow(["" if r[h] is None else (repr(r[h]) if isinstance(r[h], float) else r[h])
                        for h in SWEEP_HEADER])
        return buf.getvalue()

    def summary(self) -> dict:
        """Median and quartiles of every numeric column, per N."""
        out: dict = {}
        for n in sorted({r["N"] for r in self.rows}):
            sub = [r for r in self.rows if r["N"] == n]
            stats = {}
            for col in ("S_k", "lambda_dk", "lambda_dk1", "lambda_pipi", "lambda_lap", "beta"):
                vals = np.array([r[col] for r in sub if r[col] is not None], dtype=float)
                if vals.size:
                    q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
                    stats[col] = {"q1": float(q1), "median": float(med), "q3": float(q3), "count": int(vals.size)}
            out[str(n)] = stats
        return out


def _geometric_pair(n: int, k: int, rng: np.random.Generator, quantile: float, quantile_j: float, dim: int):
    cloud = PointCloud.from_floats(rng.random((n, dim)))
    dm = pairwise_distances(cloud)
    sq = np.array(dm.sq_raw, dtype=np.int64)
    pair_sq = sq[np.triu_indices(n, 1)]
    t_i = int(np.quantile(pair_sq, quantile, method="lower"))
    t_j = int(np.quantile(pair_sq, quantile_j, method="lower"))
    cx_i = build_clique_complex(dm, k_max=k, sq_threshold=t_i)
    cx_j = build_clique_complex(dm, k_max=k, sq_threshold=t_j)
    return cx_i, cx_j


def _graph_pair(n: int, k: int, rng: np.random.Generator, p: float):
    upper = np.triu(rng.random((n, n)) < p, 1)
    dm = distance_matrix_from_graph(upper | upper.T)
    cx = build_clique_complex(dm, mu=1.0, k_max=k)
    return cx, cx


def sweep_trial(generator: str, n: int, k: int, trial: int, seed: int, *, quantile: float = 0.3,
                quantile_j: float | None = None, p: float = 0.5, dim: int = 2) -> dict | None:
    """One sweep row; ``None`` if S_k^i is empty. The RNG depends only on (seed, N, trial)."""
    rng = np.random.default_rng([seed, n, trial])
    if generator == "random-geometric":
        cx_i, cx_j = _geometric_pair(n, k, rng, quantile, quantile if quantile_j is None else quantile_j, dim)
    elif generator == "random-graph":
        cx_i, cx_j = _graph_pair(n, k, rng, p)
    else:
        raise ValueError(f"unknown generator {generator!r}")
    if cx_i.count(k) == 0:
        return None
    g = gap_report(cx_i, cx_j, k)
    return {
        "N": n, "k": k, "trial": trial, "mu": cx_i.mu, "S_k": cx_i.count(k),
        "lambda_dk": g.lambda_dk_i, "lambda_dk1": g.lambda_dk1_j, "lambda_pipi": g.lambda_pipi,
        "lambda_lap": g.lambda_laplacian, "beta": persistent_betti_rank_formula(cx_i, cx_j, k),
        "mu_j": cx_j.mu,
    }


def gap_scaling_sweep(generator: str, sizes, k: int, trials: int, seed: int, *, jobs: int = 1,
                      **kw) -> SweepTable:
    tasks = [(n, t) for n in sizes for t in range(trials)]
    for n in sizes:
        if k > n - 1:
            raise ValueError(f"k={k} needs at least {k + 1} points, got N={n}")
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_task, [(generator, n, k, t, seed, kw) for n, t in tasks]))
    else:
        results = [sweep_trial(generator, n, k, t, seed, **kw) for n, t in tasks]
    table = SweepTable([])
    for (n, t), row in zip(tasks, results):
        if row is None:
            table.skipped.append({"N": n, "trial": t, "reason": "empty S_k"})
        else:
            table.rows.append(row)
    return table


def _sweep_task(args):
    generator, n, k, t, seed, kw = args
    return sweep_trial(generator, n, k, t, seed, **kw)


# --- adiabatic counterexample ----------------------------------------------

@dataclass(frozen=True)
class ZenoReport:
    kernel_chain: dict[str, float]      # normalized ker Δ_1^j vector, by edge name
    kernel_cosine: float                # |cos| against 3(AB+BC+CD-AD) - d2(ABX)
    eigenvalues: tuple[float, ...]      # of Q0 (H1 - H0) Q0 on ker H0
    overlaps: tuple[float, float]       # the two nonzero squared overlaps, largest first
    all_overlaps: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "kernel_chain": self.kernel_chain,
            "kernel_cosine": self.kernel_cosine,
            "eigenvalues": list(self.eigenvalues),
            "overlaps": list(self.overlaps),
            "all_overlaps": list(self.all_overlaps),
        }


def zeno_complexes():
    labels = list(ZENO_POINTS)
    cloud = PointCloud.from_floats([ZENO_POINTS[l] for l in labels], labels=labels)
    dm = pairwise_distances(cloud)
    sched = filtration_scales(dm)
    i = next(t for t, mu in enumerate(sched.scales) if abs(mu - 2.0) < 1e-6)
    j = next(t for t, mu in enumerate(sched.scales) if abs(mu - ZENO_APEX_DIST) < 1e-3)
    cx_i = build_clique_complex(dm, k_max=1, sq_threshold=sched.sq_levels[i], scale_index=i)
    cx_j = build_clique_complex(dm, k_max=1, sq_threshold=sched.sq_levels[j], scale_index=j)
    return cx_i, cx_j


def _named(cx: CliqueComplex, terms: dict[str, float], k: int) -> np.ndarray:
    lookup = {cx.name(s): s for s in cx.simplices(k)}
    return chain_vector(cx, {lookup[n]: c for n, c in terms.items()}, k)


def zeno_counterexample() -> ZenoReport:
    """Square ABCD at scale i; apex X and triangle ABX join at scale j.

    H0 is the scale-i Laplacian written on the scale-j edge basis (the new
    edges contribute zero columns), H1 the scale-j Laplacian.
    """
    cx_i, cx_j = zeno_complexes()
    d1_j = boundary_dense(cx_j, 1).astype(float)
    d2_j = boundary_dense(cx_j, 2).astype(float)
    in_i = np.array([s in cx_i for s in cx_j.simplices(1)])
    d1_i = d1_j * in_i[None, :]
    d2_i = boundary_dense(cx_i, 2).astype(float)
    up_i = np.zeros((cx_j.count(1), cx_j.count(1)))
    if d2_i.shape[1]:
        idx = embedding_indices(cx_i, cx_j, 1)
        up_i[np.ix_(idx, idx)] = d2_i @ d2_i.T
    h0 = d1_i.T @ d1_i + up_i
    h1 = d1_j.T @ d1_j + d2_j @ d2_j.T

    w1, v1 = np.linalg.eigh(h1)
    ker1 = v1[:, np.abs(w1) < 1e-9 * max(1.0, np.abs(w1).max())]
    if ker1.shape[1] != 1:
        raise ArithmeticError(f"expected a one-dimensional harmonic space, got {ker1.shape[1]}")
    hole = _named(cx_j, {"AB": 1, "BC": 1, "CD": 1, "AD": -1}, 1)
    abx = next(s for s in cx_j.simplices(2) if cx_j.name(s) == "ABX")
    expected = 3 * hole - d2_j[:, cx_j.index_of(abx)]
    kv = ker1[:, 0]
    if kv @ expected < 0:
        kv = -kv
    cosine = float(abs(kv @ expected) / np.linalg.norm(expected))

    w0, v0 = np.linalg.eigh(h0)
    q0 = v0[:, np.abs(w0) < 1e-9 * max(1.0, np.abs(w0).max())]
    evals, evecs = np.linalg.eigh(q0.T @ (h1 - h0) @ q0)
    psi = 0.5 * hole
    ov = (evecs.T @ (q0.T @ psi)) ** 2
    nz = sorted((float(x) for x in ov if x > 1e-12), reverse=True)
    if len(nz) != 2:
        raise ArithmeticError(f"expected two nonzero overlaps, got {len(nz)}")
    chain = {cx_j.name(s): float(kv[r]) for r, s in enumerate(cx_j.simplices(1))}
    return ZenoReport(chain, cosine, tuple(float(x) for x in evals), (nz[0], nz[1]),
                      tuple(float(x) for x in ov))


def harmonic_representative(cx: CliqueComplex, k: int, rel: float = ZERO_TOL,
                            check_tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis (columns) of ker Δ_k, checked against both boundary maps."""
    delta = combinatorial_laplacian(cx, k).delta.astype(float)
    n = delta.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    w, v = np.linalg.eigh(delta)
    basis = v[:, np.abs(w) <= rel * max(1.0, np.abs(w).max())]
    down = boundary_dense(cx, k).astype(float)
    up = boundary_dense(cx, k + 1).astype(float)
    if basis.shape[1]:
        res = max(np.abs(down @ basis).max(initial=0.0), np.abs(up.T @ basis).max(initial=0.0))
        if res > check_tol:
            raise ArithmeticError(f"harmonic basis residual {res:.3g} exceeds {check_tol}")
    return basis


__all__ = [
    "GapReport", "SweepTable", "ZenoReport", "ZENO_POINTS", "SWEEP_HEADER",
    "boundary_gaps", "pi_pi_gap", "laplacian_gap", "gap_report", "gap_scaling_sweep", "sweep_trial",
    "zeno_counterexample", "zeno_complexes", "harmonic_representative", "smallest_nonzero_singular",
    "nonzero_singular_values", "kernel_basis", "image_basis", "embedding_indices", "ker_im_bases",
    "ker_im_product_singular_values",
]
