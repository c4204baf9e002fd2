"""Matrix-level emulation of the quantum persistent Betti estimator.

Projectors are built on explicit |S_k|-dimensional matrices either exactly
(``ideal``) or by applying an even threshold polynomial to singular values
(``poly``). Amplitude estimation is emulated by sampling the Bernoulli
outcomes of the threshold-discrimination experiment.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache, reduce

import numpy as np
import scipy.fft
import scipy.special

from .boundary_lab import boundary_dense
from .complex_core import CliqueComplex, membership
from .gap_probe import (
    GapReport, embedding_indices, gap_report, image_basis, kernel_basis, nonzero_singular_values,
)

# degree <= DEGREE_CONSTANT * (1/w) * ln(1/eps), measured over a (c, w, eps) grid
DEGREE_CONSTANT = 2.0
# calls per repetition <= CALLS_CONSTANT * (1/delta) * ln(1/eps_f); the search band is w = delta/2
CALLS_CONSTANT = 2 * DEGREE_CONSTANT
# double precision cannot resolve projector errors below this, so smaller targets are raised to it
EPS_FLOOR = 1e-10
# dense emulation cannot evaluate polynomials much beyond this degree
MAX_DEGREE = 1 << 18
ZERO_TOL = 1e-9


class InfeasibleError(ValueError):
    """A requested band or error budget cannot be met."""


class ProjectorGapError(ValueError):
    """The supplied gap exceeds the true spectral gap."""


class SearchExhaustedError(RuntimeError):
    pass


# --- threshold polynomials --------------------------------------------------

def smoothed_step(x, center: float, kappa: float):
    """Even erf-smoothed indicator of |x| > center, with steepness kappa."""
    x = np.asarray(x, dtype=float)
    return 1.0 + 0.5 * scipy.special.erf(kappa * (x - center)) - 0.5 * scipy.special.erf(kappa * (x + center))


def _cheb_coeffs(f, n: int) -> np.ndarray:
    j = np.arange(n)
    a = scipy.fft.dct(f(np.cos(np.pi * (j + 0.5) / n)), type=2) / n
    a[0] /= 2
    return a


@dataclass(frozen=True)
class ThresholdPolynomial:
    coefficients: np.ndarray  # Chebyshev basis, odd entries zero
    center: float
    half_width: float
    eps: float
    orientation: str          # "high_pass": ~1 above the band, "low_pass": ~1 below
    kappa: float = 0.0

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coefficients)
        return int(nz[-1]) if nz.size else 0

    @property
    def parity(self) -> str:
        return "even"

    def __call__(self, x):
        return np.polynomial.chebyshev.chebval(np.asarray(x, dtype=float), self.coefficients)

    def ideal(self, x):
        """The step being approximated (band points get 0.5)."""
        x = np.abs(np.asarray(x, dtype=float))
        hi = np.where(x > self.center, 1.0, np.where(x < self.center, 0.0, 0.5))
        return hi if self.orientation == "high_pass" else 1.0 - hi

    def band_error(self, grid: int = 10_000) -> float:
        """Max deviation from the step outside the band on an even grid of [0, 1]."""
        x = np.linspace(0.0, 1.0, grid)
        out = (x <= self.center - self.half_width) | (x >= self.center + self.half_width)
        return float(np.abs(self(x[out]) - self.ideal(x[out])).max())


def threshold_polynomial(center: float, half_width: float, eps: float,
                         orientation: str = "high_pass") -> ThresholdPolynomial:
    return _threshold_polynomial(float(center), float(half_width), float(eps), orientation)


@lru_cache(maxsize=4096)
def _threshold_polynomial(c: float, w: float, eps: float, orientation: str) -> ThresholdPolynomial:
    if orientation not in {"high_pass", "low_pass"}:
        raise ValueError(f"unknown orientation {orientation!r}")
    if not (0 < w < c) or c + w > 1:
        raise InfeasibleError(f"band [{c - w}, {c + w}] must satisfy 0 < w < c and c + w <= 1")
    if not 0 < eps < 1:
        raise InfeasibleError("sup error must lie in (0, 1)")
    if eps >= 0.5:
        # the constant 1/2 is within eps of both 0 and 1
        return ThresholdPolynomial(np.array([0.5]), c, w, eps, orientation, 0.0)
    if degree_bound(w, eps, 1.0) > MAX_DEGREE:
        raise InfeasibleError(f"band half-width {w} at error {eps} needs a degree beyond {MAX_DEGREE}")
    kappa = float(scipy.special.erfcinv(eps / 2) / w)
    f = lambda x: smoothed_step(x, c, kappa)
    # start well above the expected degree so the nodes resolve the transition
    n = 1 << max(6, math.ceil(math.log2(8 * degree_bound(w, eps / 8, 1.0) + 1)))
    while True:
        a = _cheb_coeffs(f, n)
        if np.abs(a[-n // 4:]).max() < 1e-3 * eps / 8 or n >= 1 << 22:
            break
        n *= 2
    a[1::2] = 0.0
    # shortest even truncation whose discarded tail stays below eps/8
    tail = np.concatenate([np.cumsum(np.abs(a[::-1]))[::-1][1:], [0.0]])
    m = int(np.flatnonzero(tail <= eps / 8)[0])
    m += m % 2
    p = a[: m + 1].copy()
    # shift and shrink so that the truncated expansion stays inside [0, 1]
    p[0] += eps / 8
    p /= 1 + eps / 4
    if orientation == "low_pass":
        p = -p
        p[0] += 1.0
    out = ThresholdPolynomial(p, c, w, eps, orientation, kappa)
    err = out.band_error(max(2000, 8 * out.degree))
    if err > eps:
        raise ArithmeticError(f"threshold polynomial misses its band contract: {err} > {eps}")
    return out


def degree_bound(half_width: float, eps: float, constant: float = DEGREE_CONSTANT) -> float:
    return constant * (1.0 / half_width) * math.log(1.0 / eps)


# --- encodings and error propagation ---------------------------------------

@dataclass(frozen=True)
class EncodingParams:
    alpha: float
    ancillas: int = 0
    error: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    def check_norm(self, a: np.ndarray) -> None:
        if a.size and np.linalg.norm(a, 2) > self.alpha * (1 + 1e-12):
            raise ValueError(f"alpha={self.alpha} is below the operator norm")


def product_encoding(a: EncodingParams, b: EncodingParams) -> EncodingParams:
    """(alpha, a, eps) times (beta, b, delta) gives (alpha*beta, a+b, alpha*delta + beta*eps)."""
    return EncodingParams(a.alpha * b.alpha, a.ancillas + b.ancillas, a.alpha * b.error + b.alpha * a.error)


def qsvt_robustness(degree: int, eps_l: float, eps_r: float, eps: float) -> float:
    return 4 * degree * math.sqrt(eps_l + eps_r + eps)


def encoding_error_propagation(chain, degree: int, cpinot: tuple[float, float] = (0.0, 0.0)) -> float:
    """Bound on the transformed-operator error from faulty inputs.

    ``chain`` lists the encodings multiplied together to form the input
    operator; ``cpinot`` holds the two projector-controlled NOT errors.
    """
    chain = list(chain)
    for e in list(chain) + [EncodingParams(1.0, 0, x) for x in cpinot]:
        if not 0 <= e.error < 1:
            raise ValueError("component errors must lie in [0, 1)")
    if not chain:
        chain = [EncodingParams(1.0)]
    combined = reduce(product_encoding, chain)
    return qsvt_robustness(degree, cpinot[0], cpinot[1], combined.error)


# --- projectors --------------------------------------------------------------

@dataclass(frozen=True)
class ProjectorSpec:
    matrix: np.ndarray
    which: str               # "ker", "im" or "kerim"
    mode: str
    gap: float | None
    eps: float               # declared polynomial sup error (0 in ideal mode)
    alpha: float = 1.0
    degree: int = 0
    bound: float = 0.0       # predicted ||matrix - ideal|| in poly mode
    inputs: tuple[EncodingParams, ...] = ()

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.matrix))


def _even_svt_spectral(a: np.ndarray, poly: ThresholdPolynomial) -> np.ndarray:
    """V P(S) V^T over the right singular vectors of ``a`` (all columns)."""
    n = a.shape[1]
    if a.shape[0] == 0:
        return float(poly(0.0)) * np.eye(n)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    sig = np.zeros(n)
    sig[: s.size] = np.clip(s, 0.0, 1.0)
    return (vt.T * poly(sig)) @ vt


def even_svt_clenshaw(a: np.ndarray, poly: ThresholdPolynomial) -> np.ndarray:
    """Same transform via T_{2m}(x) = T_m(2x^2 - 1) on X = 2 A^T A - I, no decomposition."""
    n = a.shape[1]
    x = 2 * (a.T @ a) - np.eye(n) if a.shape[0] else -np.eye(n)
    c = poly.coefficients[::2]
    b1 = np.zeros((n, n))
    b2 = np.zeros((n, n))
    for ck in c[:0:-1]:
        b1, b2 = ck * np.eye(n) + 2 * x @ b1 - b2, b1
    return c[0] * np.eye(n) + x @ b1 - b2


def _check_gap(a: np.ndarray, gap: float | None) -> float | None:
    s = nonzero_singular_values(a, ZERO_TOL)
    true_gap = float(s.min()) if s.size else None
    if gap is not None and true_gap is not None and gap > true_gap * (1 + 1e-9):
        raise ProjectorGapError(f"gap {gap} exceeds the smallest nonzero singular value {true_gap}")
    return true_gap


def _threshold_projector(a: np.ndarray, alpha: float, gap: float | None, eps: float, mode: str,
                         which: str) -> ProjectorSpec:
    a = np.asarray(a, dtype=float)
    enc = EncodingParams(alpha)
    enc.check_norm(a)
    true_gap = _check_gap(a, gap)
    if gap is None:
        gap = true_gap if true_gap is not None else alpha
    n = a.shape[1]
    if mode == "ideal":
        if which == "ker":
            basis = kernel_basis(a, ZERO_TOL)
        else:
            basis = image_basis(a.T, ZERO_TOL)
        return ProjectorSpec(basis @ basis.T if basis.size else np.zeros((n, n)), which, mode, gap, 0.0, alpha)
    if mode != "poly":
        raise ValueError(f"unknown mode {mode!r}")
    eps_eff = max(eps, EPS_FLOOR)
    c = gap / (2 * alpha)
    poly = threshold_polynomial(c, 0.9 * c, eps_eff, "low_pass" if which == "ker" else "high_pass")
    mat = _even_svt_spectral(a / alpha, poly)
    bound = encoding_error_propagation([enc], poly.degree) + eps_eff
    return ProjectorSpec((mat + mat.T) / 2, which, mode, gap, eps_eff, alpha, poly.degree, bound, (enc,))


def kernel_projector(b: np.ndarray, alpha: float, gap: float | None, eps: float,
                     mode: str = "ideal") -> ProjectorSpec:
    """Projector onto Ker b, on the column space of b."""
    return _threshold_projector(b, alpha, gap, eps, mode, "ker")


def image_projector(bt: np.ndarray, alpha: float, gap: float | None, eps: float,
                    mode: str = "ideal") -> ProjectorSpec:
    """Projector onto Im b given ``bt`` = b^T, on the row space of b."""
    return _threshold_projector(bt, alpha, gap, eps, mode, "im")


def ker_im_projector(pk: ProjectorSpec, pi: ProjectorSpec, gap: float, eps: float, mode: str = "ideal",
                     embedding: np.ndarray | None = None) -> ProjectorSpec:
    """Projector onto the singular-value-1 space of pk * pi, restricted to pk's basis.

    ``embedding`` lists the positions of pk's basis inside pi's basis.
    """
    n_i, n_j = pk.dim, pi.dim
    if embedding is None:
        if n_i != n_j:
            raise ValueError("basis mismatch: pass the embedding of S_k^i into S_k^j")
        embedding = np.arange(n_i)
    embedding = np.asarray(embedding, dtype=int)
    if embedding.size != n_i:
        raise ValueError("basis mismatch: embedding length differs from the kernel projector size")
    big_k = np.zeros((n_j, n_j))
    big_k[np.ix_(embedding, embedding)] = pk.matrix
    prod = big_k @ pi.matrix
    if not 0 < gap <= 1:
        raise InfeasibleError("the intersection gap must lie in (0, 1]")
    _, s, vt = np.linalg.svd(prod) if n_j else (None, np.zeros(0), np.zeros((0, 0)))
    if mode == "ideal":
        below = s[(s < 1 - ZERO_TOL) & (s > ZERO_TOL)]
        if below.size and gap > (1 - below.max()) * (1 + 1e-9):
            raise ProjectorGapError(f"gap {gap} exceeds the true intersection gap {1 - below.max()}")
        keep = vt[s >= 1 - gap / 2]
        full = keep.T @ keep
        mat = full[np.ix_(embedding, embedding)]
        return ProjectorSpec(mat, "kerim", mode, gap, 0.0)
    if mode != "poly":
        raise ValueError(f"unknown mode {mode!r}")
    eps_eff = max(eps, EPS_FLOOR)
    c = 1 - gap / 2
    poly = threshold_polynomial(c, 0.45 * gap, eps_eff, "high_pass")
    sig = np.zeros(n_j)
    sig[: s.size] = np.clip(s, 0.0, 1.0)
    full = (vt.T * poly(sig)) @ vt
    mat = full[np.ix_(embedding, embedding)]
    inputs = (EncodingParams(1.0, 0, pk.bound), EncodingParams(1.0, 0, pi.bound))
    bound = encoding_error_propagation(inputs, poly.degree) + eps_eff
    return ProjectorSpec((mat + mat.T) / 2, "kerim", mode, gap, eps_eff, 1.0, poly.degree, bound, inputs)


# --- purified state -----------------------------------------------------------

def purified_state(d: int) -> np.ndarray:
    """sum_s |s>|s> / sqrt(d) as a d*d vector."""
    return np.eye(d).reshape(-1) / math.sqrt(d)


def purified_norm_sq(proj: np.ndarray) -> float:
    """||(P (x) I)|psi_m>||^2 by acting on the first tensor factor."""
    d = proj.shape[0]
    if d == 0:
        return 0.0
    psi = purified_state(d).reshape(d, d)
    out = np.einsum("ab,bc->ac", proj, psi)
    return float(np.sum(out * out))


def purified_overlap(p: ProjectorSpec, cx: CliqueComplex, k: int) -> float:
    if p.dim != cx.count(k):
        raise ValueError(f"basis mismatch: projector has size {p.dim}, S_{k} has {cx.count(k)}")
    if p.dim == 0:
        return 0.0
    return math.sqrt(purified_norm_sq(p.matrix))


# --- error budget -------------------------------------------------------------

def encoding_alpha(mapping: str, n: int, k: int) -> float:
    """Normalization of the encoded d_k for the chosen simplex mapping."""
    if mapping == "direct":
        return math.sqrt(n)
    if mapping == "compact":
        return math.sqrt((n + 1) * (k + 1))
    raise ValueError(f"unknown mapping {mapping!r}")


@dataclass(frozen=True)
class ErrorBudget:
    mapping: str
    N: int
    k: int
    C: float
    eps3: float
    delta: tuple[float, float, float]
    eps_f: float
    eps_psi: float
    eps_p: float
    eps_k: float
    eps_i: float
    eps_m: float
    eps_s: float
    lambda_pipi: float
    lambda_dk: float
    lambda_dk1: float
    D: int
    S_k: int

    @property
    def chi_psi(self) -> float:
        if self.mapping == "direct":
            return self.eps_psi
        amp = math.sqrt(self.D / self.S_k) * math.log(1 / self.eps_psi)
        return self.eps_psi + 4 * amp * math.sqrt(math.sqrt(self.eps_s) + math.sqrt(self.eps_m))

    @property
    def eps_ker(self) -> float:
        if self.mapping == "direct":
            return self.eps_k
        return self.eps_k + 2 * math.sqrt(self.eps_m * (self.N + 1) * (self.k + 1)) / self.lambda_dk \
            * math.log(1 / self.eps_k)

    @property
    def eps_im(self) -> float:
        if self.mapping == "direct":
            return self.eps_i
        return self.eps_i + 2 * math.sqrt(self.eps_m * (self.N + 1) * (self.k + 2)) / self.lambda_dk1 \
            * math.log(1 / self.eps_i)

    @property
    def chi_pi(self) -> float:
        inner = self.eps_ker + self.eps_im + (8 * math.sqrt(self.eps_m) if self.mapping == "compact" else 0.0)
        return math.log(1 / self.eps_p) / self.lambda_pipi * math.sqrt(inner) + self.eps_p

    @property
    def sigma(self) -> float:
        return 6 * math.sqrt(self.eps_m) if self.mapping == "compact" else 0.0

    def instance_error(self, delta_x: float) -> float:
        return 4 / delta_x * math.log(1 / self.eps_f) * math.sqrt(2 * self.chi_psi + self.chi_pi + self.sigma) \
            + self.eps_f

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delta"] = list(self.delta)
        d["chi_psi"] = self.chi_psi
        d["chi_pi"] = self.chi_pi
        d["eps3_propagated"] = self.instance_error(min(self.delta))
        return d


def instance_deltas(delta_total: float, s_k: int, d: int, beta: int, dim_ker: int, dim_ki: int):
    """Per-instance precisions; zero dimensions are clamped to 1 so the widths stay finite."""
    beta, dim_ker, dim_ki = max(beta, 1), max(dim_ker, 1), max(dim_ki, 1)
    return (
        delta_total / (2 * math.sqrt(3) * beta) * math.sqrt(s_k / d),
        delta_total / (2 * math.sqrt(3 * s_k * dim_ker)),
        delta_total / (2 * math.sqrt(3 * s_k * dim_ki)),
    )


def error_budget(Delta: float, eta: float, mapping: str, N: int, k: int, gaps: GapReport,
                 C: float = 4.0, S_k: int | None = None, dims: tuple[int, int, int] | None = None) -> ErrorBudget:
    """Allocate every error parameter so the third instance meets eps3 = (1 - 1/sqrt(C))/2.

    ``dims`` = (beta, dim Ker, dim Ker∩Im); when omitted each is bounded by S_k.
    """
    if Delta <= 0 or not 0 < eta < 1:
        raise InfeasibleError("need Delta > 0 and eta in (0, 1)")
    if C <= 1:
        raise InfeasibleError("the repetition constant C must exceed 1")
    D = math.comb(N, k + 1)
    s_k = D if S_k is None else S_k
    if not 1 <= s_k <= D:
        raise InfeasibleError(f"S_k={s_k} must lie in [1, {D}]")
    beta, dim_ker, dim_ki = dims if dims is not None else (s_k, s_k, s_k)
    deltas = instance_deltas(Delta, s_k, D, beta, dim_ker, dim_ki)
    lam_pp = gaps.lambda_pipi if gaps.lambda_pipi is not None else 1.0
    lam_k = gaps.lambda_dk_i if gaps.lambda_dk_i is not None else 1.0
    lam_k1 = gaps.lambda_dk1_j if gaps.lambda_dk1_j is not None else 1.0
    if min(lam_pp, lam_k, lam_k1) <= 0:
        raise InfeasibleError("gaps must be positive")

    eps3 = 0.5 * (1 - 1 / math.sqrt(C))
    eps_f = eps3 / 2
    # sized for the tightest instance; usually the third, but a large beta can make the first tighter
    d3 = min(deltas)
    lf = math.log(1 / eps_f)
    total = ((eps3 - eps_f) * d3 / (4 * lf)) ** 2   # allowed value of 2 chi_psi + chi_pi + sigma
    if mapping == "direct":
        eps_psi = total / 4
        eps_p = total / 4
        eps_k = eps_i = (total * lam_pp / (4 * math.log(1 / eps_p))) ** 2 / 2
        eps_m = eps_s = 0.0
    elif mapping == "compact":
        third = total / 3
        eps_psi = third / 4
        q = third / 2 / (4 * math.sqrt(D / s_k) * math.log(1 / eps_psi))  # sqrt(sqrt(eps_s)+sqrt(eps_m)) <= q
        eps_p = third / 2
        r = third / 2 * lam_pp / math.log(1 / eps_p)                        # sqrt(eps_ker+eps_im+8 sqrt(eps_m)) <= r
        eps_k = eps_i = r * r / 6
        root_m = min(
            third / 6,                                                                  # 6 sqrt(eps_m)
            r * r / 24,                                                                 # 8 sqrt(eps_m)
            r * r / 6 * lam_k / (2 * math.sqrt((N + 1) * (k + 1)) * math.log(1 / eps_k)),
            r * r / 6 * lam_k1 / (2 * math.sqrt((N + 1) * (k + 2)) * math.log(1 / eps_i)),
            q * q / 2,
        )
        eps_m = root_m ** 2
        eps_s = (q * q / 2) ** 2
    else:
        raise ValueError(f"unknown mapping {mapping!r}")
    b = ErrorBudget(mapping, N, k, C, eps3, deltas, eps_f, eps_psi, eps_p, eps_k, eps_i, eps_m, eps_s,
                    lam_pp, lam_k, lam_k1, D, s_k)
    used = [eps_f, eps_psi, eps_p, eps_k, eps_i] + ([eps_m, eps_s] if mapping == "compact" else [])
    if any(not 0 < e < 1 for e in used):
        raise InfeasibleError("an allocated error fell outside (0, 1)")
    prop = b.instance_error(d3)
    if prop > eps3 * (1 + 1e-9):
        raise ArithmeticError(f"propagated instance error {prop} exceeds {eps3}")
    return b


# --- amplitude estimation by binary search -----------------------------------

@dataclass
class RankEstimate:
    value: float
    delta: float
    samples: int
    calls: dict[str, int]
    eta: float
    levels: int
    degree: int
    repetitions: int
    target: float | None = None

    def to_dict(self) -> dict:
        return {"target": self.target, "value": self.value, "delta": self.delta, "samples": self.samples,
                "calls": dict(self.calls), "eta": self.eta, "levels": self.levels, "degree": self.degree,
                "repetitions": self.repetitions}


def search_levels(delta: float) -> int:
    """Levels until an interval of length 1 shrinks to 2*delta under L -> L/2 + delta/2."""
    return max(0, math.ceil(math.log2((1 - delta) / delta))) if delta < 0.5 else 0


def chernoff_repetitions(p_hi: float, p_lo: float, theta: float) -> int:
    return math.ceil(6 * (p_hi + p_lo) / (p_hi - p_lo) ** 2 * math.log(1 / theta))


def _response(a: float, c: float, w: float, eps_x: float, eps_f: float) -> float:
    """Amplitude of the flagged branch when thresholding at c; worst case outside the band."""
    if a >= c + w:
        return 1 - eps_x
    if a <= c - w:
        return eps_x
    s = float(np.clip(threshold_polynomial(c, w, eps_f)(a), 0.0, 1.0))
    return eps_x + (1 - 2 * eps_x) * s


def amplitude_binary_search(a_true: float, delta: float, eta: float, budget: ErrorBudget | None,
                            rng: np.random.Generator, *, eps_x: float | None = None,
                            chi: float | None = None, eps_f: float | None = None) -> RankEstimate:
    """Estimate a_true to within delta with failure probability at most eta.

    Each level tests whether a exceeds the midpoint c: M Bernoulli draws at the
    success probability of the thresholded state, compared against the midpoint
    of the two worst-case probabilities. The interval keeps the side consistent
    with the answer, widened by the band half-width.
    """
    if not 0 <= a_true <= 1:
        raise ValueError("a_true must lie in [0, 1]")
    delta = min(delta, 0.25)
    if budget is not None:
        eps_x = budget.instance_error(delta) if eps_x is None else eps_x
        chi = budget.chi_psi if chi is None else chi
        eps_f = budget.eps_f if eps_f is None else eps_f
    eps_x = 0.0 if eps_x is None else eps_x
    chi = 0.0 if chi is None else chi
    eps_f = 0.125 if eps_f is None else eps_f
    if eps_x >= 0.5 or chi >= 1:
        raise InfeasibleError(f"instance error {eps_x} leaves no separation between outcomes")
    w = delta / 2
    levels = search_levels(delta)
    theta = eta / max(levels, 1)
    p_hi = ((1 - eps_x) * (1 - chi)) ** 2
    p_lo = (eps_x * (1 - chi)) ** 2
    tau = (p_hi + p_lo) / 2
    reps = chernoff_repetitions(p_hi, p_lo, theta)
    degree = threshold_polynomial(0.5, w, eps_f).degree

    lo, hi, used = 0.0, 1.0, 0
    while hi - lo > 2 * delta:
        if used >= levels:
            raise SearchExhaustedError(f"interval [{lo}, {hi}] still wider than {2 * delta}")
        c = (lo + hi) / 2
        p = ((1 - chi) * _response(a_true, c, w, eps_x, eps_f)) ** 2
        above = rng.binomial(reps, p) > tau * reps
        if above:
            lo = max(lo, c - w)
        else:
            hi = min(hi, c + w)
        used += 1
    samples = used * reps
    calls = {"V_psi": samples * degree, "V_Pi": samples * degree}
    return RankEstimate((lo + hi) / 2, delta, samples, calls, eta, used, degree, reps, a_true)


# --- full estimator -------------------------------------------------------------

@dataclass
class QuantumBettiResult:
    beta_estimate: float
    raw_estimate: float
    rounded: bool
    instances: list[RankEstimate]
    budget: ErrorBudget
    ledger: dict[str, int]
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "beta_estimate": self.beta_estimate,
            "raw_estimate": self.raw_estimate,
            "rounded": self.rounded,
            "rounding_rule": "nearest non-negative integer when Delta < 0.5, raw otherwise",
            "instances": [e.to_dict() for e in self.instances],
            "budget": self.budget.to_dict(),
            "ledger": self.ledger,
            "seed": self.seed,
            **self.meta,
        }
        return json.dumps(doc, sort_keys=True, indent=1)


def simplex_fraction(cx: CliqueComplex, k: int) -> float:
    """|S_k| / binom(N, k+1) counted through the membership predicate."""
    n = cx.n
    hits = sum(1 for s in itertools.combinations(range(n), k + 1) if membership(s, cx))
    return hits / math.comb(n, k + 1)


@dataclass
class QuantumBettiSetup:
    """Projectors, amplitudes and budget for one (i, j, k); sampling is separate."""
    cx_i: CliqueComplex
    cx_j: CliqueComplex
    k: int
    Delta: float
    eta: float
    mode: str
    mapping: str
    gaps: GapReport
    budget: ErrorBudget
    projectors: dict[str, ProjectorSpec]
    amplitudes: tuple[float, float, float]
    truth: dict[str, int]

    def run(self, rng: np.random.Generator | int | None = None, seed: int | None = None) -> QuantumBettiResult:
        if rng is None or isinstance(rng, (int, np.integer)):
            seed = int(rng or 0) if seed is None else seed
            streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
        else:
            streams = rng.spawn(3)
        eta_x = self.eta / 3
        ests = [amplitude_binary_search(a, d, eta_x, self.budget, g)
                for a, d, g in zip(self.amplitudes, self.budget.delta, streams)]
        w, x, y = (e.value for e in ests)
        z = w * w * self.budget.D * (x * x - y * y)
        rounded = self.Delta < 0.5
        beta = float(max(0, round(z))) if rounded else z
        ledger = {
            "V_psi": sum(e.calls["V_psi"] for e in ests),
            "V_Pi": sum(e.calls["V_Pi"] for e in ests),
            "samples": sum(e.samples for e in ests),
        }
        meta = {"mode": self.mode, "mapping": self.mapping, "k": self.k, "Delta": self.Delta, "eta": self.eta,
                "scales": [self.cx_i.mu, self.cx_j.mu], "gaps": self.gaps.to_dict()}
        return QuantumBettiResult(beta, z, rounded, ests, self.budget, ledger, seed, meta)


def prepare_quantum_betti(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, Delta: float, eta: float,
                          mode: str = "poly", mapping: str = "direct", C: float = 4.0) -> QuantumBettiSetup:
    if not cx_i.is_subcomplex_of(cx_j):
        raise ValueError("complexes are not nested")
    n = cx_i.n
    s_k = cx_i.count(k)
    if s_k == 0:
        raise InfeasibleError(f"no {k}-simplices at the first scale")
    gaps = gap_report(cx_i, cx_j, k)
    dk = boundary_dense(cx_i, k).astype(float)
    dk1 = boundary_dense(cx_j, k + 1).astype(float)
    ideal_k = kernel_projector(dk, encoding_alpha(mapping, n, k), gaps.lambda_dk_i, 0.0, "ideal")
    ideal_i = image_projector(dk1.T, encoding_alpha(mapping, n, k + 1), gaps.lambda_dk1_j, 0.0, "ideal")
    emb = embedding_indices(cx_i, cx_j, k)
    ideal_ki = ker_im_projector(ideal_k, ideal_i, gaps.lambda_pipi, 0.0, "ideal", emb)
    dim_ker = round(ideal_k.trace())
    dim_ki = round(ideal_ki.trace())
    truth = {"dim_ker": dim_ker, "dim_kerim": dim_ki, "beta": dim_ker - dim_ki}
    budget = error_budget(Delta, eta, mapping, n, k, gaps, C, s_k, (truth["beta"], dim_ker, dim_ki))
    if mode == "ideal":
        pk, pi, pki = ideal_k, ideal_i, ideal_ki
    else:
        pk = kernel_projector(dk, encoding_alpha(mapping, n, k), gaps.lambda_dk_i, budget.eps_k, mode)
        pi = image_projector(dk1.T, encoding_alpha(mapping, n, k + 1), gaps.lambda_dk1_j, budget.eps_i, mode)
        pki = ker_im_projector(pk, pi, gaps.lambda_pipi, budget.eps_p, mode, emb)
    amps = (math.sqrt(simplex_fraction(cx_i, k)), purified_overlap(pk, cx_i, k), purified_overlap(pki, cx_i, k))
    amps = tuple(min(1.0, a) for a in amps)
    return QuantumBettiSetup(cx_i, cx_j, k, Delta, eta, mode, mapping, gaps, budget,
                             {"ker": pk, "im": pi, "kerim": pki}, amps, truth)


def estimate_persistent_betti_quantum(cx_i: CliqueComplex, cx_j: CliqueComplex, k: int, Delta: float,
                                      eta: float, mode: str = "poly", rng=None, *, mapping: str = "direct",
                                      C: float = 4.0) -> QuantumBettiResult:
    return prepare_quantum_betti(cx_i, cx_j, k, Delta, eta, mode, mapping, C).run(rng)


__all__ = [
    "DEGREE_CONSTANT", "CALLS_CONSTANT", "EPS_FLOOR", "MAX_DEGREE", "InfeasibleError", "ProjectorGapError",
    "SearchExhaustedError", "ThresholdPolynomial", "threshold_polynomial", "degree_bound", "smoothed_step",
    "EncodingParams", "product_encoding", "qsvt_robustness", "encoding_error_propagation", "ProjectorSpec",
    "kernel_projector", "image_projector", "ker_im_projector", "even_svt_clenshaw", "purified_state",
    "purified_norm_sq", "purified_overlap", "encoding_alpha", "ErrorBudget", "instance_deltas", "error_budget",
    "RankEstimate", "search_levels", "chernoff_repetitions", "amplitude_binary_search", "QuantumBettiResult",
    "QuantumBettiSetup", "prepare_quantum_betti", "estimate_persistent_betti_quantum", "simplex_fraction",
]
