"""Point clouds, fixed-point distances, Vietoris-Rips filtrations and simplex encodings.

Coordinates are stored as two's-complement integers with a declared
integer/fraction split, so every squared distance is an exact integer in
units of 2**(-2*frac_bits). Clique complexes are built by comparing those
integers against a squared threshold, which keeps the combinatorics exact.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Simplex = tuple[int, ...]


class FixedPointError(ValueError):
    """Raised when a value does not fit the declared fixed-point format."""


class LoadError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    """N points in R^d held as fixed-point integers.

    ``raw[i][c]`` is the coordinate times ``2**frac_bits``; each raw value must
    fit a signed ``bits``-wide register.
    """

    raw: tuple[tuple[int, ...], ...]
    bits: int = 32
    frac_bits: int = 16
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.raw:
            raise LoadError("point cloud needs at least one point")
        d = len(self.raw[0])
        if any(len(p) != d for p in self.raw):
            raise LoadError("points have inconsistent dimension")
        if not 0 <= self.frac_bits < self.bits:
            raise FixedPointError("frac_bits must lie in [0, bits)")
        lo, hi = -(1 << (self.bits - 1)), (1 << (self.bits - 1)) - 1
        for p in self.raw:
            for v in p:
                if not lo <= v <= hi:
                    raise FixedPointError(f"raw coordinate {v} outside {self.bits}-bit range")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(default_labels(len(self.raw))))
        if len(self.labels) != len(self.raw):
            raise LoadError("label count does not match point count")

    @classmethod
    def from_floats(cls, points, bits: int = 32, frac_bits: int = 16, labels: Sequence[str] = ()):
        """Quantize real coordinates to the nearest representable value."""
        scale = 1 << frac_bits
        lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
        raw = []
        for p in points:
            row = []
            for x in p:
                x = float(x)
                if not math.isfinite(x):
                    raise FixedPointError(f"non-finite coordinate {x}")
                v = round(x * scale)
                if not lo <= v <= hi:
                    raise FixedPointError(f"coordinate {x} not representable in {bits} bits")
                row.append(v)
            raw.append(tuple(row))
        return cls(tuple(raw), bits, frac_bits, tuple(labels))

    @property
    def n(self) -> int:
        return len(self.raw)

    @property
    def dim(self) -> int:
        return len(self.raw[0])

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.raw, dtype=float) / (1 << self.frac_bits)


def default_labels(n: int) -> list[str]:
    if n <= 26:
        return [chr(ord("A") + i) for i in range(n)]
    return [f"v{i}" for i in range(n)]


def _parse_csv(text: str):
    labels: list[str] = []
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if body.lower().startswith("labels:"):
                labels = [t.strip() for t in body.split(":", 1)[1].split(",") if t.strip()]
            continue
        rows.append(s)
    points = []
    for rec in csv.reader(rows):
        try:
            points.append([float(t) for t in rec])
        except ValueError as e:
            raise LoadError(f"cannot parse row {rec!r}") from e
    return points, labels, None


def _parse_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise LoadError(str(e)) from e
    if not isinstance(doc, dict) or "points" not in doc:
        raise LoadError("JSON point cloud needs a 'points' array")
    return doc["points"], doc.get("labels") or [], doc.get("bits")


def load_point_cloud(source, fmt: str | None = None, bits: int | None = None,
                     frac_bits: int | None = None) -> PointCloud:
    """Read a CSV or JSON point cloud from a path, bytes, or an open stream.

    Labels keep file order, which fixes simplex orientation downstream.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        text = path.read_text()
        if fmt is None:
            fmt = "json" if path.suffix.lower() == ".json" else "csv"
    elif isinstance(source, (bytes, bytearray)):
        text = source.decode()
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode()
    fmt = (fmt or "csv").lower()
    if fmt == "csv":
        points, labels, file_bits = _parse_csv(text)
    elif fmt == "json":
        points, labels, file_bits = _parse_json(text)
    else:
        raise LoadError(f"unknown format {fmt!r}")
    if not points:
        raise LoadError("no points found")
    d = len(points[0])
    for p in points:
        if len(p) != d:
            raise LoadError(f"row of arity {len(p)} among rows of arity {d}")
    b = bits or file_bits or 32
    f = frac_bits if frac_bits is not None else b // 2
    return PointCloud.from_floats(points, b, f, labels)


def dump_point_cloud_json(cloud: PointCloud) -> str:
    doc = {"points": cloud.coords.tolist(), "labels": list(cloud.labels), "bits": cloud.bits}
    return json.dumps(doc, sort_keys=True)


@dataclass(frozen=True)
class DistanceMatrix:
    """Exact squared distances in units of ``2**(-2*frac_bits)``."""

    sq_raw: tuple[tuple[int, ...], ...]
    frac_bits: int
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.sq_raw)

    @property
    def unit(self) -> int:
        return 1 << (2 * self.frac_bits)

    @property
    def sq_dist(self) -> np.ndarray:
        return np.array(self.sq_raw, dtype=float) / self.unit

    def sq_exact(self, i: int, j: int) -> Fraction:
        return Fraction(self.sq_raw[i][j], self.unit)

    def dist(self, i: int, j: int) -> float:
        return math.sqrt(self.sq_raw[i][j]) / (1 << self.frac_bits)


def pairwise_distances(cloud: PointCloud, acc_bits: int | None = None) -> DistanceMatrix:
    """Squared distances with a ``bits+1``-bit difference and ``acc_bits`` accumulator.

    The accumulator defaults to ``2*bits`` bits unsigned. Any value that does
    not fit raises FixedPointError instead of wrapping.
    """
    acc_bits = acc_bits or 2 * cloud.bits
    acc_max = (1 << acc_bits) - 1
    n = cloud.n
    sq = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            total = 0
            for a, b in zip(cloud.raw[i], cloud.raw[j]):
                total += (a - b) * (a - b)
                if total > acc_max:
                    raise FixedPointError(
                        f"squared distance between {cloud.labels[i]} and {cloud.labels[j]} "
                        f"overflows a {acc_bits}-bit accumulator")
            sq[i][j] = sq[j][i] = total
    return DistanceMatrix(tuple(tuple(r) for r in sq), cloud.frac_bits, cloud.labels)


def distance_matrix_from_graph(adjacency) -> DistanceMatrix:
    """Encode a graph as a distance matrix: edges at distance 1, non-edges at 2.

    Building the complex at mu = 1 then yields the clique complex of the graph.
    """
    a = np.asarray(adjacency, dtype=bool)
    n = a.shape[0]
    sq = [[0 if i == j else (1 if a[i, j] else 4) for j in range(n)] for i in range(n)]
    return DistanceMatrix(tuple(tuple(r) for r in sq), 0, tuple(default_labels(n)))


@dataclass(frozen=True)
class FiltrationSchedule:
    sq_levels: tuple[int, ...]
    frac_bits: int

    @property
    def scales(self) -> list[float]:
        return [math.sqrt(s) / (1 << self.frac_bits) for s in self.sq_levels]

    def __len__(self):
        return len(self.sq_levels)


def filtration_scales(dm: DistanceMatrix) -> FiltrationSchedule:
    """0 followed by the sorted distinct pairwise distances."""
    vals = {dm.sq_raw[i][j] for i in range(dm.n) for j in range(i + 1, dm.n)}
    vals.add(0)
    return FiltrationSchedule(tuple(sorted(vals)), dm.frac_bits)


@dataclass(frozen=True)
class CliqueComplex:
    """Flag complex of the threshold graph ``sq_dist <= sq_threshold``.

    Vertex indices are 0-based internally; the dump format uses 1-based.
    """

    dm: DistanceMatrix
    sq_threshold: int
    k_max: int
    simplices_by_dim: tuple[tuple[Simplex, ...], ...]
    scale_index: int | None = None
    _index: tuple[dict, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", tuple(
            {s: r for r, s in enumerate(layer)} for layer in self.simplices_by_dim))

    @property
    def n(self) -> int:
        return self.dm.n

    @property
    def mu(self) -> float:
        return math.sqrt(self.sq_threshold) / (1 << self.dm.frac_bits)

    @property
    def labels(self) -> tuple[str, ...]:
        return self.dm.labels

    def simplices(self, k: int) -> tuple[Simplex, ...]:
        if k < 0 or k >= len(self.simplices_by_dim):
            return ()
        return self.simplices_by_dim[k]

    def count(self, k: int) -> int:
        return len(self.simplices(k))

    @property
    def counts(self) -> list[int]:
        return [len(s) for s in self.simplices_by_dim]

    def index_of(self, s: Simplex) -> int:
        return self._index[len(s) - 1][s]

    def __contains__(self, s) -> bool:
        k = len(s) - 1
        return 0 <= k < len(self._index) and tuple(s) in self._index[k]

    def name(self, s: Simplex) -> str:
        return "".join(self.labels[v] for v in s) if all(len(l) == 1 for l in self.labels) \
            else "-".join(self.labels[v] for v in s)

    def is_subcomplex_of(self, other: CliqueComplex) -> bool:
        if self.n != other.n:
            return False
        return all(s in other for layer in self.simplices_by_dim for s in layer)

    def to_json(self) -> str:
        doc = {
            "scale_index": self.scale_index,
            "mu": self.mu,
            "simplices": {str(k): [[v + 1 for v in s] for s in layer]
                          for k, layer in enumerate(self.simplices_by_dim)},
        }
        return json.dumps(doc, sort_keys=True)


def _threshold_from_mu(dm: DistanceMatrix, mu: float) -> int:
    # squared threshold in raw units; tolerance absorbs float rounding of mu
    t = mu * mu * dm.unit
    return int(math.floor(t + 1e-9 * max(1.0, t)))


def build_clique_complex(dm: DistanceMatrix, mu: float | None = None, k_max: int = 1, *,
                         sq_threshold: int | None = None,
                         scale_index: int | None = None) -> CliqueComplex:
    """Flag complex at scale ``mu`` holding dimensions 0..k_max+1.

    Pass ``sq_threshold`` (raw squared units) to bypass float conversion.
    """
    n = dm.n
    if k_max > n - 1:
        raise ValueError(f"k_max={k_max} exceeds N-1={n - 1}")
    if sq_threshold is None:
        if mu is None:
            raise ValueError("need mu or sq_threshold")
        sq_threshold = _threshold_from_mu(dm, mu)
    nbrs = [frozenset(j for j in range(n) if j != i and dm.sq_raw[i][j] <= sq_threshold)
            for i in range(n)]
    layers: list[tuple[Simplex, ...]] = [tuple((v,) for v in range(n))]
    for _ in range(k_max + 1):
        nxt = []
        for s in layers[-1]:
            common = set(range(s[-1] + 1, n))
            for v in s:
                common &= nbrs[v]
            nxt.extend(s + (w,) for w in sorted(common))
        layers.append(tuple(nxt))
    return CliqueComplex(dm, sq_threshold, k_max, tuple(layers), scale_index)


def complex_at(dm: DistanceMatrix, schedule: FiltrationSchedule, i: int, k_max: int) -> CliqueComplex:
    return build_clique_complex(dm, k_max=k_max, sq_threshold=schedule.sq_levels[i], scale_index=i)


def filtration_order(dm: DistanceMatrix, schedule: FiltrationSchedule, k_max: int):
    """All simplices up to dimension k_max+1 with their entry scale index.

    Sorted by (entry scale, dimension, lexicographic tuple).
    """
    full = build_clique_complex(dm, k_max=k_max, sq_threshold=schedule.sq_levels[-1])
    level_of = {v: i for i, v in enumerate(schedule.sq_levels)}
    out = []
    for layer in full.simplices_by_dim:
        for s in layer:
            sq = max((dm.sq_raw[a][b] for a, b in itertools.combinations(s, 2)), default=0)
            out.append((level_of[sq], len(s) - 1, s))
    out.sort()
    return out


def membership(s: Sequence[int], cx: CliqueComplex) -> bool:
    """Order check followed by the pairwise distance tests (0-based indices)."""
    s = tuple(s)
    if any(a >= b for a, b in zip(s, s[1:])):
        raise ValueError(f"simplex {s} is not strictly increasing")
    if not s or s[0] < 0 or s[-1] >= cx.n:
        return False
    return all(cx.dm.sq_raw[a][b] <= cx.sq_threshold for a, b in itertools.combinations(s, 2))


@dataclass(frozen=True)
class SimplexEncoding:
    kind: str
    n_vertices: int
    payload: tuple[str, ...]

    @property
    def bits(self) -> str:
        return "".join(self.payload)


def register_width(n: int) -> int:
    return max(1, math.ceil(math.log2(n + 1)))


def encode_simplex(s: Sequence[int], kind: str, n: int) -> SimplexEncoding:
    """Encode a simplex given by 1-based vertex indices."""
    s = tuple(s)
    if not s:
        raise ValueError("empty simplex")
    if any(v < 1 or v > n for v in s):
        raise ValueError(f"vertex index out of 1..{n} in {s}")
    if any(a >= b for a, b in zip(s, s[1:])):
        raise ValueError(f"simplex {s} is not strictly increasing")
    if kind == "direct":
        mask = ["0"] * n
        for v in s:
            mask[v - 1] = "1"
        return SimplexEncoding("direct", n, ("".join(mask),))
    if kind == "compact":
        w = register_width(n)
        return SimplexEncoding("compact", n, tuple(format(v, f"0{w}b") for v in s))
    raise ValueError(f"unknown encoding kind {kind!r}")


def decode_simplex(enc: SimplexEncoding) -> Simplex:
    if enc.kind == "direct":
        (mask,) = enc.payload
        if len(mask) != enc.n_vertices:
            raise ValueError("mask width mismatch")
        return tuple(i + 1 for i, c in enumerate(mask) if c == "1")
    if enc.kind == "compact":
        w = register_width(enc.n_vertices)
        vals = []
        for reg in enc.payload:
            if len(reg) != w:
                raise ValueError("register width mismatch")
            v = int(reg, 2)
            if v == 0 or v > enc.n_vertices:
                raise ValueError(f"register value {v} is not a vertex")
            vals.append(v)
        if any(a >= b for a, b in zip(vals, vals[1:])):
            raise ValueError("registers are not strictly increasing")
        return tuple(vals)
    raise ValueError(f"unknown encoding kind {enc.kind!r}")


@dataclass(frozen=True)
class JLResult:
    cloud: PointCloud
    target_dim: int
    seed_used: int
    attempts: int
    max_distortion: float


def jl_target_dim(n: int, eps: float, c: float = 8.0) -> int:
    return math.ceil(c * math.log(n) / eps ** 2)


def jl_certificate(original: PointCloud, projected: PointCloud) -> float:
    """Largest |d'/d - 1| over all pairs with d > 0."""
    a, b = original.coords, projected.coords
    worst = 0.0
    for i, j in itertools.combinations(range(original.n), 2):
        d = np.linalg.norm(a[i] - a[j])
        if d == 0:
            continue
        worst = max(worst, abs(np.linalg.norm(b[i] - b[j]) / d - 1.0))
    return worst


def jl_project(cloud: PointCloud, eps_jl: float, seed: int, c: float = 8.0,
               max_tries: int = 20) -> JLResult:
    """Gaussian random projection with distortion certificate and re-draw."""
    target = jl_target_dim(cloud.n, eps_jl, c)
    if target >= cloud.dim:
        raise ValueError(f"target dimension {target} >= input dimension {cloud.dim}")
    ss = np.random.SeedSequence(seed)
    x = cloud.coords
    worst = float("inf")
    for attempt, child in enumerate(ss.spawn(max_tries), start=1):
        rng = np.random.default_rng(child)
        g = rng.standard_normal((cloud.dim, target)) / math.sqrt(target)
        out = PointCloud.from_floats(x @ g, cloud.bits, cloud.frac_bits, cloud.labels)
        worst = jl_certificate(cloud, out)
        if worst <= eps_jl:
            return JLResult(out, target, seed, attempt, worst)
    raise RuntimeError(f"no projection within distortion {eps_jl} after {max_tries} draws "
                       f"(last {worst:.3f})")


def brute_force_cliques(dm: DistanceMatrix, sq_threshold: int, max_size: int) -> list[Simplex]:
    """Every vertex subset up to ``max_size`` whose edges all pass the threshold."""
    out = []
    for r in range(1, max_size + 1):
        for s in itertools.combinations(range(dm.n), r):
            if all(dm.sq_raw[a][b] <= sq_threshold for a, b in itertools.combinations(s, 2)):
                out.append(s)
    return out


def iter_simplices(cx: CliqueComplex) -> Iterable[Simplex]:
    for layer in cx.simplices_by_dim:
        yield from layer
