"""Command-line front end: ``qtda <subcommand> [flags]``.

Every output is JSON with sorted keys or CSV, so a fixed (config, seed)
produces the same bytes on every run. Exit codes: 0 success, 2 config error,
3 infeasible computation, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .boundary_lab import NestingError
from .classical_engines import (
    FiltrationOracle, PowerMethodError, agreement_report, persistent_betti_rank_formula, scale_pairs,
)
from .complex_core import (
    FixedPointError, LoadError, complex_at, dump_point_cloud_json, filtration_scales, jl_project,
    load_point_cloud, pairwise_distances,
)
from .exact import GFP
from .fixtures import FIXTURES
from .gap_probe import GapReport, gap_scaling_sweep, zeno_counterexample
from .qsvt_emulator import InfeasibleError, ProjectorGapError, SearchExhaustedError, prepare_quantum_betti
from .resource_model import (
    DEFAULT_CONSTANTS, REFERENCES, CostModelInput, MissingParameterError, compare, total_runtime,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class InfeasibleRun(ValueError):
    pass


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _emit(text: str, out: str | None):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from e


def _float_or_none(v):
    return None if v is None else float(v)


# --- persistence -----------------------------------------------------------

def parse_scale_pairs(spec: str, n_scales: int) -> list[tuple[int, int]]:
    """``all``, ``consecutive`` or ``"i,j;i,j"``; an empty string selects nothing."""
    spec = (spec or "").strip()
    if not spec:
        return []
    if spec == "all":
        return [(i, j) for i in range(n_scales) for j in range(i, n_scales)]
    if spec == "consecutive":
        return scale_pairs(n_scales)
    out = []
    for chunk in spec.split(";"):
        if not chunk.strip():
            continue
        ij = _int_list(chunk)
        if len(ij) != 2:
            raise ConfigError(f"scale pair {chunk!r} must be 'i,j'")
        i, j = ij
        if not 0 <= i <= j < n_scales:
            raise ConfigError(f"scale pair ({i},{j}) outside 0..{n_scales - 1} or i > j")
        out.append((i, j))
    return out


def _agreement_chunk(args):
    dm, schedule, k_max, pairs, ks = args
    oracle = FiltrationOracle(dm, schedule, k_max)
    rows = agreement_report(oracle, pairs, ks)
    return rows, _gf3_column(oracle, rows)


def _gf3_column(oracle, rows) -> list[int]:
    # {-1, 0, 1} coefficients read as Z_3; reported beside the rational value, not reconciled
    return [persistent_betti_rank_formula(oracle.complex(r.i), oracle.complex(r.j), r.k, GFP(3))
            for r in rows]


def cmd_persistence(a) -> int:
    cloud = load_point_cloud(a.input, a.format)
    if a.kmax < 0 or a.kmax + 1 > cloud.n - 1:
        raise InfeasibleRun(f"k_max={a.kmax} needs at least {a.kmax + 2} points, got {cloud.n}")
    dm = pairwise_distances(cloud)
    schedule = filtration_scales(dm)
    pairs = parse_scale_pairs(a.scales, len(schedule))
    ks = list(range(a.kmax + 1))
    oracle = FiltrationOracle(dm, schedule, a.kmax)
    if a.jobs > 1 and len(pairs) > 1:
        chunks = [pairs[t::a.jobs] for t in range(a.jobs)]
        with ProcessPoolExecutor(max_workers=a.jobs) as ex:
            parts = list(ex.map(_agreement_chunk, [(dm, schedule, a.kmax, c, ks) for c in chunks if c]))
        merged = sorted((pair for rs, g3 in parts for pair in zip(rs, g3)),
                        key=lambda t: (t[0].i, t[0].j, t[0].k))
        rows, gf3 = [t[0] for t in merged], [t[1] for t in merged]
    else:
        rows = agreement_report(oracle, pairs, ks)
        gf3 = _gf3_column(oracle, rows)
    entries = [{"i": r.i, "j": r.j, "k": r.k, "beta": r.colred,
                "mu_i": schedule.scales[r.i], "mu_j": schedule.scales[r.j],
                "colred": r.colred, "rank_formula": r.rank_formula, "laplacian": r.laplacian,
                "rank_formula_gf3": g, "agree": r.agree, "torsion": r.torsion or g != r.rank_formula}
               for r, g in zip(rows, gf3)]
    doc = {
        "entries": entries,
        "agreement": all(r.agree for r in rows),
        "torsion_flagged": sum(e["torsion"] for e in entries),
        "scales": schedule.scales,
        "labels": list(cloud.labels),
        "k_max": a.kmax,
        "seed": a.seed,
    }
    _emit(_dumps(doc), a.out)
    pairs_out = a.pairs_out
    if pairs_out is None and a.out not in (None, "-"):
        pairs_out = str(Path(a.out).with_suffix(".pairs.csv"))
    if pairs_out:
        Path(pairs_out).write_text(oracle.pairing.to_csv())
    return EXIT_OK


# --- qtda --------------------------------------------------------------------

def _qtda_complexes(a):
    if a.fixture:
        if a.fixture not in FIXTURES:
            raise ConfigError(f"unknown fixture {a.fixture!r}; choose from {sorted(FIXTURES)}")
        fx = FIXTURES[a.fixture]()
        k = fx.k if a.k is None else a.k
        i, j = (fx.i, fx.j) if a.scales is None else _pair(a.scales)
        dm, schedule = fx.dm, fx.schedule
    else:
        if not a.input:
            raise ConfigError("qtda needs --input or --fixture")
        if a.scales is None:
            raise ConfigError("qtda with --input needs --scales i,j")
        cloud = load_point_cloud(a.input, a.format)
        dm = pairwise_distances(cloud)
        schedule = filtration_scales(dm)
        k = 1 if a.k is None else a.k
        i, j = _pair(a.scales)
    if not 0 <= i <= j < len(schedule):
        raise ConfigError(f"scale pair ({i},{j}) outside 0..{len(schedule) - 1} or i > j")
    if k + 2 > dm.n:
        raise InfeasibleRun(f"k={k} needs at least {k + 2} points")
    return complex_at(dm, schedule, i, k + 1), complex_at(dm, schedule, j, k + 1), k


def _pair(text: str) -> tuple[int, int]:
    ij = _int_list(text)
    if len(ij) != 2:
        raise ConfigError(f"--scales must be 'i,j', got {text!r}")
    return ij[0], ij[1]


def _run_seed(args):
    setup, seed = args
    return setup.run(seed)


def cmd_qtda(a) -> int:
    cx_i, cx_j, k = _qtda_complexes(a)
    setup = prepare_quantum_betti(cx_i, cx_j, k, a.delta, a.eta, a.mode, a.mapping, a.C)
    classical = persistent_betti_rank_formula(cx_i, cx_j, k)
    if not a.seeds:
        doc = json.loads(setup.run(a.seed).to_json())
        doc["classical_beta"] = classical
        doc["matches_classical"] = doc["beta_estimate"] == classical if doc["rounded"] else None
        _emit(_dumps(doc), a.out)
        return EXIT_OK
    seeds = [a.seed + t for t in range(a.seeds)]
    if a.jobs > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as ex:
            results = list(ex.map(_run_seed, [(setup, s) for s in seeds]))
    else:
        results = [setup.run(s) for s in seeds]
    estimates = [r.beta_estimate for r in results]
    hits = sum(1 for e in estimates if e == classical)
    doc = {
        "classical_beta": classical,
        "estimates": estimates,
        "seeds": seeds,
        "match_rate": hits / len(seeds),
        "miss_rate": 1 - hits / len(seeds),
        "eta": a.eta,
        "Delta": a.delta,
        "mode": a.mode,
        "mapping": a.mapping,
        "k": k,
        "scales": [cx_i.mu, cx_j.mu],
        "budget": results[0].budget.to_dict(),
    }
    _emit(_dumps(doc), a.out)
    return EXIT_OK


# --- resources / compare --------------------------------------------------------

def load_constants(path: str | None) -> dict:
    path = path or os.environ.get("QTDA_CONSTANTS")
    if not path:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ConfigError("constants file must hold a JSON object")
    unknown = sorted(set(doc) - set(DEFAULT_CONSTANTS))
    if unknown:
        raise ConfigError(f"unknown constants {unknown}; known: {sorted(DEFAULT_CONSTANTS)}")
    return {k: float(v) for k, v in doc.items()}


def _cost_input(a) -> CostModelInput:
    gaps = GapReport(_float_or_none(a.lambda_dk), _float_or_none(a.lambda_dk1), _float_or_none(a.lambda_pipi),
                     _float_or_none(a.lambda_lap))
    return CostModelInput(a.N, a.k, a.delta, a.eta, gaps, mapping=a.mapping, memory=a.memory, d=a.d, b=a.b,
                          S_k=a.S_k, C=a.C, constants=load_constants(a.constants))


def cmd_resources(a) -> int:
    _emit(total_runtime(_cost_input(a)).to_json() + "\n", a.out)
    return EXIT_OK


def _params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key.strip()] = float(val)
        except ValueError as e:
            raise ConfigError(f"--param {key} needs a number") from e
    return out


def cmd_compare(a) -> int:
    if a.reference not in REFERENCES:
        raise ConfigError(f"unknown reference {a.reference!r}; choose from {list(REFERENCES)}")
    sweep = _int_list(a.sweep_N) if a.sweep_N else None
    table = compare(_cost_input(a), a.reference, _params(a.param), sweep_N=sweep)
    text = table.to_csv() if a.emit == "csv" else table.to_json() + "\n"
    _emit(text, a.out)
    return EXIT_OK


# --- gaps / zeno / jl ----------------------------------------------------------

def cmd_gaps(a) -> int:
    kw = {"quantile": a.quantile, "quantile_j": a.quantile_j, "p": a.p, "dim": a.dim}
    table = gap_scaling_sweep(a.generator, _int_list(a.sizes), a.k, a.trials, a.seed, jobs=a.jobs, **kw)
    if a.emit == "csv":
        text = table.to_csv()
    else:
        text = _dumps({"summary": table.summary(), "rows": table.rows, "skipped": table.skipped,
                       "generator": a.generator, "seed": a.seed})
    _emit(text, a.out)
    return EXIT_OK


def cmd_zeno(a) -> int:
    _emit(_dumps(zeno_counterexample().to_dict()), a.out)
    return EXIT_OK


def cmd_jl(a) -> int:
    cloud = load_point_cloud(a.input, a.format)
    res = jl_project(cloud, a.eps, a.seed, a.c)
    doc = json.loads(dump_point_cloud_json(res.cloud))
    doc.update({"target_dim": res.target_dim, "attempts": res.attempts, "max_distortion": res.max_distortion,
                "eps": a.eps, "seed": a.seed})
    _emit(_dumps(doc), a.out)
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default="-", help="output path, '-' for stdout")

    def cost_flags(p):
        p.add_argument("--N", type=int, required=False, default=None)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--delta", type=float, default=0.4)
        p.add_argument("--eta", type=float, default=0.05)
        p.add_argument("--mapping", choices=("direct", "compact"), default="direct")
        p.add_argument("--memory", choices=("qrom", "qram"), default="qrom")
        p.add_argument("--d", type=int, default=2)
        p.add_argument("--b", type=int, default=32)
        p.add_argument("--S-k", dest="S_k", type=int, default=None)
        p.add_argument("--C", type=float, default=4.0)
        p.add_argument("--lambda-dk", dest="lambda_dk", type=float, default=None)
        p.add_argument("--lambda-dk1", dest="lambda_dk1", type=float, default=None)
        p.add_argument("--lambda-pipi", dest="lambda_pipi", type=float, default=None)
        p.add_argument("--lambda-lap", dest="lambda_lap", type=float, default=None)
        p.add_argument("--constants", default=None, help="JSON file of big-O constants (else $QTDA_CONSTANTS)")

    ap = argparse.ArgumentParser(prog="qtda", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qtda {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("persistence", parents=[common], help="classical persistent Betti table")
    p.add_argument("--input")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--kmax", type=int, default=1)
    p.add_argument("--scales", default="all", help="all | consecutive | 'i,j;i,j'")
    p.add_argument("--pairs-out", default=None, help="persistence pairs CSV path")
    p.set_defaults(func=cmd_persistence)

    p = sub.add_parser("qtda", parents=[common], help="emulated quantum estimator")
    p.add_argument("--input")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--fixture", default=None, help=f"one of {sorted(FIXTURES)}")
    p.add_argument("--scales", default=None, help="i,j")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--delta", type=float, default=0.4)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--mapping", choices=("direct", "compact"), default="direct")
    p.add_argument("--mode", choices=("ideal", "poly"), default="poly")
    p.add_argument("--C", type=float, default=4.0)
    p.add_argument("--seeds", type=int, default=0, help="repeat over this many seeds and report miss rate")
    p.set_defaults(func=cmd_qtda)

    p = sub.add_parser("resources", parents=[common], help="resource report")
    cost_flags(p)
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("compare", parents=[common], help="comparison against prior-work formulas")
    cost_flags(p)
    p.add_argument("--reference", default="self")
    p.add_argument("--param", action="append", default=[], help="key=value reference parameter")
    p.add_argument("--sweep-N", dest="sweep_N", default=None, help="comma-separated N values")
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gaps", parents=[common], help="spectral gap sweep")
    p.add_argument("--generator", choices=("random-geometric", "random-graph"), default="random-geometric")
    p.add_argument("--sizes", default="6,8,10")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--quantile", type=float, default=0.3)
    p.add_argument("--quantile-j", dest="quantile_j", type=float, default=None)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_gaps)

    p = sub.add_parser("zeno", parents=[common], help="adiabatic overlap counterexample")
    p.set_defaults(func=cmd_zeno)

    p = sub.add_parser("jl", parents=[common], help="Johnson-Lindenstrauss projection")
    p.add_argument("--input")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--c", type=float, default=8.0)
    p.set_defaults(func=cmd_jl)
    return ap


def apply_config(ns: argparse.Namespace, path: str) -> argparse.Namespace:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for key, val in doc.items():
        attr = key.replace("-", "_")
        if attr in {"func", "command", "config"} or not hasattr(ns, attr):
            raise ConfigError(f"unknown config key {key!r} for '{ns.command}'")
        setattr(ns, attr, val)
    return ns


def _check(ns):
    if getattr(ns, "jobs", 1) < 1:
        raise ConfigError("--jobs must be at least 1")
    if ns.command in {"persistence", "jl"} and not ns.input:
        raise ConfigError(f"{ns.command} needs --input")
    if ns.command in {"resources", "compare"} and ns.N is None:
        raise ConfigError(f"{ns.command} needs --N")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if ns.config:
            try:
                apply_config(ns, ns.config)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read config: {e}") from e
        _check(ns)
        return ns.func(ns)
    except (ConfigError, MissingParameterError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (LoadError, FixedPointError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (InfeasibleRun, InfeasibleError, ProjectorGapError, SearchExhaustedError, PowerMethodError,
            NestingError, ValueError, ArithmeticError, RuntimeError) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    raise SystemExit(main())
