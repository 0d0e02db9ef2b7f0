"""Command line front end: run scenario files, built-in demos, counts and oracles.

Every run writes ``map.csv``, a 16-bit plain ``map.pgm`` and ``manifest.json``
into the output directory. All files are written to a temporary name first
and renamed into place.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .applications import (control_spec_from_scenario, portfolio_return_density, portfolio_spec_from_scenario,
                           run_control_loop)
from .combinatorics import count_partitioned, count_systems, cost_overhead, format_scientific
from .errors import RandeqError, ScenarioError
from .inference import GridSpec, IntensityMap, argmax, estimate_likelihood, local_maxima, posterior_map
from .oracle import eigen_histogram, exact_likelihood_map, mode_solutions_linear, total_variation
from .scenario import builtin_document, scenario_from_dict, scenario_hash, validate

DEMOS = ("linear1", "linear2x2", "linear3x3", "conic3", "conic20", "portfolio", "control", "eigen")
PGM_MAX = 65535


# -- output -------------------------------------------------------------------

def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(values: np.ndarray) -> np.ndarray:
    """Map values as a 2-D block, one row per grid line along the last axis."""
    return values.reshape(-1, values.shape[-1])


def map_csv(imap: IntensityMap) -> str:
    g = imap.grid
    buf = io.StringIO()
    buf.write(f"# dim {g.dim}\n")
    buf.write("# lo " + " ".join(repr(v) for v in g.lo) + "\n")
    buf.write("# hi " + " ".join(repr(v) for v in g.hi) + "\n")
    buf.write("# cells " + " ".join(str(c) for c in g.cells) + "\n")
    buf.write(f"# kind {imap.kind}\n")
    for row in _rows(imap.values):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def read_map_csv(path) -> IntensityMap:
    header, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, *vals = line[1:].split()
            header[key] = vals
        elif line:
            rows.append([float(v) for v in line.split(",")])
    grid = GridSpec([float(v) for v in header["lo"]], [float(v) for v in header["hi"]],
                    [int(v) for v in header["cells"]])
    return IntensityMap(grid, np.array(rows), header["kind"][0])


def pgm_levels(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin
    if span > 0:
        levels = np.rint((values - vmin) / span * PGM_MAX).astype(np.int64)
    else:
        levels = np.zeros(values.shape, dtype=np.int64)
    return levels, vmin, vmax


def map_pgm(imap: IntensityMap) -> tuple[str, float, float]:
    """Plain (P2) 16-bit graymap laid out like the CSV rows."""
    levels, vmin, vmax = pgm_levels(_rows(imap.values))
    h, w = levels.shape
    lines = ["P2", f"# min {vmin!r} max {vmax!r}", f"{w} {h}", str(PGM_MAX)]
    lines += [" ".join(str(v) for v in row) for row in levels]
    return "\n".join(lines) + "\n", vmin, vmax


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        if not line.startswith("#"):
            tokens += line.split()
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array(tokens[4:], dtype=np.int64).reshape(h, w), maxval


def write_map(imap: IntensityMap, out: Path, stem: str = "map") -> dict:
    atomic_write(out / f"{stem}.csv", map_csv(imap))
    text, vmin, vmax = map_pgm(imap)
    atomic_write(out / f"{stem}.pgm", text)
    point, value = argmax(imap)
    return {"pgm_min": vmin, "pgm_max": vmax, "argmax": {"point": list(point), "value": value}}


def write_json(path: Path, doc: dict) -> None:
    atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_modes(solutions, out: Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dim = len(solutions[0]) if solutions else 0
    w.writerow([f"x{i + 1}" for i in range(dim)])
    for s in solutions:
        w.writerow([f"{v:.17g}" for v in s])
    atomic_write(out / "modes.csv", buf.getvalue())


# -- scenario handling ------------------------------------------------------------

def load_document(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(f"scenario file {path} not found")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}") from None


def apply_overrides(doc: dict, args) -> dict:
    """Copy of ``doc`` with command line overrides folded in, validated first."""
    validate(doc)
    doc = json.loads(json.dumps(doc))
    sampling = doc.setdefault("sampling", {})
    if getattr(args, "seed", None) is not None:
        sampling["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        sampling["n"] = args.samples
    if getattr(args, "pinhole_tau", None) is not None:
        sampling["pinhole_tau"] = None if args.pinhole_tau == "off" else float(args.pinhole_tau)
    if getattr(args, "cells", None) is not None:
        doc["grid"]["cells"] = [args.cells] * len(doc["grid"]["cells"])
    if getattr(args, "epsilon", None) is not None:
        doc.setdefault("family_params", {})["epsilon"] = args.epsilon
    return doc


def evaluate(sc, mode: str) -> IntensityMap:
    lik = estimate_likelihood(sc)
    return posterior_map(lik, sc.prior) if mode == "posterior" else lik


def manifest_for(sc, imap: IntensityMap, seconds: float, extra: dict) -> dict:
    g = sc.grid
    doc = {
        "scenario_hash": scenario_hash(sc),
        "seed": sc.sampling.seed,
        "samples": sc.sampling.n,
        "partitioned": sc.sampling.partitioned,
        "pinhole_tau": sc.sampling.pinhole_tau,
        "grid": {"lo": list(g.lo), "hi": list(g.hi), "cells": list(g.cells)},
        "kind": imap.kind,
        "seconds": round(seconds, 3),
        "version": __version__,
        "normalization": imap.normalization,
    }
    doc.update(extra)
    return doc


def run_scenario(sc, out: Path, mode: str = "posterior", modes: bool = False, cap: int = 10**6) -> dict:
    t0 = time.perf_counter()
    imap = evaluate(sc, mode)
    seconds = time.perf_counter() - t0
    extra = write_map(imap, out)
    if modes:
        ms = mode_solutions_linear(sc, cap)
        write_modes(ms.solutions, out)
        extra["modes"] = {"solved": len(ms.solutions), "singular": ms.skipped, "total": ms.total}
    manifest = manifest_for(sc, imap, seconds, extra)
    write_json(out / "manifest.json", manifest)
    return manifest


# -- demos --------------------------------------------------------------------

def _demo_control(sc, out: Path, args) -> dict:
    spec = control_spec_from_scenario(sc, cap=args.cap if args.cap is not None else 100_000)
    t0 = time.perf_counter()
    steps = run_control_loop(spec)
    seconds = time.perf_counter() - t0
    trajectory = []
    for it in steps:
        info = write_map(it.posterior, out / f"iteration{it.iteration}")
        info["local_maxima_10pct"] = len(local_maxima(it.posterior, 0.1))
        info.update(it.summary())
        trajectory.append(info)
    write_json(out / "trajectory.json", {"iterations": trajectory})
    last = steps[-1].posterior
    manifest = manifest_for(sc, last, seconds, {
        "component_counts": [list(it.component_counts) for it in steps],
        "actions": [list(it.action) for it in steps],
    })
    write_json(out / "manifest.json", manifest)
    return manifest


def _demo_eigen(sc, out: Path, args) -> dict:
    manifest = run_scenario(sc, out, "posterior")
    m = args.m if getattr(args, "m", None) else 10**6
    hist = eigen_histogram(sc.a_densities[0], None, m, sc.grid, seed=sc.sampling.seed)
    write_map(hist, out, "histogram")
    post = read_map_csv(out / "map.csv")
    manifest["histogram_matrices"] = m
    manifest["total_variation"] = total_variation(post.values, hist.values, sc.grid.cell_volume)
    write_json(out / "manifest.json", manifest)
    return manifest


def _demo_portfolio(sc, out: Path, args) -> dict:
    manifest = run_scenario(sc, out, "posterior")
    spec = portfolio_spec_from_scenario(sc)
    x = manifest["argmax"]["point"]
    ret = portfolio_return_density(x, spec)
    manifest["allocation"] = [x[0], x[1], 1.0 - x[0] - x[1]]
    manifest["return_density"] = {"components": ret.n_components, "mean": ret.mean(),
                                  "std": math.sqrt(ret.variance())}
    write_json(out / "manifest.json", manifest)
    return manifest


def run_demo(name: str, out: Path, args) -> dict:
    doc = apply_overrides(builtin_document(name), args)
    sc = scenario_from_dict(doc)
    if name == "control":
        return _demo_control(sc, out, args)
    if name == "eigen":
        return _demo_eigen(sc, out, args)
    if name == "portfolio":
        return _demo_portfolio(sc, out, args)
    modes = name in ("linear2x2",)
    return run_scenario(sc, out, args.mode or "likelihood", modes=modes, cap=args.cap or 10**6)


# -- argument parsing -----------------------------------------------------------

def parse_counts(text: str) -> list[int]:
    """``"3x8"`` is eight slots with 3 components; comma-separated groups concatenate."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "x" in part:
            value, times = part.split("x")
            out += [int(value)] * int(times)
        elif part:
            out.append(int(part))
    return out


def _add_overrides(p):
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="Monte Carlo sample count N")
    p.add_argument("--cells", type=int, help="cells per grid axis")
    p.add_argument("--mode", choices=("likelihood", "posterior"))
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--pinhole-tau", help="pinhole threshold in standard deviations, or 'off'")
    p.add_argument("--epsilon", type=float, help="width of artificial gaussian right-hand sides")
    p.add_argument("--cap", type=int, help="combination / component cap")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="randeq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate a scenario file")
    p.add_argument("scenario")
    p.add_argument("--modes", action="store_true", help="also write oracle mode solutions")
    _add_overrides(p)

    p = sub.add_parser("demo", help="run a built-in scenario")
    p.add_argument("name", choices=DEMOS)
    p.add_argument("--m", type=int, help="matrices for the eigen histogram")
    _add_overrides(p)

    p = sub.add_parser("count", help="count mode-combination systems")
    p.add_argument("--la", required=True, help="parameter component counts, e.g. 3x8")
    p.add_argument("--lb", default="", help="right-hand-side component counts, e.g. 5x2")
    p.add_argument("--partitioned", action="store_true")
    p.add_argument("--r", type=int, help="equations (partitioned)")
    p.add_argument("--kr", help="block sizes per equation (partitioned), e.g. 4 or 4,4")

    p = sub.add_parser("cost", help="evaluation overhead of L components")
    p.add_argument("--L", type=int, nargs="*", default=[2, 3, 4, 5, 6, 15])
    p.add_argument("--range", type=int, nargs=2, default=(2, 100), metavar=("LO", "HI"))

    p = sub.add_parser("oracle", help="reference computations")
    osub = p.add_subparsers(dest="oracle", required=True)
    q = osub.add_parser("mode-solutions")
    q.add_argument("scenario")
    q.add_argument("--out", type=Path, default=Path("out"))
    q.add_argument("--cap", type=int, default=10**6)
    q = osub.add_parser("exact-map")
    q.add_argument("scenario")
    q.add_argument("--out", type=Path, default=Path("out"))
    q.add_argument("--cells", type=int)
    q.add_argument("--cap", type=int, default=10**6)
    q = osub.add_parser("eigen-histogram")
    q.add_argument("scenario")
    q.add_argument("--out", type=Path, default=Path("out"))
    q.add_argument("--m", type=int, default=10**6)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--cells", type=int)
    return ap


def _cmd_count(args) -> None:
    la = parse_counts(args.la)
    lb = parse_counts(args.lb) if args.lb else []
    if args.partitioned:
        r = args.r if args.r is not None else len(lb)
        kr = parse_counts(args.kr) if args.kr else [len(la) // max(r, 1)]
        if len(kr) == 1:
            kr = kr * r
        if len(la) == 1:
            la = la * sum(kr)
        if len(lb) == 1:
            lb = lb * r
        systems, distinct = count_partitioned(kr, la, lb)
        print(f"systems: {systems} ({format_scientific(systems)})")
        print(f"distinct equations: {distinct}")
    else:
        n = count_systems(la, lb)
        print(f"systems: {n} ({format_scientific(n)})")


def _cmd_cost(args) -> None:
    for L in args.L:
        print(f"L={L}: {100 * cost_overhead(L):+.1f}%")
    lo, hi = args.range
    best = min(range(max(lo, 2), hi + 1), key=cost_overhead)
    print(f"minimum over L in [{lo}, {hi}]: L={best}")


def _cmd_oracle(args) -> None:
    doc = load_document(args.scenario)
    if getattr(args, "cells", None) is not None:
        validate(doc)
        doc["grid"]["cells"] = [args.cells] * len(doc["grid"]["cells"])
    sc = scenario_from_dict(doc)
    out = args.out
    if args.oracle == "mode-solutions":
        ms = mode_solutions_linear(sc, args.cap)
        write_modes(ms.solutions, out)
        print(f"combinations: {ms.total}  solved: {len(ms.solutions)}  singular: {ms.skipped}")
    elif args.oracle == "exact-map":
        t0 = time.perf_counter()
        imap = exact_likelihood_map(sc, cap=args.cap)
        extra = write_map(imap, out)
        write_json(out / "manifest.json", manifest_for(sc, imap, time.perf_counter() - t0, extra))
        print(f"argmax {extra['argmax']['point']}")
    else:
        if sc.system.family != "char_poly":
            raise ScenarioError("eigen-histogram needs a char_poly scenario", "/family")
        t0 = time.perf_counter()
        hist = eigen_histogram(sc.a_densities[0], None, args.m, sc.grid, seed=args.seed)
        extra = write_map(hist, out)
        extra["matrices"] = args.m
        manifest = manifest_for(sc, hist, time.perf_counter() - t0, extra)
        manifest["seed"] = args.seed
        write_json(out / "manifest.json", manifest)
        print(f"mass inside grid: {hist.mass():.6f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            doc = apply_overrides(load_document(args.scenario), args)
            sc = scenario_from_dict(doc)
            m = run_scenario(sc, args.out, args.mode or "posterior", args.modes, args.cap or 10**6)
            print(f"argmax {m['argmax']['point']} value {m['argmax']['value']:.6g} ({m['seconds']} s)")
        elif args.command == "demo":
            m = run_demo(args.name, args.out, args)
            print(f"{args.name}: wrote {args.out} ({m['seconds']} s)")
        elif args.command == "count":
            _cmd_count(args)
        elif args.command == "cost":
            _cmd_cost(args)
        else:
            _cmd_oracle(args)
    except RandeqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
