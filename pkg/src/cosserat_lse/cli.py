"""Command line: ``cosserat-lse solve | bench | generate``.

Exit codes: 0 success, 1 input error, 2 solver did not converge (partial
outputs are written), 3 benchmark check failed.
"""

from __future__ import annotations

import argparse
import csv
import inspect
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import benchmarks as bm
from . import network as nw
from . import scenes as sc
from . import validation as va
from .config import Ramp
from .errors import ConfigurationError, CosseratError, SceneValidationError, SolverError
from .scene_io import load_scene, save_scene, scene_hash
from .solver import load_stepped_solve

log = logging.getLogger("cosserat_lse")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_BENCH_FAILED = 0, 1, 2, 3

GENERATORS = {
    "cantilever": sc.cantilever,
    "bend45": sc.bend45,
    "patch-bending": sc.patch_bending,
    "clamped-clamped": sc.clamped_clamped,
    "lattice2d": sc.lattice2d,
    "truss3d": sc.truss3d,
    "gridshell": sc.gridshell,
    "chiral": sc.chiral,
}

COUNTS = {
    "lattice2d": ("cells_x x cells_y cells give (cells_x+1)(cells_y+1) nodes", sc.lattice2d_counts),
    "truss3d": ("each layer adds 9 nodes and 20 elements", sc.truss3d_counts),
    "gridshell": ("elements = 3 (nodes - 1) - equator", sc.gridshell_counts),
}


def state_document(scene, state, order=None):
    """Final nodal poses, element slopes and mean strains."""
    batch = nw.evaluate_elements(scene, state, order, tangent=False)
    m = scene.model
    return {
        "nodes": [
            {"position": state.positions[i].tolist(), "rotation": state.rotations[i].ravel().tolist()}
            for i in range(scene.n_nodes)
        ],
        "elements": [
            {
                "mode": scene.elements[k].mode.value,
                "mean_strain": batch.mean[k].tolist(),
                "slope": (state.slopes[k] if m.lse[k] else np.zeros(6)).tolist(),
            }
            for k in range(scene.n_elements)
        ],
    }


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def cmd_solve(args):
    scene = load_scene(args.scene)
    if args.tol is not None:
        scene.solver.residual_tol = args.tol
    if args.max_iters is not None:
        scene.solver.max_iters = args.max_iters
    if args.ramp is not None:
        scene.solver.ramp = Ramp.parse(args.ramp)
    scene.solver.__post_init__()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        state, report = load_stepped_solve(scene)
    except SolverError as exc:  # singular tangent and the like: partial outputs
        state = exc.state if exc.state is not None else nw.initial_state(scene)
        report = exc.report
        log.error("%s", exc)
    (out / "state.json").write_text(json.dumps(state_document(scene, state), indent=1) + "\n")
    _write_csv(out / "residuals.csv", ["step", "iteration", "residual_norm"], report.rows() if report else [])
    _write_csv(out / "centerline.csv", va.CENTERLINE_HEADER, va.centerline_rows(scene, state))
    doc = {"scene_sha256": scene_hash(scene), "report": report.to_dict() if report else None}
    (out / "report.json").write_text(json.dumps(bm._jsonable(doc), indent=1) + "\n")
    converged = bool(report and report.converged)
    iters = sum(report.iterations) if report else 0
    print(f"{'converged' if converged else 'NOT converged'}: "
          f"|r| = {report.final_residual if report else float('nan'):.3e} after {iters} iterations; "
          f"outputs in {out}")
    if not converged and report is not None and report.message:
        print(f"  {report.message}")
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def cmd_bench(args):
    result = bm.run_benchmark(args.name, args.out)
    print(result.summary())
    if args.out:
        print(f"outputs in {args.out}")
    if not result.passed:
        print("\nfailed checks:")
        width = max(len(k) for k in result.checks)
        for k, ok in result.checks.items():
            if not ok:
                print(f"  {k:<{width}}  FAIL")
        return EXIT_BENCH_FAILED
    return EXIT_OK


def _convert(text, default):
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        try:
            return float(text)
        except ValueError:
            if default is None:
                return text
            raise
    if isinstance(default, (tuple, list)):
        return tuple(float(v) for v in text.split(","))
    return text


def parse_params(name, pairs):
    fn = GENERATORS[name]
    sig = inspect.signature(fn)
    params = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigurationError(f"--param expects key=value, got {pair!r}")
        if key not in sig.parameters or key == "solver":
            options = ", ".join(p for p in sig.parameters if p != "solver")
            raise ConfigurationError(f"{name} has no parameter {key!r}; parameters: {options}")
        try:
            params[key] = _convert(value, sig.parameters[key].default)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {exc}") from None
    return params


def cmd_generate(args):
    params = parse_params(args.name, args.param)
    try:
        scene = GENERATORS[args.name](**params)
    except (ConfigurationError, SceneValidationError) as exc:
        if args.name in COUNTS:
            rule, _ = COUNTS[args.name]
            raise ConfigurationError(f"{exc} (achievable counts: {rule})") from None
        raise
    save_scene(scene, args.out)
    print(f"wrote {args.out}: {scene.n_nodes} nodes, {scene.n_elements} elements")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="cosserat-lse", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a scene file")
    s.add_argument("scene")
    s.add_argument("--out", default="out", help="output directory (default: out)")
    s.add_argument("--tol", type=float, help="residual tolerance")
    s.add_argument("--max-iters", type=int, help="Newton iterations per load step")
    s.add_argument("--ramp", help="single | linear:N | sine:N")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="run a benchmark study")
    b.add_argument("name", choices=list(bm.BENCHMARKS))
    b.add_argument("--out", help="output directory for CSV tables and report.json")
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("generate", help="write a generated scene file")
    g.add_argument("name", choices=list(GENERATORS))
    g.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter")
    g.add_argument("out")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CosseratError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
