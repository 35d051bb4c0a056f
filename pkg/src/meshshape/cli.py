"""Command line interface: check / optimize / experiment / eval."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import MeshShapeError, ParseError
from .fem import (
    assemble,
    constant_rhs,
    model_rhs,
    objective_value,
    shape_derivative,
    solve_adjoint,
    solve_state,
)
from .fileio import read_mesh, write_mesh, write_svg
from .mesh import is_admissible, make_disc_mesh, make_square5_mesh, signed_areas
from .optimizer import (
    CONVERGED,
    MAX_ITER,
    OptimizerConfig,
    PhaseTimer,
    steepest_descent,
)
from .penalty import PenaltyParams, mesh_quality, penalty_gradient, penalty_value

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INADMISSIBLE = 2
EXIT_OPT_FAILURE = 3

PENALTY_PRESETS = {
    "none": (0.0, 0.0, 0.0, 0.0),
    "set1": (1.0, 0.5, 0.0, 0.1),
    "set2": (0.1, 0.01, 0.0, 0.001),
    "set3": (0.015, 0.005, 0.0, 0.0005),
}
METRIC_ALPHA_PRESET = (10.0, 1.0, 0.0, 0.01)

HISTORY_HEADER = "iter,Obj,Penalty,Total,mshQua,step,backtracks"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def load_mesh(source: str):
    if source == "square5":
        return make_square5_mesh()
    if source.startswith("disc:"):
        return make_disc_mesh(int(source.split(":", 1)[1]))
    path = source[5:] if source.startswith("file:") else source
    return read_mesh(path)


def parse_alpha(text: str, default=None):
    if text in PENALTY_PRESETS:
        return PENALTY_PRESETS[text]
    if text == "ag":
        return METRIC_ALPHA_PRESET
    values = dict(default and zip("a1 a2 a3 a4".split(), default) or ())
    for part in text.split(","):
        key, _, raw = part.partition("=")
        key = key.strip()
        if key not in ("a1", "a2", "a3", "a4") or not raw:
            raise ValueError(f"bad penalty spec {text!r}")
        values[key] = float(raw)
    return tuple(values.get(k, 0.0) for k in ("a1", "a2", "a3", "a4"))


def parse_rhs(text: str):
    if text == "model":
        return model_rhs()
    if text.startswith("const:"):
        return constant_rhs(float(text.split(":", 1)[1]))
    raise ValueError(f"bad rhs spec {text!r}")


def _read_config_file(path):
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        if not _:
            raise ValueError(f"bad config line {raw!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_CONFIG_KEYS = {
    "mesh": str,
    "variant": str,
    "penalty": str,
    "metric_alpha": str,
    "rhs": str,
    "max_iter": int,
    "tol": float,
    "mu": float,
    "cutoff": float,
    "out": str,
    "snapshot_stride": int,
    "geodesic_steps": int,
    "seed": int,
    "fix_boundary": lambda s: s.lower() in ("1", "true", "yes"),
}


def _resolve(args):
    # Precedence: command line flags > config file > built-in defaults.
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config)
        for key, conv in _CONFIG_KEYS.items():
            if key in file_values and getattr(args, key, None) is None:
                setattr(args, key, conv(file_values[key]))
    defaults = {
        "variant": "CompEuc",
        "penalty": "none",
        "metric_alpha": "ag",
        "rhs": "model",
        "max_iter": 500,
        "tol": 1e-6,
        "mu": 0.1,
        "out": "out",
        "snapshot_stride": 0,
        "geodesic_steps": 1024,
        "seed": 0,
        "fix_boundary": False,
    }
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    env_out = os.environ.get("MESHSHAPE_OUT")
    if env_out:
        args.out = env_out
    return args


def format_float(x: float) -> str:
    return repr(float(x))


def write_history(path, history):
    lines = [HISTORY_HEADER]
    for rec in history:
        lines.append(
            f"{rec.iter},{format_float(rec.objective)},{format_float(rec.penalty)},"
            f"{format_float(rec.total)},{format_float(rec.theta)},"
            f"{format_float(rec.step)},{rec.backtracks}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_timing(path, timer: PhaseTimer):
    lines = ["phase,seconds"]
    for name, seconds in timer.seconds.items():
        lines.append(f"{name},{seconds:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_check(args) -> int:
    try:
        complex, coords = load_mesh(args.mesh)
    except (ParseError, OSError, ValueError, MeshShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    areas = signed_areas(coords, complex.triangles)
    admissible = is_admissible(complex, coords, check_intersections=True)
    print(f"vertices: {complex.num_vertices}")
    print(f"triangles: {complex.num_triangles}")
    print(f"boundary_edges: {len(complex.boundary_edges)}")
    print(f"boundary_vertices: {len(complex.boundary_vertices)}")
    print(f"min_signed_area: {areas.min():.6g}")
    if np.all(areas > 0):
        print(f"mesh_quality: {mesh_quality(coords, complex):.6g}")
    else:
        print("mesh_quality: nan")
    print(f"admissible: {admissible}")
    return EXIT_OK if admissible else EXIT_INADMISSIBLE


def _build_config(args, complex):
    penalty = PenaltyParams(
        parse_alpha(args.penalty), mu=args.mu, cutoff_threshold=args.cutoff
    )
    metric_penalty = PenaltyParams(parse_alpha(args.metric_alpha), mu=args.mu)
    mask = None
    if args.fix_boundary:
        mask = np.zeros(complex.num_vertices, dtype=bool)
        mask[complex.boundary_vertices] = True
    from .geodesic import GeodesicConfig

    return OptimizerConfig(
        variant=args.variant,
        penalty=penalty,
        metric_penalty=metric_penalty,
        max_iter=args.max_iter,
        stop_tol=args.tol,
        fixed_vertex_mask=mask,
        geodesic=GeodesicConfig(num_steps=args.geodesic_steps),
    )


def cmd_optimize(args) -> int:
    try:
        complex, coords = load_mesh(args.mesh)
        rhs = parse_rhs(args.rhs)
        config = _build_config(args, complex)
    except (ParseError, OSError, ValueError, MeshShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not is_admissible(complex, coords):
        print("error: initial mesh is not admissible", file=sys.stderr)
        return EXIT_INADMISSIBLE

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    timer = PhaseTimer()

    on_iterate = None
    if args.snapshot_stride:
        def on_iterate(n, snap_coords):
            if n % args.snapshot_stride == 0:
                write_svg(outdir / f"snap_{n:06d}.svg", complex, snap_coords)

    result = steepest_descent(
        complex, coords, rhs, config, timer=timer, on_iterate=on_iterate
    )

    write_history(outdir / "history.csv", result.history)
    write_timing(outdir / "timing.csv", timer)
    write_mesh(outdir / "final.mesh", complex, result.final_coords)
    write_svg(outdir / "final.svg", complex, result.final_coords)
    last = result.history[-1]
    print(
        f"status: {result.status}  iterations: {last.iter}  "
        f"Obj: {last.objective:.6g}  Total: {last.total:.6g}  mshQua: {last.theta:.6g}"
    )
    return EXIT_OK if result.status in (CONVERGED, MAX_ITER) else EXIT_OPT_FAILURE


def cmd_eval(args) -> int:
    try:
        complex, coords = load_mesh(args.mesh)
        rhs = parse_rhs(args.rhs)
    except (ParseError, OSError, ValueError, MeshShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not is_admissible(complex, coords):
        print("error: mesh is not admissible", file=sys.stderr)
        return EXIT_INADMISSIBLE

    if args.which == "theta":
        print(f"{mesh_quality(coords, complex)!r}")
        return EXIT_OK
    if args.which == "phi":
        params = PenaltyParams(parse_alpha(args.penalty), mu=args.mu, cutoff_threshold=args.cutoff)
        print(f"{penalty_value(coords, coords, complex, params)!r}")
        return EXIT_OK
    if args.which == "objective":
        system = assemble(coords, complex, rhs)
        y = solve_state(system)
        print(f"{objective_value(coords, complex, y)!r}")
        return EXIT_OK

    # gradcheck: central finite differences of both derivative paths
    alpha = parse_alpha(args.penalty)
    if all(a == 0.0 for a in alpha):
        alpha = (1.0, 0.5, 0.25, 0.1)
    params = PenaltyParams(alpha, mu=args.mu, cutoff_threshold=args.cutoff)
    err_phi = _fd_error_penalty(coords, complex, params)
    err_shape = _fd_error_shape(coords, complex, rhs)
    print(f"penalty_gradient max relative FD error: {err_phi:.3e}")
    print(f"shape_derivative max relative FD error: {err_shape:.3e}")
    ok = err_phi < 1e-6 and err_shape < 1e-5
    print("gradcheck:", "ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_OPT_FAILURE


def _fd_error_penalty(coords, complex, params, h=1e-6):
    grad = penalty_gradient(coords, coords.copy(), complex, params)
    qref = coords.copy()
    fd = np.zeros_like(grad)
    flat = coords.ravel()
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        plus = (flat + bump).reshape(coords.shape)
        minus = (flat - bump).reshape(coords.shape)
        fd[i] = (
            penalty_value(plus, qref, complex, params)
            - penalty_value(minus, qref, complex, params)
        ) / (2 * h)
    scale = np.max(np.abs(grad))
    return float(np.max(np.abs(fd - grad)) / (scale if scale > 0 else 1.0))


def _fd_error_shape(coords, complex, rhs, h=1e-6):
    system = assemble(coords, complex, rhs)
    y = solve_state(system)
    p = solve_adjoint(system)
    grad = shape_derivative(coords, complex, y, p, rhs)

    def reduced(c):
        sys_c = assemble(c, complex, rhs)
        return objective_value(c, complex, solve_state(sys_c))

    fd = np.zeros_like(grad)
    flat = coords.ravel()
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        fd[i] = (
            reduced((flat + bump).reshape(coords.shape))
            - reduced((flat - bump).reshape(coords.shape))
        ) / (2 * h)
    scale = np.max(np.abs(grad))
    return float(np.max(np.abs(fd - grad)) / (scale if scale > 0 else 1.0))


def build_parser() -> _Parser:
    parser = _Parser(prog="meshshape")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="validate a mesh and print a report")
    p_check.add_argument("--mesh", required=True)

    p_opt = sub.add_parser("optimize", help="run the shape optimizer")
    p_opt.add_argument("--mesh", default=None)
    p_opt.add_argument("--variant", default=None, choices=("EucEuc", "ElasEuc", "CompEuc", "CompComp"))
    p_opt.add_argument("--penalty", default=None)
    p_opt.add_argument("--metric-alpha", dest="metric_alpha", default=None)
    p_opt.add_argument("--rhs", default=None)
    p_opt.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_opt.add_argument("--tol", type=float, default=None)
    p_opt.add_argument("--mu", type=float, default=None)
    p_opt.add_argument("--cutoff", type=float, default=None)
    p_opt.add_argument("--out", default=None)
    p_opt.add_argument("--fix-boundary", dest="fix_boundary", action="store_const", const=True, default=None)
    p_opt.add_argument("--snapshot-stride", dest="snapshot_stride", type=int, default=None)
    p_opt.add_argument("--geodesic-steps", dest="geodesic_steps", type=int, default=None)
    p_opt.add_argument("--seed", type=int, default=None)
    p_opt.add_argument("--config", default=None)

    p_exp = sub.add_parser("experiment", help="run a scripted experiment batch")
    p_exp.add_argument("id", type=int, choices=(1, 2, 3))
    p_exp.add_argument("--out", default=None)
    p_exp.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p_exp.add_argument("--compcomp-cap", dest="compcomp_cap", type=int, default=15)
    p_exp.add_argument("--compcomp-rings", dest="compcomp_rings", type=int, default=1)
    p_exp.add_argument("--rings", type=int, default=None)
    p_exp.add_argument("--geodesic-steps", dest="geodesic_steps", type=int, default=1024)
    p_exp.add_argument("--parallel", action="store_true")

    p_eval = sub.add_parser("eval", help="evaluate a quantity on a mesh")
    p_eval.add_argument("--mesh", required=True)
    p_eval.add_argument("--which", required=True, choices=("phi", "theta", "objective", "gradcheck"))
    p_eval.add_argument("--penalty", default="none")
    p_eval.add_argument("--rhs", default="const:1")
    p_eval.add_argument("--mu", type=float, default=0.1)
    p_eval.add_argument("--cutoff", type=float, default=None)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    if args.command == "check":
        return cmd_check(args)
    if args.command == "optimize":
        try:
            _resolve(args)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return cmd_optimize(args)
    if args.command == "experiment":
        out = os.environ.get("MESHSHAPE_OUT") or args.out or f"experiment{args.id}_out"
        return experiments.run_experiment(
            args.id,
            Path(out),
            max_iter=args.max_iter,
            compcomp_cap=args.compcomp_cap,
            compcomp_rings=args.compcomp_rings,
            rings=args.rings,
            geodesic_steps=args.geodesic_steps,
            parallel=args.parallel,
        )
    if args.command == "eval":
        return cmd_eval(args)
    return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
