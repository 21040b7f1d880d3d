"""Command-line front end.

Every subcommand reads one self-describing JSON problem file::

    {
      "manifold": {...},                       # see manifold_from_json
      "measure": {"atoms": [{"point": [...], "weight": w}, ...]},
      "solver": {"algorithm": "mean-descent" | "mean-flow" | "median-flow",
                 "p": 2, "x0": [...], "tol": 1e-9, "max_iters": 10000,
                 "dt": 0.01, "horizon": 200},
      "bounds": {"k": 0, "beta": 0, "delta": 0, "delta_prime": 0,
                 "C": "auto", "D": "auto", "inj": null, "R": null, "x0_ball": null},
      "output": {"trace_csv": "trace.csv"}
    }

Results are printed as JSON with sorted keys. Exit status is 0 on success,
2 on input errors and 3 on numerical failures.
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import bounds as bnd
from .errors import (
    FinslerError,
    InvalidInputError,
    NondifferentiablePointError,
    SingularMajorantError,
)
from .geometry import (
    CurvatureBounds,
    distance,
    distances_from,
    exp_map,
    norm_ratio_constants,
    second_variation_diag,
)
from .manifolds import manifold_from_json
from .measure import WeightedSampleMeasure
from .sampling import default_seed, unit_directions
from . import solvers

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
DIAGNOSE_GRID = 5
SECOND_VARIATION_SAMPLES = 12


class Problem:
    def __init__(self, data):
        if not isinstance(data, dict):
            raise InvalidInputError("problem file must hold a JSON object")
        if "manifold" not in data:
            raise InvalidInputError("problem file needs a 'manifold' section")
        self.manifold = manifold_from_json(data["manifold"])
        self.measure = None
        if "measure" in data:
            self.measure = WeightedSampleMeasure.from_json(data["measure"])
            if self.measure.dim != self.manifold.dim:
                raise InvalidInputError("measure and manifold dimensions differ")
            self.manifold.check_point(self.measure.points, "atom")
        self.solver = dict(data.get("solver") or {})
        self.bounds_section = dict(data.get("bounds") or {})
        self.output = dict(data.get("output") or {})

    def need_measure(self):
        if self.measure is None:
            raise InvalidInputError("problem file needs a 'measure' section")
        return self.measure

    def x0(self):
        if self.solver.get("x0") is not None:
            return self.manifold.check_point(self.solver["x0"], "x0")
        return self.need_measure().points[0].copy()

    def x0_ball(self):
        if self.bounds_section.get("x0_ball") is not None:
            return self.manifold.check_point(self.bounds_section["x0_ball"], "x0_ball")
        return self.x0()

    def radius(self):
        if self.bounds_section.get("R") is not None:
            return float(self.bounds_section["R"])
        rho, _ = distances_from(self.manifold, self.x0_ball(), self.need_measure().points)
        return max(float(rho.max()) * (1.0 + 1e-9), 1e-9)

    def curvature_bounds(self):
        b = self.bounds_section
        C, D = b.get("C", "auto"), b.get("D", "auto")
        if C == "auto" or D == "auto":
            region = [self.x0_ball()]
            if self.measure is not None and not self.manifold.is_flat:
                region.extend(self.measure.points)
            Ca, Da = norm_ratio_constants(self.manifold, np.array(region))
            C = Ca if C == "auto" else C
            D = Da if D == "auto" else D
        inj = b.get("inj")
        try:
            return CurvatureBounds(k=float(b.get("k", 0.0)), beta=float(b.get("beta", 0.0)),
                                   delta=float(b.get("delta", 0.0)),
                                   delta_prime=float(b.get("delta_prime", 0.0)),
                                   C=float(C), D=float(D),
                                   inj=float("inf") if inj is None else float(inj))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"malformed bounds section: {exc}") from None


def _coords(text):
    text = text.strip()
    try:
        if text.startswith("["):
            vals = json.loads(text)
        else:
            vals = [float(t) for t in text.split(",") if t.strip()]
        return np.asarray(vals, dtype=float).reshape(-1)
    except (ValueError, TypeError) as exc:
        raise InvalidInputError(f"cannot parse coordinates {text!r}") from exc


def _clean(obj):
    """Recursively turn numpy values into JSON-safe builtins; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def _emit(obj, out):
    out.write(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False))
    out.write("\n")


def _write_trace_csv(path, report):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        dim = len(report.final_point)
        writer.writerow(["iteration"] + [f"x{i}" for i in range(dim)] + ["objective", "grad_dual_norm"])
        for i, row in enumerate(report.trace):
            writer.writerow([i] + [repr(float(c)) for c in row["point"]]
                            + [repr(float(row["objective"])), repr(float(row["grad_dual_norm"]))])


def _finish_report(problem, report, args, out):
    if problem.output.get("trace_csv"):
        _write_trace_csv(problem.output["trace_csv"], report)
    _emit(report.to_dict(include_trace=args.trace), out)


def cmd_mean(problem, args, out):
    mu = problem.need_measure()
    s = problem.solver
    algorithm = s.get("algorithm", "mean-descent")
    p = float(s.get("p", 2.0))
    tol = args.tol if args.tol is not None else float(s.get("tol", solvers.GRAD_TOL))
    if algorithm == "mean-descent":
        report = solvers.mean_gradient_descent(
            problem.manifold, mu, p, problem.x0(), bounds=problem.curvature_bounds(),
            max_iters=int(s.get("max_iters", solvers.MAX_ITERS)), tol=tol,
            R=problem.radius(), x0_ball=problem.x0_ball())
    elif algorithm == "mean-flow":
        report = solvers.mean_gradient_flow(
            problem.manifold, mu, p, problem.x0(),
            horizon=float(s.get("horizon", solvers.FLOW_HORIZON)),
            dt=float(s.get("dt", solvers.FLOW_DT)), tol=tol)
    else:
        raise InvalidInputError(f"'mean' runs mean-descent or mean-flow, not {algorithm!r}")
    _finish_report(problem, report, args, out)


def cmd_median(problem, args, out):
    mu = problem.need_measure()
    s = problem.solver
    if s.get("algorithm", "median-flow") != "median-flow":
        raise InvalidInputError("'median' runs the median-flow algorithm only")
    if float(s.get("p", 1.0)) != 1.0:
        raise InvalidInputError("median-flow requires p = 1")
    report = solvers.median_flow(problem.manifold, mu, problem.x0(),
                                 horizon=float(s.get("horizon", solvers.FLOW_HORIZON)),
                                 dt=float(s.get("dt", solvers.FLOW_DT)),
                                 tol=float(s.get("tol", solvers.GRAD_TOL)))
    _finish_report(problem, report, args, out)


def cmd_distance(problem, args, out):
    m = problem.manifold
    x = m.check_point(_coords(args.from_), "--from")
    y = m.check_point(_coords(args.to), "--to")
    _emit({"forward": distance(m, x, y), "backward": distance(m, y, x)}, out)


def cmd_geodesic(problem, args, out):
    m = problem.manifold
    x = m.check_point(_coords(args.from_), "--from")
    v = _coords(args.velocity)
    if v.shape != (m.dim,):
        raise InvalidInputError(f"--velocity needs {m.dim} components")
    if args.steps < 1:
        raise InvalidInputError("--steps must be >= 1")
    sol = exp_map(m, x, v, steps=args.steps)
    _emit(sol.to_dict(), out)


def _second_variation_summary(problem, bounds, p, region, mu):
    rng = np.random.default_rng(default_seed())
    dirs = unit_directions(problem.manifold.dim, 64)
    total = consistent = 0
    worst = 0.0
    for i in range(SECOND_VARIATION_SAMPLES):
        x = region[i % len(region)]
        z = mu.points[rng.integers(len(mu))]
        u = dirs[rng.integers(len(dirs))]
        try:
            res = second_variation_diag(problem.manifold, x, z, u, p, bounds)
        except (InvalidInputError, FinslerError):
            continue
        total += 1
        consistent += res.consistent
        spread = max(res.upper - res.lower, 1e-300)
        worst = max(worst, (res.lower - res.dp_second) / spread, (res.dp_second - res.upper) / spread)
    return {"samples": total, "consistent": consistent, "all_consistent": consistent == total,
            "max_relative_violation": worst}


def cmd_diagnose(problem, args, out):
    mu = problem.need_measure()
    m = problem.manifold
    p = float(problem.solver.get("p", 2.0))
    b = problem.curvature_bounds()
    R = problem.radius()
    center = problem.x0_ball()
    ball = bnd.existence_ball(b.C, R)
    result = {"p": p, "R": R, "x0_ball": center, "bounds": {
        "k": b.k, "beta": b.beta, "delta": b.delta, "delta_prime": b.delta_prime,
        "C": b.C, "D": b.D, "inj": b.inj}, "existence_radius": ball}
    result["R_unique"] = bnd.uniqueness_radius(p, b.k, b.delta, b.C) if p > 1 else None
    result["support_condition_eq51"] = bnd.support_condition(R, p, b.k, b.delta, b.C) if p > 1 else None
    result["start_condition"] = bool(solvers.p_energy(m, mu, problem.x0(), p) <= R ** p)
    try:
        result["C_H"] = bnd.step_constant_CH(m, mu, p, b, center, ball)
    except SingularMajorantError as exc:
        result["C_H"] = None
        result["C_H_note"] = str(exc)
    # the convexity margin and the bound check are sampled over the support ball
    region = bnd.ball_grid(m, center, R, per_axis=DIAGNOSE_GRID)
    try:
        result["eta_minus_delta"] = bnd.median_convexity_margin(m, mu, region, b.k, b.delta)
    except InvalidInputError as exc:
        result["eta_minus_delta"] = None
        result["eta_note"] = str(exc)
    result["injectivity"] = bnd.injectivity_conditions(b, p, R)
    result["second_variation"] = (_second_variation_summary(problem, b, p, region, mu)
                                  if p > 1 else None)
    _emit(result, out)


COMMANDS = {"mean": cmd_mean, "median": cmd_median, "distance": cmd_distance,
            "geodesic": cmd_geodesic, "diagnose": cmd_diagnose}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="finsler-means", description="Forward p-means and medians on Finsler charts.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("mean", help="forward p-mean of the measure")
    p.add_argument("file")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--tol", type=float)
    p = sub.add_parser("median", help="forward median by the median flow")
    p.add_argument("file")
    p.add_argument("--trace", action="store_true")
    p = sub.add_parser("distance", help="forward and backward distance between two points")
    p.add_argument("file")
    p.add_argument("--from", dest="from_", required=True)
    p.add_argument("--to", required=True)
    p = sub.add_parser("geodesic", help="sampled geodesic from a point and velocity")
    p.add_argument("file")
    p.add_argument("--from", dest="from_", required=True)
    p.add_argument("--velocity", required=True)
    p.add_argument("--steps", type=int, default=128)
    p = sub.add_parser("diagnose", help="radii, step constant and bound checks")
    p.add_argument("file")
    return parser


def run(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        with open(args.file) as fh:
            problem = Problem(json.load(fh))
        COMMANDS[args.command](problem, args, out)
    except (OSError, json.JSONDecodeError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (InvalidInputError, NondifferentiablePointError, SingularMajorantError) as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_INPUT
    except FinslerError as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
