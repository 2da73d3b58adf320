"""Command line front end: fit, path, cv, simulate and structure commands.

All matrices travel as dense CSV with a header row, written with 17
significant digits so that parsing our own output reproduces the same
float64 values exactly.  Scalar diagnostics go to JSON sidecars.  Every
run writes (and prints) the resolved configuration for reproducibility.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.  Failures emit one machine-parsable JSON line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import selection, simulate, solver, structure as structure_mod
from .model import (
    DataSet,
    NumericalError,
    PenaltyPair,
    compute_suff_stats,
    standardize,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def write_matrix(path: Path, m: np.ndarray, prefix: str) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    header = ",".join(f"{prefix}{j + 1}" for j in range(m.shape[1]))
    np.savetxt(path, m, fmt="%.17g", delimiter=",", header=header, comments="")


def read_matrix(path: Path) -> np.ndarray:
    try:
        m = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise exc
    except Exception as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return m


def _parse_grid_l1(spec: str) -> tuple[int, float]:
    try:
        count, ratio = spec.split(":")
        count, ratio = int(count), float(ratio)
    except ValueError as exc:
        raise ConfigError(f"--grid-l1 expects N:MIN_RATIO, got {spec!r}") from exc
    if count < 1 or not 0 < ratio <= 1:
        raise ConfigError(f"invalid --grid-l1 value {spec!r}")
    return count, ratio


def _parse_grid_l2(spec: str) -> np.ndarray:
    try:
        vals = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise ConfigError(f"--grid-l2 expects comma-separated numbers") from exc
    if (vals < 0).any():
        raise ConfigError("--grid-l2 values must be nonnegative")
    return vals


def _resolve_structure(spec: str | None, p: int) -> structure_mod.StructureMatrix:
    if spec is None or spec == "identity":
        return structure_mod.identity_structure(p)
    kind, _, arg = spec.partition(":")
    if kind == "chain":
        order = int(arg) if arg else 1
        return structure_mod.chain_laplacian(p, order)
    if kind == "genetic":
        if not arg:
            raise ConfigError("--structure genetic:MAPFILE needs a map path")
        gmap = structure_mod.read_genetic_map(arg)
        built = structure_mod.genetic_precision(gmap)
        if built.p != p:
            raise ConfigError(
                f"genetic map has {built.p} markers but x has {p} columns"
            )
        return built
    if kind == "hamming":
        try:
            k, ell = (int(v) for v in arg.split(","))
        except ValueError as exc:
            raise ConfigError("--structure hamming:k,ell") from exc
        built = structure_mod.hamming_laplacian(k, ell)
        if built.p != p:
            raise ConfigError(
                f"hamming structure is {built.p}x{built.p} but x has {p} columns"
            )
        return built
    if kind == "file":
        if not arg:
            raise ConfigError("--structure file:PATH needs a path")
        m = read_matrix(Path(arg))
        if m.shape != (p, p):
            raise ConfigError(f"structure file is {m.shape}, expected ({p}, {p})")
        return structure_mod.StructureMatrix(0.5 * (m + m.T), "custom")
    raise ConfigError(f"unknown structure spec {spec!r}")


def _load_data(args) -> DataSet:
    x = read_matrix(Path(args.x))
    y = read_matrix(Path(args.y))
    data = DataSet(x=x, y=y)
    if not args.no_standardize:
        data = standardize(data, scale_x=args.scale_x)
    return data


def _make_grid(args, stats) -> solver.PenaltyGrid:
    count, ratio = _parse_grid_l1(args.grid_l1)
    l2 = _parse_grid_l2(args.grid_l2)
    top = solver.lambda1_max(stats)
    if top <= 0:
        top = 1.0
    return solver.PenaltyGrid(np.geomspace(top, ratio * top, count), l2)


def _echo_config(args, out: Path) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    config["command"] = args.command
    text = json.dumps(config, sort_keys=True, default=str)
    print(text)
    (out / "config.json").write_text(text + "\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(args) -> int:
    out = _outdir(args)
    data = _load_data(args)
    struct = _resolve_structure(args.structure, data.p)
    pen = PenaltyPair(args.lambda1, args.lambda2)
    opts = solver.SolverOptions(outer_tol=args.tol, max_outer=args.max_outer)
    fit = solver.fit(data, struct, pen, opts)
    stats = compute_suff_stats(data)
    df = selection.degrees_of_freedom(fit, stats, struct, pen.lambda2)
    loglik = selection.log_likelihood(fit, stats)
    write_matrix(out / "omega_xy.csv", fit.omega_xy, "y")
    write_matrix(out / "omega_yy.csv", fit.omega_yy, "y")
    write_matrix(out / "B.csv", fit.b, "y")
    write_matrix(out / "R.csv", fit.r, "y")
    (out / "fit.json").write_text(json.dumps({
        "lambda1": pen.lambda1,
        "lambda2": pen.lambda2,
        "objective": fit.objective_value,
        "loglik": loglik,
        "df": df,
        "aic": -2 * loglik + 2 * df,
        "bic": -2 * loglik + float(np.log(stats.n)) * df,
        "iterations": fit.n_outer_iters,
        "converged": fit.converged,
        "kkt_residual": solver.kkt_residual(fit, stats, struct, pen),
        "support_size": fit.support_size,
    }, indent=2, sort_keys=True) + "\n")
    _echo_config(args, out)
    return 0


def cmd_path(args) -> int:
    out = _outdir(args)
    data = _load_data(args)
    struct = _resolve_structure(args.structure, data.p)
    stats = compute_suff_stats(data)
    grid = _make_grid(args, stats)
    opts = solver.SolverOptions(outer_tol=args.tol, max_outer=args.max_outer)
    path = solver.fit_path_from_stats(stats, struct, grid, opts,
                                      n_threads=args.threads)
    lines = ["lambda1,lambda2,df,aic,bic,loglik,support_size"]
    for cell in path.cells:
        lines.append(
            f"{cell.lambda1:.17g},{cell.lambda2:.17g},{cell.df:.17g},"
            f"{cell.aic:.17g},{cell.bic:.17g},{cell.loglik:.17g},"
            f"{cell.fit.support_size}"
        )
    (out / "path.csv").write_text("\n".join(lines) + "\n")
    if args.save_coefs:
        for i, cell in enumerate(path.cells):
            write_matrix(out / f"omega_xy_cell{i:04d}.csv", cell.fit.omega_xy, "y")
    _echo_config(args, out)
    return 0


def cmd_cv(args) -> int:
    out = _outdir(args)
    data = _load_data(args)
    struct = _resolve_structure(args.structure, data.p)
    stats = compute_suff_stats(data)
    grid = _make_grid(args, stats)
    opts = solver.SolverOptions(outer_tol=args.tol, max_outer=args.max_outer)
    report = selection.cross_validate(data, struct, grid, k=args.folds,
                                      seed=args.seed, opts=opts,
                                      n_threads=args.threads)
    lines = ["lambda1,lambda2,pe_mean,pe_se"]
    for i2, l2 in enumerate(grid.lambda2_values):
        for i1, l1 in enumerate(grid.lambda1_values):
            lines.append(
                f"{l1:.17g},{l2:.17g},"
                f"{report.pe_mean[i1, i2]:.17g},{report.pe_se[i1, i2]:.17g}"
            )
    (out / "cv.csv").write_text("\n".join(lines) + "\n")
    (out / "best_pair.json").write_text(json.dumps({
        "lambda1": report.best_pair[0],
        "lambda2": report.best_pair[1],
        "pe_mean": float(report.pe_mean[report.best_index]),
        "pe_se": float(report.pe_se[report.best_index]),
        "folds": args.folds,
        "seed": args.seed,
    }, indent=2, sort_keys=True) + "\n")
    _echo_config(args, out)
    return 0


PRESETS = {
    "bump-univariate": dict(p=100, q=1, n_train=120, n_test=1000,
                            coef="bump", sigma2=5.0),
    "sparse-multivariate": dict(p=40, q=5, n_train=50, n_test=1000,
                                coef="random", support_size=25, tau=0.9),
}


def cmd_simulate(args) -> int:
    out = _outdir(args)
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}"
            )
        params = dict(PRESETS[args.preset])
        for key, val in params.items():
            setattr(args, key, val)
    else:
        params = dict(p=args.p, q=args.q, n_train=args.n_train,
                      n_test=args.n_test, coef=args.coef,
                      support_size=args.support_size, tau=args.tau,
                      sigma2=args.sigma2)
    spec = simulate.SimSpec(seed=args.seed, **params)
    train, test, truth = simulate.gen_dataset(spec)
    write_matrix(out / "X_train.csv", train.x, "x")
    write_matrix(out / "Y_train.csv", train.y, "y")
    write_matrix(out / "X_test.csv", test.x, "x")
    write_matrix(out / "Y_test.csv", test.y, "y")
    write_matrix(out / "omega_xy_true.csv", truth.omega_xy, "y")
    write_matrix(out / "R_true.csv", truth.r, "y")
    write_matrix(out / "B_true.csv", truth.b, "y")
    _echo_config(args, out)
    return 0


def cmd_structure(args) -> int:
    out = _outdir(args)
    sources = [s for s in (args.structure,
                           "identity" if args.identity else None,
                           f"chain:{args.chain}" if args.chain else None,
                           f"genetic:{args.genetic}" if args.genetic else None,
                           f"hamming:{args.hamming}" if args.hamming else None)
               if s is not None]
    if len(sources) != 1:
        raise ConfigError("exactly one structure source must be specified")
    spec = sources[0]
    if spec.startswith(("identity", "chain")) and not args.p:
        raise ConfigError("--p is required for identity/chain structures")
    p = args.p or 0
    if spec.startswith("hamming"):
        _, _, arg = spec.partition(":")
        k, _ = (int(v) for v in arg.split(","))
        p = 4 ** k
    elif spec.startswith("genetic"):
        _, _, arg = spec.partition(":")
        p = structure_mod.read_genetic_map(arg).p
    struct = _resolve_structure(spec, p)
    write_matrix(out / "L.csv", struct.dense(), "l")
    _echo_config(args, out)
    return 0


def _add_common(parser, with_data=True, with_grid=False):
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on lambda2-sweep / fold concurrency")
    if with_data:
        parser.add_argument("--x", required=True, help="predictor CSV (n x p)")
        parser.add_argument("--y", required=True, help="response CSV (n x q)")
        parser.add_argument("--structure", default=None,
                            help="identity | chain:k | genetic:mapfile | "
                                 "hamming:k,ell | file:path")
        parser.add_argument("--no-standardize", action="store_true",
                            help="assume inputs are already centered/scaled")
        parser.add_argument("--scale-x", action="store_true",
                            help="also scale predictor columns")
        parser.add_argument("--tol", type=float, default=1e-7)
        parser.add_argument("--max-outer", type=int, default=200)
    if with_grid:
        parser.add_argument("--grid-l1", default="50:0.01",
                            help="N:MIN_RATIO log-spaced lambda1 grid")
        parser.add_argument("--grid-l2", default="0,0.01,0.1,1,10",
                            help="comma-separated lambda2 values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cggmreg",
        description="Sparse structured multivariate regression "
                    "via conditional Gaussian graphical models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="single fit at one penalty pair")
    _add_common(p_fit)
    p_fit.add_argument("--lambda1", type=float, required=True)
    p_fit.add_argument("--lambda2", type=float, default=0.0)
    p_fit.set_defaults(func=cmd_fit)

    p_path = sub.add_parser("path", help="regularization path over a grid")
    _add_common(p_path, with_grid=True)
    p_path.add_argument("--save-coefs", action="store_true",
                        help="write per-cell coefficient files")
    p_path.set_defaults(func=cmd_path)

    p_cv = sub.add_parser("cv", help="K-fold cross-validation over a grid")
    _add_common(p_cv, with_grid=True)
    p_cv.add_argument("--folds", type=int, default=5)
    p_cv.set_defaults(func=cmd_cv)

    p_sim = sub.add_parser("simulate", help="generate synthetic datasets")
    _add_common(p_sim, with_data=False)
    p_sim.add_argument("--preset", default=None,
                       help=f"one of {sorted(PRESETS)}")
    p_sim.add_argument("--p", type=int, default=40)
    p_sim.add_argument("--q", type=int, default=5)
    p_sim.add_argument("--n-train", type=int, default=50)
    p_sim.add_argument("--n-test", type=int, default=1000)
    p_sim.add_argument("--coef", choices=("random", "bump"), default="random")
    p_sim.add_argument("--support-size", type=int, default=25)
    p_sim.add_argument("--tau", type=float, default=0.0)
    p_sim.add_argument("--sigma2", type=float, default=1.0)
    p_sim.set_defaults(func=cmd_simulate)

    p_struct = sub.add_parser("structure", help="emit a structure matrix CSV")
    _add_common(p_struct, with_data=False)
    p_struct.add_argument("--structure", default=None,
                          help="identity | chain:k | genetic:mapfile | "
                               "hamming:k,ell | file:path")
    p_struct.add_argument("--identity", action="store_true")
    p_struct.add_argument("--chain", type=int, nargs="?", const=1, default=None,
                          metavar="ORDER")
    p_struct.add_argument("--genetic", default=None, metavar="MAPFILE")
    p_struct.add_argument("--hamming", default=None, metavar="K,ELL")
    p_struct.add_argument("--p", type=int, default=None)
    p_struct.set_defaults(func=cmd_structure)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        _fail("config", str(exc))
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        _fail("numerical", str(exc))
        return EXIT_NUMERICAL
    except OSError as exc:
        _fail("io", str(exc))
        return EXIT_IO


def _fail(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
