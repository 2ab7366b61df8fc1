"""Command-line entry point: ``run``, ``compare`` and ``export-vtk``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, bundled_config, load_config
from .fem import NoConvergence, mesh_from_problem, solve_static
from .geometry import DomainError, sample_grid, triangulate, write_points_csv, write_triangles_csv
from .io import (atomic_write_text, atomic_writer, point_hash, read_fields_csv, write_fields_csv,
                 write_history_csv, write_vtk)
from .mechanics import NonPositiveJacobian
from .network import init_network, save_params
from .solvers import LossContext, train, traction_mismatch

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMPARED = ("u_mag", "ux", "uy", "p11", "p12", "p21", "p22")


class PointSetMismatch(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def _config_path(arg: str) -> Path:
    p = Path(arg)
    if p.exists() or p.suffix:
        return p
    return bundled_config(arg)


def execute(cfg: RunConfig, out: Path, log=print) -> dict:
    """Run one configuration and write its artifacts into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    prob = cfg.problem
    sampling = sample_grid(prob.domain, cfg.nx, cfg.ny, cfg.n_boundary, cfg.rule)
    tri = triangulate(sampling)
    write_points_csv(out / "points.csv", sampling)
    write_triangles_csv(out / "triangles.csv", tri)
    x = tri.vertices
    summary = {"method": cfg.method, "name": cfg.name, "profile": cfg.profile, "seed": cfg.seed,
               "n_points": int(len(x)), "n_triangles": int(tri.n_triangles), "point_hash": point_hash(x)}
    log(f"{cfg.method}: {len(x)} points, {tri.n_triangles} triangles")
    if cfg.method == "fem":
        mesh = mesh_from_problem(prob, tri)
        sol = solve_static(mesh, prob.material, cfg.fem_load_steps, cfg.fem_tol_r, cfg.fem_max_iter)
        P = sol.nodal_average(sol.P)
        psi = sol.nodal_average(sol.psi)
        write_fields_csv(out / "fields.csv", x, sol.u, P, psi)
        with atomic_writer(out / "newton_log.csv") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "load", "iter", "residual"])
            for r in sol.log:
                w.writerow([r["step"], repr(r["load"]), r["iter"], repr(r["residual"])])
        summary["newton_iterations"] = len(sol.log)
        u = sol.u
    else:
        params = init_network(cfg.widths, cfg.activation, cfg.seed)

        def progress(rec):
            if rec["iter"] % 100 == 0:
                log(f"  {rec['phase']} {rec['iter']:6d}  loss {rec['total']:.6e}")

        res = train(prob, sampling, tri, params, cfg.schedule, cfg.method, progress)
        if not np.isfinite(res.final.total):
            raise NumericalFailure("training produced a non-finite loss")
        write_history_csv(out / "history.csv", res.history)
        save_params(out / "params.txt", res.params)
        snap = res.snapshot
        P = snap.p_hat if cfg.method == "mdem" else snap.P
        write_fields_csv(out / "fields.csv", x, snap.u, P, snap.psi)
        if cfg.method == "mdem":
            write_fields_csv(out / "fields_constitutive.csv", x, snap.u, snap.P, snap.psi)
        ctx = LossContext(prob, sampling, tri)
        summary.update({
            "iterations": len(res.history),
            "line_search_failures": res.line_search_failures,
            "lbfgs_message": res.lbfgs_message,
            "final": {k: v for k, v in vars(res.final).items()},
            "traction_mismatch_constitutive": traction_mismatch(ctx, res.params, "constitutive"),
        })
        if cfg.method == "mdem":
            summary["traction_mismatch_head"] = traction_mismatch(ctx, res.params, "head")
        u = snap.u
    write_vtk(out / "fields.vtk", x, tri.triangles, {"u": u, "P": P.reshape(-1, 4)}, f"mdem {cfg.method}")
    atomic_write_text(out / "run.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def field_table(fields: dict) -> dict:
    t = {k: fields[k] for k in ("ux", "uy", "p11", "p12", "p21", "p22")}
    t["u_mag"] = np.hypot(fields["ux"], fields["uy"])
    return t


def compare_fields(a: dict, b: dict) -> list[dict]:
    """Errors of run ``a`` against reference ``b`` on a shared point set."""
    xa = np.column_stack([a["x"], a["y"]])
    xb = np.column_stack([b["x"], b["y"]])
    if xa.shape != xb.shape or point_hash(xa) != point_hash(xb):
        raise PointSetMismatch("the two runs do not share the same point set")
    ta, tb = field_table(a), field_table(b)
    rows = []
    for name in COMPARED:
        d = ta[name] - tb[name]
        ref = float(np.linalg.norm(tb[name]))
        err = float(np.linalg.norm(d))
        rel = err / ref if ref > 0 else (0.0 if err == 0 else np.inf)
        k = int(np.argmax(np.abs(d)))
        rows.append({"field": name, "rel_l2": rel, "max_abs": float(np.abs(d[k])),
                     "x_at_max": float(xa[k, 0]), "y_at_max": float(xa[k, 1])})
    return rows


def write_report(path, rows) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["field", "rel_l2", "max_abs", "x_at_max", "y_at_max"])
        for r in rows:
            w.writerow([r["field"]] + [repr(r[k]) for k in ("rel_l2", "max_abs", "x_at_max", "y_at_max")])


def _read_tri(run_dir: Path) -> np.ndarray:
    with open(run_dir / "triangles.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def cmd_run(args, log) -> int:
    overrides = {"run": {"seed": args.seed, "method": args.method}}
    cfg = load_config(_config_path(args.config), args.profile, overrides)
    out = Path(args.out or cfg.out or f"runs/{cfg.name}-{cfg.method}")
    summary = execute(cfg, out, log)
    log(f"wrote {out} ({summary['n_points']} points)")
    return EXIT_OK


def cmd_compare(args, log) -> int:
    a, b = Path(args.run_a), Path(args.run_b)
    rows = compare_fields(read_fields_csv(a / "fields.csv"), read_fields_csv(b / "fields.csv"))
    report = Path(args.out) if args.out else a / f"compare_{b.name}.csv"
    write_report(report, rows)
    log(f"{a} vs {b}")
    log(f"{'field':>6} {'rel L2':>12} {'max abs':>12}   at (x, y)")
    for r in rows:
        log(f"{r['field']:>6} {r['rel_l2']:12.4e} {r['max_abs']:12.4e}   ({r['x_at_max']:.4g}, {r['y_at_max']:.4g})")
    log(f"report: {report}")
    return EXIT_OK


def cmd_export_vtk(args, log) -> int:
    d = Path(args.run_dir)
    out = Path(args.out) if args.out else None
    written = []
    for name in ("fields", "fields_constitutive"):
        src = d / f"{name}.csv"
        if not src.exists():
            continue
        f = read_fields_csv(src)
        x = np.column_stack([f["x"], f["y"]])
        P = np.column_stack([f["p11"], f["p12"], f["p21"], f["p22"]])
        dst = (out if out and name == "fields" else d / f"{name}.vtk")
        write_vtk(dst, x, _read_tri(d), {"u": np.column_stack([f["ux"], f["uy"]]), "P": P, "psi": f["psi"]})
        written.append(dst)
    if not written:
        raise FileNotFoundError(f"{d}: no fields.csv")
    for w in written:
        log(f"wrote {w}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdem", description="Meshfree finite-strain solvers (PINN, DEM, mDEM) and FEM reference.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a TOML configuration")
    r.add_argument("config", help="config path, or the name of a bundled config (uniaxial, localized, beam)")
    r.add_argument("--out", help="output directory")
    r.add_argument("--seed", type=int, help="override run.seed")
    r.add_argument("--profile", choices=("desk", "paper"), help="profile overlay (default: desk)")
    r.add_argument("--method", choices=("pinn", "dem", "mdem", "fem"), help="override run.method")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("compare", help="compare two runs on their shared point set")
    c.add_argument("run_a")
    c.add_argument("run_b", help="reference run")
    c.add_argument("--out", help="report CSV path")
    c.set_defaults(func=cmd_compare)
    e = sub.add_parser("export-vtk", help="rewrite the VTK files of a run directory")
    e.add_argument("run_dir")
    e.add_argument("--out", help="VTK path for the main field file")
    e.set_defaults(func=cmd_export_vtk)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def log(msg):
        print(msg, flush=True)

    try:
        return args.func(args, log)
    except (ConfigError, DomainError, PointSetMismatch, FileNotFoundError) as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoConvergence, NonPositiveJacobian, NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error[numerical]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
