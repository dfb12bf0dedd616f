"""Command line entry point: ``thinfilm <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .fieldio import dump_json, read_field, write_field

log = logging.getLogger("thinfilm")


def _emit(obj, fmt: str, rows=None, header=None, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        return
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    out.write(buf.getvalue())


def _triple(text: str) -> tuple[int, int, int]:
    parts = [int(s) for s in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected l,n,k")
    return tuple(parts)


def _pair(text: str) -> tuple[float, float]:
    a, b = (float(s) for s in text.split(","))
    return a, b


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_spectrum(args) -> int:
    from .spectrum import spectrum_table

    table = spectrum_table(args.dim, args.mu_max)
    d = table.as_dict()
    rows = [
        [e["mu"], e["multiplicity"], m["l"], m["n"], m["k"], m["lambda"]]
        for e in d["entries"] for m in e["modes"]
    ]
    _emit(d, args.format, rows, ["mu", "multiplicity", "l", "n", "k", "lambda"])
    return 0


def cmd_molien(args) -> int:
    from .symmetry import load_group, molien_harmonic, molien_polynomial, parse_group

    group = load_group(args.custom) if args.custom else parse_group(args.group, args.dim)
    series = (molien_harmonic if args.variant == "h" else molien_polynomial)(group, args.lmax)
    d = series.as_dict()
    d["dim"] = group.dim_N
    d["order"] = group.order
    rows = [[l, c] for l, c in enumerate(series.coeffs)]
    _emit(d, args.format, rows, ["l", "dim"])
    return 0


def _frame_from(meta: dict, args, dim: int):
    from .transform import SelfSimilarFrame

    if args.mass is not None:
        return SelfSimilarFrame(dim, args.mass)
    if "frame" in meta:
        return SelfSimilarFrame(dim, meta["frame"]["M"])
    raise SystemExit("a frame is needed: pass --mass or use a sidecar with 'frame'")


def cmd_transform(args) -> int:
    from .spectrum import Eigenmode, ball_grid
    from .transform import (
        PerturbationField,
        confined_to_physical,
        diagnostics,
        mode_amplitude,
        physical_to_confined,
        v_to_w,
        w_to_v,
    )

    ff = read_field(args.input)
    dim = ff.dim
    op = args.op
    if op == "p2c":
        frame = _frame_from(ff.meta, args, dim)
        tau = args.tau if args.tau is not None else ff.meta.get("tau")
        if tau is None:
            raise SystemExit("p2c needs --tau")
        x, v, t = physical_to_confined(ff.coords, ff.values, tau, frame)
        write_field(args.output, x, v, dim, t, "droplet", frame)
        return 0
    if op == "c2p":
        frame = _frame_from(ff.meta, args, dim)
        y, u, tau = confined_to_physical(ff.coords, ff.values, ff.time, frame)
        write_field(args.output, y, u, dim, ff.time, "droplet", frame, {"tau": tau, "picture": "physical"})
        return 0
    if op == "v2w":
        drop = ff.to_droplet()
        grid = ball_grid(dim, args.degree)
        pf = v_to_w(drop, grid, threshold=args.smallness)
        coords = grid.nodes[:, 0] if dim == 1 else grid.nodes
        write_field(args.output, coords, pf.values, dim, ff.time, "perturbation", ff.meta.get("frame"),
                    {"ball_degree": args.degree})
        return 0
    if op == "w2v":
        if ff.kind != "perturbation":
            raise SystemExit("w2v expects a perturbation field")
        z = ff.coords if ff.coords.ndim == 2 else ff.coords[:, None]
        grid_deg = ff.meta.get("ball_degree")
        if grid_deg is None:
            raise SystemExit("w2v needs the sidecar key 'ball_degree' to rebuild gradients")
        grid = ball_grid(dim, grid_deg)
        if z.shape != grid.nodes.shape or not np.allclose(z, grid.nodes):
            raise SystemExit("w2v: samples are not the nodes of the recorded ball grid")
        pf = _perturbation_from_samples(ff, grid)
        x, v = w_to_v(pf)
        coords = x[:, 0] if dim == 1 else np.linalg.norm(x, axis=1)
        order = np.argsort(coords)
        write_field(args.output, coords[order], v[order], dim, ff.time, "droplet", ff.meta.get("frame"))
        return 0
    if op == "diag":
        d = diagnostics(ff.to_droplet()).as_dict()
        _emit(d, "json")
        return 0
    if op == "amplitude":
        if args.mode is None:
            raise SystemExit("amplitude needs --mode l,n,k")
        mode = Eigenmode(dim, *args.mode)
        if ff.kind == "perturbation":
            grid = ball_grid(dim, ff.meta.get("ball_degree", 60))
            pf = PerturbationField(dim, grid, ff.values, np.zeros((dim, len(ff.values))), ff.time)
            val, side = mode_amplitude(pf, mode), "w"
        else:
            val, side = mode_amplitude(ff.to_droplet(), mode), "v"
        _emit({"mode": list(args.mode), "side": side, "amplitude": val, "time": ff.time}, "json")
        return 0
    raise SystemExit(f"unknown op {op}")


def _perturbation_from_samples(ff, grid):
    """Rebuild gradients of a 1-D / radial perturbation profile by splines."""
    from .linops import profile_spline
    from .transform import PerturbationField

    z = grid.nodes
    if ff.dim == 1:
        coord = z[:, 0]
        spl = profile_spline(coord, ff.values, radial=False)
        grad = spl(coord, 1)[None, :]
    else:
        r = np.linalg.norm(z, axis=1)
        spl = profile_spline(r, ff.values, radial=True)
        safe = np.where(r > 0, r, 1.0)
        grad = np.where(r > 0, spl(r, 1) / safe, 0.0)[None, :] * z.T
    return PerturbationField(ff.dim, grid, ff.values, grad, ff.time)


def cmd_simulate(args) -> int:
    from .experiments import initial_cells
    from .simulator import Grid, SolverConfig, evolve
    from .transform import SelfSimilarFrame

    cfg = SolverConfig(args.dim, args.h, args.dt, args.xmax)
    grid = Grid(cfg)
    v0 = initial_cells(args.init, cfg, grid)
    times = np.round(np.arange(0, args.T + 1e-12, args.every), 12)
    traj = evolve(v0, args.T, cfg, times, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frame = SelfSimilarFrame(args.dim, args.mass) if args.mass else None
    files = []
    solver = {"h": cfg.h, "dt": cfg.dt, "X_max": cfg.X_max}
    for i, snap in enumerate(traj.snapshots):
        name = f"snap_{i:05d}.csv"
        write_field(out / name, snap.coords, snap.values, args.dim, snap.time, "droplet", frame,
                    {"solver": solver})
        files.append(name)
    manifest = {
        "schema": "thinfilm.trajectory/1",
        "dim": args.dim,
        "init": args.init,
        "solver": solver,
        "times": traj.times,
        "files": files,
        "masses": traj.masses,
        "centers_of_mass": traj.centers_of_mass,
        "mass_drift": traj.mass_drift(),
        "min_value": float(min(traj.min_values)),
    }
    dump_json(manifest, out / "trajectory.json")
    print(f"wrote {len(files)} snapshots to {out}", file=sys.stderr)
    return 0


def cmd_rates(args) -> int:
    from .experiments import observable_series, rate_report
    from .simulator import Grid, SolverConfig
    from .spectrum import mu_of

    d = Path(args.traj)
    man = json.loads((d / "trajectory.json").read_text())
    dim = man["dim"]
    solver = man["solver"]
    cfg = SolverConfig(dim, solver["h"], solver["dt"], solver["X_max"])
    grid = Grid(cfg)
    snaps = [read_field(d / f).to_droplet() for f in man["files"]]
    obs = args.observable
    if args.target is not None:
        l, k = (int(s) for s in args.target.split(","))
    elif obs == "com":
        l, k = 1, 0
    elif obs.startswith("mode:"):
        ll, _, kk = (int(s) for s in obs[5:].split(","))
        l, k = ll, kk
    else:
        raise SystemExit("--target l,k is required for this observable")
    limit = "none" if obs == "com" or args.no_limit else "run"
    vals, raw, info = observable_series(snaps, obs, cfg, limit, args.degree, args.smallness, grid)
    rep = rate_report(man["times"], vals, mu_of(l, k, dim), tuple(args.window),
                      raw if limit == "run" else None)
    rep["observable"] = obs
    rep["target_lk"] = [l, k]
    rep.update(info)
    _emit(rep, "json")
    return 0


def cmd_norms(args) -> int:
    from .linops import norms_profile
    from .spectrum import ball_grid
    from .transform import v_to_w

    results = []
    for path in args.files:
        ff = read_field(path)
        dim = ff.dim
        grid = ball_grid(dim, args.degree)
        if ff.kind == "droplet":
            pf = v_to_w(ff.to_droplet(), grid, threshold=args.smallness)
            r, w = pf.radial_profile[0], pf.radial_profile[1]
            nodes, values = (r, w)
        else:
            nodes = ff.coords if ff.coords.ndim == 1 else np.linalg.norm(ff.coords, axis=1)
            values = ff.values
            if dim > 1:
                keep = np.unique(np.round(nodes, 14), return_index=True)[1]
                nodes, values = nodes[keep], values[keep]
        rep = norms_profile(nodes, values, dim, ball_grid(dim, 40), radial=dim > 1)
        results.append({"file": str(path), "time": ff.time, **rep.as_dict()})
    if args.format == "json":
        _emit({"schema": "thinfilm.norms/1", "fields": results}, "json")
    else:
        keys = ["file", "time", "l2_rho", "h_norm", "w_norm", "sup", "grad_sup", "rho_hess_sup",
                "rho2_third_sup", "scale_invariant_h"]
        _emit(None, "csv", [[r[k] for k in keys] for r in results], keys)
    return 0


def _run_one(payload):
    from .experiments import ExperimentSpec, run_experiment

    spec_dict, out, figures = payload
    return run_experiment(ExperimentSpec.from_dict(spec_dict), out, figures)


def cmd_experiment(args) -> int:
    from .experiments import BUILTIN, load_config, resolve_specs

    if args.list:
        for name, spec in BUILTIN.items():
            print(f"{name:24s} target mu={spec.target_mu:<5d} {spec.description}")
        return 0
    names = list(args.names)
    overrides = {}
    if args.config:
        cfg = load_config(args.config)
        names = names or cfg.get("experiments", [])
        overrides = cfg.get("overrides", {})
    if not names:
        names = ["acceptance"]
    specs = resolve_specs(names, overrides)
    payloads = [(s.as_dict(), args.out, not args.no_figures) for s in specs]
    if args.jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_one, payloads))
    else:
        reports = [_run_one(p) for p in payloads]
    summary = {
        "schema": "thinfilm.summary/1",
        "version": __version__,
        "results": [
            {"name": r["name"], "passed": r["passed"], "target_mu": r["target"]["mu"],
             "fitted_exponent": r["rate"]["fitted_exponent"], "trivial_pass": r["trivial_pass"]}
            for r in reports
        ],
        "all_passed": all(r["passed"] for r in reports),
    }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        dump_json(summary, Path(args.out) / "summary.json")
    for r in reports:
        fe = r["rate"]["fitted_exponent"]
        fe = "n/a" if fe is None else f"{fe:.4f}"
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}: target {r['target']['mu']}, fitted {fe}")
    return 0 if summary["all_passed"] else 1


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thinfilm", description="Thin-film asymptotics toolkit")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", help="eigenvalues of L^2 + N L")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--mu-max", type=float, required=True)
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("molien", help="Molien series of a finite group")
    s.add_argument("--group", default="cyclic:1", help="cyclic:n | dihedral:n | tetra | octa | icosa")
    s.add_argument("--custom", help="JSON file with 'elements' or 'generators'")
    s.add_argument("--dim", type=int, choices=[2, 3], default=2)
    s.add_argument("--lmax", type=int, default=12)
    s.add_argument("--variant", choices=["h", "p"], default="h")
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.set_defaults(func=cmd_molien)

    s = sub.add_parser("transform", help="change of variables on a field file")
    s.add_argument("--op", required=True, choices=["p2c", "c2p", "v2w", "w2v", "diag", "amplitude"])
    s.add_argument("--input", "-i", required=True)
    s.add_argument("--output", "-o")
    s.add_argument("--mode", type=_triple)
    s.add_argument("--tau", type=float)
    s.add_argument("--mass", type=float)
    s.add_argument("--degree", type=int, default=60, help="ball quadrature degree for v2w")
    s.add_argument("--smallness", type=float, default=0.1)
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("simulate", help="evolve the confined thin film equation")
    s.add_argument("--init", default="stationary",
                   help="stationary | shift:b | dilate:lam | file:path | mode:l,n,k:amp")
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--h", type=float, default=1.0 / 256)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--xmax", type=float, default=1.5)
    s.add_argument("--every", type=float, default=0.02, help="snapshot interval")
    s.add_argument("--mass", type=float, help="physical mass recorded in the frame")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("rates", help="fit a decay rate over a trajectory directory")
    s.add_argument("--traj", required=True)
    s.add_argument("--observable", default="com", help="com | mode:l,n,k | norm")
    s.add_argument("--target", help="l,k of the predicted eigenvalue")
    s.add_argument("--window", type=_pair, default=(1e-9, 1e-2))
    s.add_argument("--degree", type=int, default=60)
    s.add_argument("--smallness", type=float, default=0.25)
    s.add_argument("--no-limit", action="store_true", help="do not subtract the run's discrete limit")
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("norms", help="norms of perturbation fields")
    s.add_argument("files", nargs="+")
    s.add_argument("--degree", type=int, default=60)
    s.add_argument("--smallness", type=float, default=0.25)
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.set_defaults(func=cmd_norms)

    s = sub.add_parser("experiment", help="run rate experiments")
    s.add_argument("names", nargs="*", help="experiment names, 'acceptance' or 'all'")
    s.add_argument("--config", help="JSON config file")
    s.add_argument("--out", help="output directory for reports, series and figures")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--no-figures", action="store_true")
    s.add_argument("--list", action="store_true")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
