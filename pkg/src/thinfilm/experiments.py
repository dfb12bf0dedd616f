"""Runnable decay-rate experiments and their reports.

Each experiment evolves an initial droplet (or, for symmetry checks, an
eigenmode superposition), extracts an observable time series, fits an
exponential rate and compares it with mu_{l,k} from the exact spectrum.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .fieldio import dump_json
from .simulator import (
    Grid,
    InsufficientWindow,
    SolverConfig,
    discrete_equilibrium,
    evolve,
    evolve_linear,
    measure_rate,
    sample_initial,
)
from .spectrum import Eigenmode, ball_grid, multiplicity, mu_of, spectrum_table
from .symmetry import active_modes, invariant_projection, parse_group
from .transform import DropletField, droplet_from_w, v_to_w

log = logging.getLogger(__name__)

REPORT_SCHEMA = "thinfilm.experiment/1"
RATE_SCHEMA = "thinfilm.rate/1"
FLOOR = 1e-12


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    dim_N: int = 1
    init: str = "shift:0.05"
    observable: str = "com"  # com | mode:l,n,k | norm
    target: tuple = (1, 0)  # (l, k) of the predicted rate
    window: tuple = (1e-9, 1e-2)
    tolerance: float = 0.05  # relative
    r2_min: float = 0.0
    T: float = 3.0
    h: float = 1.0 / 256
    dt: float = 1e-3
    sample_every: float = 0.02
    limit: str = "run"  # subtract the run's discrete limit ("run") or not ("none")
    kind: str = "nonlinear"  # nonlinear | linear
    group: str | None = None
    seed: int = 0
    smallness: float = 0.25
    ball_degree: int = 60
    description: str = ""
    note: str = ""

    @property
    def target_mu(self) -> int:
        return mu_of(self.target[0], self.target[1], self.dim_N)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.dim_N, self.h, self.dt)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["target"] = list(self.target)
        d["window"] = list(self.window)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "target" in d:
            d["target"] = tuple(d["target"])
        if "window" in d:
            d["window"] = tuple(d["window"])
        return cls(**d)


BUILTIN = {
    "stationary-N1": ExperimentSpec(
        "stationary-N1", init="stationary", observable="mode:1,1,0", target=(1, 0), T=0.5,
        limit="none", description="stationary start: odd amplitudes stay below the floor",
    ),
    "com-rate-N1": ExperimentSpec(
        "com-rate-N1", init="shift:0.05", observable="com", target=(1, 0), window=(1e-8, 1e-3),
        tolerance=0.02, T=3.0, limit="none",
        description="center of mass of a shifted droplet decays at mu_{1,0}",
    ),
    "leading-order-N1": ExperimentSpec(
        "leading-order-N1", init="shift:0.05", observable="mode:1,1,0", target=(1, 0),
        tolerance=0.05, T=3.0,
        description="(1,0)-mode amplitude of the perturbation from a shifted start",
    ),
    "centered-dilation-N1": ExperimentSpec(
        "centered-dilation-N1", init="dilate:1.01", observable="norm", target=(0, 1),
        tolerance=0.10, r2_min=0.99, T=0.8,
        description="centered dilated droplet: ||w||_rho decays at mu_{0,1}",
        note="exp(-30 t) reaches the numerical floor after t ~ 0.5; only samples inside the "
             "amplitude window enter the fit, which must reach r^2 >= 0.99",
    ),
    "radial-dilation-N2": ExperimentSpec(
        "radial-dilation-N2", dim_N=2, init="dilate:1.01", observable="norm", target=(0, 1),
        tolerance=0.10, r2_min=0.99, T=0.5, ball_degree=40,
        description="radially symmetric dilated droplet in two dimensions",
    ),
    "cyclic3-linear-N2": ExperimentSpec(
        "cyclic3-linear-N2", dim_N=2, kind="linear", group="cyclic:3", observable="norm",
        target=(3, 0), tolerance=1e-3, T=1.0, window=(1e-14, 1e-4), limit="none", seed=7,
        description="C3-invariant linear superposition decays at the first active eigenvalue",
    ),
}

ACCEPTANCE_SET = ("stationary-N1", "com-rate-N1", "leading-order-N1", "centered-dilation-N1")


# --------------------------------------------------------------------------
# initial data and observables
# --------------------------------------------------------------------------

def initial_cells(init: str, config: SolverConfig, grid: Grid | None = None):
    """Cell values for an initial-condition descriptor.

    stationary | shift:b | dilate:lam | mode:l,n,k:amp | file:path
    """
    grid = grid or Grid(config)
    head, _, rest = init.partition(":")
    if head in ("stationary", "shift", "dilate"):
        return sample_initial(head, config, rest or None, grid)
    if head == "mode":
        idx, _, amp = rest.rpartition(":")
        l, n, k = (int(s) for s in idx.split(","))
        mode = Eigenmode(config.dim_N, l, n, k)
        if config.radial and l > 0:
            raise ValueError("radial runs only admit l = 0 modes")
        w = mode.normalized_polynomial() * float(amp)
        drop = droplet_from_w(w, 4001)
        return drop(grid.centers)
    if head == "file":
        from .fieldio import read_field

        ff = read_field(rest)
        drop = DropletField(ff.dim, ff.coords, ff.values)
        return drop(grid.centers)
    raise ValueError(f"unknown initial condition {init!r}")


def _w_fields(snapshots, grid_w, smallness):
    return [v_to_w(s, grid_w, threshold=smallness) for s in snapshots]


def observable_series(snapshots, observable: str, config: SolverConfig, limit: str = "run",
                      ball_degree: int = 60, smallness: float | None = 0.25, grid: Grid | None = None):
    """Return (values, raw_values, info) for an observable over snapshots.

    With ``limit="run"`` the perturbation of the run's own discrete limit
    (reached by relaxing the last snapshot) is subtracted, which removes
    the O(h^2) offset between the discrete and the exact stationary state.
    """
    N = config.dim_N
    grid = grid or Grid(config)
    info = {}
    if observable == "com":
        vals = np.array([s.center_of_mass() for s in snapshots])
        return vals, vals.copy(), info
    bg = ball_grid(N, ball_degree)
    ws = _w_fields(snapshots, bg, smallness)
    w_inf = np.zeros(len(bg.nodes))
    if limit == "run":
        v_lim = discrete_equilibrium(config, start=snapshots[-1].values, grid=grid)
        w_inf = v_to_w(grid.field(v_lim), bg, threshold=smallness).values
        info["limit_w_rho_norm"] = float(np.sqrt(bg.integrate(w_inf ** 2)))
    if observable.startswith("mode:"):
        l, n, k = (int(s) for s in observable[5:].split(","))
        psi = Eigenmode(N, l, n, k)(bg.nodes)
        vals = np.array([bg.integrate(psi * (w.values - w_inf)) for w in ws])
        raw = np.array([bg.integrate(psi * w.values) for w in ws])
    elif observable == "norm":
        vals = np.array([np.sqrt(bg.integrate((w.values - w_inf) ** 2)) for w in ws])
        raw = np.array([w.l2_rho() for w in ws])
    else:
        raise ValueError(f"unknown observable {observable!r}")
    return vals, raw, info


def _fit_or_none(t, a, window):
    try:
        return measure_rate(t, a, window)
    except InsufficientWindow:
        return None


def rate_report(times, values, target_mu: int, window, raw=None) -> dict:
    fit = _fit_or_none(times, values, window)
    out = {
        "schema": RATE_SCHEMA,
        "target_mu": target_mu,
        "fitted_exponent": None if fit is None else fit.exponent,
        "r_squared": None if fit is None else fit.r_squared,
        "window": None if fit is None else list(fit.window),
        "amplitude_window": list(window),
        "n_samples": 0 if fit is None else fit.n_samples,
    }
    if raw is not None:
        rfit = _fit_or_none(times, raw, window)
        out["raw_fitted_exponent"] = None if rfit is None else rfit.exponent
    return out


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

def _run_linear(spec: ExperimentSpec):
    """Random superposition projected onto the group-invariant modes."""
    N = spec.dim_N
    group = parse_group(spec.group, N)
    rng = np.random.default_rng(spec.seed)
    coeffs = {}
    for l in range(0, 7):
        for k in range(0, 3):
            for n in range(1, multiplicity(l, N) + 1):
                if (l, k) != (0, 0):
                    coeffs[(l, n, k)] = float(rng.normal())
    coeffs = invariant_projection(group, coeffs, N)
    times = np.round(np.arange(0, spec.T + 1e-12, spec.sample_every), 12)
    traj = evolve_linear(coeffs, times, N)
    # rho-norm of the superposition (modes are rho-orthogonal)
    norms = {key: Eigenmode(N, *key).rho_norm() for key in coeffs}
    vals = np.sqrt(sum((traj[key] * norms[key]) ** 2 for key in coeffs))
    table = spectrum_table(N, 400)
    act = active_modes(group, table)
    info = {
        "group": group.name,
        "smallest_active_mu": act.smallest_active_mu,
        "inactive_degrees": act.inactive_degrees(6),
        "inactive_amplitude_max": float(max(
            (abs(c) for (l, n, k), c in coeffs.items() if l in act.inactive_degrees(6)), default=0.0)),
    }
    return times, vals, vals.copy(), info


def _run_nonlinear(spec: ExperimentSpec):
    cfg = spec.solver_config()
    grid = Grid(cfg)
    v0 = initial_cells(spec.init, cfg, grid)
    times = np.round(np.arange(0, spec.T + 1e-12, spec.sample_every), 12)
    traj = evolve(v0, spec.T, cfg, times, grid)
    vals, raw, info = observable_series(
        traj.snapshots, spec.observable, cfg, spec.limit, spec.ball_degree, spec.smallness, grid
    )
    info["mass_drift"] = traj.mass_drift()
    info["min_value"] = float(min(traj.min_values))
    info["steps"] = traj.steps
    return np.asarray(traj.times), vals, raw, info


def run_experiment(spec: ExperimentSpec, out_dir=None, figures: bool = True) -> dict:
    if spec.kind == "linear":
        times, vals, raw, info = _run_linear(spec)
    else:
        times, vals, raw, info = _run_nonlinear(spec)
    target = spec.target_mu
    rep = rate_report(times, vals, target, spec.window, raw if spec.limit == "run" else None)
    trivial = bool(np.all(np.abs(vals) < FLOOR))
    if trivial:
        passed = True
        rel = None
    elif rep["fitted_exponent"] is None:
        passed = False
        rel = None
    else:
        rel = abs(rep["fitted_exponent"] - target) / target
        passed = rel <= spec.tolerance and rep["r_squared"] >= spec.r2_min
    if spec.kind == "linear":
        passed = passed and info["smallest_active_mu"] == target and info["inactive_amplitude_max"] == 0.0
    report = {
        "schema": REPORT_SCHEMA,
        "name": spec.name,
        "spec": spec.as_dict(),
        "target": {"l": spec.target[0], "k": spec.target[1], "mu": target},
        "rate": rep,
        "relative_error": rel,
        "note": spec.note,
        "trivial_pass": trivial,
        "passed": bool(passed),
        "info": info,
    }
    if out_dir is not None:
        out = Path(out_dir) / spec.name
        out.mkdir(parents=True, exist_ok=True)
        dump_json(report, out / "report.json")
        with (out / "series.csv").open("w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "value", "raw"])
            for t, a, r in zip(times, vals, raw):
                wr.writerow([repr(float(t)), repr(float(a)), repr(float(r))])
        if figures:
            from .plotting import decay_figure
            from .simulator import RateFit

            fit = None
            if rep["fitted_exponent"] is not None:
                fit = RateFit(rep["fitted_exponent"], rep["r_squared"], tuple(rep["window"]), rep["n_samples"])
            decay_figure(out / "decay.png", times, vals, fit, target, spec.name,
                         raw if spec.limit == "run" else None)
    return report


def resolve_specs(names, overrides: dict | None = None) -> list[ExperimentSpec]:
    """Built-in specs by name ("all", "acceptance" allowed), with per-name overrides."""
    overrides = overrides or {}
    out = []
    for name in names:
        if name == "all":
            out.extend(resolve_specs(list(BUILTIN), overrides))
            continue
        if name == "acceptance":
            out.extend(resolve_specs(list(ACCEPTANCE_SET), overrides))
            continue
        if name in BUILTIN:
            spec = BUILTIN[name]
        elif name in overrides and isinstance(overrides[name], dict):
            spec = ExperimentSpec.from_dict({"name": name, **overrides[name]})
            out.append(spec)
            continue
        else:
            raise KeyError(f"unknown experiment {name!r}")
        if name in overrides:
            spec = replace(spec, **_coerce(overrides[name]))
        out.append(spec)
    return out


def _coerce(d: dict) -> dict:
    d = dict(d)
    for key in ("target", "window"):
        if key in d:
            d[key] = tuple(d[key])
    d.pop("name", None)
    return d


def load_config(path) -> dict:
    """JSON config: {"experiments": [...names...], "overrides": {name: {field: value}}}."""
    return json.loads(Path(path).read_text())
