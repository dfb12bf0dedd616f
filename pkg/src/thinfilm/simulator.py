"""Finite-volume solver for the confined thin film equation

    v_t + div(v grad Lap v) - gamma div(x v) = 0

in one dimension or for radially symmetric profiles, written as the
gradient flow v_t = div(m grad xi), xi = -Lap v + gamma |x|^2 / 2.

Implicit Euler in time with a Newton solve. The face mobility is the
arithmetic mean of the neighbouring values, capped by twice the upwind
value; this keeps the scheme positive and lets the support move.

Also: exact linear evolution in the eigenbasis and the rate fit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .linops import fit_exponential
from .spectrum import mu_of, sphere_area
from .transform import DropletField, gamma_of, v_star

log = logging.getLogger(__name__)


class NewtonDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dim_N: int = 1
    h: float = 1.0 / 256
    dt: float = 1e-3
    X_max: float = 1.5
    newton_tol: float = 1e-12
    max_newton: int = 30
    dt_min: float = 1e-10
    adaptive: bool = True

    def __post_init__(self):
        if self.h <= 0 or self.dt <= 0:
            raise ValueError("h and dt must be positive")
        if self.X_max <= 1:
            raise ValueError("X_max must exceed 1")
        cells = self.span / self.h
        if abs(cells - round(cells)) > 1e-9:
            raise ValueError("domain length must be a multiple of h")

    @property
    def radial(self) -> bool:
        return self.dim_N >= 2

    @property
    def span(self) -> float:
        return self.X_max if self.radial else 2 * self.X_max

    @property
    def n_cells(self) -> int:
        return int(round(self.span / self.h))

    @property
    def gamma(self) -> float:
        return gamma_of(self.dim_N)


class Grid:
    """Cell-centred grid with face areas and cell volumes."""

    def __init__(self, config: SolverConfig):
        self.config = config
        n, h = config.n_cells, config.h
        lo = 0.0 if config.radial else -config.X_max
        self.faces = lo + h * np.arange(n + 1)
        self.centers = 0.5 * (self.faces[:-1] + self.faces[1:])
        N = config.dim_N
        if config.radial:
            area = sphere_area(N)
            self.areas = area * self.faces[1:-1] ** (N - 1)
            self.volumes = area * (self.faces[1:] ** N - self.faces[:-1] ** N) / N
        else:
            self.areas = np.ones(n - 1)
            self.volumes = np.full(n, h)
        # face differences (interior faces x cells)
        self.G = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")
        # divergence of face fluxes -> cells, zero flux at both ends
        self.Div = (sp.diags(1.0 / self.volumes) @ (self.G.T @ sp.diags(-self.areas))).tocsr()
        # K v = -Lap_h v (Neumann ends)
        self.K = (-(self.Div @ (self.G / h))).tocsr()
        self.GK = (self.G @ self.K).tocsr()
        self.potential = 0.5 * config.gamma * self.centers ** 2

    def xi(self, v):
        return self.K @ v + self.potential

    def mass(self, v) -> float:
        return float(np.dot(self.volumes, v))

    def field(self, v, t=0.0) -> DropletField:
        return DropletField(self.config.dim_N, self.centers.copy(), np.array(v, dtype=float), t,
                            cell_volumes=self.volumes.copy())


def _mobility(v, g):
    """Face mobility and its derivative pattern.

    Returns m, dm/dv_left, dm/dv_right for the interior faces.
    """
    vl, vr = v[:-1], v[1:]
    avg = 0.5 * (vl + vr)
    up_right = g > 0  # mass moves from the right cell to the left one
    vup = np.where(up_right, vr, vl)
    cap = 2.0 * np.maximum(vup, 0.0)
    use_avg = avg <= cap
    m = np.maximum(np.where(use_avg, avg, cap), 0.0)
    live = m > 0
    dl = np.where(use_avg, 0.5, np.where(up_right, 0.0, 2.0)) * live
    dr = np.where(use_avg, 0.5, np.where(up_right, 2.0, 0.0)) * live
    return m, dl, dr


def rhs(grid: Grid, v):
    xi = grid.xi(v)
    g = grid.G @ xi
    m, _, _ = _mobility(v, g)
    return grid.Div @ (m * g / grid.config.h)


def _newton_step(grid: Grid, v_old, dt, v_guess=None):
    cfg = grid.config
    n = len(v_old)
    v = v_old.copy() if v_guess is None else v_guess.copy()
    h = cfg.h
    eye = sp.identity(n, format="csc")
    scale = max(1.0, float(np.max(np.abs(v_old))))
    GK = grid.GK
    for it in range(cfg.max_newton):
        xi = grid.xi(v)
        g = grid.G @ xi
        m, dl, dr = _mobility(v, g)
        R = v - v_old - dt * (grid.Div @ (m * g / h))
        res = float(np.max(np.abs(R)))
        if not np.isfinite(res):
            break
        # d(m g)/dv = diag(m) G K + diag(g) dm/dv
        nf = n - 1
        dM = sp.csr_matrix(
            (np.concatenate([dl * g, dr * g]),
             (np.concatenate([np.arange(nf), np.arange(nf)]),
              np.concatenate([np.arange(nf), np.arange(1, n)]))),
            shape=(nf, n),
        )
        J = eye - (dt / h) * (grid.Div @ (sp.diags(m) @ GK + dM))
        delta = splu(J.tocsc()).solve(-R)
        v = v + delta
        step = float(np.max(np.abs(delta)))
        log.debug("newton %d: residual %.3e, update %.3e", it, res, step)
        if step < cfg.newton_tol * scale:
            return v, it + 1
    raise NewtonDivergence(f"Newton failed (dt={dt:.3g}, residual {res:.3g})")


def step_confined(v, dt: float, config: SolverConfig, grid: Grid | None = None):
    """One implicit Euler step; raises NewtonDivergence or returns v' >= 0."""
    grid = grid or Grid(config)
    v = np.asarray(v, dtype=float)
    v_new, _ = _newton_step(grid, v, dt)
    floor = -1e-13 * float(np.max(v))
    if np.min(v_new) < floor:
        raise NewtonDivergence(f"negative value {np.min(v_new):.3g} (dt={dt:.3g})")
    # round-off sized negatives only; mass is untouched to that accuracy
    return np.maximum(v_new, 0.0)


@dataclass
class Trajectory:
    config: SolverConfig
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # DropletField
    masses: list = field(default_factory=list)
    centers_of_mass: list = field(default_factory=list)
    min_values: list = field(default_factory=list)
    steps: int = 0

    def mass_drift(self) -> float:
        m = np.asarray(self.masses)
        return float(np.max(np.abs(m - m[0])) / abs(m[0]))

    def values(self) -> np.ndarray:
        return np.array([s.values for s in self.snapshots])


def evolve(v0, T: float, config: SolverConfig, output_times=None, grid: Grid | None = None,
           record_every_step: bool = False) -> Trajectory:
    """Integrate from v0 (cell values) to time T, storing snapshots at ``output_times``."""
    grid = grid or Grid(config)
    v = np.array(v0, dtype=float)
    if np.any(v < 0):
        raise ValueError("initial data must be nonnegative")
    if output_times is None:
        output_times = [0.0, T]
    outs = sorted(set(float(t) for t in output_times if 0 <= t <= T + 1e-12))
    traj = Trajectory(config)

    def record(t, v):
        traj.times.append(float(t))
        traj.snapshots.append(grid.field(v, t))
        traj.masses.append(grid.mass(v))
        traj.centers_of_mass.append(0.0 if config.radial else float(np.dot(grid.volumes, grid.centers * v)))
        traj.min_values.append(float(np.min(v)))

    t = 0.0
    dt = config.dt
    k = 0
    if outs and outs[0] <= 0:
        record(0.0, v)
        k = 1
    while k < len(outs):
        target = outs[k]
        step = min(dt, target - t)
        if step <= 1e-14:
            record(t, v)
            k += 1
            continue
        try:
            v = step_confined(v, step, config, grid)
        except NewtonDivergence as exc:
            if not config.adaptive or dt / 2 < config.dt_min:
                raise
            log.debug("halving dt: %s", exc)
            dt /= 2
            continue
        t += step
        traj.steps += 1
        if dt < config.dt and config.adaptive:
            dt = min(config.dt, dt * 1.5)
        if abs(t - target) <= 1e-12:
            t = target
            record(t, v)
            k += 1
        elif record_every_step:
            record(t, v)
    return traj


def sample_initial(kind: str, config: SolverConfig, param=None, grid: Grid | None = None):
    """Cell values for stationary / shift:b / dilate:lam initial data."""
    grid = grid or Grid(config)
    x = grid.centers
    N = config.dim_N
    if kind == "stationary":
        return v_star(x)
    if kind == "shift":
        if config.radial:
            raise ValueError("shifted data are not radial")
        return v_star(x - float(param))
    if kind == "dilate":
        lam = float(param)
        return lam ** (-N) * v_star(x / lam)
    raise ValueError(f"unknown initial condition {kind!r}")


def discrete_equilibrium(config: SolverConfig, mass: float | None = None, grid: Grid | None = None,
                         tol: float = 1e-13, max_steps: int = 400, start=None):
    """Stationary state of the discrete scheme.

    Found by implicit Euler with a geometrically growing step, either from
    ``start`` (e.g. the last snapshot of a run, giving that run's limit) or
    from the sampled stationary profile rescaled to ``mass``.
    """
    grid = grid or Grid(config)
    if start is not None:
        v = np.array(start, dtype=float)
    else:
        v = v_star(grid.centers)
        v *= mass / grid.mass(v)
    dt = config.dt
    for _ in range(max_steps):
        try:
            v_new = step_confined(v, dt, config, grid)
        except NewtonDivergence:
            dt /= 4
            continue
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change < tol:
            return v
        dt = min(dt * 2, 10.0)
    raise RuntimeError("discrete equilibrium iteration did not settle")


# --------------------------------------------------------------------------
# linear evolution and rate fitting
# --------------------------------------------------------------------------

def evolve_linear(coeffs: dict, times, N: int) -> dict:
    """c_{l,n,k}(t) = c_{l,n,k}(0) exp(-mu_{l,k} t) for each (l, n, k)."""
    times = np.asarray(times, dtype=float)
    return {
        key: c * np.exp(-float(mu_of(key[0], key[2], N)) * times)
        for key, c in coeffs.items()
    }


def evolve_linear_log(coeffs: dict, times, N: int) -> dict:
    """(sign, log|c_{l,n,k}(t)|) per mode; stays exact after exp(-mu t) underflows."""
    times = np.asarray(times, dtype=float)
    out = {}
    for key, c in coeffs.items():
        if c == 0:
            out[key] = (0.0, np.full(times.shape, -np.inf))
            continue
        mu = float(mu_of(key[0], key[2], N))
        out[key] = (float(np.sign(c)), np.log(abs(c)) - mu * times)
    return out


@dataclass(frozen=True)
class RateFit:
    exponent: float
    r_squared: float
    window: tuple[float, float]
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "fitted_exponent": self.exponent,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "n_samples": self.n_samples,
        }


class InsufficientWindow(ValueError):
    pass


def measure_rate(times, amplitudes, window=(1e-9, 1e-2), floor: float = 1e-12) -> RateFit:
    """Slope of log|a| against t over samples whose |a| lies in ``window``.

    Samples below ``floor`` are dropped; the fitted segment is the longest
    contiguous run of samples inside the amplitude window.
    """
    t = np.asarray(times, dtype=float)
    a = np.abs(np.asarray(amplitudes, dtype=float))
    ok = (a >= max(window[0], floor)) & (a <= window[1])
    # longest contiguous run
    best, start = (0, 0), None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    i0, i1 = best
    if i1 - i0 < 4:
        raise InsufficientWindow(f"only {i1 - i0} usable samples in window {window}")
    fit = fit_exponential(t[i0:i1], a[i0:i1])
    return RateFit(fit.exponent, fit.r_squared, (float(t[i0]), float(t[i1 - 1])), i1 - i0)
