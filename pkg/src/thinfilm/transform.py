"""Changes of variables between physical, confined and perturbation pictures.

Physical (u, y, tau) <-> confined (v, x, t) is an exact rescaling. Confined
droplet v <-> perturbation w on the unit ball goes through the von Mises
type map

    z = x / sqrt(2 sqrt(v) + |x|^2),   1 + w(z) = sqrt(2 sqrt(v) + |x|^2),

equivalently x = (1 + w(z)) z and v(x) = rho(z)^2 (1 + w(z))^4.

Droplets are handled as one-dimensional profiles: N = 1 on the full line,
or radially symmetric profiles in N >= 2 (sampled in the radius).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .linops import Polynomial
from .spectrum import Eigenmode, WeightedGrid, ball_grid, ball_volume, sphere_area

DEFAULT_SMALLNESS = 0.1


class TransformError(ValueError):
    pass


class NotSelfSimilarError(TransformError):
    """v is too far from the stationary droplet for the inversion."""


# --------------------------------------------------------------------------
# self-similar frame
# --------------------------------------------------------------------------

def gamma_of(N: int) -> float:
    return 2.0 * (N + 2)


def alpha_of(N: int) -> float:
    return 1.0 / (8 * (N + 4) * (N + 2))


def unit_profile_integral(N: int) -> float:
    """int_{B_1} (1 - |w|^2)^2 dw = |S^{N-1}| 8 / (N (N+2) (N+4))."""
    area = 2.0 if N == 1 else sphere_area(N)
    return area * 8.0 / (N * (N + 2) * (N + 4))


def sigma_from_mass(M: float, N: int) -> float:
    """Scale constant of the Smyth-Hill profile carrying mass M."""
    if M <= 0:
        raise ValueError("mass must be positive")
    return (M / (alpha_of(N) * unit_profile_integral(N))) ** (2.0 / (N + 4))


def mass_from_sigma(sigma: float, N: int) -> float:
    return alpha_of(N) * sigma ** ((N + 4) / 2) * unit_profile_integral(N)


def stationary_mass(N: int) -> float:
    """Mass of v_*(x) = (1 - |x|^2)_+^2 / 4."""
    vol = 2.0 if N == 1 else ball_volume(N)
    return 2 * vol / ((N + 2) * (N + 4))


@dataclass(frozen=True)
class SelfSimilarFrame:
    dim_N: int
    M: float

    @property
    def gamma(self) -> float:
        return gamma_of(self.dim_N)

    @property
    def alpha_N(self) -> float:
        return alpha_of(self.dim_N)

    @property
    def sigma_M(self) -> float:
        return sigma_from_mass(self.M, self.dim_N)

    @classmethod
    def from_sigma(cls, sigma: float, N: int) -> "SelfSimilarFrame":
        return cls(N, mass_from_sigma(sigma, N))

    def as_dict(self) -> dict:
        return {"M": self.M, "gamma": self.gamma, "sigma_M": self.sigma_M}

    def tau_of(self, t):
        return np.exp((self.dim_N + 4) * self.gamma * np.asarray(t, dtype=float))

    def t_of(self, tau):
        tau = np.asarray(tau, dtype=float)
        if np.any(tau <= 0):
            raise ValueError("tau must be positive")
        return np.log(tau) / ((self.dim_N + 4) * self.gamma)

    def _scales(self, tau):
        N = self.dim_N
        s = self.sigma_M
        xs = s ** -0.5 * tau ** (-1.0 / (N + 4))
        vs = (N + 4) * self.gamma / s ** 2 * tau ** (N / (N + 4))
        return xs, vs

    def smyth_hill(self, tau, y):
        """u_*(tau, y) = tau^{-N/(N+4)} alpha (sigma - |y|^2 tau^{-2/(N+4)})_+^2."""
        N = self.dim_N
        y = np.asarray(y, dtype=float)
        r2 = y ** 2 if y.ndim <= 1 else np.sum(y ** 2, axis=-1)
        inner = np.maximum(self.sigma_M - r2 * tau ** (-2.0 / (N + 4)), 0.0)
        return tau ** (-N / (N + 4)) * self.alpha_N * inner ** 2


def physical_to_confined(y, u, tau: float, frame: SelfSimilarFrame):
    """Return (x, v, t) for samples u(tau, y)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    xs, vs = frame._scales(tau)
    return xs * np.asarray(y, dtype=float), vs * np.asarray(u, dtype=float), float(frame.t_of(tau))


def confined_to_physical(x, v, t: float, frame: SelfSimilarFrame):
    """Return (y, u, tau) for samples v(t, x)."""
    tau = float(frame.tau_of(t))
    xs, vs = frame._scales(tau)
    return np.asarray(x, dtype=float) / xs, np.asarray(v, dtype=float) / vs, tau


# --------------------------------------------------------------------------
# stationary profile and exact families
# --------------------------------------------------------------------------

def V_star(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (1 - x ** 2)


def v_star(x):
    """(1 - |x|^2)_+^2 / 4 for 1-D or radial coordinates."""
    x = np.asarray(x, dtype=float)
    return 0.25 * np.maximum(1 - x ** 2, 0.0) ** 2


def v_star_translated(x, b):
    return v_star(np.asarray(x, dtype=float) - b)


def v_star_dilated(r, lam: float, N: int):
    """lam^{-N} v_*(r / lam): same mass, support radius lam."""
    return lam ** (-N) * v_star(np.asarray(r, dtype=float) / lam)


# --------------------------------------------------------------------------
# droplet and perturbation fields
# --------------------------------------------------------------------------

def _edge(coord_dry, coord_wet, wet_coords, wet_sqrt):
    """Locate where sqrt(v) vanishes between a dry and a wet node.

    sqrt(v) vanishes linearly at a zero-contact-angle edge, so it is
    extrapolated from the nearest wet nodes (quadratic through three nodes,
    linear through two) and the root is clamped to the bracketing cell,
    kept a hair away from the wet node so spline knots stay distinct.
    """
    lo, hi = sorted((coord_wet + 1e-3 * (coord_dry - coord_wet), coord_dry))
    deg = min(len(wet_coords), 3) - 1
    if deg >= 1:
        c = np.polyfit(np.asarray(wet_coords[:deg + 1]) - coord_wet, wet_sqrt[:deg + 1], deg)
        roots = np.roots(c)
        roots = roots[np.abs(roots.imag) < 1e-12].real + coord_wet
        if len(roots):
            root = roots[np.argmin(np.abs(roots - coord_wet))]
            return float(np.clip(root, lo, hi))
    return 0.5 * (coord_dry + coord_wet)


@dataclass
class DropletField:
    """Sampled nonnegative profile v on a 1-D or radial grid.

    ``coords`` are x (N = 1, full line) or r >= 0 (radial, N >= 2).
    ``cell_volumes`` (optional) turns integrals into discrete sums, as used
    for finite-volume solver output.
    """

    dim_N: int
    coords: np.ndarray
    values: np.ndarray
    time: float = 0.0
    cell_volumes: np.ndarray | None = None
    frame: SelfSimilarFrame | None = None
    dry_tol: float = 1e-24
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.coords.shape != self.values.shape or self.coords.ndim != 1:
            raise ValueError("coords and values must be 1-D arrays of equal length")
        order = np.argsort(self.coords, kind="stable")
        if not np.all(order == np.arange(len(order))):
            self.coords = self.coords[order]
            self.values = self.values[order]
            if self.cell_volumes is not None:
                self.cell_volumes = np.asarray(self.cell_volumes)[order]
        if self.radial and np.any(self.coords < 0):
            raise ValueError("radial coordinates must be nonnegative")
        if np.any(self.values < -1e-14 * max(1.0, np.max(np.abs(self.values)))):
            raise ValueError("droplet values must be nonnegative")
        self.values = np.maximum(self.values, 0.0)
        self.support  # connectivity check

    @property
    def radial(self) -> bool:
        return self.dim_N >= 2

    @property
    def support_mask(self) -> np.ndarray:
        """Wet nodes: v above ``dry_tol`` times its maximum.

        Draining cells of a degenerate-mobility solver decay towards zero
        without reaching it; such round-off residue counts as dry.
        """
        return self.values > self.dry_tol * float(np.max(self.values, initial=0.0))

    @property
    def support(self) -> tuple[int, int]:
        """Index range [i0, i1] of the (connected) wet set."""
        idx = np.flatnonzero(self.support_mask)
        if len(idx) == 0:
            raise TransformError("empty support")
        if np.any(np.diff(idx) != 1):
            raise TransformError("support is not connected")
        if self.radial and idx[0] != 0:
            raise TransformError("radial support must contain the origin")
        return int(idx[0]), int(idx[-1])

    def edges(self) -> tuple[float, float]:
        """Left/right contact points (for radial fields: (-R, R))."""
        if "edges" in self._cache:
            return self._cache["edges"]
        c, v = self.coords, self.values
        s = np.sqrt(np.where(self.support_mask, v, 0.0))
        i0, i1 = self.support
        if i1 + 1 < len(c):
            right = _edge(c[i1 + 1], c[i1], c[i1::-1][:3], s[i1::-1][:3])
        else:
            right = float(c[-1])
        if self.radial:
            left = -right
        elif i0 > 0:
            left = _edge(c[i0 - 1], c[i0], c[i0:i0 + 3], s[i0:i0 + 3])
        else:
            left = float(c[0])
        self._cache["edges"] = (left, right)
        return left, right

    def sqrt_spline(self) -> CubicSpline:
        """Cubic spline of sqrt(v) on [edge_l, edge_r], zero at both edges."""
        if "spline" in self._cache:
            return self._cache["spline"]
        i0, i1 = self.support
        left, right = self.edges()
        xs = self.coords[i0:i1 + 1]
        ss = np.sqrt(self.values[i0:i1 + 1])
        if self.radial:
            keep = xs > 0
            xs = np.concatenate([-xs[keep][::-1], xs])
            ss = np.concatenate([ss[keep][::-1], ss])
        # edge knots only where the wet set is bracketed by a dry node
        lo = [left] if left < xs[0] else []
        hi = [right] if right > xs[-1] else []
        pts = np.concatenate([lo, xs, hi])
        vals = np.concatenate([[0.0] * len(lo), ss, [0.0] * len(hi)])
        spl = CubicSpline(pts, vals)
        self._cache["spline"] = spl
        return spl

    def sqrt_v(self, x) -> np.ndarray:
        """Interpolated sqrt(v), clamped at 0 and extended by 0 off the support."""
        x = np.asarray(x, dtype=float)
        left, right = self.edges()
        out = np.zeros_like(x)
        inside = (x > left) & (x < right)
        out[inside] = np.maximum(self.sqrt_spline()(x[inside]), 0.0)
        return out

    def sqrt_v_derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left, right = self.edges()
        out = np.zeros_like(x)
        inside = (x > left) & (x < right)
        out[inside] = self.sqrt_spline()(x[inside], 1)
        return out

    def __call__(self, x) -> np.ndarray:
        return self.sqrt_v(x) ** 2

    # ---- integrals ---------------------------------------------------------

    def _interval_nodes(self, order: int = 8):
        """Gauss-Legendre nodes/weights on each spline interval inside the support."""
        spl = self.sqrt_spline()
        brk = spl.x
        if self.radial:
            brk = brk[brk >= 0]
            if brk[0] > 0:
                brk = np.concatenate([[0.0], brk])
        g, gw = leggauss(order)
        a, b = brk[:-1], brk[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        weights = (half[:, None] * gw[None, :]).ravel()
        if self.radial:
            weights = weights * sphere_area(self.dim_N) * nodes ** (self.dim_N - 1)
        return nodes, weights

    def integrate(self, f=None) -> float:
        """int v f dx over the support (f of the 1-D / radial coordinate)."""
        if self.cell_volumes is not None:
            fx = 1.0 if f is None else f(self.coords)
            return float(np.sum(self.cell_volumes * self.values * fx))
        x, w = self._interval_nodes()
        fx = 1.0 if f is None else f(x)
        return float(np.sum(w * self.sqrt_v(x) ** 2 * fx))

    def mass(self) -> float:
        return self.integrate()

    def center_of_mass(self) -> float:
        """int x v dx (zero by symmetry for radial fields)."""
        if self.radial:
            return 0.0
        return self.integrate(lambda x: x)

    def with_values(self, values, time=None) -> "DropletField":
        return replace(self, values=np.asarray(values, dtype=float),
                       time=self.time if time is None else time, _cache={})


@dataclass
class PerturbationField:
    """w sampled at the nodes of a ball grid, with its gradient (N, n)."""

    dim_N: int
    grid: WeightedGrid
    values: np.ndarray
    gradient: np.ndarray
    time: float = 0.0
    radial_profile: tuple | None = None  # (r, w(r), w'(r)) when radial / 1-D

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def grad_sup(self) -> float:
        return float(np.max(np.sqrt(np.sum(self.gradient ** 2, axis=0))))

    def smallness(self) -> float:
        return self.sup() + self.grad_sup()

    def jacobian_factor(self) -> np.ndarray:
        """1 + w + z.grad w at the nodes."""
        return 1 + self.values + np.sum(self.nodes.T * self.gradient, axis=0)

    def l2_rho(self) -> float:
        if self.grid.sigma != 1:
            raise ValueError("needs a sigma=1 grid")
        return float(np.sqrt(self.grid.integrate(self.values ** 2)))

    @classmethod
    def from_polynomial(cls, w: Polynomial, grid: WeightedGrid, time: float = 0.0) -> "PerturbationField":
        g = np.array([d(grid.nodes) for d in w.gradient()])
        return cls(w.dim, grid, w(grid.nodes), g, time)


# --------------------------------------------------------------------------
# w -> v
# --------------------------------------------------------------------------

def jacobian_factor(w: Polynomial, z) -> np.ndarray:
    """(1 + w + z.grad w)(1 + w)^{N-1}: Jacobian determinant of z -> x."""
    z = np.asarray(z, dtype=float)
    wv = w(z)
    zg = sum(z[:, i] * w.deriv(i)(z) for i in range(w.dim))
    return (1 + wv + zg) * (1 + wv) ** (w.dim - 1)


def w_to_v(w, z=None):
    """Push w forward: returns (x, v) with x = (1 + w(z)) z, v = rho(z)^2 (1 + w(z))^4.

    ``w`` is a :class:`Polynomial` (evaluated at the points ``z``) or a
    :class:`PerturbationField` (its own nodes).
    """
    if isinstance(w, PerturbationField):
        z = w.nodes
        wv = w.values
        jac = w.jacobian_factor()
    else:
        if z is None:
            raise ValueError("points required for a polynomial w")
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        wv = w(z)
        jac = 1 + wv + sum(z[:, i] * w.deriv(i)(z) for i in range(w.dim))
    if np.any(jac <= 0) or np.any(1 + wv <= 0):
        raise TransformError("Jacobian factor 1 + w + z.grad w must stay positive")
    rho = 0.5 * (1 - np.sum(z ** 2, axis=1))
    x = (1 + wv)[:, None] * z
    v = rho ** 2 * (1 + wv) ** 4
    return x, v


def droplet_from_w(w: Polynomial, n: int = 2001, time: float = 0.0) -> DropletField:
    """DropletField sampled at the pushforward of a uniform 1-D / radial grid.

    For N >= 2 ``w`` must be radial (it is evaluated along the first axis).
    """
    N = w.dim
    if N == 1:
        s = np.linspace(-1.0, 1.0, n)
        z = s[:, None]
    else:
        s = np.linspace(0.0, 1.0, n)
        z = np.zeros((n, N))
        z[:, 0] = s
    x, v = w_to_v(w, z)
    coords = x[:, 0]
    # one dry node beyond each edge so the support is bracketed
    if N == 1:
        coords = np.concatenate([[coords[0] - (coords[1] - coords[0])], coords,
                                 [coords[-1] + (coords[-1] - coords[-2])]])
        v = np.concatenate([[0.0], v, [0.0]])
    else:
        coords = np.concatenate([coords, [coords[-1] + (coords[-1] - coords[-2])]])
        v = np.concatenate([v, [0.0]])
    return DropletField(N, coords, v, time)


def pullback_integral(w: Polynomial, f=None, degree: int | None = None) -> float:
    """int v(x) f(x) dx evaluated on the ball via the change of variables.

    v(x(z)) = rho^2 (1 + w)^4 and dx = (1 + w + z.grad w)(1 + w)^{N-1} dz; for
    polynomial w and f the integrand is a polynomial, so the rule is exact.
    """
    N = w.dim
    if degree is None:
        degree = 4 + (N + 4) * w.degree + 8 + (0 if f is None else 2 * w.degree + 8)
    grid = ball_grid(N, degree, sigma=2)
    z = grid.nodes
    wv = w(z)
    fx = 1.0 if f is None else f((1 + wv)[:, None] * z)
    return grid.integrate((1 + wv) ** 4 * jacobian_factor(w, z) * fx)


def mass_identity_rhs(w: Polynomial) -> float:
    """(2/(N+4)) int (1 + w)^{N+4} rho dz."""
    N = w.dim
    grid = ball_grid(N, (N + 4) * w.degree + 2, sigma=1)
    return 2.0 / (N + 4) * grid.integrate((1 + w(grid.nodes)) ** (N + 4))


# --------------------------------------------------------------------------
# v -> w
# --------------------------------------------------------------------------

def _solve_preimage(drop: DropletField, zc: np.ndarray, theta=0.5, tol=1e-12, max_iter=200):
    """Solve x = z sqrt(2 sqrt(v(x)) + x^2) for 1-D / radial coordinates zc."""
    left, right = drop.edges()
    x = np.where(zc >= 0, zc * right, -zc * left)
    for it in range(max_iter):
        F = np.sqrt(2 * drop.sqrt_v(x) + x ** 2)
        x_new = (1 - theta) * x + theta * zc * F
        err = np.max(np.abs(x_new - x)) if len(x) else 0.0
        x = x_new
        if err < tol:
            return x, it + 1
    raise NotSelfSimilarError(f"preimage iteration did not converge (last update {err:.2e})")


def v_to_w(
    drop: DropletField,
    grid: WeightedGrid,
    threshold: float | None = DEFAULT_SMALLNESS,
    theta: float = 0.5,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> PerturbationField:
    """Perturbation w at the ball grid nodes for a droplet close to v_*."""
    N = drop.dim_N
    if grid.dim_N != N:
        raise ValueError("grid and droplet dimension differ")
    z = grid.nodes
    zc = z[:, 0] if N == 1 else np.linalg.norm(z, axis=1)
    # solve once per distinct coordinate (angular nodes share radii)
    uniq, inv = np.unique(np.round(zc, 15), return_inverse=True)
    xu, _ = _solve_preimage(drop, uniq, theta, tol, max_iter)
    s = drop.sqrt_v(xu)
    ds = drop.sqrt_v_derivative(xu)
    F = np.sqrt(2 * s + xu ** 2)
    w_u = F - 1
    # dw/dz = F' dx/dz with dx/dz = F / (1 - z F'), F' = (s' + x) / F
    Fp = (ds + xu) / F
    dwdz = Fp * F / (1 - uniq * Fp)
    w = w_u[inv]
    if N == 1:
        grad = dwdz[inv][None, :]
    else:
        r = zc
        safe = np.where(r > 0, r, 1.0)
        grad = np.where(r > 0, dwdz[inv] / safe, 0.0)[None, :] * z.T
    field_ = PerturbationField(N, grid, w, grad, drop.time, (uniq, w_u, dwdz))
    if threshold is not None and field_.smallness() > threshold:
        raise NotSelfSimilarError(
            f"||w||_inf + ||grad w||_inf = {field_.smallness():.3g} exceeds {threshold}"
        )
    if np.any(field_.jacobian_factor() <= 0):
        raise TransformError("Jacobian factor not positive")
    return field_


def sqrt_v_gradient_identity(w_field: PerturbationField) -> np.ndarray:
    """(1 + w)/(1 + w + z.grad w) grad w, the gradient of sqrt(v) - V_* at x(z)."""
    return (1 + w_field.values) / w_field.jacobian_factor() * w_field.gradient


# --------------------------------------------------------------------------
# amplitudes and diagnostics
# --------------------------------------------------------------------------

def _mode_on_line(mode: Eigenmode, coord):
    """psi evaluated along the first axis (1-D coordinate or radius)."""
    pts = np.zeros((len(coord), mode.dim_N))
    pts[:, 0] = coord
    return mode(pts)


def mode_amplitude(field_, mode: Eigenmode) -> float:
    """<psi, w>_rho for a PerturbationField, int (v - v_*) psi dx for a DropletField."""
    if field_.dim_N != mode.dim_N:
        raise ValueError("field and mode dimension differ")
    if isinstance(field_, PerturbationField):
        if field_.grid.sigma != 1:
            raise ValueError("needs a sigma=1 grid")
        return field_.grid.integrate(mode(field_.nodes) * field_.values)
    if isinstance(field_, Polynomial):
        raise TypeError("wrap a polynomial w in a PerturbationField")
    drop = field_
    if drop.radial and mode.l > 0:
        return 0.0
    phys = drop.integrate(lambda c: _mode_on_line(mode, c))
    return phys - stationary_moment(mode)


def stationary_moment(mode: Eigenmode) -> float:
    """int v_* psi dx (exact Gauss rule on the ball)."""
    grid = ball_grid(mode.dim_N, mode.degree, sigma=2)
    return grid.integrate(mode(grid.nodes))


@dataclass(frozen=True)
class Diagnostics:
    mass_defect: float
    center_of_mass: float
    lipschitz_closeness: float
    slope_defect: float

    def as_dict(self) -> dict:
        return {
            "mass_defect": self.mass_defect,
            "center_of_mass": self.center_of_mass,
            "lipschitz_closeness": self.lipschitz_closeness,
            "slope_defect": self.slope_defect,
        }


def diagnostics(drop: DropletField, refine: int = 4) -> Diagnostics:
    """Mass defect, center of mass, ||sqrt v - V_*||_{W^{1,inf}(supp v)} and ||grad v + 2 x sqrt v||_inf.

    Suprema are sampled between the wet nodes (``refine`` points per
    interval); the two edge intervals, where sqrt(v) is extrapolated rather
    than interpolated, are left out.
    """
    i0, i1 = drop.support
    wet = drop.coords[i0:i1 + 1]
    if drop.radial:
        wet = np.concatenate([-wet[wet > 0][::-1], wet])
    t = np.linspace(0.0, 1.0, refine, endpoint=False)
    x = np.concatenate([(wet[:-1, None] + t[None, :] * np.diff(wet)[:, None]).ravel(), wet[-1:]])
    s = drop.sqrt_v(x)
    ds = drop.sqrt_v_derivative(x)
    lip = max(float(np.max(np.abs(s - V_star(x)))), float(np.max(np.abs(ds + x))))
    slope = float(np.max(np.abs(2 * s * ds + 2 * x * s)))
    return Diagnostics(
        mass_defect=drop.mass() - stationary_mass(drop.dim_N),
        center_of_mass=drop.center_of_mass(),
        lipschitz_closeness=lip,
        slope_defect=slope,
    )
