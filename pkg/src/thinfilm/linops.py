"""Shared numerical kernels.

Dense multivariate polynomials with exact differentiation, spline helpers
for sampled one-dimensional / radial profiles, the norm evaluators used on
the unit ball, and the log-linear exponential fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import signal, stats
from scipy.interpolate import CubicSpline, make_interp_spline

_POLYVAL = {1: P.polyval, 2: P.polyval2d, 3: P.polyval3d}


class Polynomial:
    """Polynomial in ``dim`` variables stored as a dense coefficient array.

    ``coef[i, j, k]`` multiplies ``x**i * y**j * z**k``. Arithmetic and
    differentiation are exact up to floating point rounding of the
    coefficients.
    """

    __slots__ = ("coef", "dim")

    def __init__(self, coef, dim: int | None = None):
        coef = np.asarray(coef, dtype=float)
        if dim is None:
            dim = coef.ndim
        if coef.ndim != dim:
            raise ValueError(f"coefficient array has {coef.ndim} axes, expected {dim}")
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.coef = coef
        self.dim = dim

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, dim: int) -> "Polynomial":
        return cls(np.full((1,) * dim, float(value)), dim)

    @classmethod
    def coordinate(cls, axis: int, dim: int) -> "Polynomial":
        shape = [1] * dim
        shape[axis] = 2
        c = np.zeros(shape)
        idx = [0] * dim
        idx[axis] = 1
        c[tuple(idx)] = 1.0
        return cls(c, dim)

    @classmethod
    def norm_squared(cls, dim: int) -> "Polynomial":
        """|x|^2."""
        out = cls.constant(0.0, dim)
        for a in range(dim):
            xa = cls.coordinate(a, dim)
            out = out + xa * xa
        return out

    # arithmetic -------------------------------------------------------
    def _pad_to(self, shape) -> np.ndarray:
        pad = [(0, s - c) for s, c in zip(shape, self.coef.shape)]
        return np.pad(self.coef, pad)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.dim)
        self._check(other)
        shape = tuple(max(a, b) for a, b in zip(self.coef.shape, other.coef.shape))
        return Polynomial(self._pad_to(shape) + other._pad_to(shape), self.dim)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.coef, self.dim)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            return Polynomial(signal.convolve(self.coef, other.coef, method="direct"), self.dim)
        return Polynomial(self.coef * float(other), self.dim)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Polynomial(self.coef / float(scalar), self.dim)

    def __pow__(self, n: int):
        out = Polynomial.constant(1.0, self.dim)
        for _ in range(int(n)):
            out = out * self
        return out

    def _check(self, other):
        if other.dim != self.dim:
            raise ValueError("polynomials live in different dimensions")

    # calculus ---------------------------------------------------------
    def deriv(self, axis: int, order: int = 1) -> "Polynomial":
        if self.coef.shape[axis] <= order:
            return Polynomial.constant(0.0, self.dim)
        return Polynomial(P.polyder(self.coef, m=order, axis=axis), self.dim)

    def gradient(self) -> list["Polynomial"]:
        return [self.deriv(a) for a in range(self.dim)]

    def hessian(self) -> list[list["Polynomial"]]:
        g = self.gradient()
        return [[g[a].deriv(b) for b in range(self.dim)] for a in range(self.dim)]

    def laplacian(self) -> "Polynomial":
        out = Polynomial.constant(0.0, self.dim)
        for a in range(self.dim):
            out = out + self.deriv(a, 2)
        return out

    def euler(self) -> "Polynomial":
        """x . grad p, i.e. every monomial scaled by its total degree."""
        grids = np.meshgrid(*[np.arange(s) for s in self.coef.shape], indexing="ij")
        return Polynomial(self.coef * sum(grids), self.dim)

    @property
    def degree(self) -> int:
        nz = np.argwhere(np.abs(self.coef) > 0)
        if nz.size == 0:
            return 0
        return int(nz.sum(axis=1).max())

    # evaluation -------------------------------------------------------
    def __call__(self, points):
        """Evaluate at ``points`` of shape (..., dim); complex input allowed."""
        pts = np.asarray(points)
        if self.dim == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points have trailing size {pts.shape[-1]}, expected {self.dim}")
        try:
            fn = _POLYVAL[self.dim]
        except KeyError:
            raise NotImplementedError("evaluation implemented for dim <= 3") from None
        return fn(*[pts[..., a] for a in range(self.dim)], self.coef)

    def __repr__(self):
        return f"Polynomial(dim={self.dim}, degree={self.degree})"


def apply_L_poly(p: Polynomial) -> Polynomial:
    """L p = -rho Lap p + 2 z.grad p with rho = (1 - |z|^2)/2."""
    rho = (1.0 - Polynomial.norm_squared(p.dim)) * 0.5
    return -(rho * p.laplacian()) + 2.0 * p.euler()


def weight_rho(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    return 0.5 * (1.0 - np.sum(pts * pts, axis=-1))


# --------------------------------------------------------------------------
# splines for sampled 1-D / radial profiles
# --------------------------------------------------------------------------

def mirror_even(r, f):
    """Extend samples of an even radial profile on r >= 0 to [-R, R]."""
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    keep = r > 0
    rr = np.concatenate([-r[keep][::-1], r])
    ff = np.concatenate([f[keep][::-1], f])
    return rr, ff


def profile_spline(x, f, radial: bool = False, order: int = 3):
    """Interpolating spline of a 1-D profile (mirrored first when radial)."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if radial:
        x, f = mirror_even(x, f)
    order_idx = np.argsort(x)
    x, f = x[order_idx], f[order_idx]
    keep = np.concatenate([[True], np.diff(x) > 0])
    x, f = x[keep], f[keep]
    if order == 3:
        return CubicSpline(x, f)
    return make_interp_spline(x, f, k=order)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NormReport:
    l2_rho: float
    h_norm: float
    sup: float
    grad_sup: float
    rho_hess_sup: float
    rho2_third_sup: float
    grad_rho_sq: float
    l2_flat: float = float("nan")
    rho_grad_l2_flat: float = float("nan")

    @property
    def w_norm(self) -> float:
        return self.sup + self.grad_sup + self.rho_hess_sup + self.rho2_third_sup

    @property
    def scale_invariant_h(self) -> float:
        """sqrt(||w||_{L2}^2 + ||rho grad w||_{L2}^2) with unweighted L2 on the ball."""
        return float(np.sqrt(self.l2_flat ** 2 + self.rho_grad_l2_flat ** 2))

    def as_dict(self) -> dict:
        return {
            "l2_rho": self.l2_rho,
            "h_norm": self.h_norm,
            "w_norm": self.w_norm,
            "sup": self.sup,
            "grad_sup": self.grad_sup,
            "rho_hess_sup": self.rho_hess_sup,
            "rho2_third_sup": self.rho2_third_sup,
            "scale_invariant_h": self.scale_invariant_h,
        }


def _frobenius(tensor_values) -> np.ndarray:
    arr = np.asarray(tensor_values)
    return np.sqrt(np.sum(arr.reshape(-1, arr.shape[-1]) ** 2, axis=0))


def dense_ball_points(dim: int, n: int) -> np.ndarray:
    """Uniform-ish sampling of the closed unit ball used for sup norms."""
    if dim == 1:
        return np.linspace(-1.0, 1.0, n)[:, None]
    axes = [np.linspace(-1.0, 1.0, n)] * dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    mesh = mesh[np.sum(mesh ** 2, axis=1) <= 1.0 + 1e-14]
    # boundary sphere points so sup norms see |z| = 1
    if dim == 2:
        phi = np.linspace(0, 2 * np.pi, 4 * n, endpoint=False)
        bnd = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    else:
        t = np.linspace(-1, 1, n)
        phi = np.linspace(0, 2 * np.pi, 2 * n, endpoint=False)
        T, F = np.meshgrid(t, phi, indexing="ij")
        s = np.sqrt(1 - T ** 2)
        bnd = np.stack([s * np.cos(F), s * np.sin(F), T], axis=-1).reshape(-1, 3)
    return np.concatenate([mesh, bnd])


def _flat_grid(grid):
    """Unweighted companion of a rho-weighted grid (same exactness degree + 2)."""
    from .spectrum import ball_grid

    return ball_grid(grid.dim_N, grid.degree + 2, sigma=0)


def norms_polynomial(w: Polynomial, grid, sup_points: np.ndarray | None = None) -> NormReport:
    """All norms of a polynomial field.

    ``grid`` is a sigma=1 :class:`~thinfilm.spectrum.WeightedGrid` exact for
    the squared integrands. Suprema are taken on ``sup_points`` (default:
    a dense sampling roughly three times finer than the quadrature grid).
    """
    dim = w.dim
    nodes = grid.nodes
    rho = grid.rho_values
    vals = w(nodes)
    grads = np.array([g(nodes) for g in w.gradient()])
    l2 = float(np.sqrt(grid.integrate(vals * vals)))
    grad_rho_sq = float(grid.integrate(rho * np.sum(grads * grads, axis=0)))
    h = float(np.sqrt(l2 ** 2 + grad_rho_sq))

    if sup_points is None:
        sup_points = dense_ball_points(dim, 3 * max(8, int(round(len(nodes) ** (1.0 / dim)))) + 1)
    rs = weight_rho(sup_points)
    hess = w.hessian()
    third = [[[hess[a][b].deriv(c) for c in range(dim)] for b in range(dim)] for a in range(dim)]
    sup = float(np.max(np.abs(w(sup_points))))
    gsup = float(np.max(_frobenius([g(sup_points) for g in w.gradient()])))
    hsup = float(np.max(np.abs(rs) * _frobenius([[h_(sup_points) for h_ in row] for row in hess])))
    tsup = float(np.max(rs ** 2 * _frobenius([[[t(sup_points) for t in r2] for r2 in r1] for r1 in third])))

    fg = _flat_grid(grid)
    fvals = w(fg.nodes)
    fgrads = np.array([g(fg.nodes) for g in w.gradient()])
    l2_flat = float(np.sqrt(fg.integrate(fvals * fvals)))
    rg_flat = float(np.sqrt(fg.integrate(fg.rho_values ** 2 * np.sum(fgrads * fgrads, axis=0))))
    return NormReport(l2, h, sup, gsup, hsup, tsup, grad_rho_sq, l2_flat, rg_flat)


def radial_derivative_norms(r, f1, f2, f3, dim: int):
    """Pointwise Frobenius norms of the 2nd/3rd derivative tensors of f(|x|).

    For a radial function the Hessian has eigenvalues f'' and f'/r (N-1
    times); the third-derivative tensor has squared norm
    f'''^2 + 3(N-1)((f'' - f'/r)/r)^2.
    """
    r = np.abs(np.asarray(r, dtype=float))
    if dim == 1:
        return np.abs(f2), np.abs(f3)
    safe = np.where(r > 1e-8, r, 1.0)
    b = np.where(r > 1e-8, f1 / safe, f2)
    a = np.where(r > 1e-8, (f2 - f1 / safe) / safe, 0.0)
    hess = np.sqrt(f2 ** 2 + (dim - 1) * b ** 2)
    third = np.sqrt(f3 ** 2 + 3 * (dim - 1) * a ** 2)
    return hess, third


def norms_profile(nodes, values, dim: int, grid, radial: bool = False, refine: int = 3) -> NormReport:
    """Norms of a sampled 1-D (dim=1) or radial profile via quintic splines."""
    nodes = np.asarray(nodes, dtype=float)
    spl = profile_spline(nodes, values, radial=radial or dim > 1, order=5)
    d1, d2, d3 = spl.derivative(1), spl.derivative(2), spl.derivative(3)

    q = grid.nodes
    coord = q[:, 0] if dim == 1 else np.linalg.norm(q, axis=1)
    rho = grid.rho_values
    vals = spl(coord)
    g = d1(coord)
    l2 = float(np.sqrt(grid.integrate(vals ** 2)))
    grad_rho_sq = float(grid.integrate(rho * g ** 2))
    h = float(np.sqrt(l2 ** 2 + grad_rho_sq))

    lo = -1.0 if dim == 1 else 0.0
    fine = np.linspace(lo, 1.0, refine * len(nodes) + 1)
    rs = 0.5 * (1 - fine ** 2)
    f1, f2, f3 = d1(fine), d2(fine), d3(fine)
    hess, third = radial_derivative_norms(fine, f1, f2, f3, dim)
    fg = _flat_grid(grid)
    fcoord = fg.nodes[:, 0] if dim == 1 else np.linalg.norm(fg.nodes, axis=1)
    fvals, fgrad = spl(fcoord), d1(fcoord)
    return NormReport(
        l2_rho=l2,
        h_norm=h,
        sup=float(np.max(np.abs(spl(fine)))),
        grad_sup=float(np.max(np.abs(f1))),
        rho_hess_sup=float(np.max(rs * hess)),
        rho2_third_sup=float(np.max(rs ** 2 * third)),
        grad_rho_sq=grad_rho_sq,
        l2_flat=float(np.sqrt(fg.integrate(fvals ** 2))),
        rho_grad_l2_flat=float(np.sqrt(fg.integrate(fg.rho_values ** 2 * fgrad ** 2))),
    )


# --------------------------------------------------------------------------
# exponential fitting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpFit:
    exponent: float
    intercept: float
    r_squared: float
    n: int


def fit_exponential(t, a) -> ExpFit:
    """Least-squares fit log|a| = c - exponent * t."""
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(a, dtype=float))
    if len(t) < 2:
        raise ValueError("need at least two samples")
    res = stats.linregress(t, np.log(a))
    return ExpFit(-float(res.slope), float(res.intercept), float(res.rvalue ** 2), len(t))
