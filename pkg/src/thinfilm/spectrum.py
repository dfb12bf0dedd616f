"""Eigenvalues, eigenfunctions and weighted inner products of the linearized
operator ``L = -rho*Lap + 2 z.grad`` on the unit ball and of ``L^2 + N L``.

Eigenvalues are exact integers; radial coefficients are exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import factorial, gamma, pi

import numpy as np
from scipy.special import roots_jacobi

from .harmonics import solid_harmonics, sphere_rule
from .linops import Polynomial, apply_L_poly


class SpectrumDomainError(ValueError):
    """Raised for (l, N) combinations outside the spectrum's index set."""


def _check_indices(l: int, k: int, N: int) -> None:
    if N < 1:
        raise SpectrumDomainError("dimension must be >= 1")
    if l < 0 or k < 0:
        raise SpectrumDomainError("l and k must be nonnegative")
    if N == 1 and l > 1:
        raise SpectrumDomainError("for N = 1 only l in {0, 1} is admissible")


def lambda_of(l: int, k: int, N: int) -> int:
    """Eigenvalue 2(l+2k) + 2k(k+l+N/2-1) of L."""
    _check_indices(l, k, N)
    lam = 2 * (l + 2 * k) + 2 * k * (k + l + Fraction(N, 2) - 1)
    if lam.denominator != 1:
        raise AssertionError(f"non-integral eigenvalue {lam}")
    return int(lam)


def mu_of(l: int, k: int, N: int) -> int:
    """Eigenvalue lambda^2 + N*lambda of L^2 + N L."""
    lam = lambda_of(l, k, N)
    return lam * lam + N * lam


def multiplicity(l: int, N: int) -> int:
    """Dimension N_l of the degree-l spherical harmonics on S^{N-1}."""
    _check_indices(l, 0, N)
    if l == 0:
        return 1
    if l == 1:
        return N
    # N = 2 works directly: (l-1)! 2l / l! = 2
    num = factorial(N + l - 3) * (N + 2 * l - 2)
    den = factorial(l) * factorial(N - 2)
    assert num % den == 0
    return num // den


def pochhammer(s: Fraction, j: int) -> Fraction:
    out = Fraction(1)
    for i in range(j):
        out *= s + i
    return out


def radial_coefficients(l: int, k: int, N: int) -> tuple[Fraction, ...]:
    """Coefficients c_j of 2F1(-k, 1+l+N/2+k; l+N/2; s) = sum_j c_j s^j."""
    _check_indices(l, k, N)
    a = Fraction(-k)
    b = Fraction(1 + l + k) + Fraction(N, 2)
    c = Fraction(l) + Fraction(N, 2)
    return tuple(
        pochhammer(a, j) * pochhammer(b, j) / (pochhammer(c, j) * factorial(j))
        for j in range(k + 1)
    )


# --------------------------------------------------------------------------
# eigenmodes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Eigenmode:
    """One eigenfunction psi_{l,n,k} in the ``2F1`` normalization.

    The angular factor uses the basis of :mod:`thinfilm.harmonics`.
    """

    dim_N: int
    l: int
    n: int
    k: int

    def __post_init__(self):
        _check_indices(self.l, self.k, self.dim_N)
        if not 1 <= self.n <= multiplicity(self.l, self.dim_N):
            raise SpectrumDomainError(
                f"n={self.n} outside 1..{multiplicity(self.l, self.dim_N)}"
            )

    @property
    def lam(self) -> int:
        return lambda_of(self.l, self.k, self.dim_N)

    @property
    def mu(self) -> int:
        return mu_of(self.l, self.k, self.dim_N)

    @property
    def radial_coeffs(self) -> tuple[Fraction, ...]:
        return radial_coefficients(self.l, self.k, self.dim_N)

    @property
    def degree(self) -> int:
        return self.l + 2 * self.k

    @cached_property
    def polynomial(self) -> Polynomial:
        N = self.dim_N
        Y = solid_harmonics(self.l, N)[self.n - 1]
        r2 = Polynomial.norm_squared(N)
        radial = Polynomial.constant(0.0, N)
        power = Polynomial.constant(1.0, N)
        for c in self.radial_coeffs:
            radial = radial + float(c) * power
            power = power * r2
        return radial * Y

    def __call__(self, points) -> np.ndarray:
        return self.polynomial(points)

    def rho_norm(self) -> float:
        grid = ball_grid(self.dim_N, 2 * self.degree)
        return float(np.sqrt(grid.integrate(self(grid.nodes) ** 2)))

    def normalized_polynomial(self) -> Polynomial:
        """The eigenfunction scaled to unit norm in L^2(rho dz)."""
        return self.polynomial / self.rho_norm()


def modes_up_to_degree(N: int, max_degree: int) -> list[Eigenmode]:
    """All (l, n, k) with l + 2k <= max_degree."""
    out = []
    lmax = 1 if N == 1 else max_degree
    for l in range(min(lmax, max_degree) + 1):
        for k in range((max_degree - l) // 2 + 1):
            for n in range(1, multiplicity(l, N) + 1):
                out.append(Eigenmode(N, l, n, k))
    return out


def eval_eigenfunction(mode: Eigenmode, points) -> np.ndarray:
    if mode.dim_N > 3:
        raise NotImplementedError("angular evaluation supported for N <= 3")
    return mode(points)


# --------------------------------------------------------------------------
# quadrature on the ball
# --------------------------------------------------------------------------

def ball_volume(N: int) -> float:
    return pi ** (N / 2) / gamma(N / 2 + 1)


def sphere_area(N: int) -> float:
    return N * ball_volume(N)


@dataclass(frozen=True)
class WeightedGrid:
    """Tensor quadrature for integrals of f * rho^sigma over B_1(0).

    ``weights`` already contain rho^sigma.
    """

    dim_N: int
    nodes: np.ndarray
    weights: np.ndarray
    rho_values: np.ndarray
    sigma: int
    degree: int

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values)))

    def same_as(self, other: "WeightedGrid") -> bool:
        return (
            self.dim_N == other.dim_N
            and self.sigma == other.sigma
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
        )


def ball_grid(N: int, degree: int, sigma: int = 1) -> WeightedGrid:
    """Quadrature exact for int_{B_1} p rho^sigma dz, deg p <= ``degree``.

    Radius: Gauss-Jacobi in u = 2r^2 - 1 with weight (1-u)^sigma (1+u)^{N/2-1};
    angle: :func:`sphere_rule` (antipodally symmetric, so odd parts vanish).
    In one dimension a direct Gauss-Jacobi(sigma, sigma) rule on [-1, 1].
    """
    if sigma not in (0, 1, 2):
        raise ValueError("sigma must be 0, 1 or 2")
    degree = max(int(degree), 0)
    if N == 1:
        n = degree // 2 + 1
        x, w = roots_jacobi(n, sigma, sigma)
        nodes = x[:, None]
        weights = w * 0.5 ** sigma
    elif N in (2, 3):
        nr = degree // 4 + 1
        u, wu = roots_jacobi(nr, sigma, N / 2 - 1)
        r = np.sqrt((1 + u) / 2)
        scale = 0.5 ** sigma * 0.5 ** sigma * 0.5 ** ((N - 2) / 2) / 4
        snodes, sweights = sphere_rule(N, degree)
        nodes = (r[:, None, None] * snodes[None, :, :]).reshape(-1, N)
        weights = (scale * wu[:, None] * sweights[None, :]).reshape(-1)
    else:
        raise NotImplementedError("ball quadrature implemented for N <= 3")
    rho = 0.5 * (1 - np.sum(nodes ** 2, axis=1))
    return WeightedGrid(N, nodes, weights, rho, sigma, degree)


def rho_integral_closed_form(N: int, sigma: int = 1) -> float:
    """int_{B_1} rho^sigma dz = |S^{N-1}| 2^{-sigma} int_0^1 (1-r^2)^sigma r^{N-1} dr."""
    # int_0^1 (1-r^2)^s r^{N-1} dr = B(N/2, s+1)/2
    beta = gamma(N / 2) * gamma(sigma + 1) / gamma(N / 2 + sigma + 1)
    area = 2.0 if N == 1 else sphere_area(N)
    return area * 0.5 ** sigma * beta / 2


# --------------------------------------------------------------------------
# operator and inner products
# --------------------------------------------------------------------------

def apply_L(grid: WeightedGrid, field=None, *, gradient=None, laplacian=None) -> np.ndarray:
    """Pointwise -rho*Lap w + 2 z.grad w at the grid nodes.

    Pass a :class:`Polynomial` (derivatives exact) or the sampled
    ``gradient`` (shape (N, n)) and ``laplacian`` (shape (n,)).
    """
    z = grid.nodes
    if field is not None:
        if not isinstance(field, Polynomial):
            field = field.polynomial
        return apply_L_poly(field)(z)
    if gradient is None or laplacian is None:
        raise ValueError("need a polynomial or both gradient and laplacian")
    gradient = np.asarray(gradient).reshape(grid.dim_N, -1)
    return -grid.rho_values * np.asarray(laplacian) + 2 * np.sum(z.T * gradient, axis=0)


def _values(f, grid: WeightedGrid) -> np.ndarray:
    if isinstance(f, Eigenmode):
        f = f.polynomial
    if isinstance(f, Polynomial):
        return f(grid.nodes)
    if callable(f):
        return np.asarray(f(grid.nodes))
    arr = np.asarray(f, dtype=float)
    if arr.shape != (len(grid.nodes),):
        raise ValueError("sampled field does not match the grid")
    return arr


def inner_rho(f, g, grid: WeightedGrid) -> float:
    """<f, g> = int f g rho dz (grid must be sigma=1)."""
    if grid.sigma != 1:
        raise ValueError("inner_rho needs a sigma=1 grid")
    return grid.integrate(_values(f, grid) * _values(g, grid))


def inner_H(f, g, grid: WeightedGrid, grad_f=None, grad_g=None) -> float:
    """<f,g> + <sqrt(rho) grad f, sqrt(rho) grad g>.

    Gradients are taken exactly for polynomials/eigenmodes; sampled fields
    must supply ``grad_f``/``grad_g`` of shape (N, n).
    """

    def grads(h, given):
        if given is not None:
            return np.asarray(given).reshape(grid.dim_N, -1)
        if isinstance(h, Eigenmode):
            h = h.polynomial
        if not isinstance(h, Polynomial):
            raise ValueError("sampled field needs an explicit gradient")
        return np.array([d(grid.nodes) for d in h.gradient()])

    gf, gg = grads(f, grad_f), grads(g, grad_g)
    return inner_rho(f, g, grid) + grid.integrate(grid.rho_values * np.sum(gf * gg, axis=0))


# --------------------------------------------------------------------------
# spectrum table
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumEntry:
    mu: int
    modes: tuple[tuple[int, int, int], ...]  # (l, n, k)
    multiplicity: int

    @property
    def lk_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted({(l, k) for l, _, k in self.modes}))


@dataclass(frozen=True)
class SpectrumTable:
    dim_N: int
    mu_max: float
    entries: tuple[SpectrumEntry, ...]

    def entry_of(self, l: int, k: int) -> SpectrumEntry:
        mu = mu_of(l, k, self.dim_N)
        for e in self.entries:
            if e.mu == mu:
                return e
        raise KeyError((l, k))

    def as_dict(self) -> dict:
        return {
            "dim": self.dim_N,
            "entries": [
                {
                    "mu": e.mu,
                    "multiplicity": e.multiplicity,
                    "modes": [
                        {"l": l, "n": n, "k": k, "lambda": lambda_of(l, k, self.dim_N)}
                        for l, n, k in e.modes
                    ],
                }
                for e in self.entries
            ],
        }


def spectrum_table(N: int, mu_max) -> SpectrumTable:
    """Distinct eigenvalues mu <= mu_max, strictly increasing, with multiplicity."""
    if mu_max < 0:
        raise ValueError("mu_max must be nonnegative")
    groups: dict[int, list[tuple[int, int, int]]] = {}
    lmax = 1 if N == 1 else None
    l = 0
    while (lmax is None or l <= lmax) and mu_of(l, 0, N) <= mu_max:
        k = 0
        while mu_of(l, k, N) <= mu_max:
            mu = mu_of(l, k, N)
            groups.setdefault(mu, []).extend((l, n, k) for n in range(1, multiplicity(l, N) + 1))
            k += 1
        l += 1
    entries = tuple(
        SpectrumEntry(mu, tuple(sorted(modes)), len(modes)) for mu, modes in sorted(groups.items())
    )
    return SpectrumTable(N, mu_max, entries)
