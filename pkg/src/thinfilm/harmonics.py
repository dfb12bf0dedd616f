"""Real solid harmonics as polynomials, and quadrature on the unit sphere.

Basis convention (dimension 2 and 3): for each degree ``l`` the harmonics
``Y_{l,1..N_l}`` are mutually orthogonal on the sphere and scaled so that
``sum_n Y_{l,n}(w)^2 == 1`` for every unit vector ``w``. With this scaling
the degree-one harmonics are exactly the coordinate functions.

Ordering: ``n = 1, 2`` are the cosine/sine parts of order ``m = l``, then
``n = 3, 4`` for ``m = l - 1`` and so on; in 3-D the zonal (``m = 0``)
harmonic comes last. In 2-D only ``m = l`` exists. In 1-D ``Y_l(x) = x**l``
for ``l`` in ``{0, 1}``.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.special import roots_legendre

from .linops import Polynomial


def sphere_rule(dim: int, degree: int):
    """Nodes and weights on S^{dim-1} exact for polynomials up to ``degree``.

    Returns ``(nodes, weights)`` with ``nodes`` of shape (n, dim); weights
    sum to the sphere's surface measure.
    """
    if dim == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    m = degree + 1
    phi = 2 * np.pi * np.arange(m) / m
    if dim == 2:
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return nodes, np.full(m, 2 * np.pi / m)
    if dim == 3:
        t, wt = roots_legendre(degree // 2 + 1)
        T, F = np.meshgrid(t, phi, indexing="ij")
        s = np.sqrt(1 - T ** 2)
        nodes = np.stack([s * np.cos(F), s * np.sin(F), T], axis=-1).reshape(-1, 3)
        weights = (wt[:, None] * np.full(m, 2 * np.pi / m)[None, :]).reshape(-1)
        return nodes, weights
    raise NotImplementedError("sphere quadrature implemented for dim <= 3")


def _re_im_power(m: int):
    """Re and Im of (x + i y)^m as 3-D polynomial coefficient arrays (x, y axes)."""
    re = np.zeros((m + 1, m + 1))
    im = np.zeros((m + 1, m + 1))
    for j in range(m + 1):
        c = comb(m, j)
        # term x^{m-j} (i y)^j
        phase = j % 4
        if phase == 0:
            re[m - j, j] += c
        elif phase == 1:
            im[m - j, j] += c
        elif phase == 2:
            re[m - j, j] -= c
        else:
            im[m - j, j] -= c
    return re, im


def _harmonic_2d(l: int) -> list[Polynomial]:
    if l == 0:
        return [Polynomial.constant(1.0, 2)]
    re, im = _re_im_power(l)
    return [Polynomial(re, 2), Polynomial(im, 2)]


def _zonal_factor_3d(l: int, m: int) -> Polynomial:
    """sum_k (-1)^k C(l,k) C(2l-2k,l) (l-2k)!/(l-2k-m)! r^{2k} z^{l-2k-m}."""
    r2 = Polynomial.norm_squared(3)
    z = Polynomial.coordinate(2, 3)
    out = Polynomial.constant(0.0, 3)
    for k in range((l - m) // 2 + 1):
        c = (-1) ** k * comb(l, k) * comb(2 * l - 2 * k, l) * factorial(l - 2 * k) / factorial(l - 2 * k - m)
        out = out + c * (r2 ** k) * (z ** (l - 2 * k - m))
    return out


def _harmonic_3d(l: int) -> list[Polynomial]:
    basis = []
    for m in range(l, 0, -1):
        re, im = _re_im_power(m)
        zf = _zonal_factor_3d(l, m)
        basis.append(zf * Polynomial(re[:, :, None], 3))
        basis.append(zf * Polynomial(im[:, :, None], 3))
    basis.append(_zonal_factor_3d(l, 0))
    return basis


@lru_cache(maxsize=None)
def solid_harmonics(l: int, dim: int) -> tuple[Polynomial, ...]:
    """Homogeneous harmonic polynomials of degree ``l`` (see module docstring)."""
    if l < 0:
        raise ValueError("degree must be nonnegative")
    if dim == 1:
        if l > 1:
            raise ValueError("in one dimension only l in {0, 1} exist")
        return (Polynomial.coordinate(0, 1) if l == 1 else Polynomial.constant(1.0, 1),)
    if dim == 2:
        raw = _harmonic_2d(l)
    elif dim == 3:
        raw = _harmonic_3d(l)
    else:
        raise NotImplementedError("angular evaluation supported for dim <= 3")
    nodes, weights = sphere_rule(dim, 2 * l)
    area = weights.sum()
    count = len(raw)
    out = []
    for p in raw:
        mean_sq = float(np.sum(weights * p(nodes) ** 2) / area)
        out.append(p * np.sqrt(1.0 / (count * mean_sq)))
    return tuple(out)
