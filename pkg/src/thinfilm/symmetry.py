"""Finite subgroups of O(2)/O(3), Molien series, and symmetry-based mode
elimination.

Series coefficients are produced by summing the per-element expansions of
1/det(I - s g) in high precision and rounding; no closed forms are used here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import mpmath
import numpy as np

from .harmonics import solid_harmonics, sphere_rule
from .spectrum import SpectrumTable, multiplicity

ORTHO_TOL = 1e-12
MATCH_TOL = 1e-10
ROUND_TOL = 1e-6
MAX_ORDER = 5000


class MolienPrecisionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class FiniteGroup:
    dim_N: int
    elements: tuple[np.ndarray, ...]
    name: str

    @property
    def order(self) -> int:
        return len(self.elements)

    def __repr__(self):
        return f"FiniteGroup({self.name}, dim={self.dim_N}, order={self.order})"

    def conjugate(self, q: np.ndarray, name: str | None = None) -> "FiniteGroup":
        q = np.asarray(q, dtype=float)
        return FiniteGroup(self.dim_N, tuple(q @ g @ q.T for g in self.elements), name or self.name)

    def contains(self, g, tol: float = MATCH_TOL) -> bool:
        return _find(self.elements, np.asarray(g, dtype=float), tol) is not None

    def closure_residual(self) -> float:
        """Largest distance from a product g*h to its nearest element."""
        worst = 0.0
        stack = np.array(self.elements)
        for g in self.elements:
            prods = np.einsum("ij,mjk->mik", g, stack)
            d = np.max(np.abs(prods[:, None] - stack[None]), axis=(2, 3))
            worst = max(worst, float(np.max(np.min(d, axis=1))))
        return worst

    def validate(self) -> None:
        eye = np.eye(self.dim_N)
        for g in self.elements:
            if g.shape != (self.dim_N, self.dim_N):
                raise ValueError("element has wrong shape")
            if np.max(np.abs(g.T @ g - eye)) >= ORTHO_TOL:
                raise ValueError("element is not orthogonal")
        if not self.contains(eye):
            raise ValueError("identity missing")
        if self.closure_residual() >= MATCH_TOL:
            raise ValueError("element list is not closed under products")


def _find(elements, g, tol):
    for i, h in enumerate(elements):
        if np.max(np.abs(h - g)) < tol:
            return i
    return None


def generate(generators, name: str, dim: int | None = None) -> FiniteGroup:
    """Saturate a set of orthogonal generators under multiplication."""
    gens = [np.asarray(g, dtype=float) for g in generators]
    if dim is None:
        dim = gens[0].shape[0]
    elements = [np.eye(dim)]
    frontier = [np.eye(dim)]
    while frontier:
        new = []
        for a in frontier:
            for g in gens:
                p = g @ a
                if _find(elements, p, MATCH_TOL) is None:
                    elements.append(p)
                    new.append(p)
                    if len(elements) > MAX_ORDER:
                        raise ValueError("generators do not produce a finite group")
        frontier = new
    group = FiniteGroup(dim, tuple(elements), name)
    group.validate()
    return group


def rotation_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_3d(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)


def build_group(name: str, n: int | None = None, dim: int = 3) -> FiniteGroup:
    """Built-in groups: cyclic, dihedral (dim 2 or 3), tetra, octa, icosa (dim 3)."""
    key = name.lower()
    if key in ("cyclic", "dihedral"):
        if n is None or n < 1:
            raise ValueError("cyclic/dihedral groups need n >= 1")
        label = f"{'Cyclic' if key == 'cyclic' else 'Dihedral'}({n})"
        if dim == 2:
            gens = [rotation_2d(2 * np.pi / n)]
            if key == "dihedral":
                gens.append(np.diag([1.0, -1.0]))
        elif dim == 3:
            gens = [rotation_3d([0, 0, 1], 2 * np.pi / n)]
            if key == "dihedral":
                gens.append(rotation_3d([1, 0, 0], np.pi))
        else:
            raise ValueError(f"{label} only supported in dimension 2 or 3")
        return generate(gens, label, dim)
    if dim != 3:
        raise ValueError(f"group {name!r} only exists in dimension 3")
    if key in ("tetra", "tetrahedral"):
        gens = [rotation_3d([1, 1, 1], 2 * np.pi / 3), rotation_3d([0, 0, 1], np.pi)]
        label = "Tetrahedral"
    elif key in ("octa", "octahedral"):
        gens = [rotation_3d([0, 0, 1], np.pi / 2), rotation_3d([1, 1, 1], 2 * np.pi / 3)]
        label = "Octahedral"
    elif key in ("icosa", "icosahedral"):
        phi = (1 + np.sqrt(5)) / 2
        perm = np.array([[0.0, 0, 1], [1, 0, 0], [0, 1, 0]])
        gens = [perm, rotation_3d([0, 1, phi], 2 * np.pi / 5)]
        label = "Icosahedral"
    else:
        raise ValueError(f"unsupported group {name!r}")
    return generate(gens, label, 3)


def parse_group(spec: str, dim: int) -> FiniteGroup:
    """Parse ``cyclic:n``, ``dihedral:n``, ``tetra``, ``octa``, ``icosa`` or a JSON path."""
    if ":" in spec:
        head, tail = spec.split(":", 1)
        if head in ("cyclic", "dihedral"):
            return build_group(head, int(tail), dim)
        if head == "file":
            return load_group(tail)
    if spec in ("tetra", "octa", "icosa", "tetrahedral", "octahedral", "icosahedral"):
        return build_group(spec, dim=dim)
    if Path(spec).suffix == ".json":
        return load_group(spec)
    raise ValueError(f"cannot parse group {spec!r}")


def load_group(path) -> FiniteGroup:
    """Custom group from JSON: {"elements": [...]} or {"generators": [...]}."""
    data = json.loads(Path(path).read_text())
    name = data.get("name", "Custom")
    if "elements" in data:
        mats = [np.asarray(m, dtype=float) for m in data["elements"]]
        group = FiniteGroup(mats[0].shape[0], tuple(mats), name)
        group.validate()
        return group
    return generate(data["generators"], name)


# --------------------------------------------------------------------------
# Molien series
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MolienSeries:
    coeffs: tuple[int, ...]
    variant: str  # "h" (harmonic) or "p" (all polynomials)
    group_name: str = ""
    max_residual: float = 0.0

    mass_mode_note = "mass mode - removed by the mass constraint"

    def as_dict(self) -> dict:
        return {
            "group": self.group_name,
            "variant": self.variant,
            "coeffs": list(self.coeffs),
            "zeroth": {"value": self.coeffs[0], "note": self.mass_mode_note},
            "max_rounding_residual": self.max_residual,
        }


def _det_series_coeffs(g: np.ndarray):
    """Coefficients q_0..q_N of det(I - s g) as mpmath numbers."""
    m = mpmath.matrix(g.tolist())
    N = g.shape[0]
    tr = sum(m[i, i] for i in range(N))
    if N == 2:
        return [mpmath.mpf(1), -tr, mpmath.det(m)]
    if N == 3:
        m2 = m * m
        tr2 = sum(m2[i, i] for i in range(N))
        return [mpmath.mpf(1), -tr, (tr * tr - tr2) / 2, -mpmath.det(m)]
    raise ValueError("Molien series implemented for dim 2 and 3")


def _inverse_series(q, l_max: int):
    a = [mpmath.mpf(1)] + [mpmath.mpf(0)] * l_max
    for j in range(1, l_max + 1):
        acc = mpmath.mpf(0)
        for i in range(1, min(j, len(q) - 1) + 1):
            acc -= q[i] * a[j - i]
        a[j] = acc
    return a


def _molien(group: FiniteGroup, l_max: int, variant: str) -> MolienSeries:
    if l_max < 0:
        raise ValueError("l_max must be nonnegative")
    with mpmath.workdps(60):
        total = [mpmath.mpf(0)] * (l_max + 1)
        for g in group.elements:
            a = _inverse_series(_det_series_coeffs(g), l_max)
            total = [t + x for t, x in zip(total, a)]
        p = [t / group.order for t in total]
        if variant == "h":
            vals = [p[j] - (p[j - 2] if j >= 2 else 0) for j in range(l_max + 1)]
        else:
            vals = p
        coeffs = []
        worst = 0.0
        for j, v in enumerate(vals):
            c = int(mpmath.nint(v))
            res = float(abs(v - c))
            worst = max(worst, res)
            if res >= ROUND_TOL or c < 0:
                raise MolienPrecisionError(
                    f"coefficient {j} = {mpmath.nstr(v, 15)} is not a nonnegative integer"
                )
            coeffs.append(c)
    return MolienSeries(tuple(coeffs), variant, group.name, worst)


def molien_harmonic(group: FiniteGroup, l_max: int) -> MolienSeries:
    """dim(H_l^E) for l = 0..l_max."""
    return _molien(group, l_max, "h")


def molien_polynomial(group: FiniteGroup, l_max: int) -> MolienSeries:
    """Dimensions of E-invariant homogeneous polynomials of degree l."""
    return _molien(group, l_max, "p")


# --------------------------------------------------------------------------
# brute-force oracle
# --------------------------------------------------------------------------

def invariant_dimension_bruteforce(group: FiniteGroup, l: int, N: int | None = None) -> int:
    """Rank of the group average acting on degree-l harmonics."""
    N = group.dim_N if N is None else N
    if N != group.dim_N:
        raise ValueError("dimension mismatch")
    basis = solid_harmonics(l, N)
    nodes, weights = sphere_rule(N, 2 * l)
    B = np.array([Y(nodes) for Y in basis])  # (m, q)
    gram = (B * weights) @ B.T
    avg = np.zeros_like(B)
    for g in group.elements:
        # (Y o g^{-1})(x) = Y(g^T x); rows of nodes @ g are (g^T x)^T
        moved = nodes @ g
        avg += np.array([Y(moved) for Y in basis])
    avg /= group.order
    R = np.linalg.solve(gram, (B * weights) @ avg.T)
    # orthogonal basis with equal norms -> R is a symmetric projector
    ev = np.linalg.eigvalsh(0.5 * (R + R.T))
    near_one = np.abs(ev - 1) < 1e-8
    near_zero = np.abs(ev) < 1e-8
    if not np.all(near_one | near_zero):
        raise MolienPrecisionError(f"projector spectrum not separated: {ev}")
    return int(np.sum(near_one))


# --------------------------------------------------------------------------
# mode elimination
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ActiveEntry:
    mu: int
    multiplicity: int
    active_multiplicity: int
    lk_pairs: tuple[tuple[int, int], ...]

    @property
    def active(self) -> bool:
        return self.active_multiplicity > 0


@dataclass(frozen=True)
class ActiveModes:
    group_name: str
    entries: tuple[ActiveEntry, ...]
    harmonic_dims: tuple[int, ...]
    smallest_active_mu: int | None
    first_active_degree: int | None

    def inactive_degrees(self, l_max: int | None = None) -> list[int]:
        top = len(self.harmonic_dims) - 1 if l_max is None else l_max
        return [l for l in range(1, top + 1) if self.harmonic_dims[l] == 0]

    def as_dict(self) -> dict:
        return {
            "group": self.group_name,
            "smallest_active_mu": self.smallest_active_mu,
            "first_active_degree": self.first_active_degree,
            "harmonic_dims": list(self.harmonic_dims),
            "entries": [
                {
                    "mu": e.mu,
                    "multiplicity": e.multiplicity,
                    "active_multiplicity": e.active_multiplicity,
                    "active": e.active,
                    "lk": [list(p) for p in e.lk_pairs],
                }
                for e in self.entries
            ],
        }


def active_modes(
    group: FiniteGroup,
    table: SpectrumTable,
    l_max: int | None = None,
    exclude_radial: bool = False,
) -> ActiveModes:
    """Annotate each eigenvalue with the number of E-invariant modes.

    ``exclude_radial`` drops the (l=0, k>0) radial modes, e.g. when a
    centered radial perturbation is excluded by assumption.
    """
    if group.dim_N != table.dim_N:
        raise ValueError("group and spectrum dimension differ")
    need = max((l for e in table.entries for l, _, _ in e.modes), default=0)
    if l_max is None:
        l_max = need
    if l_max < need:
        raise ValueError(f"l_max={l_max} insufficient, table needs {need}")
    h = molien_harmonic(group, l_max).coeffs
    entries = []
    for e in table.entries:
        active = 0
        for l, k in e.lk_pairs:
            if exclude_radial and l == 0 and k > 0:
                continue
            active += h[l]
        entries.append(ActiveEntry(e.mu, e.multiplicity, active, e.lk_pairs))
    smallest = next((e.mu for e in entries if e.mu > 0 and e.active), None)
    first = next((l for l in range(1, l_max + 1) if h[l] > 0), None)
    return ActiveModes(group.name, tuple(entries), tuple(h), smallest, first)


def invariant_projection(group: FiniteGroup, coeffs_by_mode: dict, N: int) -> dict:
    """Project amplitudes {(l, n, k): c} onto the E-invariant subspace.

    Works degree by degree on the harmonic basis, so the result only mixes
    modes sharing (l, k).
    """
    out = {}
    by_lk: dict[tuple[int, int], dict[int, float]] = {}
    for (l, n, k), c in coeffs_by_mode.items():
        by_lk.setdefault((l, k), {})[n] = c
    for (l, k), amps in by_lk.items():
        m = multiplicity(l, N)
        vec = np.zeros(m)
        for n, c in amps.items():
            vec[n - 1] = c
        if invariant_dimension_bruteforce(group, l) == 0:
            vec = np.zeros(m)  # no invariants: the projection is exactly zero
        else:
            vec = reynolds_matrix(group, l) @ vec
        for n in range(1, m + 1):
            out[(l, n, k)] = float(vec[n - 1])
    return out


def reynolds_matrix(group: FiniteGroup, l: int) -> np.ndarray:
    """Matrix of the group average on degree-l harmonics (columns = images)."""
    N = group.dim_N
    basis = solid_harmonics(l, N)
    nodes, weights = sphere_rule(N, 2 * l)
    B = np.array([Y(nodes) for Y in basis])
    gram = (B * weights) @ B.T
    avg = np.zeros_like(B)
    for g in group.elements:
        avg += np.array([Y(nodes @ g) for Y in basis])
    avg /= group.order
    return np.linalg.solve(gram, (B * weights) @ avg.T)
