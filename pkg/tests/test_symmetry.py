import json
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation
from scipy.stats import ortho_group

from thinfilm.spectrum import multiplicity, spectrum_table
from series_oracle import BUILTIN, L_MAX, closed_form
from thinfilm.symmetry import (
    FiniteGroup,
    MolienPrecisionError,
    active_modes,
    build_group,
    generate,
    invariant_dimension_bruteforce,
    invariant_projection,
    load_group,
    molien_harmonic,
    molien_polynomial,
    parse_group,
)



def ids(case):
    name, n, dim = case
    return f"{name}{n or ''}-d{dim}"


@lru_cache(maxsize=None)
def group_of(name, n, dim):
    return build_group(name, n, dim)


# ---- groups ------------------------------------------------------------------------

@pytest.mark.parametrize(
    "name,n,dim,order",
    [("cyclic", 4, 2, 4), ("dihedral", 3, 2, 6), ("cyclic", 5, 3, 5), ("dihedral", 4, 3, 8),
     ("tetra", None, 3, 12), ("octa", None, 3, 24), ("icosa", None, 3, 60)],
)
def test_group_orders_and_closure(name, n, dim, order):
    g = group_of(name, n, dim)
    assert g.order == order
    assert g.closure_residual() < 1e-12
    for m in g.elements:
        assert np.max(np.abs(m.T @ m - np.eye(dim))) < 1e-12
    assert g.contains(np.eye(dim))


@pytest.mark.parametrize("name", ["T", "O", "I"])
def test_platonic_groups_match_scipy(name):
    ours = group_of({"T": "tetra", "O": "octa", "I": "icosa"}[name], None, 3)
    theirs = Rotation.create_group(name)
    # scipy's orientation may differ; compare conjugacy-invariant trace spectra
    t1 = sorted(np.round([np.trace(m) for m in ours.elements], 10))
    t2 = sorted(np.round([np.trace(m) for m in theirs.as_matrix()], 10))
    assert t1 == t2
    assert molien_harmonic(ours, 12).coeffs == molien_harmonic(
        FiniteGroup(3, tuple(theirs.as_matrix()), name), 12
    ).coeffs


def test_unsupported_groups_raise():
    with pytest.raises(ValueError):
        build_group("tetra", dim=2)
    with pytest.raises(ValueError):
        build_group("cyclic", 0, 2)
    with pytest.raises(ValueError):
        build_group("cube", dim=3)
    with pytest.raises(ValueError):
        parse_group("nonsense", 2)


def test_parse_and_load(tmp_path):
    assert parse_group("cyclic:3", 2).order == 3
    assert parse_group("octa", 3).order == 24
    p = tmp_path / "g.json"
    p.write_text(json.dumps({"name": "Klein", "generators": [[[-1, 0], [0, 1]], [[1, 0], [0, -1]]]}))
    g = load_group(p)
    assert g.order == 4 and g.name == "Klein"
    assert parse_group(str(p), 2).order == 4
    q = tmp_path / "bad.json"
    q.write_text(json.dumps({"elements": [[[1, 0], [0, 1]], [[0, -1], [1, 0]]]}))
    with pytest.raises(ValueError):
        load_group(q)


# ---- Molien series ------------------------------------------------------------------

def test_frozen_examples():
    assert molien_harmonic(group_of("cyclic", 3, 2), 7).coeffs == (1, 0, 0, 2, 0, 0, 2, 0)
    assert molien_harmonic(group_of("dihedral", 4, 2), 9).coeffs == (1, 0, 0, 0, 1, 0, 0, 0, 1, 0)
    tet = molien_harmonic(group_of("tetra", None, 3), 12).coeffs
    assert [l for l in range(13) if tet[l] == 0] == [1, 2, 5]
    octa = molien_harmonic(group_of("octa", None, 3), 12).coeffs
    assert [l for l in range(13) if octa[l] == 0] == [1, 2, 3, 5, 7, 11]
    ico = molien_harmonic(group_of("icosa", None, 3), 12).coeffs
    assert ico[1:6] == (0, 0, 0, 0, 0)


def test_semigroup_zero_pattern_for_platonic_groups():
    # zero exactly off the numerical semigroups generated by the denominators
    def reachable(gens, top):
        ok = {0}
        for l in range(1, top + 1):
            if any(l - g in ok for g in gens if l >= g):
                ok.add(l)
        return ok
    for name, gens in [("tetra", (3, 4, 6)), ("octa", (4, 6, 9)), ("icosa", (6, 10, 15))]:
        h = molien_harmonic(group_of(name, None, 3), L_MAX).coeffs
        r = reachable(gens, L_MAX)
        assert [l for l in range(L_MAX + 1) if h[l] > 0] == sorted(r)


@pytest.mark.parametrize("case", BUILTIN, ids=ids)
def test_closed_form_series(case):
    name, n, dim = case
    assert list(molien_harmonic(group_of(*case), L_MAX).coeffs) == closed_form(name, n, dim)


@pytest.mark.parametrize("case", BUILTIN, ids=ids)
def test_brute_force_matches_molien(case):
    g = group_of(*case)
    h = molien_harmonic(g, 12)
    assert h.max_residual < 1e-6
    assert list(h.coeffs) == [invariant_dimension_bruteforce(g, l) for l in range(13)]


@pytest.mark.parametrize("case", BUILTIN, ids=ids)
def test_harmonic_equals_one_minus_s2_times_polynomial(case):
    g = group_of(*case)
    p = molien_polynomial(g, L_MAX).coeffs
    h = molien_harmonic(g, L_MAX).coeffs
    assert list(h) == [p[l] - (p[l - 2] if l >= 2 else 0) for l in range(L_MAX + 1)]
    assert h[0] == 1
    assert all(h[l] <= multiplicity(l, g.dim_N) for l in range(L_MAX + 1))


def test_trivial_groups():
    t2 = build_group("cyclic", 1, 2)
    assert molien_polynomial(t2, 15).coeffs == tuple(l + 1 for l in range(16))
    t3 = build_group("cyclic", 1, 3)
    assert molien_harmonic(t3, 15).coeffs == tuple(multiplicity(l, 3) for l in range(16))


def test_bruteforce_small_examples():
    assert invariant_dimension_bruteforce(build_group("cyclic", 2, 2), 2) == 2
    for case in BUILTIN[:3]:
        assert invariant_dimension_bruteforce(group_of(*case), 0) == 1


@pytest.mark.parametrize("case", [("cyclic", 5, 2), ("dihedral", 3, 2), ("octa", None, 3), ("dihedral", 4, 3)], ids=ids)
@settings(max_examples=5)
@given(seed=st.integers(0, 2 ** 31 - 1))
def test_conjugation_invariance(case, seed):
    g = group_of(*case)
    q = ortho_group.rvs(g.dim_N, random_state=seed)
    conj = g.conjugate(q)
    assert conj.closure_residual() < 1e-10
    assert molien_harmonic(conj, 10).coeffs == molien_harmonic(g, 10).coeffs


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_subgroup_monotonicity(n, dim):
    c = molien_harmonic(group_of("cyclic", n, dim), L_MAX).coeffs
    d = molien_harmonic(group_of("dihedral", n, dim), L_MAX).coeffs
    assert all(a >= b for a, b in zip(c, d))
    if dim == 2:
        # halved dimensions on the active degrees
        assert all(a == 2 * b for a, b in zip(c[1:], d[1:]))


def test_precision_error_on_broken_group():
    c, sn = np.cos(1.0), np.sin(1.0)
    bogus = FiniteGroup(2, (np.eye(2), np.array([[c, -sn], [sn, c]])), "broken")
    with pytest.raises(MolienPrecisionError):
        molien_harmonic(bogus, 6)


def test_generate_rejects_infinite_order():
    with pytest.raises(ValueError):
        generate([np.array([[np.cos(1.0), -np.sin(1.0)], [np.sin(1.0), np.cos(1.0)]])], "irrational", 2)


# ---- active modes -----------------------------------------------------------------------

def test_active_modes_trivial_group():
    a = active_modes(build_group("cyclic", 1, 2), spectrum_table(2, 200))
    assert a.smallest_active_mu == 8
    assert a.first_active_degree == 1


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_cyclic_inactive_iff_not_divisible(n):
    a = active_modes(group_of("cyclic", n, 2), spectrum_table(2, 3000))
    assert a.inactive_degrees() == [l for l in range(1, len(a.harmonic_dims)) if l % n]


def test_dihedral_three_with_radial_exclusion():
    a = active_modes(group_of("dihedral", 3, 2), spectrum_table(2, 400), exclude_radial=True)
    assert a.first_active_degree == 3
    assert a.inactive_degrees(2) == [1, 2]
    from thinfilm.spectrum import mu_of
    assert a.smallest_active_mu == mu_of(3, 0, 2)


def test_active_modes_errors():
    with pytest.raises(ValueError):
        active_modes(group_of("octa", None, 3), spectrum_table(2, 10))
    with pytest.raises(ValueError):
        active_modes(group_of("cyclic", 3, 2), spectrum_table(2, 100), l_max=1)


def test_invariant_projection_is_idempotent():
    g = group_of("cyclic", 3, 2)
    rng = np.random.default_rng(3)
    coeffs = {(l, n, k): rng.normal() for l in range(0, 7) for n in (1, 2) for k in (0, 1)
              if not (l == 0 and n == 2)}
    p1 = invariant_projection(g, coeffs, 2)
    p2 = invariant_projection(g, p1, 2)
    assert all(abs(p1[m] - p2[m]) < 1e-12 for m in p1)
    assert all(p1[(l, n, k)] == 0.0 for (l, n, k) in p1 if l in (1, 2, 4, 5))
    assert any(abs(p1[(3, n, 0)]) > 0 for n in (1, 2))
