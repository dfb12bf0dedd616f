import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from thinfilm.linops import Polynomial, norms_polynomial
from thinfilm.spectrum import Eigenmode, ball_grid
from thinfilm.transform import (
    DropletField,
    NotSelfSimilarError,
    PerturbationField,
    SelfSimilarFrame,
    TransformError,
    V_star,
    confined_to_physical,
    diagnostics,
    droplet_from_w,
    mass_from_sigma,
    mass_identity_rhs,
    mode_amplitude,
    physical_to_confined,
    pullback_integral,
    sigma_from_mass,
    sqrt_v_gradient_identity,
    stationary_mass,
    stationary_moment,
    v_star,
    v_star_dilated,
    v_star_translated,
    v_to_w,
    w_to_v,
)


def sample_w(N, scale, seed=0):
    """Smooth synthetic perturbation (radial for N >= 2)."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, 4)
    r2 = Polynomial.norm_squared(N)
    w = Polynomial.constant(c[0], N) + r2 * c[1] + r2 * r2 * c[2] * 0.5
    if N == 1:
        w = w + Polynomial.coordinate(0, 1) * c[3]
    return w * scale


def line_droplet(x, v, N=1):
    return DropletField(N, np.asarray(x, float), np.asarray(v, float), 0.0)


# ---- frame ------------------------------------------------------------------------

@pytest.mark.parametrize("N", [1, 2, 3])
def test_sigma_mass_round_trip_against_quadrature(N):
    frame = SelfSimilarFrame.from_sigma(1.0, N)
    assert frame.sigma_M == pytest.approx(1.0, rel=1e-14)
    area = 2.0 if N == 1 else {2: 2 * np.pi, 3: 4 * np.pi}[N]
    radial, _ = integrate.quad(lambda r: (1 - r * r) ** 2 * r ** (N - 1), 0, 1)
    assert frame.M == pytest.approx(frame.alpha_N * area * radial, rel=1e-12)
    assert sigma_from_mass(mass_from_sigma(2.7, N), N) == pytest.approx(2.7, rel=1e-14)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_smyth_hill_mass_is_time_independent(N):
    frame = SelfSimilarFrame(N, 0.37)
    for tau in (0.5, 1.0, 30.0):
        R = np.sqrt(frame.sigma_M) * tau ** (1 / (N + 4))
        area = 2.0 if N == 1 else {2: 2 * np.pi, 3: 4 * np.pi}[N]
        m, _ = integrate.quad(lambda r: frame.smyth_hill(tau, np.array([r]))[0] * r ** (N - 1), 0, R)
        assert area * m == pytest.approx(0.37, rel=1e-10)


def test_stationary_mass_closed_form():
    assert stationary_mass(1) == pytest.approx(integrate.quad(v_star, -1, 1)[0], rel=1e-13)
    assert stationary_mass(1) == pytest.approx(4 / 15)
    r, _ = integrate.quad(lambda r: v_star(r) * 2 * np.pi * r, 0, 1)
    assert stationary_mass(2) == pytest.approx(r, rel=1e-13)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_smyth_hill_maps_to_stationary_profile(N):
    frame = SelfSimilarFrame(N, 1.3)
    for tau in (0.2, 1.0, 7.5):
        y = np.linspace(0, 2 * np.sqrt(frame.sigma_M) * tau ** (1 / (N + 4)), 41)
        u = frame.smyth_hill(tau, y[:, None] if N > 1 else y)
        x, v, t = physical_to_confined(y, u, tau, frame)
        assert np.allclose(v, v_star(x), atol=1e-14, rtol=1e-12)
        assert t == pytest.approx(np.log(tau) / ((N + 4) * 2 * (N + 2)))


@given(tau=st.floats(1e-3, 1e3), M=st.floats(0.01, 10.0), N=st.integers(1, 3))
def test_frame_round_trip(tau, M, N):
    frame = SelfSimilarFrame(N, M)
    y = np.linspace(-1, 1, 9)
    u = np.linspace(0, 2, 9)
    x, v, t = physical_to_confined(y, u, tau, frame)
    y2, u2, tau2 = confined_to_physical(x, v, t, frame)
    assert np.allclose(y2, y, rtol=1e-12, atol=1e-14)
    assert np.allclose(u2, u, rtol=1e-12, atol=1e-14)
    assert tau2 == pytest.approx(tau, rel=1e-12)


def test_time_origin_and_errors():
    frame = SelfSimilarFrame(1, 1.0)
    assert frame.tau_of(0.0) == 1.0
    with pytest.raises(ValueError):
        physical_to_confined([0.0], [0.0], 0.0, frame)
    with pytest.raises(ValueError):
        sigma_from_mass(-1.0, 2)


# ---- map w -> v -------------------------------------------------------------------------

@pytest.mark.parametrize("N", [1, 2, 3])
def test_zero_perturbation_gives_stationary_profile(N):
    grid = ball_grid(N, 8)
    x, v = w_to_v(Polynomial.constant(0.0, N), grid.nodes)
    assert np.allclose(v, v_star(np.linalg.norm(x, axis=1)), atol=1e-16)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_constant_perturbation_is_dilation(N):
    c = 0.03
    grid = ball_grid(N, 8)
    x, v = w_to_v(Polynomial.constant(c, N), grid.nodes)
    lam = 1 + c
    r = np.linalg.norm(x, axis=1)
    assert np.allclose(v, lam ** 4 * v_star(r / lam))
    assert mass_identity_rhs(Polynomial.constant(c, N)) == pytest.approx(lam ** (N + 4) * stationary_mass(N), rel=1e-13)


@pytest.mark.parametrize("N", [1, 2, 3])
def test_mass_identity(N):
    w = sample_w(N, 0.04, seed=N)
    phys = droplet_from_w(w, 2001).mass()
    assert abs(phys - mass_identity_rhs(w)) < 1e-8
    assert abs(pullback_integral(w) - mass_identity_rhs(w)) < 1e-13


def test_jacobian_positivity_enforced():
    w = Polynomial.coordinate(0, 1) * -1.5
    with pytest.raises(TransformError):
        w_to_v(w, np.array([[0.9]]))


# ---- map v -> w -------------------------------------------------------------------------

@pytest.mark.parametrize("N", [1, 2, 3])
def test_round_trip(N):
    grid = ball_grid(N, 12)
    w = sample_w(N, 1.0, seed=10 + N)
    w = w * (0.04 / norms_polynomial(w, grid).w_norm)
    assert norms_polynomial(w, grid).w_norm <= 0.05
    field = v_to_w(droplet_from_w(w, 2001), grid)
    assert np.max(np.abs(field.values - w(grid.nodes))) < 1e-6
    grad = np.array([d(grid.nodes) for d in w.gradient()])
    assert np.max(np.abs(field.gradient - grad)) < 1e-6
    # defining identity rho^2 (1 + w)^4 = v(x(z))
    x, v = w_to_v(field)
    coord = x[:, 0] if N == 1 else np.linalg.norm(x, axis=1)
    drop = droplet_from_w(w, 2001)
    assert np.max(np.abs(drop(coord) - v)) < 1e-10


def test_stationary_profile_gives_zero_perturbation():
    x = np.linspace(-1.2, 1.2, 961)
    field = v_to_w(line_droplet(x, v_star(x)), ball_grid(1, 12))
    assert field.sup() < 1e-10


@pytest.mark.parametrize("N", [1, 2, 3])
def test_jacobian_by_finite_differences(N):
    w = sample_w(N, 0.03, seed=20 + N)
    drop = droplet_from_w(w, 4001)
    grid = ball_grid(N, 10)
    field = v_to_w(drop, grid)
    uniq, wu, dwdz = field.radial_profile
    keep = (np.abs(uniq) < 0.9) & (np.abs(uniq) > 0.05)
    zc = uniq[keep]
    x = (1 + wu[keep]) * zc

    def phi(s):
        return s / np.sqrt(2 * drop.sqrt_v(s) + s ** 2)

    h = 1e-5
    dphi = (phi(x + h) - phi(x - h)) / (2 * h)
    det = dphi if N == 1 else dphi * (phi(x) / x) ** (N - 1)
    expected = 1 / ((1 + wu[keep] + zc * dwdz[keep]) * (1 + wu[keep]) ** (N - 1))
    assert np.max(np.abs(det / expected - 1)) < 1e-5


def test_sqrt_v_gradient_identity():
    w = sample_w(1, 0.03, seed=5)
    drop = droplet_from_w(w, 4001)
    grid = ball_grid(1, 10)
    field = v_to_w(drop, grid)
    x = (1 + field.values) * grid.nodes[:, 0]
    lhs = drop.sqrt_v_derivative(x) + x  # grad(sqrt v - V_*)
    rhs = sqrt_v_gradient_identity(field)[0]
    assert np.max(np.abs(lhs - rhs)) < 1e-8


def test_far_from_self_similar_is_rejected():
    x = np.linspace(-1.5, 1.5, 601)
    v = v_star_dilated(x, 1.3, 1)
    with pytest.raises(NotSelfSimilarError):
        v_to_w(line_droplet(x, v), ball_grid(1, 10))


def test_disconnected_support_rejected():
    x = np.linspace(-1, 1, 11)
    v = np.array([0, 1, 1, 0, 0, 0, 1, 1, 0, 0, 0], float)
    with pytest.raises(ValueError):
        line_droplet(x, v).support


# ---- amplitudes and the projection bridge --------------------------------------------------

def test_zero_field_has_zero_amplitudes():
    grid = ball_grid(2, 10)
    field = PerturbationField.from_polynomial(Polynomial.constant(0.0, 2), grid)
    for mode in (Eigenmode(2, 1, 1, 0), Eigenmode(2, 2, 2, 0), Eigenmode(2, 0, 1, 1)):
        assert mode_amplitude(field, mode) == 0.0


def test_translation_moment_and_center_of_mass():
    x = np.linspace(-1.5, 1.5, 3001)
    M = stationary_mass(1)
    for b in (0.01, -0.02, 0.04):
        drop = line_droplet(x, v_star_translated(x, b))
        assert drop.center_of_mass() == pytest.approx(b * M, rel=1e-8)
        assert mode_amplitude(drop, Eigenmode(1, 1, 1, 0)) == pytest.approx(b * M, rel=1e-8)
        d = diagnostics(drop)
        assert abs(d.mass_defect) < 1e-10
        assert d.center_of_mass == pytest.approx(b * M, rel=1e-8)


def test_diagnostics_vanish_for_stationary_profile():
    x = np.linspace(-1.25, 1.25, 1001)
    d = diagnostics(line_droplet(x, v_star(x)))
    for val in d.as_dict().values():
        assert abs(val) < 1e-8


def test_slope_defect_nonzero_off_equilibrium():
    x = np.linspace(-1.5, 1.5, 1001)
    d = diagnostics(line_droplet(x, v_star_dilated(x, 1.05, 1)))
    assert d.slope_defect > 1e-3
    assert d.lipschitz_closeness > 1e-3


def test_stationary_moment_of_constant_mode():
    assert stationary_moment(Eigenmode(1, 0, 1, 0)) == pytest.approx(stationary_mass(1))


def test_projection_bridge_is_quadratic():
    w1 = sample_w(1, 1.0, seed=3)
    mode = Eigenmode(1, 1, 1, 0)
    grid = ball_grid(1, 20)
    eps = np.array([0.08, 0.04, 0.02, 0.01, 0.005])
    res = []
    for e in eps:
        w = w1 * e
        phys = pullback_integral(w, lambda x: mode(x)) - stationary_moment(mode)
        wside = mode_amplitude(PerturbationField.from_polynomial(w, grid), mode)
        res.append(abs(phys - 2 * wside))
    slope = np.polyfit(np.log(eps), np.log(res), 1)[0]
    assert abs(slope - 2) < 0.1


def test_v_side_amplitude_matches_pullback():
    w = sample_w(1, 0.03, seed=8)
    drop = droplet_from_w(w, 4001)
    for mode in (Eigenmode(1, 1, 1, 0), Eigenmode(1, 0, 1, 1)):
        ref = pullback_integral(w, lambda x: mode(x)) - stationary_moment(mode)
        assert mode_amplitude(drop, mode) == pytest.approx(ref, abs=1e-9)


def test_radial_field_has_no_angular_amplitude():
    r = np.linspace(0, 1.2, 400)
    drop = DropletField(2, r, v_star_dilated(r, 1.01, 2), 0.0)
    assert mode_amplitude(drop, Eigenmode(2, 1, 1, 0)) == 0.0


def test_V_star():
    assert V_star(0.0) == 0.5
    assert np.allclose(V_star(np.array([1.0, -1.0])), 0.0)


def test_support_reaching_the_sample_end():
    x = np.linspace(-0.8, 0.8, 161)
    drop = line_droplet(x, v_star(x))
    assert drop.edges() == (-0.8, 0.8)
    assert np.allclose(drop.sqrt_v(x[1:-1]), V_star(x[1:-1]), atol=1e-10)
