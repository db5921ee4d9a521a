import math

import numpy as np
import pytest

from cusplab.errors import DegeneratePointError, DomainError
from cusplab.geometry import (
    GeometryCtx,
    LevelSetSlice,
    M_inv_plus,
    aux_functions,
    g_field,
    level_curve_integral,
    level_set_slice,
    lower_bound_constant,
    mu,
    mu_prime,
    nu_S,
    sublevel_area,
    tau_S,
    tau_field,
)
from cusplab.profiles import ProfileSpec, eval_profile

RNG = np.random.default_rng(20240817)


def ctx_power(theta, dim=2, R0=1.0):
    return GeometryCtx(profile=ProfileSpec(kind="power", R0=R0, theta=theta), dim=dim)


def test_log_profile_rejected():
    with pytest.raises(DomainError):
        GeometryCtx(profile=ProfileSpec(kind="log", R0=1.0))


# -------------------------------------------------------------- aux functions

def test_aux_power_half():
    ctx = ctx_power(0.5)
    m, M, mp = aux_functions(ctx, 0.4)
    assert m == pytest.approx(0.2, rel=1e-12)          # mu = theta*z
    assert M == pytest.approx(0.04, rel=1e-10)         # M = theta*z^2/2
    assert mp == m


def test_aux_zero_and_cone():
    ctx = ctx_power(1.0)
    assert aux_functions(ctx, 0.0) == (0.0, 0.0, 0.0)
    m, M, _ = aux_functions(ctx, 0.3)
    assert m == pytest.approx(0.3, rel=1e-12)
    assert M == pytest.approx(0.045, rel=1e-10)


def test_aux_domain_error():
    with pytest.raises(DomainError):
        aux_functions(ctx_power(0.5), 1.01)


def test_M_even_and_closed_form():
    ctx = ctx_power(0.25)
    for z in (0.1, 0.37, 0.9):
        _, Mp, _ = aux_functions(ctx, z)
        _, Mn, _ = aux_functions(ctx, -z)
        assert Mp == pytest.approx(Mn, rel=1e-12)
        assert Mp == pytest.approx(0.5 * 0.25 * z * z, rel=1e-8)


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0])
def test_potential_two_sided_bound(theta):
    # theta*z^2 <= 2*M(z) <= z^2 on a randomized grid
    ctx = ctx_power(theta)
    zmax = ctx.sigma_R0
    for z in RNG.uniform(-0.999 * zmax, 0.999 * zmax, size=1000):
        M = ctx.M_fast(z)
        assert theta * z * z <= 2 * M * (1 + 1e-12)
        assert 2 * M <= z * z * (1 + 1e-12)


@pytest.mark.parametrize("theta", [0.3, 0.7, 1.0])
def test_mu_linear_growth(theta):
    ctx = ctx_power(theta)
    for z in RNG.uniform(-0.99, 0.99, size=300):
        if z == 0:
            continue
        assert mu(ctx, z) / z >= theta * (1 - 1e-12)


def test_M_prime_matches_mu():
    # central differences of the quadrature-based M against the closed-form mu
    ctx = ctx_power(0.5)
    zmax = ctx.sigma_R0
    for z in np.linspace(0.01, 0.9, 12) * zmax:
        h = 1e-5 * zmax
        _, Mp, _ = aux_functions(ctx, z + h)
        _, Mm, _ = aux_functions(ctx, z - h)
        fd = (Mp - Mm) / (2 * h)
        assert fd == pytest.approx(mu(ctx, z), rel=1e-6)


def test_tabulated_spline_matches_quadrature():
    from test_profiles import make_tabulated
    prof = make_tabulated(theta=0.5)
    ctx = GeometryCtx(profile=prof)
    for z in (0.05, 0.3, 0.7):
        _, Mq, _ = aux_functions(ctx, z)
        assert ctx.M_fast(z) == pytest.approx(Mq, rel=1e-7, abs=1e-12)


# ------------------------------------------------------------------ M_inv_plus

def test_M_inv_values_and_bounds():
    ctx = ctx_power(0.5)
    z = M_inv_plus(ctx, 0.02)
    assert z == pytest.approx(math.sqrt(0.08), rel=1e-10)
    assert math.sqrt(0.04) <= z <= math.sqrt(0.08) * (1 + 1e-12)
    ctx1 = ctx_power(1.0)
    assert M_inv_plus(ctx1, 0.045) == pytest.approx(0.3, rel=1e-10)


def test_M_inv_monotone_and_domain():
    ctx = ctx_power(0.5)
    levels = np.linspace(1e-4, ctx.M_max() * 0.999, 30)
    roots = [M_inv_plus(ctx, lv) for lv in levels]
    assert all(a < b for a, b in zip(roots, roots[1:]))
    with pytest.raises(DomainError):
        M_inv_plus(ctx, ctx.M_max() * 1.01)


# --------------------------------------------------------------------- g field

def test_g_on_axis():
    ctx = ctx_power(0.5)
    g, _, _ = g_field(ctx, 0.0, 0.4)
    assert g == pytest.approx(math.sqrt(ctx.M_fast(0.4)), rel=1e-12)


def test_g_example_point():
    ctx = ctx_power(0.5)
    g, gn, gd = g_field(ctx, 0.3, 0.4)
    assert g == pytest.approx(math.sqrt(0.085), rel=1e-10)
    nrm = math.hypot(0.3, 0.2)
    assert gd == pytest.approx((0.3 / nrm, 0.2 / nrm), rel=1e-12)


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0])
def test_gradient_magnitude_bounds(theta):
    ctx = ctx_power(theta)
    lo, hi = theta / math.sqrt(2), 1 / (math.sqrt(2) * theta)
    for _ in range(400):
        r = RNG.uniform(0, 0.99)
        z = RNG.uniform(-0.99, 0.99) * ctx.sigma_R0
        if r == 0 and z == 0:
            continue
        _, gn, _ = g_field(ctx, r, z)
        assert lo * (1 - 1e-12) <= gn <= hi * (1 + 1e-12)


def test_g_degenerate_origin():
    with pytest.raises(DegeneratePointError):
        g_field(ctx_power(0.5), 0.0, 0.0)


# ------------------------------------------------------------------- tau field

def test_tau_matches_surface_tangent():
    ctx = ctx_power(0.5, dim=3)
    for r in (0.05, 0.3, 0.8):
        ang = RNG.uniform(0, 2 * math.pi)
        z = eval_profile(ctx.profile, r)[0]
        x = np.array([r * math.cos(ang), r * math.sin(ang), z])
        tau, _, ok = tau_field(ctx, x)
        assert ok
        assert tau == pytest.approx(tau_S(ctx.profile, x), rel=1e-12)
        assert abs(tau @ nu_S(ctx.profile, x)) <= 1e-10


def test_tau_on_axis_points_up():
    ctx = ctx_power(0.5, dim=3)
    tau, _, _ = tau_field(ctx, np.array([0.0, 0.0, 0.5]))
    assert tau == pytest.approx(np.array([0.0, 0.0, 1.0]), abs=1e-14)


def test_tau_example_3d():
    ctx = ctx_power(0.5, dim=3)
    x = np.array([0.3, 0.0, 0.4])
    tau, _, _ = tau_field(ctx, x)
    expect = np.array([0.3, 0.0, 0.2]) / math.hypot(0.3, 0.2)
    assert tau == pytest.approx(expect, rel=1e-12)


def test_tau_unit_norm_everywhere():
    ctx = ctx_power(0.5, dim=2)
    for _ in range(300):
        x = RNG.uniform(-0.9, 0.9, size=2)
        if np.linalg.norm(x) < 1e-3 or abs(x[1]) > 0.99 * ctx.sigma_R0:
            continue
        tau, _, _ = tau_field(ctx, x)
        assert np.linalg.norm(tau) == pytest.approx(1.0, rel=1e-13)


def test_tau_guard():
    with pytest.raises(DegeneratePointError):
        tau_field(ctx_power(0.5), np.array([0.0, 0.0]), eps_guard=1e-6)


@pytest.mark.parametrize("dim", [2, 3])
def test_grad_tau_matches_finite_differences(dim):
    # Jacobian entries against central differences at interior points
    ctx = ctx_power(0.5, dim=dim)
    n_checked = 0
    while n_checked < 120:
        x = RNG.uniform(-0.8, 0.8, size=dim)
        if np.linalg.norm(x) < 0.05 or abs(x[-1]) > 0.9 * ctx.sigma_R0:
            continue
        _, grad, ok = tau_field(ctx, x)
        assert ok
        h = 1e-6
        fd = np.empty((dim, dim))
        for i in range(dim):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd[i] = (tau_field(ctx, xp)[0] - tau_field(ctx, xm)[0]) / (2 * h)
        scale = np.max(np.abs(grad))
        assert np.max(np.abs(fd - grad)) <= 1e-5 * scale
        n_checked += 1


# ------------------------------------------------------------ level-set slices

def test_slice_cone_closed_form():
    ctx = ctx_power(1.0)
    sl = level_set_slice(ctx, 0.5)
    assert sl.rho_hat == pytest.approx(0.5, abs=1e-10)
    assert sl.z_hat == pytest.approx(0.5, abs=1e-10)


def test_slice_cusp_closed_form():
    # theta=0.5, R=0.5: rho^2/2 + rho/4 = 1/4 -> rho = 1/2
    ctx = ctx_power(0.5)
    sl = level_set_slice(ctx, 0.5)
    assert sl.rho_hat == pytest.approx(0.5, abs=1e-10)
    assert sl.z_hat == pytest.approx(math.sqrt(0.5), abs=1e-10)


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0])
def test_slice_residual_and_bounds(theta):
    ctx = ctx_power(theta)
    for R in np.geomspace(1e-3, 0.7 / math.sqrt(2), 50):
        sl = level_set_slice(ctx, R)
        resid = 0.5 * sl.rho_hat ** 2 + ctx.M_fast(sl.z_hat) - R * R
        assert abs(resid) <= 1e-10 * R * R
        lo, hi = sl.crossing_bounds(ctx)
        assert lo * (1 - 1e-9) <= sl.rho_hat <= hi * (1 + 1e-9)


def test_gamma_graph_derivatives_and_bound():
    ctx = ctx_power(0.5)
    R = 0.3
    sl = level_set_slice(ctx, R)
    b1 = 0.9
    bound = b1 / (ctx.theta * math.sqrt(1 - b1 * b1))
    for s in np.linspace(0.0, b1 * math.sqrt(2) * R, 25):
        gz, d1, d2 = sl.gamma(s)
        assert abs(d1) <= bound * (1 + 1e-9)
        h = 1e-6
        gp, _, _ = sl.gamma(s + h)
        gm, _, _ = sl.gamma(abs(s - h))
        if s > 2 * h:
            assert (gp - gm) / (2 * h) == pytest.approx(d1, rel=1e-5, abs=1e-7)
            assert (gp - 2 * gz + gm) / h ** 2 == pytest.approx(d2, rel=1e-3, abs=1e-3)


def test_gamma_apex_consistency():
    ctx = ctx_power(0.5)
    R = 0.3
    sl = level_set_slice(ctx, R)
    gz, d1, _ = sl.gamma(0.0)
    assert gz == pytest.approx(M_inv_plus(ctx, R * R), rel=1e-12)
    assert d1 == 0.0


def test_normal_lipschitz_on_crossing_circle():
    # |nu(x)-nu(y)| <= (pi/2) * |x-y| / rho_hat on the crossing circle (d=3)
    ctx = ctx_power(0.5, dim=3)
    for R in (0.05, 0.2, 0.5):
        sl = level_set_slice(ctx, R)
        rho, z = sl.rho_hat, sl.z_hat
        for _ in range(200):
            a, b = RNG.uniform(0, 2 * math.pi, size=2)
            x = np.array([rho * math.cos(a), rho * math.sin(a), z])
            y = np.array([rho * math.cos(b), rho * math.sin(b), z])
            if np.allclose(x, y):
                continue
            dn = np.linalg.norm(nu_S(ctx.profile, x) - nu_S(ctx.profile, y))
            assert dn <= (math.pi / 2) * np.linalg.norm(x - y) / rho * (1 + 1e-9)


def test_lower_bound_constant_positive():
    for theta in (0.25, 0.5, 1.0):
        assert lower_bound_constant(ctx_power(theta)) > 0


# ----------------------------------------------------------------- coarea d=2

def test_sublevel_area_ellipse_oracle():
    # power profiles give the exact ellipse area 2*pi*R^2/sqrt(theta)
    for theta in (0.5, 1.0):
        ctx = ctx_power(theta)
        for R in (0.1, 0.3):
            exact = 2 * math.pi * R * R / math.sqrt(theta)
            assert sublevel_area(ctx, R) == pytest.approx(exact, rel=1e-8)


def test_coarea_derivative_matches_curve_integral():
    # d/dR area(C_R) = integral over {g=R} of 1/|grad g|, within 1%
    ctx = ctx_power(0.5)
    Rmax = math.sqrt(ctx.M_max())
    for R in np.linspace(0.1, 0.9, 20) * Rmax * 0.95:
        dR = 1e-4 * R
        darea = (sublevel_area(ctx, R + dR) - sublevel_area(ctx, R - dR)) / (2 * dR)
        curve = level_curve_integral(ctx, R, lambda p: 1.0, weight="inv_grad")
        assert darea == pytest.approx(curve, rel=1e-2)
        # two-sided bracket by the plain curve length
        length = level_curve_integral(ctx, R, lambda p: 1.0)
        assert math.sqrt(2) * ctx.theta * length * (1 - 1e-9) <= darea
        assert darea <= math.sqrt(2) / ctx.theta * length * (1 + 1e-9)
