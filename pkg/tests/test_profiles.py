import math

import numpy as np
import pytest
import sympy

from cusplab.errors import DomainError, InvalidProfileError
from cusplab.profiles import (
    PHI0_CAP,
    ProfileSpec,
    check_assumptions,
    eval_profile,
    invert_profile,
    phi0,
    sigma_max,
)


def power(theta, R0=1.0):
    return ProfileSpec(kind="power", R0=R0, theta=theta)


def make_tabulated(theta=0.5, R0=1.0, n=240):
    rhos = np.geomspace(R0 * 1e-8, R0, n)
    rows = [eval_profile(power(theta, R0), r) for r in rhos]
    table = [(r, s, d, dd) for r, (s, d, dd) in zip(rhos, rows)]
    return ProfileSpec(kind="tabulated", R0=R0, table=table)


# ---------------------------------------------------------------- eval_profile

def test_eval_power_half_against_symbolic():
    # oracle: symbolic differentiation of rho**theta
    rho_s, th_s = sympy.symbols("rho theta", positive=True)
    expr = rho_s ** th_s
    subs = {rho_s: 1.0, th_s: 0.5}
    exp = [float(sympy.diff(expr, rho_s, k).subs(subs)) for k in range(3)]
    got = eval_profile(power(0.5), 1.0)
    assert got == pytest.approx(exp, rel=1e-14)
    assert got == pytest.approx((1.0, 0.5, -0.25), rel=1e-14)


def test_eval_cone_is_identity_graph():
    s, ds, dds = eval_profile(power(1.0), 0.3)
    assert (s, ds, dds) == (0.3, 1.0, 0.0)


def test_eval_log_profile_at_inverse_e():
    # sigma = 1/log(1/rho), sigma' = 1/(rho log^2(1/rho))
    prof = ProfileSpec(kind="log", R0=1.0)
    s, ds, dds = eval_profile(prof, math.exp(-1.0))
    assert s == pytest.approx(1.0, rel=1e-14)
    assert ds == pytest.approx(math.e, rel=1e-14)
    # symbolic oracle for the second derivative
    rho_s = sympy.symbols("rho", positive=True)
    expr = 1 / sympy.log(1 / rho_s)
    dd_exp = float(sympy.diff(expr, rho_s, 2).subs({rho_s: math.exp(-1.0)}))
    assert dds == pytest.approx(dd_exp, rel=1e-12)


def test_eval_domain_errors():
    with pytest.raises(DomainError):
        eval_profile(power(0.5), 0.0)
    with pytest.raises(DomainError):
        eval_profile(power(0.5), 1.5)


def test_tabulated_requires_monotone_sigma():
    bad = [(0.1, 0.5, 1.0, 0.0), (0.2, 0.4, 1.0, 0.0),
           (0.3, 0.6, 1.0, 0.0), (0.4, 0.7, 1.0, 0.0)]
    with pytest.raises(InvalidProfileError):
        ProfileSpec(kind="tabulated", R0=1.0, table=bad)


def test_tabulated_tracks_power_profile():
    tab = make_tabulated(theta=0.5)
    for r in (0.01, 0.1, 0.5, 0.9):
        st, dt, ddt = eval_profile(tab, r)
        se, de, dde = eval_profile(power(0.5), r)
        assert st == pytest.approx(se, rel=2e-3)
        assert dt == pytest.approx(de, rel=2e-2)


# -------------------------------------------------------------- invert_profile

@pytest.mark.parametrize("theta,z,expected", [
    (0.5, 0.5, 0.25),     # z**(1/theta)
    (1.0, 0.7, 0.7),      # identity
    (0.25, 0.5, 0.0625),  # z**4
])
def test_invert_power_closed_form(theta, z, expected):
    assert invert_profile(power(theta), z) == pytest.approx(expected, rel=1e-12)


def test_invert_out_of_range():
    with pytest.raises(DomainError):
        invert_profile(power(0.5), 1.5)
    with pytest.raises(DomainError):
        invert_profile(power(0.5), 0.0)


@pytest.mark.parametrize("prof", [power(0.5), power(1.0), power(0.25),
                                  ProfileSpec(kind="log", R0=1.0)])
def test_invert_eval_roundtrip(prof):
    # invert_profile(eval_profile) is the identity on (0, R0] within 1e-10
    for rho in np.geomspace(1e-6, prof.R0 * (0.99 if prof.kind == "log" else 1.0), 40):
        z = eval_profile(prof, rho)[0]
        assert invert_profile(prof, z) == pytest.approx(rho, rel=1e-10)


def test_invert_tabulated_residual():
    tab = make_tabulated(theta=0.5)
    for z in (0.05, 0.3, 0.9):
        rho = invert_profile(tab, z)
        assert abs(eval_profile(tab, rho)[0] - z) <= 1e-12 * z + 1e-15


# ------------------------------------------------------------ check_assumptions

def test_power_cusp_classification():
    rep = check_assumptions(power(0.5))
    assert rep.a1_ok and rep.cusp_type == "cusp" and rep.a3_ok
    assert rep.best_theta == pytest.approx(0.5, abs=1e-10)


def test_power_cone_classification():
    rep = check_assumptions(power(1.0))
    assert rep.a1_ok and rep.cusp_type == "cone" and rep.a3_ok
    assert rep.best_theta == pytest.approx(1.0, abs=1e-12)


def test_log_profile_fails_opening_condition():
    rep = check_assumptions(ProfileSpec(kind="log", R0=1.0))
    assert rep.a1_ok
    assert rep.cusp_type == "cusp"
    assert not rep.a3_ok and rep.best_theta is None
    assert len(rep.witnesses) > 0


def test_grid_size_precondition():
    with pytest.raises(DomainError):
        check_assumptions(power(0.5), grid_size=4)


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75, 1.0])
def test_opening_identity_for_power(theta):
    # sigma''*rho/sigma' - (theta - 1) vanishes identically for power profiles
    prof = power(theta)
    for rho in np.geomspace(1e-12, 1.0, 60):
        s, ds, dds = eval_profile(prof, rho)
        assert dds * rho / ds - (theta - 1.0) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("theta", [0.25, 0.5, 1.0])
def test_slope_growth_bound(theta):
    # sigma'(rho) <= sigma'(R0) * (R0/rho)^(1-theta)
    prof = power(theta)
    dR0 = eval_profile(prof, 1.0)[1]
    for rho in np.geomspace(1e-10, 1.0, 50):
        ds = eval_profile(prof, rho)[1]
        assert ds <= dR0 * (1.0 / rho) ** (1.0 - theta) * (1 + 1e-12)


# ------------------------------------------------------------------------ phi0

def test_phi0_power_values():
    assert phi0(power(0.5), 0.25) == pytest.approx(2.0, rel=1e-12)
    assert phi0(power(1.0), 0.77) == pytest.approx(1.0, rel=1e-14)


def test_phi0_cap_near_zero():
    assert phi0(power(0.5), 1e-30) == PHI0_CAP


def test_phi0_nonincreasing():
    prof = power(0.4)
    values = [phi0(prof, R) for R in np.linspace(1e-4, 0.999, 25)]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_sigma_max():
    assert sigma_max(power(0.5, R0=0.81)) == pytest.approx(0.9)
    assert sigma_max(ProfileSpec(kind="log", R0=1.0)) == math.inf


def test_config_roundtrip():
    for prof in (power(0.5), ProfileSpec(kind="log", R0=2.0), make_tabulated()):
        again = ProfileSpec.from_config(prof.to_config())
        assert again.kind == prof.kind and again.R0 == prof.R0
        if prof.kind != "log":
            r = 0.37 * prof.R0
            assert eval_profile(again, r)[0] == pytest.approx(eval_profile(prof, r)[0])
