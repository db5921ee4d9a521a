"""Analytic toolkit around the cusp: auxiliary convex potential, level sets,
and the tangential extension field.

For a profile sigma with opening theta the module provides

* ``mu(z) = sign(z) * sigma'(sigma^-1(|z|)) * sigma^-1(|z|)`` and its primitive
  ``M(z) = int_0^|z| mu``, an even, strictly convex potential with
  ``theta*z^2 <= 2*M(z) <= z^2``;
* the level function ``g(x) = sqrt(|x_bar|^2/2 + M(x_d))`` whose gradient
  magnitude stays in ``[theta/sqrt(2), 1/(sqrt(2)*theta)]``;
* the unit field ``tau = grad g / |grad g|``, which restricts on the interface
  to the tangent field ``tau_S`` and has an explicit Jacobian;
* slices of the level sets ``{g = R}``: the radius/height of the circle where
  the level set crosses the interface, and the graph of the level set in the
  upper half together with its first two radial derivatives.

Everything is a pure function of an immutable context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DegeneratePointError, DomainError
from .profiles import ProfileSpec, check_assumptions, eval_profile, invert_profile, phi0

_ROOT_RTOL = 1e-12
_ROOT_MAXITER = 200


@dataclass(frozen=True)
class GeometryCtx:
    """Immutable evaluation context for one profile in dimension d >= 2."""

    profile: ProfileSpec
    dim: int = 2
    quadrature_tol: float = 1e-10
    theta: float = field(init=False)
    sigma_R0: float = field(init=False)
    _m_spline: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError("dim must be >= 2")
        report = check_assumptions(self.profile)
        if not (report.a1_ok and report.a3_ok):
            raise DomainError("profile must satisfy the structural assumptions "
                              "(positive slope and a positive opening constant)")
        theta = (self.profile.theta if self.profile.kind == "power"
                 else report.best_theta)
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "sigma_R0",
                           eval_profile(self.profile, self.profile.R0)[0])
        object.__setattr__(self, "_m_spline", _build_m_spline(self))

    # Fast even evaluator of M used by root solves and bulk quadratures; the
    # public aux_functions path integrates adaptively and the two are
    # cross-checked in the test suite.
    def M_fast(self, z: float) -> float:
        if self.profile.kind == "power":
            return 0.5 * self.theta * z * z
        az = abs(z)
        if az >= self.sigma_R0:
            raise DomainError(f"|z|={az} outside (-sigma(R0), sigma(R0))")
        return float(self._m_spline(az))

    def M_max(self) -> float:
        """Supremum of M on the open height interval."""
        if self.profile.kind == "power":
            return 0.5 * self.theta * self.sigma_R0 ** 2
        return float(self._m_spline(self.sigma_R0))


def _build_m_spline(ctx: GeometryCtx):
    if ctx.profile.kind == "power":
        return None
    zmax = ctx.sigma_R0
    grid = np.unique(np.concatenate([
        np.geomspace(zmax * 1e-12, zmax, 2000), [0.0, zmax]]))
    mu_vals = np.array([mu(ctx, z) for z in grid])
    spline = CubicSpline(grid, mu_vals).antiderivative()
    return spline


def mu(ctx: GeometryCtx, z: float) -> float:
    """Odd extension of sigma'(sigma^-1) * sigma^-1 evaluated at height z."""
    if z == 0.0:
        return 0.0
    az = abs(z)
    rho = invert_profile(ctx.profile, az)
    _, ds, _ = eval_profile(ctx.profile, rho)
    return math.copysign(ds * rho, z)


def mu_prime(ctx: GeometryCtx, z: float) -> float:
    """d(mu)/dz = 1 + sigma''*rho/sigma' at rho = sigma^-1(|z|)."""
    if z == 0.0:
        return ctx.theta
    rho = invert_profile(ctx.profile, abs(z))
    _, ds, dds = eval_profile(ctx.profile, rho)
    return 1.0 + dds * rho / ds


def aux_functions(ctx: GeometryCtx, z: float) -> Tuple[float, float, float]:
    """Return (mu(z), M(z), mu(z)) with M by adaptive quadrature of mu.

    The third component duplicates mu so callers can check M' = mu by finite
    differences.  M is even with M(0) = 0.
    """
    if abs(z) >= ctx.sigma_R0:
        raise DomainError(f"|z|={abs(z)} outside (-sigma(R0), sigma(R0))")
    m = mu(ctx, z)
    if z == 0.0:
        return 0.0, 0.0, 0.0
    val, _ = integrate.quad(lambda s: mu(ctx, s), 0.0, abs(z),
                            epsabs=ctx.quadrature_tol, epsrel=ctx.quadrature_tol,
                            limit=200)
    return m, float(val), m


def M_inv_plus(ctx: GeometryCtx, level: float) -> float:
    """Positive root z of M(z) = level; increasing in the level value."""
    if not (0.0 < level < ctx.M_max()):
        raise DomainError(f"level {level} outside (0, M(sigma(R0))={ctx.M_max()})")
    if ctx.profile.kind == "power":
        return math.sqrt(2.0 * level / ctx.theta)
    zmax = ctx.sigma_R0 * (1.0 - 1e-15)
    return float(brentq(lambda z: ctx.M_fast(z) - level, 0.0, zmax,
                        rtol=_ROOT_RTOL, maxiter=_ROOT_MAXITER))


def g_field(ctx: GeometryCtx, r: float, xd: float):
    """Level function value, gradient magnitude and direction at (r, x_d).

    g = sqrt(r^2/2 + M(x_d));  |grad g| = 0.5*sqrt((r^2+mu^2)/(r^2/2+M));
    the gradient direction is parallel to (r, mu(x_d)) in the (radius, height)
    plane and is undefined at the origin.
    """
    if r < 0.0:
        raise DomainError("radius must be >= 0")
    Mz = ctx.M_fast(xd)
    m = mu(ctx, xd)
    g2 = 0.5 * r * r + Mz
    g = math.sqrt(g2)
    if g2 == 0.0:
        raise DegeneratePointError("gradient direction undefined at the origin")
    grad_norm = 0.5 * math.sqrt((r * r + m * m) / g2)
    nrm = math.hypot(r, m)
    grad_dir = (r / nrm, m / nrm)
    return g, grad_norm, grad_dir


def tau_S(profile: ProfileSpec, x: np.ndarray) -> np.ndarray:
    """Unit tangent field on the interface (axisymmetric meridian direction)."""
    x = np.asarray(x, dtype=float)
    xb = x[:-1]
    r = float(np.linalg.norm(xb))
    if r == 0.0:
        raise DegeneratePointError("tau_S undefined on the axis")
    _, ds, _ = eval_profile(profile, r)
    den = math.sqrt(1.0 + ds * ds)
    return np.concatenate([xb / r, [ds]]) / den


def nu_S(profile: ProfileSpec, x: np.ndarray) -> np.ndarray:
    """Unit normal on the interface pointing into the upper (cusp) region."""
    x = np.asarray(x, dtype=float)
    xb = x[:-1]
    r = float(np.linalg.norm(xb))
    if r == 0.0:
        raise DegeneratePointError("nu_S undefined on the axis")
    _, ds, _ = eval_profile(profile, r)
    den = math.sqrt(1.0 + ds * ds)
    return np.concatenate([-ds * xb / r, [1.0]]) / den


def tau_field(ctx: GeometryCtx, x: np.ndarray, eps_guard: float = 1e-14):
    """Unit extension tau = (x_bar, mu(x_d)) / sqrt(r^2 + mu^2) and its Jacobian.

    Jacobian entries (i, k range over the first d-1 coordinates, w = r^2+mu^2):

        d_i tau_k = (delta_ik - x_i*x_k/w) / sqrt(w)
        d_i tau_d = -x_i * mu / w^(3/2)
        d_d tau_i = -x_i * mu * mu' / w^(3/2)
        d_d tau_d = mu' * r^2 / w^(3/2)

    Returns (tau, grad_tau, bound_ok) where bound_ok certifies the entrywise
    bound |d tau| <= 1/sqrt(w) together with sqrt(w) >= theta*|x|.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (ctx.dim,):
        raise DomainError(f"point must have dimension {ctx.dim}")
    if float(np.linalg.norm(x)) <= eps_guard:
        raise DegeneratePointError("tau undefined within the guard radius")
    d = ctx.dim
    xb, xd = x[:-1], float(x[-1])
    r2 = float(xb @ xb)
    m = mu(ctx, xd)
    mp = mu_prime(ctx, xd)
    w = r2 + m * m
    sw = math.sqrt(w)
    tau = np.concatenate([xb, [m]]) / sw

    grad = np.empty((d, d))
    for i in range(d - 1):
        for k in range(d - 1):
            grad[i, k] = ((1.0 if i == k else 0.0) - xb[i] * xb[k] / w) / sw
        grad[i, d - 1] = -xb[i] * m / (w * sw)
        grad[d - 1, i] = -xb[i] * m * mp / (w * sw)
    grad[d - 1, d - 1] = mp * r2 / (w * sw)

    bound_ok = bool(np.max(np.abs(grad)) <= 1.0 / sw * (1.0 + 1e-12)
                    and sw >= ctx.theta * float(np.linalg.norm(x)) * (1.0 - 1e-12))
    return tau, grad, bound_ok


def lower_bound_constant(ctx: GeometryCtx) -> float:
    """Constant a0 in the crossing-radius lower bound a0 * R^(1/theta)."""
    R0 = ctx.profile.R0
    th = ctx.theta
    return (2.0 * R0 ** (2 * th) / (R0 ** 2 + ctx.sigma_R0 ** 2 / th ** 2)) ** (1.0 / (2 * th))


@dataclass(frozen=True)
class LevelSetSlice:
    """Crossing data of one level set with the interface, plus its upper graph."""

    R: float
    rho_hat: float
    z_hat: float
    gamma: Callable[[float], Tuple[float, float, float]]

    def crossing_bounds(self, ctx: GeometryCtx) -> Tuple[float, float]:
        """(lower, upper) bounds that rho_hat must satisfy for R < R0/sqrt(2)."""
        a0 = lower_bound_constant(ctx)
        lo = a0 * self.R ** (1.0 / ctx.theta)
        f0 = phi0(ctx.profile, min(math.sqrt(2) * self.R, ctx.profile.R0 * (1 - 1e-12)))
        hi = math.sqrt(2) * self.R / math.sqrt(1.0 + ctx.theta * f0 * f0)
        return lo, hi


def level_set_slice(ctx: GeometryCtx, R: float) -> LevelSetSlice:
    """Solve the crossing radius and build the upper-graph evaluator.

    rho_hat solves rho^2/2 + M(sigma(rho)) = R^2 and z_hat = sigma(rho_hat).
    The graph gamma(s) = M_inv_plus(R^2 - s^2/2) is valid for radii s with
    R^2 - s^2/2 inside the range of M; its first two radial derivatives are
    gamma' = -s/mu(gamma) and gamma'' = -1/mu(gamma) - s^2*mu'(gamma)/mu^3.
    """
    R0 = ctx.profile.R0
    if not (0.0 < R < R0 / math.sqrt(2)):
        raise DomainError(f"R={R} outside (0, R0/sqrt(2))")

    def h(rho):
        return 0.5 * rho * rho + ctx.M_fast(eval_profile(ctx.profile, rho)[0]) - R * R

    hi = min(R0, math.sqrt(2) * R)
    rho_hat = float(brentq(h, R0 * 1e-18, hi * (1 + 1e-13), rtol=8.9e-16,
                           xtol=1e-30, maxiter=_ROOT_MAXITER))
    z_hat = eval_profile(ctx.profile, rho_hat)[0]

    m_cap = ctx.M_max()

    def gamma(s: float) -> Tuple[float, float, float]:
        level = R * R - 0.5 * s * s
        if not (0.0 < level < m_cap):
            raise DomainError("graph radius outside the level-set cap "
                              "(level value escapes the cylinder)")
        gz = M_inv_plus(ctx, level)
        mg = mu(ctx, gz)
        mpg = mu_prime(ctx, gz)
        d1 = -s / mg
        d2 = -1.0 / mg - s * s * mpg / mg ** 3
        return gz, d1, d2

    return LevelSetSlice(R=R, rho_hat=rho_hat, z_hat=z_hat, gamma=gamma)


# ------------------------------------------------------------------ d=2 curves

def sublevel_area(ctx: GeometryCtx, R: float) -> float:
    """Area of the planar sublevel set {r^2/2 + M(x_d) < R^2} (d = 2).

    The region is symmetric in both coordinates:
    area = 4*sqrt(2) * int_0^{z_R} sqrt(R^2 - M(z)) dz with M(z_R) = R^2.
    """
    if ctx.dim != 2:
        raise DomainError("sublevel_area is a planar helper")
    if not (0.0 < R * R < ctx.M_max()):
        raise DomainError("level set escapes the reference cylinder")
    z_top = M_inv_plus(ctx, R * R)
    val, _ = integrate.quad(lambda z: math.sqrt(max(R * R - ctx.M_fast(z), 0.0)),
                            0.0, z_top, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 4.0 * math.sqrt(2.0) * val


def level_curve_integral(ctx: GeometryCtx, R: float, f, weight: str = "none",
                         n_nodes: int = 512) -> float:
    """Line integral over the closed planar level curve {g = R} (d = 2).

    ``weight="inv_grad"`` integrates f/|grad g|; ``"none"`` integrates f.
    The curve is star-shaped around the origin, so it is parametrized by the
    polar angle and integrated with the trapezoid rule (spectrally accurate
    for smooth closed curves).
    """
    if ctx.dim != 2:
        raise DomainError("level_curve_integral is a planar helper")
    if not (0.0 < R * R < ctx.M_max()):
        raise DomainError("level set escapes the reference cylinder")

    ts = np.linspace(0.0, 2.0 * math.pi, n_nodes, endpoint=False)
    # polar radius is capped by g^2 >= theta*|x|^2/2
    s_max_r = math.sqrt(2.0 / ctx.theta) * R * (1 + 1e-7)
    total = 0.0
    for t in ts:
        c, s = math.cos(t), math.sin(t)

        def radial(u):
            return 0.5 * (u * c) ** 2 + ctx.M_fast(u * s) - R * R

        hi = s_max_r if abs(s) < 1e-12 else min(
            s_max_r, (ctx.sigma_R0 * (1 - 1e-12)) / abs(s))
        u = brentq(radial, R * 1e-12, hi, rtol=_ROOT_RTOL, maxiter=_ROOT_MAXITER)
        x1, x2 = u * c, u * s
        m = mu(ctx, x2)
        # implicit derivative of the polar radius:
        #   F_u = u*c^2 + mu(u s)*s,  F_t = -u^2*c*s + mu(u s)*u*c
        Fu = u * c * c + m * s
        Ft = -u * u * c * s + m * u * c
        du = -Ft / Fu
        speed = math.hypot(du, u)
        val = f((x1, x2))
        if weight == "inv_grad":
            _, gn, _ = g_field(ctx, abs(x1), x2)
            val /= gn
        total += val * speed
    return total * (2.0 * math.pi / n_nodes)
