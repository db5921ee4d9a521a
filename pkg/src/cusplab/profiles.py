"""Interface profiles sigma and their structural assumptions.

A profile describes the axisymmetric interface as the graph
``x_d = sigma(|x_bar|)`` on ``(0, R0]`` with ``sigma(0) = 0``.  Three kinds are
supported:

* ``power``     -- sigma(rho) = rho**theta with opening parameter theta in (0, 1];
                   theta < 1 is a cusp, theta = 1 is a cone.
* ``log``       -- sigma(rho) = 1/log(R0/rho); a cusp whose opening degenerates
                   (the standard counterexample to the opening condition).
* ``tabulated`` -- monotone-cubic interpolation of user samples
                   (rho, sigma, dsigma, ddsigma).

The structural checks are:

* A1: sigma continuous, sigma(0) = 0, sigma' > 0 on (0, R0];
* A2 / A2': sigma'(rho) -> +inf (cusp) or -> positive limit (cone) as rho -> 0+;
* A3: sigma''(rho) * rho / sigma'(rho) >= theta - 1 for some theta in (0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, InvalidProfileError

PHI0_CAP = 1e12

_PROFILE_KINDS = ("power", "log", "tabulated")


@dataclass(frozen=True)
class ProfileSpec:
    """A cusp/cone profile with its domain radius.

    For ``kind="tabulated"``, ``table`` holds rows (rho, sigma, dsigma, ddsigma)
    with strictly increasing rho and strictly increasing sigma; each column is
    interpolated by a monotone cubic so the interpolant cannot violate A1
    between samples.
    """

    kind: str
    R0: float
    theta: Optional[float] = None
    table: Optional[Sequence[Tuple[float, float, float, float]]] = None
    _interp: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in _PROFILE_KINDS:
            raise InvalidProfileError(f"unknown profile kind {self.kind!r}")
        if not (self.R0 > 0.0 and math.isfinite(self.R0)):
            raise InvalidProfileError("R0 must be a positive finite real")
        if self.kind == "power":
            if self.theta is None or not (0.0 < self.theta <= 1.0):
                raise InvalidProfileError("power profile requires theta in (0, 1]")
        elif self.theta is not None:
            raise InvalidProfileError("theta is only meaningful for kind='power'")
        if self.kind == "tabulated":
            if self.table is None or len(self.table) < 4:
                raise InvalidProfileError("tabulated profile needs >= 4 samples")
            arr = np.asarray(self.table, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 4:
                raise InvalidProfileError("table rows must be (rho, sigma, dsigma, ddsigma)")
            rho = arr[:, 0]
            if not (np.all(np.diff(rho) > 0) and rho[0] > 0 and rho[-1] <= self.R0 * (1 + 1e-12)):
                raise InvalidProfileError("table rho values must increase within (0, R0]")
            if not np.all(np.diff(arr[:, 1]) > 0):
                raise InvalidProfileError("non-monotone sigma samples")
            if not np.all(arr[:, 2] > 0):
                raise InvalidProfileError("table dsigma samples must be positive")
            interp = tuple(PchipInterpolator(rho, arr[:, j]) for j in (1, 2, 3))
            object.__setattr__(self, "_interp", interp + (rho[0], rho[-1]))
        elif self.table is not None:
            raise InvalidProfileError("table is only meaningful for kind='tabulated'")

    # -- serialization ------------------------------------------------------

    def to_config(self) -> dict:
        cfg = {"kind": self.kind, "R0": self.R0}
        if self.kind == "power":
            cfg["theta"] = self.theta
        if self.kind == "tabulated":
            cfg["samples"] = [list(row) for row in self.table]
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "ProfileSpec":
        kind = cfg.get("kind")
        if kind == "tabulated":
            return ProfileSpec(kind="tabulated", R0=float(cfg["R0"]),
                               table=[tuple(map(float, row)) for row in cfg["samples"]])
        return ProfileSpec(kind=kind, R0=float(cfg["R0"]),
                           theta=(float(cfg["theta"]) if kind == "power" else None))


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the structural checks on a sampled grid."""

    a1_ok: bool
    cusp_type: str                     # "cusp" (A2), "cone" (A2') or "neither"
    a3_ok: bool
    best_theta: Optional[float]        # largest admissible opening, None if a3 fails
    witnesses: Tuple[Tuple[float, float], ...] = ()


def _check_rho(profile: ProfileSpec, rho: float) -> None:
    if not (0.0 < rho <= profile.R0 * (1.0 + 1e-12)):
        raise DomainError(f"rho={rho} outside (0, R0={profile.R0}]")


def eval_profile(profile: ProfileSpec, rho: float) -> Tuple[float, float, float]:
    """Return (sigma, sigma', sigma'') at radius rho in (0, R0].

    The log profile diverges at rho = R0 where log(R0/rho) = 0; values there
    come out as +inf, which callers treat as out of range.
    """
    _check_rho(profile, rho)
    if profile.kind == "power":
        th = profile.theta
        return rho ** th, th * rho ** (th - 1.0), th * (th - 1.0) * rho ** (th - 2.0)
    if profile.kind == "log":
        L = math.log(profile.R0 / rho)
        if L <= 0.0:
            return math.inf, math.inf, -math.inf
        s = 1.0 / L
        ds = 1.0 / (rho * L * L)
        dds = (2.0 / L - 1.0) / (rho * rho * L * L)
        return s, ds, dds
    fs, fd, fdd, lo, hi = profile._interp
    r = min(max(rho, lo), hi)
    return float(fs(r)), float(fd(r)), float(fdd(r))


def sigma_max(profile: ProfileSpec) -> float:
    """sigma(R0), the half-height of the reference cylinder (+inf for log)."""
    if profile.kind == "log":
        return math.inf
    return eval_profile(profile, profile.R0)[0]


def invert_profile(profile: ProfileSpec, z: float) -> float:
    """Solve sigma(rho) = z for rho in (0, R0], to 1e-12 relative residual."""
    if not (z > 0.0):
        raise DomainError(f"z={z} must be positive")
    if profile.kind == "power":
        rho = z ** (1.0 / profile.theta)
        if rho > profile.R0 * (1.0 + 1e-12):
            raise DomainError(f"z={z} exceeds sigma(R0)")
        return min(rho, profile.R0)
    if profile.kind == "log":
        # sigma = 1/log(R0/rho)  <=>  rho = R0 * exp(-1/z)
        return profile.R0 * math.exp(-1.0 / z)
    zmax = sigma_max(profile)
    if z > zmax * (1.0 + 1e-12):
        raise DomainError(f"z={z} exceeds sigma(R0)={zmax}")
    if z >= zmax:
        return profile.R0
    lo = profile._interp[3]
    if z <= eval_profile(profile, lo)[0]:
        # below the first sample: fall back to the local power behaviour
        s0, d0, _ = eval_profile(profile, lo)
        return max(lo * z / max(s0, 1e-300), 1e-300)
    rho = brentq(lambda r: eval_profile(profile, r)[0] - z, lo, profile.R0,
                 rtol=1e-15, maxiter=200)
    for _ in range(3):  # Newton polish to push |sigma(rho)-z| below 1e-12*z
        s, ds, _ = eval_profile(profile, rho)
        if ds <= 0 or abs(s - z) <= 1e-14 * z:
            break
        rho = min(max(rho - (s - z) / ds, lo), profile.R0)
    return float(rho)


def _grid(profile: ProfileSpec, n: int) -> np.ndarray:
    return np.geomspace(profile.R0 * 2.0 ** -40, profile.R0, n)


def check_assumptions(profile: ProfileSpec, grid_size: int = 64) -> AssumptionReport:
    """Classify the profile on a geometric grid in (R0*2^-40, R0].

    Classification rules (a finite stand-in for the rho -> 0 limits):
    cusp if sigma' at the smallest grid point exceeds 1e3 * sigma'(R0);
    cone if the three smallest-rho values of sigma' agree within 1%.
    best_theta = 1 + min over the grid of sigma''*rho/sigma', clamped to (0, 1];
    a non-positive value means the opening condition fails (a3_ok = False).
    """
    if grid_size < 8:
        raise DomainError("grid_size must be >= 8")
    rhos = _grid(profile, grid_size)
    vals = np.array([eval_profile(profile, r) for r in rhos])
    sig, dsig, ddsig = vals[:, 0], vals[:, 1], vals[:, 2]

    finite = np.isfinite(dsig) & np.isfinite(sig)
    witnesses = []
    a1_ok = bool(np.all(dsig[finite] > 0.0)) and bool(np.all(np.diff(sig[finite]) >= 0.0))
    for r, d in zip(rhos[finite], dsig[finite]):
        if d <= 0.0:
            witnesses.append((float(r), float(d)))

    ref = dsig[finite][-1] if np.any(finite) else math.nan
    small = dsig[finite][:3]
    if not a1_ok or small.size < 3:
        cusp_type = "neither"
    elif dsig[finite][0] > 1e3 * ref:
        cusp_type = "cusp"
    elif np.max(small) <= 1.01 * np.min(small):
        cusp_type = "cone"
    elif dsig[finite][0] < ref:      # slope decays toward 0: liminf sigma' = 0
        cusp_type = "neither"
    else:                            # grows toward 0 but below the 1e3 trigger
        cusp_type = "cusp"

    quant = ddsig[finite] * rhos[finite] / dsig[finite]
    qmin = float(np.min(quant)) if quant.size else math.nan
    best = 1.0 + qmin

    # The opening quantity must admit a positive lower bound on all of (0, R0],
    # not just on the grid.  If it is still drifting downward at the resolved
    # small-rho end (per octave of rho), the infimum has not stabilized and the
    # condition is declared failed; a genuine opening keeps the quantity flat
    # near 0 (exactly constant for power profiles).
    tail = min(16, quant.size)
    drifting = False
    if tail >= 4:
        qt = quant[:tail]
        oct_t = np.log2(rhos[finite][:tail])
        slope = float(np.polyfit(oct_t, qt, 1)[0])
        drifting = slope > 1e-8 and np.argmin(quant) == 0

    if not math.isfinite(best) or best <= 0.0 or drifting:
        for r, q in zip(rhos[finite], quant):
            if 1.0 + q <= 0.0:
                witnesses.append((float(r), float(q)))
        if drifting and not witnesses:
            witnesses.extend((float(r), float(q))
                             for r, q in zip(rhos[finite][:4], quant[:4]))
        return AssumptionReport(a1_ok, cusp_type, False, None, tuple(witnesses[:16]))
    return AssumptionReport(a1_ok, cusp_type, True, min(best, 1.0), tuple(witnesses[:16]))


def phi0(profile: ProfileSpec, R: float) -> float:
    """inf over (0, R) of sigma(rho)/rho, nonincreasing in R.

    Computed on a geometric grid; if the infimum exceeds 1e12 the value is
    capped there (saturation marks a diverging slope ratio as R -> 0).
    """
    if not (0.0 < R < profile.R0 * (1.0 + 1e-12)):
        raise DomainError(f"R={R} outside (0, R0)")
    if profile.kind == "power":
        # rho^(theta-1) is nonincreasing, so the infimum sits at rho = R^-.
        val = R ** (profile.theta - 1.0)
        return min(val, PHI0_CAP)
    rhos = np.geomspace(R * 2.0 ** -40, R * (1.0 - 1e-13), 512)
    ratios = np.array([eval_profile(profile, r)[0] / r for r in rhos])
    ratios = ratios[np.isfinite(ratios)]
    if ratios.size == 0:
        return PHI0_CAP
    return float(min(np.min(ratios), PHI0_CAP))
