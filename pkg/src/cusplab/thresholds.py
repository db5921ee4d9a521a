"""Exponent calculus for the integrability thresholds.

Extended-real values come in four flavours:

* finite positive reals;
* ``arb_large``: an exponent that can be taken as large as desired but not
  +inf (it orders above every finite value and below +inf);
* ``just_above(b)``: an exponent exceeding b by an arbitrarily small margin
  (orders above b and below every finite value > b) -- this is what the
  conjugate of an arbitrarily large exponent produces;
* ``+inf``.

The division convention used throughout the threshold formulas is

    circ_div(x, y) = x/y  for y > 0,   arb_large for y = 0,   +inf for y < 0,

for x > 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Tuple, Union

from .errors import DomainError

Number = Union[int, float, "XReal"]


@total_ordering
@dataclass(frozen=True)
class XReal:
    """Totally ordered extended-real exponent value."""

    kind: str            # "finite" | "arb_large" | "pos_inf" | "arb_above"
    value: float = 0.0   # finite value, or the base of "arb_above"

    # -- constructors --------------------------------------------------------

    @staticmethod
    def of(v: Number) -> "XReal":
        if isinstance(v, XReal):
            return v
        v = float(v)
        if math.isinf(v):
            return XReal("pos_inf")
        if not (v > 0.0) or math.isnan(v):
            raise DomainError(f"exponents must be positive, got {v}")
        return XReal("finite", v)

    @staticmethod
    def inf() -> "XReal":
        return XReal("pos_inf")

    @staticmethod
    def arb_large() -> "XReal":
        return XReal("arb_large")

    @staticmethod
    def just_above(base: float) -> "XReal":
        return XReal("arb_above", float(base))

    # -- ordering ------------------------------------------------------------

    def _key(self) -> Tuple[float, int]:
        if self.kind == "finite":
            return (self.value, 0)
        if self.kind == "arb_above":
            return (self.value, 1)
        if self.kind == "arb_large":
            return (math.inf, 0)
        return (math.inf, 1)

    def __eq__(self, other):
        other = XReal.of(other)
        return self._key() == other._key()

    def __lt__(self, other):
        other = XReal.of(other)
        return self._key() < other._key()

    def __hash__(self):
        return hash(self._key())

    # -- queries and arithmetic ----------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_inf(self) -> bool:
        return self.kind == "pos_inf"

    def as_float(self) -> float:
        """Finite value, +inf for pos_inf; tokens map to their boundary."""
        if self.kind == "finite":
            return self.value
        if self.kind == "arb_above":
            return self.value
        return math.inf

    def scale(self, c: float) -> "XReal":
        """Multiply by a positive finite constant."""
        if not (c > 0.0 and math.isfinite(c)):
            raise DomainError("scale factor must be positive finite")
        if self.kind == "finite":
            return XReal("finite", c * self.value)
        if self.kind == "arb_above":
            return XReal("arb_above", c * self.value)
        return self

    def conjugate(self) -> "XReal":
        """Holder conjugate p/(p-1); 1 <-> +inf, arb_large <-> just_above(1)."""
        if self.kind == "finite":
            if self.value == 1.0:
                return XReal.inf()
            if self.value < 1.0:
                raise DomainError("conjugate needs p >= 1")
            return XReal("finite", self.value / (self.value - 1.0))
        if self.kind == "pos_inf":
            return XReal("finite", 1.0)
        if self.kind == "arb_large":
            return XReal.just_above(1.0)
        # just_above(1) conjugates back to arbitrarily large
        if self.value == 1.0:
            return XReal.arb_large()
        return XReal("finite", self.value / (self.value - 1.0))

    def to_json(self):
        if self.kind == "finite":
            return self.value
        if self.kind == "pos_inf":
            return "inf"
        if self.kind == "arb_large":
            return "arbitrary-large"
        return {"just_above": self.value}

    def __repr__(self):
        if self.kind == "finite":
            return f"XReal({self.value})"
        if self.kind == "arb_above":
            return f"XReal(just_above {self.value})"
        return f"XReal({self.kind})"


def xmin(*values: Number) -> XReal:
    vals = [XReal.of(v) for v in values]
    return min(vals)


def circ_div(x: float, y: float) -> XReal:
    """Extended division (x/y)-circle for x > 0."""
    if not (x > 0.0):
        raise DomainError("circ_div needs a positive numerator")
    if y > 0.0:
        return XReal.of(x / y)
    if y == 0.0:
        return XReal.arb_large()
    return XReal.inf()


# --------------------------------------------------------- embedding exponents

def sobolev_exponents(p: Number, d: int) -> Tuple[XReal, XReal, XReal, XReal]:
    """Return (p*, p#, p_S*, p_S#) for exponent p in dimension d.

    p*   : d*p/(d-p) below d, arbitrarily large at p = d, +inf above;
    p#   : ((p')*)' -- 1 below d/(d-1), just above 1 at d/(d-1), d*p/(d+p) above;
    p_S* : trace exponent (d-1)*p/(d-p) below d, arbitrary at d, +inf above;
    p_S# : ((p')_S*)' -- 1 below d/(d-1), just above 1 there, (d-1)*p/d above.
    """
    if d < 2:
        raise DomainError("d must be >= 2")
    px = XReal.of(p)
    if px.is_finite and px.value < 1.0:
        raise DomainError("p must be >= 1")
    dd = float(d)
    d1 = dd / (dd - 1.0)

    if px.is_finite:
        pv = px.value
        if pv < dd:
            p_star = XReal.of(dd * pv / (dd - pv))
            ps_star = XReal.of((dd - 1.0) * pv / (dd - pv))
        elif pv == dd:
            p_star = XReal.arb_large()
            ps_star = XReal.arb_large()
        else:
            p_star = XReal.inf()
            ps_star = XReal.inf()
        if pv < d1:
            p_sharp = XReal.of(1.0)
            ps_sharp = XReal.of(1.0)
        elif pv == d1:
            p_sharp = XReal.just_above(1.0)
            ps_sharp = XReal.just_above(1.0)
        else:
            p_sharp = XReal.of(dd * pv / (dd + pv))
            ps_sharp = XReal.of((dd - 1.0) * pv / dd)
        return p_star, p_sharp, ps_star, ps_sharp

    if px.kind == "arb_above":
        raise DomainError("sobolev_exponents takes finite, arb_large or +inf p")

    # arbitrarily large or infinite p sits above d and d/(d-1)
    p_star = XReal.inf()
    ps_star = XReal.inf()
    if px.is_inf:
        p_sharp = XReal.of(dd)            # ((inf)')* = (1)* = d/(d-1), conjugated
        ps_sharp = XReal.inf()            # ((inf)')_S* = (1)_S* = 1, conjugated
    else:
        # d*p/(d+p) < d for every finite p; the supremum d is not attained,
        # which matters only through open-interval comparisons
        p_sharp = XReal.of(dd)
        ps_sharp = XReal.arb_large()      # (d-1)*p/d grows without bound
    return p_star, p_sharp, ps_star, ps_sharp


def besov_trace_index(p: Number, d: int) -> XReal:
    """Smoothness index 1 - 1/p_S# of the natural interface data space."""
    _, _, _, ps_sharp = sobolev_exponents(p, d)
    if ps_sharp.is_finite:
        return XReal.of(1.0 - 1.0 / ps_sharp.value) if ps_sharp.value > 1.0 \
            else XReal.just_above(0.0)
    if ps_sharp.kind == "arb_above":
        return XReal.just_above(0.0)
    if ps_sharp.is_inf:
        return XReal.of(1.0)
    return XReal.just_above(1.0 - 1.0)  # arb_large: index just below 1


def holder_exponent(alpha0: float, s0: Number, d: int) -> float:
    """min(alpha0, 2 - d/s0), the interior Holder exponent driven by the source.

    Also expressible through the embedding exponent of s0 as
    min(alpha0, 1 - d/s0*); the two forms agree and both are evaluated.
    """
    if not (0.0 < alpha0 <= 1.0):
        raise DomainError("alpha0 must lie in (0, 1]")
    s0x = XReal.of(s0)
    if s0x.is_finite and not (s0x.value > d / 2.0):
        raise DomainError("s0 must exceed d/2")
    form1 = min(alpha0, 2.0 - d / s0x.value) if s0x.is_finite else alpha0
    s0_star = sobolev_exponents(s0x, d)[0]
    form2 = min(alpha0, 1.0 - d / s0_star.value) if s0_star.is_finite \
        else min(alpha0, 1.0)
    assert abs(min(form1, 1.0) - min(form2, 1.0)) <= 1e-13, (form1, form2)
    return min(form1, 1.0)


# ---------------------------------------------------------------- main reports

@dataclass(frozen=True)
class ThresholdInputs:
    """Inputs of the general gradient/Hessian threshold computation."""

    d: int
    theta: float
    p0: Number
    alpha0: float
    s0: Number
    s1: Number
    beta1: float

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("d must be >= 2")
        if not (0.0 < self.theta <= 1.0):
            raise DomainError("theta must lie in (0, 1]")
        if not (0.0 < self.alpha0 <= 1.0):
            raise DomainError("alpha0 must lie in (0, 1]")
        if not (0.0 <= self.beta1 <= 1.0):
            raise DomainError("beta1 must lie in [0, 1]")
        p0 = XReal.of(self.p0)
        if not p0 > 2.0:
            raise DomainError("p0 must exceed 2")
        s0 = XReal.of(self.s0)
        if s0.is_finite and not s0.value > self.d / 2.0:
            raise DomainError("s0 must exceed d/2")
        s1 = XReal.of(self.s1)
        if not s1 > p0.conjugate():
            raise DomainError("s1 must exceed the conjugate of p0")
        if s1 < s0:
            raise DomainError("s1 must be >= s0")


@dataclass(frozen=True)
class ThresholdReport:
    """Gradient thresholds r_i, Hessian thresholds q_i per subdomain."""

    r1: XReal
    r2: XReal
    q1: XReal
    q2: XReal
    lambda0: float
    m0: XReal

    def to_json(self) -> dict:
        return {
            "r1": self.r1.to_json(), "r2": self.r2.to_json(),
            "q1": self.q1.to_json(), "q2": self.q2.to_json(),
            "lambda0": self.lambda0, "m0": self.m0.to_json(),
        }


def hessian_threshold_from_gradient(r: XReal, d: int) -> XReal:
    """q = r*d/(r+d); an unbounded r gives the limiting value d."""
    if r.is_finite:
        return XReal.of(r.value * d / (r.value + d))
    return XReal.of(float(d))


def _weighted_source_branch(m0: XReal, d: int, beta1: float) -> XReal:
    """(m0 / (d + (beta1-1)*m0))-circle for finite or arbitrarily large m0."""
    if m0.is_finite:
        return circ_div(m0.value, d + (beta1 - 1.0) * m0.value)
    # arbitrarily large m0: denominator is d for beta1=1, else eventually < 0
    return XReal.arb_large() if beta1 == 1.0 else XReal.inf()


def main2_thresholds(inputs: ThresholdInputs) -> ThresholdReport:
    """Thresholds with weighted-source data: bulk source integrable to s0,
    the |x|^beta1-weighted source to s1.

    m0 = min(p0, s1); with lambda0 = min(alpha0, 2 - d/s0) and theta_1 = 1,
    theta_2 = theta:

        r_i = d * min{ (m0/(d+(beta1-1)*m0))o , ((1+(theta_i-1)/d)/(1-lambda0))o }

    for finite m0 and r_i = +inf when m0 = +inf; q_i = r_i*d/(r_i+d).
    """
    d = inputs.d
    p0 = XReal.of(inputs.p0)
    s1 = XReal.of(inputs.s1)
    m0 = xmin(p0, s1)
    lam0 = holder_exponent(inputs.alpha0, inputs.s0, d)

    if m0.is_inf:
        r1 = r2 = XReal.inf()
    else:
        first = _weighted_source_branch(m0, d, inputs.beta1)
        rs = []
        for theta_i in (1.0, inputs.theta):
            second = circ_div(1.0 + (theta_i - 1.0) / d, 1.0 - lam0)
            rs.append(xmin(first, second).scale(float(d)))
        r1, r2 = rs

    q1 = hessian_threshold_from_gradient(r1, d)
    q2 = hessian_threshold_from_gradient(r2, d)
    return ThresholdReport(r1=r1, r2=r2, q1=q1, q2=q2, lambda0=lam0, m0=m0)


def homogeneous_thresholds(d: int, theta: float, p0: Number, alpha0: float
                           ) -> Tuple[XReal, XReal, XReal, XReal]:
    """Thresholds for vanishing sources.

    r1 = min(p0*, (d/(1-alpha0))o)                     q1 = min(p0, d/(2-alpha0))
    r2 = min(p0*, ((d+theta-1)/(1-alpha0))o)
    q2 = min(p0, (d+theta-1)/(2-alpha0-(theta-1)/d))
    """
    if not (0.0 < theta <= 1.0 and 0.0 < alpha0 <= 1.0):
        raise DomainError("theta and alpha0 must lie in (0, 1]")
    p0x = XReal.of(p0)
    if not p0x > 2.0:
        raise DomainError("p0 must exceed 2")
    p0_star = sobolev_exponents(p0x, d)[0]
    r1 = xmin(p0_star, circ_div(float(d), 1.0 - alpha0))
    r2 = xmin(p0_star, circ_div(d + theta - 1.0, 1.0 - alpha0))
    q1 = xmin(p0x, circ_div(float(d), 2.0 - alpha0))
    q2 = xmin(p0x, circ_div(d + theta - 1.0, 2.0 - alpha0 - (theta - 1.0) / d))
    return r1, r2, q1, q2


def meyers_admissible_interval(p0: Number, d: int) -> Tuple[float, XReal, bool]:
    """Admissible exponent interval (max(d/(d-1), p0'), p0) and its nonemptiness."""
    p0x = XReal.of(p0)
    if not p0x > 2.0:
        raise DomainError("p0 must exceed 2")
    lo = max(d / (d - 1.0), p0x.conjugate().as_float())
    nonempty = p0x > lo
    return lo, p0x, bool(nonempty)


def no_gain_theta_bound(d: int, p0: float, alpha0: float) -> float:
    """Largest theta for which the cusp-side gradient threshold stays <= p0.

    theta <= 1 + p0 - d - p0*alpha0 makes (d+theta-1)/(1-alpha0) <= p0.
    """
    return 1.0 + p0 - d - p0 * alpha0
