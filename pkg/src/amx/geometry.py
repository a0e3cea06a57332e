"""Per-mode geometric coefficients for the quotient mode equations.

For a comoving wavevector k*(sin d cos x, sin d sin x, cos d) on a diagonal
anisotropic background, this module computes the coupling coefficients
(a, b, c), the inverse optical length mu, the tetrad angles (theta, phi),
the physical frequency K0 = k*mu, and the time rates (W, Wbar, Lambda)
entering the evolution systems.  All quantities are pure functions of the
metric state and the mode direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UsageError
from .metric import MetricState, ScaleFactorModel, evaluate_metric

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModeDirection:
    """Comoving mode labels: wavenumber k > 0 and momentum-space angles.

    delta in [0, pi], xi in [0, 2*pi); r is an optional helicity tag (+1/-1).
    """

    k: float
    delta: float
    xi: float
    r: int | None = None

    def __post_init__(self):
        if not self.k > 0.0:
            raise UsageError(f"wavenumber must be positive, got {self.k}")
        if not 0.0 <= self.delta <= math.pi:
            raise UsageError(f"delta must be in [0, pi], got {self.delta}")
        if not 0.0 <= self.xi < TWO_PI:
            raise UsageError(f"xi must be in [0, 2*pi), got {self.xi}")
        if self.r is not None and self.r not in (+1, -1):
            raise UsageError(f"helicity must be +1 or -1, got {self.r}")


def mirror_direction(d: ModeDirection) -> ModeDirection:
    """Direction of the reflected momentum -k: delta -> pi-delta, xi -> xi+pi."""
    return ModeDirection(d.k, math.pi - d.delta, math.fmod(d.xi + math.pi, TWO_PI),
                         None if d.r is None else -d.r)


@dataclass(frozen=True)
class GeometryCoefficients:
    """Coefficient bundle for one (metric state, mode direction) pair.

    The static part (a, b, c, mu, theta, phi, K0) is always filled.  The rate
    part (W, Wbar, lambda_plus, adot, bdot, mudot) is present only when
    produced by :func:`geometry_rates`; Lambda for r = -1 is -lambda_plus.

    Wbar uses the reduced form (H3 - H1)/mu, kept verbatim even though its
    physical dimension differs from W's whenever the scale factors carry
    length units; the cross-formulation diagnostic quantifies what the
    reduction leaves out relative to the full angle-dependent coupling
    (adot - (bdot/b) a)/mu implied by the second-order equation.
    """

    a: float
    b: float
    c: float
    mu: float
    theta: float
    phi: float
    K0: float
    W: float | None = None
    Wbar: float | None = None
    lambda_plus: float | None = None
    adot: float | None = None
    bdot: float | None = None
    mudot: float | None = None


def _static_parts(ms: MetricState, d: ModeDirection):
    sd, cd = math.sin(d.delta), math.cos(d.delta)
    sx, cx = math.sin(d.xi), math.cos(d.xi)
    A1, A2, A3 = ms.A
    g = ms.sqrt_minus_g
    a = cd * cx * sx * (A2 * A2 - A1 * A1) / g
    nb = A2 * A2 * cx * cx + A1 * A1 * sx * sx
    b = nb / g
    c = (A1 * A1 * cd * cd * cx * cx + A2 * A2 * cd * cd * sx * sx
         + A3 * A3 * sd * sd) / g
    e1 = sd * cx / A1
    e2 = sd * sx / A2
    e3 = cd / A3
    mu = math.sqrt(e1 * e1 + e2 * e2 + e3 * e3)
    theta = math.atan2(math.hypot(e1, e2), e3)
    if d.delta == 0.0 or d.delta == math.pi:
        phi = d.xi  # direction degenerate at the poles; fixed convention
    else:
        phi = math.atan2(e2, e1) % TWO_PI
    return a, b, c, mu, theta, phi, (e1, e2, e3)


def geometry_coefficients(ms: MetricState, d: ModeDirection) -> GeometryCoefficients:
    """Static coefficients a, b, c, mu, tetrad angles and K0 = k*mu."""
    a, b, c, mu, theta, phi, _ = _static_parts(ms, d)
    return GeometryCoefficients(a=a, b=b, c=c, mu=mu, theta=theta, phi=phi,
                                K0=d.k * mu)


def geometry_rates(model: ScaleFactorModel, d: ModeDirection,
                   t: float) -> GeometryCoefficients:
    """Static coefficients plus analytic time rates at time t.

    Rates follow the chain rule through the Hubble rates:
    d(A_i^2)/dt = 2 H_i A_i^2, d(A_i^-2)/dt = -2 H_i A_i^-2 and
    d(sqrt(-g))/dt = (sum H_i) sqrt(-g); mudot = (d mu^2/dt) / (2 mu).
    Returns W = mudot/mu - bdot/b, Wbar = (H3 - H1)/mu and
    lambda_plus = adot - (bdot/b) a  (Lambda for helicity +1).
    """
    ms = evaluate_metric(model, t)
    a, b, c, mu, theta, phi, (e1, e2, e3) = _static_parts(ms, d)
    H1, H2, H3 = ms.H
    sum_H = H1 + H2 + H3

    sd, cd = math.sin(d.delta), math.cos(d.delta)
    sx, cx = math.sin(d.xi), math.cos(d.xi)
    A1, A2, A3 = ms.A
    g = ms.sqrt_minus_g

    na_dot = cd * cx * sx * 2.0 * (H2 * A2 * A2 - H1 * A1 * A1)
    adot = na_dot / g - a * sum_H

    nb = A2 * A2 * cx * cx + A1 * A1 * sx * sx
    nb_dot = 2.0 * (H2 * A2 * A2 * cx * cx + H1 * A1 * A1 * sx * sx)
    bdot_over_b = nb_dot / nb - sum_H
    bdot = bdot_over_b * b

    dmu2 = -2.0 * (H1 * e1 * e1 + H2 * e2 * e2 + H3 * e3 * e3)
    mudot = dmu2 / (2.0 * mu)

    W = mudot / mu - bdot_over_b
    Wbar = (H3 - H1) / mu
    lambda_plus = adot - bdot_over_b * a
    return GeometryCoefficients(a=a, b=b, c=c, mu=mu, theta=theta, phi=phi,
                                K0=d.k * mu, W=W, Wbar=Wbar,
                                lambda_plus=lambda_plus,
                                adot=adot, bdot=bdot, mudot=mudot)


@dataclass(frozen=True)
class IdentityReport:
    """Residuals of the algebraic identities tying the coefficients together.

    quadratic: relative residual of a^2 - b*c + mu^2 (scaled by mu^2).
    phi_norm / theta_norm: sin^2 + cos^2 - 1 for the transition-formula
    angles.  angle_agreement: worst componentwise difference between the
    transition-formula (sin, cos) pairs and the direction-vector angles.
    """

    quadratic: float
    phi_norm: float
    theta_norm: float
    angle_agreement: float

    @property
    def max_residual(self) -> float:
        return max(abs(self.quadratic), abs(self.phi_norm),
                   abs(self.theta_norm), abs(self.angle_agreement))


def check_identities(ms: MetricState, d: ModeDirection) -> IdentityReport:
    """Evaluate the identity residuals at one (metric state, direction) pair.

    The transition formulas express the tetrad angles through the momentum
    angles and (b, mu):  sin(phi) = A1 sin(xi) / ((-g)^(1/4) b^(1/2)),
    cos(phi) = A2 cos(xi) / ((-g)^(1/4) b^(1/2)),
    sin(theta) = A3 b^(1/2) sin(delta) / (mu (-g)^(1/4)) and
    cos(theta) = cos(delta) / (mu A3).  They must agree with the angles read
    off the normalized direction vector.
    """
    a, b, c, mu, theta, phi, _ = _static_parts(ms, d)
    quadratic = (a * a - b * c + mu * mu) / (mu * mu)

    A1, A2, A3 = ms.A
    g4 = math.sqrt(ms.sqrt_minus_g)  # (-g)^(1/4)
    rb = math.sqrt(b)
    sphi = A1 * math.sin(d.xi) / (g4 * rb)
    cphi = A2 * math.cos(d.xi) / (g4 * rb)
    sthe = A3 * rb * math.sin(d.delta) / (mu * g4)
    cthe = math.cos(d.delta) / (mu * A3)
    phi_norm = sphi * sphi + cphi * cphi - 1.0
    theta_norm = sthe * sthe + cthe * cthe - 1.0
    agreement = max(
        abs(sphi - math.sin(phi)),
        abs(cphi - math.cos(phi)),
        abs(sthe - math.sin(theta)),
        abs(cthe - math.cos(theta)),
    )
    return IdentityReport(quadratic=quadratic, phi_norm=phi_norm,
                          theta_norm=theta_norm, angle_agreement=agreement)


def reconstruct_cartesian(s_delta: complex, s_xi: complex,
                          delta: float, xi: float) -> tuple[complex, complex, complex]:
    """Cartesian mode amplitudes from the angular pair (S_delta, S_xi).

    The result is transversal to the comoving wavevector by construction.
    """
    sd, cd = math.sin(delta), math.cos(delta)
    sx, cx = math.sin(xi), math.cos(xi)
    s1 = s_delta * cx * cd - s_xi * sx
    s2 = s_delta * sx * cd + s_xi * cx
    s3 = -s_delta * sd
    return (s1, s2, s3)


def coefficient_closure(model: ScaleFactorModel, d: ModeDirection):
    """Fast per-time evaluator t -> (W, Wbar, K0) for the evolution loops.

    Same arithmetic as :func:`geometry_rates` with the direction trig
    precomputed and no dataclass allocation per call.
    """
    sd, cd = math.sin(d.delta), math.cos(d.delta)
    sx, cx = math.sin(d.xi), math.cos(d.xi)
    w1 = (sd * cx) ** 2
    w2 = (sd * sx) ** 2
    w3 = cd * cd
    cx2, sx2 = cx * cx, sx * sx
    k = d.k

    def coeffs(t: float) -> tuple[float, float, float]:
        ms = evaluate_metric(model, t)
        A1, A2, A3 = ms.A
        H1, H2, H3 = ms.H
        sum_H = H1 + H2 + H3
        u1 = w1 / (A1 * A1)
        u2 = w2 / (A2 * A2)
        u3 = w3 / (A3 * A3)
        mu2 = u1 + u2 + u3
        mu = math.sqrt(mu2)
        nb = A2 * A2 * cx2 + A1 * A1 * sx2
        nb_dot = 2.0 * (H2 * A2 * A2 * cx2 + H1 * A1 * A1 * sx2)
        bdot_over_b = nb_dot / nb - sum_H
        mudot_over_mu = -(H1 * u1 + H2 * u2 + H3 * u3) / mu2
        W = mudot_over_mu - bdot_over_b
        Wbar = (H3 - H1) / mu
        return W, Wbar, k * mu

    return coeffs


def second_order_closure(model: ScaleFactorModel, d: ModeDirection):
    """Fast per-time evaluator t -> (bdot/b, mu, lambda_plus) for the
    second-order amplitude equation; arithmetic matches :func:`geometry_rates`."""
    sd, cd = math.sin(d.delta), math.cos(d.delta)
    sx, cx = math.sin(d.xi), math.cos(d.xi)
    w1 = (sd * cx) ** 2
    w2 = (sd * sx) ** 2
    w3 = cd * cd
    cx2, sx2 = cx * cx, sx * sx
    tri_a = cd * cx * sx

    def coeffs(t: float) -> tuple[float, float, float]:
        ms = evaluate_metric(model, t)
        A1, A2, A3 = ms.A
        H1, H2, H3 = ms.H
        sum_H = H1 + H2 + H3
        g = ms.sqrt_minus_g
        mu = math.sqrt(w1 / (A1 * A1) + w2 / (A2 * A2) + w3 / (A3 * A3))
        nb = A2 * A2 * cx2 + A1 * A1 * sx2
        nb_dot = 2.0 * (H2 * A2 * A2 * cx2 + H1 * A1 * A1 * sx2)
        bdot_over_b = nb_dot / nb - sum_H
        a = tri_a * (A2 * A2 - A1 * A1) / g
        adot = tri_a * 2.0 * (H2 * A2 * A2 - H1 * A1 * A1) / g - a * sum_H
        return bdot_over_b, mu, adot - bdot_over_b * a

    return coeffs
