"""Evolution of a single Fourier mode along the redundant formulations.

Three routes propagate the same physics and cross-check each other:

* the occupation triple (S, U, V) with sources (W, r*Wbar) and rotation
  rate r*Wbar + 2*K0, started from the vacuum S = U = V = 0;
* the amplitude pair (Phi, Psi) with the accumulated phase of K0, started
  from Phi = 1, Psi = 0, conserving |Phi|^2 - |Psi|^2 = 1;
* the complex second-order amplitude Y with friction bdot/b and frequency
  k^2 mu^2 + k Lambda^r.

The (S, U, V) system conserves U^2 + V^2 - 4 S (S + 1) exactly; the residual
of that connection formula at the recorded samples is the primary quality
indicator of an integration.

Sign conventions.  The amplitude-pair equations are used in the form

    Psi' = (W/2 - i r Wbar/2) e+^2 Phi - i r (Wbar/2) Psi
    Phi' = (W/2 + i r Wbar/2) e-^2 Psi + i r (Wbar/2) Phi

with e+- = exp(+-i * integral of K0).  Placing the conjugated coupling on
the Phi term is the unique arrangement that both conserves the normalization
and reproduces the (S, U, V) system exactly; differentiating S = |Psi|^2,
U + iV = 2 conj(Psi) Phi e+^2 under these equations gives the (S, U, V)
right-hand side verbatim.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .geometry import (ModeDirection, coefficient_closure, geometry_rates,
                       mirror_direction, second_order_closure)
from .metric import ScaleFactorModel
from .stepper import StepStats, integrate_adaptive, integrate_fixed

MAX_STEPS_PER_MODE = 10**8


@dataclass(frozen=True)
class PolarizationState:
    """Occupation-like integrals of motion for one helicity.

    S >= 0 plays the role of a per-mode occupation number; U and V are the
    two quadratures of the pair correlation.
    """

    S: float
    U: float
    V: float

    def __post_init__(self):
        if self.S < -1e-12:
            raise UsageError(f"S must be non-negative, got {self.S}")

    def connection_residual(self) -> float:
        """U^2 + V^2 - 4 S (S + 1); zero on any exact trajectory."""
        return self.U * self.U + self.V * self.V - 4.0 * self.S * (self.S + 1.0)


@dataclass(frozen=True)
class BogoliubovPair:
    """Amplitude pair with the accumulated phase integral of K0.

    e+ = exp(+i * phase); the normalization |phi|^2 - |psi|^2 stays 1 within
    the integration tolerance.
    """

    phi: complex
    psi: complex
    phase: float

    def norm_residual(self) -> float:
        return abs(self.phi) ** 2 - abs(self.psi) ** 2 - 1.0


def suv_from_bogoliubov(pair: BogoliubovPair) -> PolarizationState:
    """(S, U, V) = (|psi|^2, 2 Re z, 2 Im z) with z = conj(psi) phi e+^2."""
    z = pair.psi.conjugate() * pair.phi * cmath.exp(2.0j * pair.phase)
    return PolarizationState(S=abs(pair.psi) ** 2, U=2.0 * z.real, V=2.0 * z.imag)


@dataclass
class ModeSolution:
    """Time series for one mode and helicity.

    Depending on the method, carries the (S, U, V) track (``suv`` with shape
    (n, 3)) and/or the complex amplitude track (``y``, ``ydot``).
    max_invariant_residual is the worst connection-formula residual over the
    samples (suv/bogoliubov tracks) or the worst normalization residual
    (bogoliubov), whichever the producing method controls.
    """

    direction: ModeDirection
    r: int
    t: np.ndarray
    method: str
    suv: np.ndarray | None = None
    y: np.ndarray | None = None
    ydot: np.ndarray | None = None
    max_invariant_residual: float = 0.0
    stats: StepStats = field(default_factory=StepStats)

    def state_at(self, index: int) -> PolarizationState:
        if self.suv is None:
            raise UsageError(f"method {self.method!r} carries no (S,U,V) track")
        s, u, v = self.suv[index]
        return PolarizationState(S=max(s, 0.0), U=u, V=v)


@dataclass
class BogoliubovSolution:
    """Timeline of amplitude pairs for one mode and helicity."""

    direction: ModeDirection
    r: int
    t: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    phase: np.ndarray
    max_norm_residual: float
    stats: StepStats

    def pair_at(self, index: int) -> BogoliubovPair:
        return BogoliubovPair(phi=complex(self.phi[index]),
                              psi=complex(self.psi[index]),
                              phase=float(self.phase[index]))

    def suv_track(self) -> np.ndarray:
        z = np.conj(self.psi) * self.phi * np.exp(2.0j * self.phase)
        return np.column_stack([np.abs(self.psi) ** 2, 2.0 * z.real, 2.0 * z.imag])


def suv_derivative(state: PolarizationState, W: float, Wbar: float, K0: float,
                   r: int) -> tuple[float, float, float]:
    """Right-hand side of the (S, U, V) system for given coefficients.

    dS = (W/2) U + r (Wbar/2) V
    dU = W (2S+1) - (r Wbar + 2 K0) V
    dV = r Wbar (2S+1) + (r Wbar + 2 K0) U

    The helicity enters only through the product r*Wbar.
    """
    rw = r * Wbar
    rot = rw + 2.0 * K0
    two_s1 = 2.0 * state.S + 1.0
    return (0.5 * W * state.U + 0.5 * rw * state.V,
            W * two_s1 - rot * state.V,
            rw * two_s1 + rot * state.U)


def _default_output_times(t0: float, t1: float, n: int = 33) -> np.ndarray:
    return np.linspace(t0, t1, n)


def _suv_rhs(model: ScaleFactorModel, d: ModeDirection, r: int):
    coeffs = coefficient_closure(model, d)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        W, Wbar, K0 = coeffs(t)
        rw = r * Wbar
        rot = rw + 2.0 * K0
        s, u, v = y
        two_s1 = 2.0 * s + 1.0
        return np.array([0.5 * W * u + 0.5 * rw * v,
                         W * two_s1 - rot * v,
                         rw * two_s1 + rot * u])

    return rhs


def _connection_residuals(suv: np.ndarray) -> np.ndarray:
    s, u, v = suv[:, 0], suv[:, 1], suv[:, 2]
    return u * u + v * v - 4.0 * s * (s + 1.0)


def evolve_suv(model: ScaleFactorModel, d: ModeDirection, r: int,
               t0: float, t1: float, rel_tol: float = 1e-10,
               abs_tol: float = 1e-12,
               output_times: np.ndarray | None = None) -> ModeSolution:
    """Evolve (S, U, V) from the vacuum S = U = V = 0 at t0.

    Coefficients are evaluated analytically at every stage time.  The
    returned solution records the worst connection-formula residual over
    the output samples.
    """
    if not t0 < t1:
        raise UsageError(f"need t0 < t1, got [{t0}, {t1}]")
    if rel_tol <= 0.0 or abs_tol <= 0.0:
        raise UsageError("tolerances must be positive")
    out = _default_output_times(t0, t1) if output_times is None else np.asarray(output_times, float)
    samples, stats = integrate_adaptive(
        _suv_rhs(model, d, r), t0, t1, np.zeros(3), rel_tol, abs_tol, out,
        max_steps=MAX_STEPS_PER_MODE)
    residual = float(np.max(np.abs(_connection_residuals(samples))))
    return ModeSolution(direction=d, r=r, t=out, method="suv", suv=samples,
                        max_invariant_residual=residual, stats=stats)


def evolve_suv_fixed(model: ScaleFactorModel, d: ModeDirection, r: int,
                     t0: float, t1: float, n_steps: int) -> PolarizationState:
    """Fixed-step variant (order studies); returns the final state only."""
    y = integrate_fixed(_suv_rhs(model, d, r), t0, t1, np.zeros(3), n_steps)
    return PolarizationState(S=max(float(y[0]), 0.0), U=float(y[1]), V=float(y[2]))


def vacuum_initial_data(model: ScaleFactorModel, d: ModeDirection,
                        t0: float) -> tuple[complex, complex]:
    """Positive-frequency WKB data matching Phi = 1, Psi = 0 at t0.

    Y(t0) = sqrt(k b / mu), Ydot(t0) = +i K0(t0) Y(t0); with these the
    projected occupation S vanishes at t0.
    """
    geo = geometry_rates(model, d, t0)
    y0 = math.sqrt(d.k * geo.b / geo.mu)
    return complex(y0, 0.0), 1j * geo.K0 * y0


def _second_order_rhs(model: ScaleFactorModel, d: ModeDirection, r: int):
    coeffs = second_order_closure(model, d)
    k = d.k

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        bdot_over_b, mu, lambda_plus = coeffs(t)
        omega2 = (k * mu) ** 2 + k * r * lambda_plus
        yr, yi, vr, vi = y
        return np.array([vr, vi,
                         bdot_over_b * vr - omega2 * yr,
                         bdot_over_b * vi - omega2 * yi])

    return rhs


def evolve_second_order(model: ScaleFactorModel, d: ModeDirection, r: int,
                        t0: float, t1: float,
                        y0: complex | None = None, ydot0: complex | None = None,
                        rel_tol: float = 1e-10, abs_tol: float = 1e-12,
                        output_times: np.ndarray | None = None) -> ModeSolution:
    """Evolve the complex second-order amplitude Y as a 4-real system.

    Y'' - (bdot/b) Y' + (k^2 mu^2 + k Lambda^r) Y = 0.  When no initial data
    is supplied, the positive-frequency WKB vacuum state is used.
    """
    if not t0 < t1:
        raise UsageError(f"need t0 < t1, got [{t0}, {t1}]")
    if y0 is None or ydot0 is None:
        if y0 is not None or ydot0 is not None:
            raise UsageError("supply both y0 and ydot0, or neither")
        y0, ydot0 = vacuum_initial_data(model, d, t0)
    out = _default_output_times(t0, t1) if output_times is None else np.asarray(output_times, float)
    state0 = np.array([y0.real, y0.imag, ydot0.real, ydot0.imag])
    samples, stats = integrate_adaptive(
        _second_order_rhs(model, d, r), t0, t1, state0, rel_tol, abs_tol, out,
        max_steps=MAX_STEPS_PER_MODE)
    y = samples[:, 0] + 1j * samples[:, 1]
    ydot = samples[:, 2] + 1j * samples[:, 3]
    return ModeSolution(direction=d, r=r, t=out, method="second_order",
                        y=y, ydot=ydot, stats=stats)


def recover_s_xi(sol: ModeSolution, model: ScaleFactorModel) -> np.ndarray:
    """S_xi = -(r Ydot + k a Y) / (k b) from a second-order track."""
    if sol.y is None or sol.ydot is None:
        raise UsageError("solution carries no amplitude track")
    k = sol.direction.k
    s_xi = np.empty(sol.t.size, dtype=complex)
    for i, t in enumerate(sol.t):
        geo = geometry_rates(model, sol.direction, float(t))
        s_xi[i] = -(sol.r * sol.ydot[i] + k * geo.a * sol.y[i]) / (k * geo.b)
    return s_xi


def _bogoliubov_rhs(model: ScaleFactorModel, d: ModeDirection, r: int):
    coeffs = coefficient_closure(model, d)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        W, Wbar, K0 = coeffs(t)
        phi = complex(y[0], y[1])
        psi = complex(y[2], y[3])
        eplus2 = cmath.exp(2.0j * y[4])
        kappa = complex(0.5 * W, -0.5 * r * Wbar)
        dpsi = kappa * eplus2 * phi - 0.5j * r * Wbar * psi
        dphi = kappa.conjugate() * psi / eplus2 + 0.5j * r * Wbar * phi
        return np.array([dphi.real, dphi.imag, dpsi.real, dpsi.imag, K0])

    return rhs


def evolve_bogoliubov(model: ScaleFactorModel, d: ModeDirection, r: int,
                      t0: float, t1: float, rel_tol: float = 1e-10,
                      abs_tol: float = 1e-12,
                      output_times: np.ndarray | None = None) -> BogoliubovSolution:
    """Evolve the amplitude pair jointly with the phase integral of K0.

    Starts from phi = 1, psi = 0, phase = 0 (the S = U = V = 0 vacuum).
    """
    if not t0 < t1:
        raise UsageError(f"need t0 < t1, got [{t0}, {t1}]")
    out = _default_output_times(t0, t1) if output_times is None else np.asarray(output_times, float)
    state0 = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    samples, stats = integrate_adaptive(
        _bogoliubov_rhs(model, d, r), t0, t1, state0, rel_tol, abs_tol, out,
        max_steps=MAX_STEPS_PER_MODE)
    phi = samples[:, 0] + 1j * samples[:, 1]
    psi = samples[:, 2] + 1j * samples[:, 3]
    norm_res = float(np.max(np.abs(np.abs(phi) ** 2 - np.abs(psi) ** 2 - 1.0)))
    return BogoliubovSolution(direction=d, r=r, t=out, phi=phi, psi=psi,
                              phase=samples[:, 4], max_norm_residual=norm_res,
                              stats=stats)


def project_bogoliubov(model: ScaleFactorModel, d: ModeDirection,
                       t: float, y: complex, ydot: complex) -> tuple[complex, complex]:
    """Instantaneous (phi e+, psi e-) projection of an amplitude sample.

    Inverts Y = q (phi e+ + psi e-), Ydot = i K0 q (phi e+ - psi e-) with
    q = sqrt(k b / mu); |psi e-|^2 is the occupation S of the sample.
    """
    geo = geometry_rates(model, d, t)
    q = math.sqrt(d.k * geo.b / geo.mu)
    plus = 0.5 * (y - 1j * ydot / geo.K0) / q
    minus = 0.5 * (y + 1j * ydot / geo.K0) / q
    return plus, minus


def occupation_from_y(model: ScaleFactorModel, sol: ModeSolution) -> np.ndarray:
    """S(t) reconstructed from a second-order amplitude track."""
    if sol.y is None:
        raise UsageError("solution carries no amplitude track")
    s = np.empty(sol.t.size)
    for i, t in enumerate(sol.t):
        _, minus = project_bogoliubov(model, sol.direction, float(t),
                                      complex(sol.y[i]), complex(sol.ydot[i]))
        s[i] = abs(minus) ** 2
    return s


def reality_convention_check(sol_mirror_plus: ModeSolution,
                             sol_minus: ModeSolution) -> float:
    """Max |Y^{+1}(t, -k) - Y^{-1}(t, k)| over the shared output grid.

    Both solutions must be second-order tracks evolved from identical
    initial data, one for helicity +1 at the mirrored direction, one for
    helicity -1 at the original direction.
    """
    if sol_mirror_plus.y is None or sol_minus.y is None:
        raise UsageError("reality check needs two amplitude tracks")
    if sol_mirror_plus.t.shape != sol_minus.t.shape or \
            not np.allclose(sol_mirror_plus.t, sol_minus.t, rtol=0.0, atol=0.0):
        raise UsageError("output grids must match exactly")
    expected = mirror_direction(sol_minus.direction)
    got = sol_mirror_plus.direction
    if not (math.isclose(got.delta, expected.delta, abs_tol=1e-12)
            and math.isclose(got.xi, expected.xi, abs_tol=1e-12)
            and got.k == expected.k):
        raise UsageError("first solution must live at the mirrored direction")
    return float(np.max(np.abs(sol_mirror_plus.y - sol_minus.y)))
