"""Independent ground truth: closed forms, reference integrator, checkers.

Everything here deliberately avoids the production stepper; the reference
integrator is a classical fixed-step RK4 written separately so the two
integration paths cannot share a bug.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import UsageError
from .geometry import ModeDirection
from .metric import (IsotropicPowerLaw, Kasner, ScaleFactorModel, Tabulated,
                     evaluate_metric, is_isotropic)
from .modes import (evolve_bogoliubov, evolve_second_order, evolve_suv,
                    occupation_from_y)


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one check: residuals, sample count and the gate verdict.

    ``passed`` is exactly (max_rel <= tolerance); diagnostics carry an
    infinite tolerance so they are reported without ever gating.
    """

    check: str
    max_abs: float
    max_rel: float
    samples: int
    tolerance: float
    passed: bool

    @staticmethod
    def from_residuals(check: str, max_abs: float, max_rel: float,
                       samples: int, tolerance: float) -> "OracleReport":
        return OracleReport(check=check, max_abs=float(max_abs),
                            max_rel=float(max_rel), samples=int(samples),
                            tolerance=float(tolerance),
                            passed=bool(max_rel <= tolerance))

    @property
    def is_diagnostic(self) -> bool:
        return math.isinf(self.tolerance)


def _isotropic_radius(model: ScaleFactorModel) -> Callable[[float], float]:
    if not is_isotropic(model):
        if isinstance(model, Tabulated):
            s = model._splines
            if all(np.array_equal(s[0].c, sp.c) for sp in s[1:]):
                return lambda t: float(s[0](t))
        raise UsageError("isotropic closed form needs an isotropic model")
    return lambda t: evaluate_metric(model, t).A[0]


def conformal_time(model: ScaleFactorModel, t: float) -> float:
    """eta(t) = integral of dt/R from t_ref (power laws) or the first knot.

    Closed form for power laws; adaptive quadrature for tabulated models.
    """
    radius = _isotropic_radius(model)
    if isinstance(model, (IsotropicPowerLaw, Kasner)):
        p = model.exponents[0]
        r0 = model.amplitudes[0]
        t_ref = model.t_ref
        if p == 1.0:
            return (t_ref / r0) * math.log(t / t_ref)
        return (t_ref**p / r0) * (t**(1.0 - p) - t_ref**(1.0 - p)) / (1.0 - p)
    eta, _ = quad(lambda s: 1.0 / radius(s), model.t_min, t, limit=200)
    return eta


def isotropic_solution(k: float, model: ScaleFactorModel, c1: complex,
                       c2: complex, t: float) -> tuple[complex, complex]:
    """Exact isotropic mode amplitude C1 e^{-ik eta} + C2 e^{+ik eta}.

    Returns (Y, Ydot) with Ydot = ik (C2 e^{+ik eta} - C1 e^{-ik eta}) / R(t).
    """
    radius = _isotropic_radius(model)
    eta = conformal_time(model, t)
    em = cmath.exp(-1j * k * eta)
    ep = cmath.exp(1j * k * eta)
    y = c1 * em + c2 * ep
    ydot = 1j * k * (c2 * ep - c1 * em) / radius(t)
    return y, ydot


def fit_isotropic_coefficients(k: float, model: ScaleFactorModel, t0: float,
                               y0: complex, ydot0: complex) -> tuple[complex, complex]:
    """Solve for (C1, C2) matching given initial data at t0."""
    radius = _isotropic_radius(model)
    eta0 = conformal_time(model, t0)
    em = cmath.exp(-1j * k * eta0)
    ep = cmath.exp(1j * k * eta0)
    w = 1j * k / radius(t0)
    # [em, ep; -w em, w ep] [c1, c2]^T = [y0, ydot0]^T
    det = em * (w * ep) - ep * (-w * em)
    c1 = (y0 * (w * ep) - ep * ydot0) / det
    c2 = (em * ydot0 - (-w * em) * y0) / det
    return c1, c2


def reference_integrate(rhs: Callable[[float, np.ndarray], np.ndarray],
                        y0: np.ndarray, t0: float, t1: float,
                        n_steps: int) -> np.ndarray:
    """Classical fixed-step RK4; the step-halving reference for everything.

    Independent of the production stepper by design.
    """
    if n_steps < 1:
        raise UsageError("n_steps must be >= 1")
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / n_steps
    for i in range(n_steps):
        t = t0 + i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def finite_difference_check(f: Callable[[float], float], t: float,
                            h: float) -> tuple[float, float]:
    """Richardson-extrapolated central difference with an error estimate.

    Returns (derivative, error_estimate); the estimate is the difference
    between the two stencil widths scaled by the extrapolation factor.
    """
    if h <= 0.0:
        raise UsageError("h must be positive")
    d1 = (f(t + h) - f(t - h)) / (2.0 * h)
    d2 = (f(t + 0.5 * h) - f(t - 0.5 * h)) / h
    return (4.0 * d2 - d1) / 3.0, abs(d2 - d1) / 3.0


def suv_reference_final(model: ScaleFactorModel, d: ModeDirection, r: int,
                        t0: float, t1: float, n_steps: int) -> np.ndarray:
    """Final (S, U, V) by the RK4 reference on the production coefficients."""
    from .modes import _suv_rhs  # same physics, different integrator
    return reference_integrate(_suv_rhs(model, d, r), np.zeros(3), t0, t1, n_steps)


def cross_check_evolutions(model: ScaleFactorModel, d: ModeDirection, r: int,
                           t0: float, t1: float, rel_tol: float = 1e-10,
                           abs_tol: float = 1e-12,
                           output_times: np.ndarray | None = None,
                           hard_tolerance: float = 1e-6) -> list[OracleReport]:
    """Run all three formulations from matched vacuum data, compare S(t).

    The amplitude-pair route must reproduce the (S, U, V) route (hard check);
    the second-order route differs through the reduced Wbar coupling and is
    reported as a diagnostic quantifying that discrepancy.
    """
    out = np.linspace(t0, t1, 33) if output_times is None else np.asarray(output_times, float)
    suv = evolve_suv(model, d, r, t0, t1, rel_tol, abs_tol, out)
    bog = evolve_bogoliubov(model, d, r, t0, t1, rel_tol, abs_tol, out)
    sec = evolve_second_order(model, d, r, t0, t1, rel_tol=rel_tol,
                              abs_tol=abs_tol, output_times=out)
    s_ref = suv.suv[:, 0]
    s_bog = bog.suv_track()[:, 0]
    s_sec = occupation_from_y(model, sec)
    # occupations below 1e-9 count as vacuum; without the floor a run that
    # stays in vacuum would divide noise by noise
    scale = max(float(np.max(np.abs(s_ref))), float(np.max(np.abs(s_bog))),
                float(np.max(np.abs(s_sec))), 1e-9)
    diff_bog = float(np.max(np.abs(s_bog - s_ref)))
    diff_sec = float(np.max(np.abs(s_sec - s_ref)))
    return [
        OracleReport.from_residuals("cross_eq28_vs_eq29_occupation", diff_bog,
                                    diff_bog / scale, out.size, hard_tolerance),
        OracleReport.from_residuals("diag_eq20_vs_eq29_occupation", diff_sec,
                                    diff_sec / scale, out.size, math.inf),
    ]
