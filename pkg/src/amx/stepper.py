"""Adaptive embedded Runge-Kutta-Fehlberg 4(5) stepper.

Six-stage Fehlberg pair: the 4th-order solution is propagated and the
difference to the 5th-order solution drives the step-size controller, so
fixed-step runs converge at 4th order globally.  Output samples are produced
by clamping steps to the requested times (never by interpolation), so every
recorded state lies on the integrator's own trajectory and algebraic
invariants evaluated at samples reflect the flow itself.

The oracle layer deliberately does not use this module; it carries its own
classical fixed-step RK4 so the two never share a bug.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalFailure

# Fehlberg extended Butcher tableau.
_C = (0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0)
_A = (
    (),
    (1.0 / 4.0,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
# 4th-order propagating weights and the (b5 - b4) error weights.
_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0)
_E = (1.0 / 360.0, 0.0, -128.0 / 4275.0, -2197.0 / 75240.0, 1.0 / 50.0, 2.0 / 55.0)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# Error-per-unit-step control: a step of size h is accepted when the scaled
# error estimate is below h/span, so the accumulated drift over the whole
# span stays near the requested tolerance (the connection-formula and
# normalization invariants are global-drift quantities).  The controller
# exponent is 1/4 because the estimate behaves like h^5 and acceptance
# compares it to h^1.
_ORDER_EXP = 0.25

RHS = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class StepStats:
    steps: int = 0
    rejected: int = 0


def _rk_step(rhs: RHS, t: float, y: np.ndarray, h: float):
    """One embedded step: returns (y4, error_estimate)."""
    k = [rhs(t, y)]
    for i in range(1, 6):
        acc = _A[i][0] * k[0]
        for j in range(1, i):
            acc = acc + _A[i][j] * k[j]
        k.append(rhs(t + _C[i] * h, y + h * acc))
    y4 = y + h * (_B4[0] * k[0] + _B4[2] * k[2] + _B4[3] * k[3] + _B4[4] * k[4])
    err = h * (_E[0] * k[0] + _E[2] * k[2] + _E[3] * k[3] + _E[4] * k[4]
               + _E[5] * k[5])
    return y4, err


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray,
                rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(rhs: RHS, t0: float, y0: np.ndarray, span: float,
                  rel_tol: float, abs_tol: float) -> float:
    f0 = rhs(t0, y0)
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    if d0 < 1e-5 or d1 < 1e-10:
        h0 = 1e-6 * span
    else:
        h0 = 1e-3 * d0 / d1
    return min(h0, span)


def integrate_adaptive(rhs: RHS, t0: float, t1: float, y0: np.ndarray,
                       rel_tol: float, abs_tol: float,
                       output_times: np.ndarray,
                       max_steps: int = 10**8):
    """Integrate y' = rhs(t, y) from t0 to t1, sampling at output_times.

    output_times must be strictly increasing within [t0, t1].  Returns
    (samples, stats) where samples has shape (len(output_times), len(y0)).
    Raises NumericalFailure on step underflow, non-finite state or step-count
    overflow, carrying the failure time and state for diagnosis.
    """
    y = np.array(y0, dtype=float)
    out = np.asarray(output_times, dtype=float)
    if out.size == 0:
        raise NumericalFailure("no output times requested")
    if out[0] < t0 - 1e-13 * abs(t0) or out[-1] > t1 + 1e-13 * abs(t1):
        raise NumericalFailure(f"output times outside span [{t0}, {t1}]")
    if np.any(np.diff(out) <= 0.0):
        raise NumericalFailure("output times must be strictly increasing")

    samples = np.empty((out.size, y.size), dtype=float)
    stats = StepStats()
    i_out = 0
    if out[0] == t0:
        samples[0] = y
        i_out = 1

    t = t0
    span = t1 - t0
    h = _initial_step(rhs, t0, y, span, rel_tol, abs_tol)
    while i_out < out.size:
        if stats.steps >= max_steps:
            raise NumericalFailure(
                f"step cap {max_steps} exceeded at t={t}", t=t, state=y)
        h_min = 16.0 * np.finfo(float).eps * max(abs(t), 1.0)
        if h < h_min:
            raise NumericalFailure(
                f"step size underflow at t={t} (h={h})", t=t, state=y)
        target = out[i_out]
        clamped = t + h >= target
        h_try = target - t if clamped else h
        y_new, err = _rk_step(rhs, t, y, h_try)
        if not np.all(np.isfinite(y_new)):
            raise NumericalFailure(
                f"non-finite state at t={t + h_try}", t=t, state=y)
        norm = _error_norm(err, y, y_new, rel_tol, abs_tol)
        threshold = h_try / span
        if norm <= threshold:
            stats.steps += 1
            t = target if clamped else t + h_try
            y = y_new
            if clamped:
                samples[i_out] = y
                i_out += 1
            factor = _MAX_FACTOR if norm == 0.0 else min(
                _MAX_FACTOR, _SAFETY * (threshold / norm) ** _ORDER_EXP)
            if clamped:
                # keep the working step size; a short clamped step says
                # nothing about the error of a full-size step
                h = max(h, h_try * factor)
            else:
                h = h_try * factor
        else:
            stats.rejected += 1
            h = h_try * max(_MIN_FACTOR,
                            _SAFETY * (threshold / norm) ** _ORDER_EXP)
    return samples, stats


def integrate_fixed(rhs: RHS, t0: float, t1: float, y0: np.ndarray,
                    n_steps: int) -> np.ndarray:
    """Fixed-step integration with the same 4th-order propagated solution.

    Used for empirical order measurements; no error control, no sampling.
    """
    if n_steps < 1:
        raise NumericalFailure("n_steps must be >= 1")
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / n_steps
    for i in range(n_steps):
        t = t0 + i * h
        y, _ = _rk_step(rhs, t, y, h)
        if not np.all(np.isfinite(y)):
            raise NumericalFailure(f"non-finite state at t={t + h}", t=t, state=y)
    return y
