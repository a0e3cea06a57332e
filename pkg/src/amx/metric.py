"""Background geometry: scale-factor models and their time derivatives.

The line element is ds^2 = dt^2 - sum_i A_i(t)^2 dx_i^2 with three positive,
time-dependent scale factors.  Everything downstream (mode coefficients,
spectra) consumes the per-time bundle returned by :func:`evaluate_metric`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, ModelError


@dataclass(frozen=True)
class MetricState:
    """Metric data at a single time: scale factors, rates, volume factor.

    Attributes
    ----------
    t : float
        Evaluation time.
    A : tuple of 3 floats
        Scale factors A_1, A_2, A_3 (lengths; all positive).
    Adot : tuple of 3 floats
        Time derivatives of the scale factors.
    H : tuple of 3 floats
        Hubble rates H_i = Adot_i / A_i.
    sqrt_minus_g : float
        Volume factor A_1 * A_2 * A_3.
    """

    t: float
    A: tuple[float, float, float]
    Adot: tuple[float, float, float]
    H: tuple[float, float, float]
    sqrt_minus_g: float


@dataclass(frozen=True)
class IsotropicPowerLaw:
    """A_i(t) = r0 * (t/t_ref)**p for all three axes; domain t > 0."""

    r0: float
    p: float
    t_ref: float = 1.0

    def __post_init__(self):
        if self.r0 <= 0.0 or self.t_ref <= 0.0:
            raise ModelError("isotropic power law requires r0 > 0 and t_ref > 0")

    @property
    def exponents(self) -> tuple[float, float, float]:
        return (self.p, self.p, self.p)

    @property
    def amplitudes(self) -> tuple[float, float, float]:
        return (self.r0, self.r0, self.r0)


@dataclass(frozen=True)
class Kasner:
    """A_i(t) = (t/t_ref)**p_i; domain t > 0.

    The exponents are not constrained to the vacuum Kasner relations; use
    :func:`kasner_constraint_check` to report how far a triple is from them.
    """

    p1: float
    p2: float
    p3: float
    t_ref: float = 1.0

    def __post_init__(self):
        if self.t_ref <= 0.0:
            raise ModelError("kasner model requires t_ref > 0")

    @property
    def exponents(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)

    @property
    def amplitudes(self) -> tuple[float, float, float]:
        return (1.0, 1.0, 1.0)


class Tabulated:
    """Scale factors interpolated from samples on a strictly increasing grid.

    Uses not-a-knot cubic splines (fourth-order accurate, exact on cubics);
    derivatives come from the spline, never from differencing the samples.
    Needs at least 4 knots.
    """

    def __init__(self, times, a1, a2, a3):
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or t.size < 4:
            raise ModelError("tabulated model needs at least 4 knots")
        if not np.all(np.diff(t) > 0.0):
            raise ModelError("tabulated knots must be strictly increasing")
        samples = [np.asarray(a, dtype=float) for a in (a1, a2, a3)]
        for s in samples:
            if s.shape != t.shape:
                raise ModelError("sample arrays must match the knot grid")
            if not np.all(s > 0.0):
                raise ModelError("tabulated scale factors must be positive")
        self.times = t
        self._splines = [CubicSpline(t, s, bc_type="not-a-knot") for s in samples]
        self._dsplines = [sp.derivative() for sp in self._splines]

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def __repr__(self):
        return f"Tabulated(n={self.times.size}, t in [{self.t_min}, {self.t_max}])"


ScaleFactorModel = Union[IsotropicPowerLaw, Kasner, Tabulated]


def is_isotropic(model: ScaleFactorModel) -> bool:
    """True when all three axes share one scale-factor function by construction."""
    if isinstance(model, IsotropicPowerLaw):
        return True
    if isinstance(model, Kasner):
        return model.p1 == model.p2 == model.p3
    return False


def model_domain(model: ScaleFactorModel) -> tuple[float, float]:
    """Inclusive (t_lo, t_hi) domain; power laws exclude the t=0 singularity."""
    if isinstance(model, Tabulated):
        return (model.t_min, model.t_max)
    return (0.0, np.inf)


def _check_domain(model: ScaleFactorModel, t: float) -> None:
    if isinstance(model, Tabulated):
        if not (model.t_min <= t <= model.t_max):
            raise DomainError(
                f"t={t} outside tabulated domain [{model.t_min}, {model.t_max}]"
            )
    else:
        # t = 0 is a curvature singularity for power laws; reject it.
        if not t > 0.0:
            raise DomainError(f"t={t} outside power-law domain t > 0")


def evaluate_metric(model: ScaleFactorModel, t: float) -> MetricState:
    """Evaluate scale factors, derivatives and Hubble rates at time t.

    Parametric models use analytic derivatives; tabulated models use the
    spline derivative.  Raises DomainError outside the model domain and
    ModelError if an interpolated scale factor is not positive.
    """
    t = float(t)
    _check_domain(model, t)
    if isinstance(model, Tabulated):
        A = tuple(float(sp(t)) for sp in model._splines)
        if min(A) <= 0.0:
            raise ModelError(f"interpolated scale factor non-positive at t={t}")
        Adot = tuple(float(dsp(t)) for dsp in model._dsplines)
        H = tuple(ad / a for ad, a in zip(Adot, A))
    else:
        x = t / model.t_ref
        A = tuple(c * x**p for c, p in zip(model.amplitudes, model.exponents))
        Adot = tuple(a * p / t for a, p in zip(A, model.exponents))
        H = tuple(ad / a for ad, a in zip(Adot, A))
    return MetricState(
        t=t, A=A, Adot=Adot, H=H, sqrt_minus_g=A[0] * A[1] * A[2]
    )


def kasner_constraint_check(p1: float, p2: float, p3: float) -> tuple[float, float]:
    """Residuals of the vacuum-Kasner sums (sum p_i - 1, sum p_i^2 - 1).

    Informational only; anisotropic backgrounds are not required to satisfy
    the vacuum constraints.
    """
    return (p1 + p2 + p3 - 1.0, p1 * p1 + p2 * p2 + p3 * p3 - 1.0)


def load_tabulated_csv(path: str | Path) -> Tabulated:
    """Read a tabulated model from CSV with header ``t,a1,a2,a3``."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["t", "a1", "a2", "a3"]:
            raise ModelError(f"{path}: expected header 't,a1,a2,a3'")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ModelError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return Tabulated(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def constant_anisotropic(A: tuple[float, float, float],
                         t_span: tuple[float, float],
                         n_knots: int = 5) -> Tabulated:
    """Static background with fixed scale factors, as a tabulated model.

    Constant samples make the spline exactly constant, so Adot is exactly
    zero and no mode is ever excited.
    """
    t = np.linspace(t_span[0], t_span[1], max(int(n_knots), 4))
    ones = np.ones_like(t)
    return Tabulated(t, A[0] * ones, A[1] * ones, A[2] * ones)
