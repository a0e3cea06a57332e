"""Spectral energy-momentum components and their angle/frequency integrals.

The spectral tensor at one mode follows the massless-field decomposition:
T~^0_0 collects 2S per helicity with a k^3/volume prefactor, the diagonal
space components mix (X, Y) = (2S - (2S+U)(cos^2(theta)+1)/2, -r cos(theta) V)
with the tetrad angles, and the off-diagonal contravariant components carry
1/(A_i A_j) prefactors.  The integrated tensor accumulates
integral dxi ddelta sin(delta) dK0 T~ with dK0 = mu dk at fixed angles.

With a plain cos(theta) factor in the first T~^3_3 term the trace does not
vanish, although it must for a massless field; the default here uses
cos^2(theta), which makes the trace vanish identically.  The plain-cos(theta)
variant stays available behind ``use_printed_t33`` for comparison.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, UsageError
from .geometry import GeometryCoefficients
from .metric import MetricState, ScaleFactorModel, evaluate_metric
from .modes import PolarizationState
from .stepper import integrate_adaptive

TWO_PI = 2.0 * math.pi


def xy_terms(state: PolarizationState, theta: float, r: int) -> tuple[float, float]:
    """The (X, Y) combinations entering the spatial spectral components."""
    ct = math.cos(theta)
    x = 2.0 * state.S - (2.0 * state.S + state.U) * (ct * ct + 1.0) / 2.0
    y = -r * ct * state.V
    return x, y


@dataclass(frozen=True)
class SpectralStressTensor:
    """Spectral components at one (t, k, delta, xi) node, summed over helicity.

    T00..T33 are the mixed components T~^mu_mu; T12, T13, T23 are
    contravariant components including their 1/(A_i A_j) factors.  No T^{0i}
    fields exist: they vanish by spatial homogeneity.
    """

    t: float
    k: float
    delta: float
    xi: float
    T00: float
    T11: float
    T22: float
    T33: float
    T12: float
    T13: float
    T23: float

    @property
    def trace(self) -> float:
        return self.T00 + self.T11 + self.T22 + self.T33


def spectral_emt(state_plus: PolarizationState, state_minus: PolarizationState,
                 theta: float, phi: float, k: float, ms: MetricState,
                 volume: float = 1.0, use_printed_t33: bool = False,
                 delta: float = math.nan, xi: float = math.nan) -> SpectralStressTensor:
    """Assemble the helicity-summed spectral tensor at one node.

    ``delta`` and ``xi`` only label the evaluation point in the result; the
    physics enters through (theta, phi).
    """
    if k <= 0.0 or volume <= 0.0:
        raise UsageError("k and volume must be positive")
    pref = k**3 / volume
    st, ct = math.sin(theta), math.cos(theta)
    s2p, c2p = math.sin(2.0 * phi), math.cos(2.0 * phi)
    sp, cp = math.sin(phi), math.cos(phi)
    s2t = math.sin(2.0 * theta)
    tt = math.tan(theta)
    A1, A2, A3 = ms.A

    T00 = T11 = T22 = T33 = T12 = T13 = T23 = 0.0
    for r, state in ((+1, state_plus), (-1, state_minus)):
        x, y = xy_terms(state, theta, r)
        two_su = 2.0 * state.S + state.U
        T00 += pref * 2.0 * state.S
        T11 += pref * (-c2p * x + s2p * y - 0.5 * st * st * two_su)
        T22 += pref * (c2p * x - s2p * y - 0.5 * st * st * two_su)
        c3 = ct if use_printed_t33 else ct * ct
        T33 += pref * (-c3 * 2.0 * state.S + st * st * state.U)
        T12 += pref / (A1 * A2) * (s2p * x + c2p * y)
        T13 += pref / (A1 * A3) * (cp * 0.5 * s2t * two_su + sp * tt * y)
        T23 += pref / (A2 * A3) * (sp * 0.5 * s2t * two_su - cp * tt * y)
    return SpectralStressTensor(t=ms.t, k=k, delta=delta, xi=xi,
                                T00=T00, T11=T11, T22=T22, T33=T33,
                                T12=T12, T13=T13, T23=T23)


def polarization_overlap(y_plus: complex, ydot_plus: complex,
                         y_minus: complex, ydot_minus: complex,
                         geo: GeometryCoefficients, ms: MetricState,
                         k: float) -> complex:
    """Overlap of the two circular polarization vectors.

    b^-1 (-g)^-1/2 (mu^2 Y^{+1} conj(Y^{-1}) - k^-2 Ydot^{+1} conj(Ydot^{-1})).
    Nonzero overlap is what makes the space part of the tensor nondiagonal.
    """
    if k <= 0.0:
        raise UsageError("k must be positive")
    return (geo.mu**2 * y_plus * y_minus.conjugate()
            - ydot_plus * ydot_minus.conjugate() / k**2) / (geo.b * ms.sqrt_minus_g)


# ---------------------------------------------------------------------------
# Grid, cache and integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmtGrid:
    """Quadrature grid: log-spaced k, Gauss-Legendre cos(delta), periodic xi."""

    k_nodes: np.ndarray
    delta_nodes: np.ndarray
    delta_weights: np.ndarray  # weights in the cos(delta) variable
    xi_nodes: np.ndarray
    xi_weight: float

    @classmethod
    def from_counts(cls, n_k: int, k_min: float, k_max: float,
                    n_delta: int, n_xi: int) -> "EmtGrid":
        if n_k < 2 or n_delta < 2 or n_xi < 2:
            raise UsageError("grid counts must be >= 2")
        if not 0.0 < k_min < k_max:
            raise UsageError("need 0 < k_min < k_max")
        x, w = np.polynomial.legendre.leggauss(n_delta)
        return cls(k_nodes=np.geomspace(k_min, k_max, n_k),
                   delta_nodes=np.arccos(x),
                   delta_weights=w,
                   xi_nodes=TWO_PI * np.arange(n_xi) / n_xi,
                   xi_weight=TWO_PI / n_xi)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.k_nodes.size, self.delta_nodes.size, self.xi_nodes.size)


@dataclass
class ModeCache:
    """(S, U, V) samples for every grid node, both helicities, all times.

    Layout: suv[t, k, delta, xi, r, component] with r index 0 -> +1, 1 -> -1.
    """

    grid: EmtGrid
    times: np.ndarray
    suv: np.ndarray
    max_connection_residual: float
    steps: int
    rejected: int

    def time_index(self, t: float) -> int:
        idx = np.nonzero(np.isclose(self.times, t, rtol=1e-12, atol=1e-14))[0]
        if idx.size == 0:
            raise UsageError(f"t={t} not cached; cached times {self.times}")
        return int(idx[0])


def _delta_row_rhs(model: ScaleFactorModel, k_nodes: np.ndarray,
                   delta: float, xi_nodes: np.ndarray):
    """Vectorized (S,U,V) right-hand side for all (xi, r, k) at one delta."""
    sd, cd = math.sin(delta), math.cos(delta)
    cx2 = np.cos(xi_nodes) ** 2
    sx2 = np.sin(xi_nodes) ** 2
    w1 = sd * sd * cx2
    w2 = sd * sd * sx2
    w3 = cd * cd
    r_signs = np.array([+1.0, -1.0]).reshape(1, 2, 1)
    n_xi, n_k = xi_nodes.size, k_nodes.size
    k_row = k_nodes.reshape(1, 1, n_k)

    def rhs(t: float, yflat: np.ndarray) -> np.ndarray:
        y = yflat.reshape(n_xi, 2, n_k, 3)
        ms = evaluate_metric(model, t)
        A1, A2, A3 = ms.A
        H1, H2, H3 = ms.H
        sum_H = H1 + H2 + H3
        a1s, a2s = A1 * A1, A2 * A2
        u1 = w1 / a1s
        u2 = w2 / a2s
        u3 = w3 / (A3 * A3)
        mu2 = u1 + u2 + u3
        mu = np.sqrt(mu2)
        nb = a2s * cx2 + a1s * sx2
        nb_dot = 2.0 * (H2 * a2s * cx2 + H1 * a1s * sx2)
        bdot_over_b = nb_dot / nb - sum_H
        W = -(H1 * u1 + H2 * u2 + H3 * u3) / mu2 - bdot_over_b
        Wbar = (H3 - H1) / mu
        rw = r_signs * Wbar.reshape(n_xi, 1, 1)
        rot = rw + 2.0 * k_row * mu.reshape(n_xi, 1, 1)
        s, u, v = y[..., 0], y[..., 1], y[..., 2]
        two_s1 = 2.0 * s + 1.0
        w_col = W.reshape(n_xi, 1, 1)
        dy = np.empty_like(y)
        dy[..., 0] = 0.5 * w_col * u + 0.5 * rw * v
        dy[..., 1] = w_col * two_s1 - rot * v
        dy[..., 2] = rw * two_s1 + rot * u
        return dy.reshape(-1)

    return rhs


def _evolve_delta_row(args):
    (model, k_nodes, delta, xi_nodes, times, rel_tol, abs_tol) = args
    rhs = _delta_row_rhs(model, k_nodes, delta, xi_nodes)
    n = xi_nodes.size * 2 * k_nodes.size * 3
    samples, stats = integrate_adaptive(rhs, float(times[0]), float(times[-1]),
                                        np.zeros(n), rel_tol, abs_tol, times)
    shaped = samples.reshape(times.size, xi_nodes.size, 2, k_nodes.size, 3)
    # cache layout: (t, k, xi, r, comp) for this delta row
    return np.ascontiguousarray(shaped.transpose(0, 3, 1, 2, 4)), stats.steps, stats.rejected


def build_mode_cache(model: ScaleFactorModel, grid: EmtGrid,
                     output_times: np.ndarray, rel_tol: float = 1e-6,
                     abs_tol: float = 1e-12, workers: int = 1) -> ModeCache:
    """Evolve every grid mode from vacuum and sample at the output times.

    Work is partitioned by delta node (all xi, k and both helicities of one
    node form a single batched integration), so results do not depend on the
    worker count; rows are merged in grid order.
    """
    times = np.asarray(output_times, dtype=float)
    n_k, n_d, n_x = grid.shape
    tasks = [(model, grid.k_nodes, float(dl), grid.xi_nodes, times,
              rel_tol, abs_tol) for dl in grid.delta_nodes]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_evolve_delta_row, tasks)
    else:
        results = [_evolve_delta_row(t) for t in tasks]
    suv = np.empty((times.size, n_k, n_d, n_x, 2, 3))
    steps = rejected = 0
    for i_d, (row, st, rj) in enumerate(results):
        suv[:, :, i_d] = row
        steps += st
        rejected += rj
    s, u, v = suv[..., 0], suv[..., 1], suv[..., 2]
    residual = float(np.max(np.abs(u * u + v * v - 4.0 * s * (s + 1.0))))
    return ModeCache(grid=grid, times=times, suv=suv,
                     max_connection_residual=residual,
                     steps=steps, rejected=rejected)


@dataclass(frozen=True)
class StressTensorSample:
    """Angle- and frequency-integrated tensor at one time.

    trace_residual is the mixed diagonal sum (quadrature noise around zero);
    tail_fraction estimates the share of the last k-octave in T00, a proxy
    for cutoff sensitivity.
    """

    t: float
    T00: float
    T11: float
    T22: float
    T33: float
    T12: float
    T13: float
    T23: float
    trace_residual: float
    tail_fraction: float


def _angle_tables(model: ScaleFactorModel, grid: EmtGrid, t: float):
    """mu, theta, phi and metric scalars on the (delta, xi) grid at time t."""
    ms = evaluate_metric(model, t)
    A1, A2, A3 = ms.A
    sd = np.sin(grid.delta_nodes)[:, None]
    cd = np.cos(grid.delta_nodes)[:, None]
    sx = np.sin(grid.xi_nodes)[None, :]
    cx = np.cos(grid.xi_nodes)[None, :]
    e1 = sd * cx / A1
    e2 = sd * sx / A2
    e3 = (cd / A3) * np.ones_like(sx)
    mu = np.sqrt(e1 * e1 + e2 * e2 + e3 * e3)
    theta = np.arctan2(np.hypot(e1, e2), e3)
    phi = np.arctan2(e2, e1) % TWO_PI
    return ms, mu, theta, phi


def _spectral_tables(suv_t: np.ndarray, theta: np.ndarray, phi: np.ndarray,
                     k_nodes: np.ndarray, ms: MetricState, volume: float,
                     use_printed_t33: bool):
    """Helicity-summed spectral components on the whole grid at one time.

    suv_t has shape (n_k, n_delta, n_xi, 2, 3); returns a dict of arrays
    (n_k, n_delta, n_xi).  Vectorized restatement of :func:`spectral_emt`.
    """
    A1, A2, A3 = ms.A
    st, ct = np.sin(theta), np.cos(theta)
    s2p, c2p = np.sin(2.0 * phi), np.cos(2.0 * phi)
    sp, cp = np.sin(phi), np.cos(phi)
    s2t = np.sin(2.0 * theta)
    tt = np.tan(theta)
    pref = (k_nodes**3 / volume)[:, None, None]
    c3 = ct if use_printed_t33 else ct * ct

    comps = {key: 0.0 for key in ("T00", "T11", "T22", "T33", "T12", "T13", "T23")}
    for i_r, r in enumerate((+1.0, -1.0)):
        s = suv_t[..., i_r, 0]
        u = suv_t[..., i_r, 1]
        v = suv_t[..., i_r, 2]
        two_su = 2.0 * s + u
        x = 2.0 * s - two_su * (ct * ct + 1.0) / 2.0
        y = -r * ct * v
        comps["T00"] = comps["T00"] + pref * 2.0 * s
        comps["T11"] = comps["T11"] + pref * (-c2p * x + s2p * y - 0.5 * st * st * two_su)
        comps["T22"] = comps["T22"] + pref * (c2p * x - s2p * y - 0.5 * st * st * two_su)
        comps["T33"] = comps["T33"] + pref * (-c3 * 2.0 * s + st * st * u)
        comps["T12"] = comps["T12"] + pref / (A1 * A2) * (s2p * x + c2p * y)
        comps["T13"] = comps["T13"] + pref / (A1 * A3) * (cp * 0.5 * s2t * two_su + sp * tt * y)
        comps["T23"] = comps["T23"] + pref / (A2 * A3) * (sp * 0.5 * s2t * two_su - cp * tt * y)
    return comps


def integrate_emt(t: float, model: ScaleFactorModel, grid: EmtGrid,
                  cache: ModeCache, volume: float = 1.0,
                  use_printed_t33: bool = False) -> StressTensorSample:
    """Integrate the spectral tensor over angles and frequency at time t.

    Inner integral: trapezoid over the k grid with measure mu(t, delta, xi) dk.
    Angular integral: Gauss-Legendre in cos(delta), periodic trapezoid in xi.
    Summation order is fixed by the grid layout for reproducibility.
    """
    same_grid = (np.array_equal(cache.grid.k_nodes, grid.k_nodes)
                 and np.array_equal(cache.grid.delta_nodes, grid.delta_nodes)
                 and np.array_equal(cache.grid.xi_nodes, grid.xi_nodes))
    if not same_grid:
        raise UsageError("cache was built for a different grid")
    it = cache.time_index(t)
    suv_t = cache.suv[it]
    ms, mu, theta, phi = _angle_tables(model, grid, t)
    comps = _spectral_tables(suv_t, theta, phi, grid.k_nodes, ms, volume,
                             use_printed_t33)

    def k_then_angles(arr: np.ndarray, lo: int = 0) -> float:
        inner = np.trapezoid((arr * mu[None, :, :])[lo:, :, :],
                             grid.k_nodes[lo:], axis=0)
        by_delta = inner.sum(axis=1) * grid.xi_weight
        return float(np.dot(grid.delta_weights, by_delta))

    values = {key: k_then_angles(arr) for key, arr in comps.items()}
    for key, val in values.items():
        if not math.isfinite(val):
            raise NumericalFailure(f"non-finite integrated component {key} at t={t}")
    trace = values["T00"] + values["T11"] + values["T22"] + values["T33"]
    half = min(int(np.searchsorted(grid.k_nodes, grid.k_nodes[-1] / 2.0)),
               grid.k_nodes.size - 2)
    t00_tail = k_then_angles(comps["T00"], lo=half)
    tail_fraction = abs(t00_tail) / abs(values["T00"]) if values["T00"] != 0.0 else 0.0
    return StressTensorSample(t=t, trace_residual=trace,
                              tail_fraction=tail_fraction, **values)


def conservation_residual(times: np.ndarray, samples: list[StressTensorSample],
                          model: ScaleFactorModel) -> tuple[np.ndarray, np.ndarray]:
    """Continuity residual dT00/dt + sum_i H_i (T00 - Tii) and its scale.

    The time derivative uses central differences (one-sided at the ends).
    The scale |T00| * |sum H_i| normalizes the residual for reporting.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise UsageError("conservation residual needs at least 3 samples")
    if times.size != len(samples):
        raise UsageError("times and samples must align")
    t00 = np.array([s.T00 for s in samples])
    tii = np.array([[s.T11, s.T22, s.T33] for s in samples])
    H = np.array([evaluate_metric(model, float(t)).H for t in times])
    dt00 = np.gradient(t00, times)
    residual = dt00 + np.sum(H * (t00[:, None] - tii), axis=1)
    scale = np.abs(t00) * np.abs(H.sum(axis=1))
    return residual, scale
