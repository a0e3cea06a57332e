"""Configuration, orchestration and file emission for the ``amx`` executable.

Subcommands: ``mode`` (single-mode time series), ``emt`` (integrated tensor
timeline), ``spectrum`` (spectral tensor over the grid at one time) and
``validate`` (identity/oracle suite as JSON).  Exit codes: 0 success,
1 validation failure, 2 configuration error, 3 numerical failure.

Floating-point text output uses the shortest round-trip representation, and
all reductions run in a fixed order, so identical configurations produce
byte-identical files regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emt import (EmtGrid, build_mode_cache, conservation_residual,
                  integrate_emt, _angle_tables, _spectral_tables)
from .errors import ConfigError, NumericalFailure
from .geometry import ModeDirection
from .metric import (IsotropicPowerLaw, Kasner, ScaleFactorModel,
                     kasner_constraint_check, load_tabulated_csv)
from .modes import evolve_bogoliubov, evolve_second_order, evolve_suv
from .validate import DEFAULT_CHECK_TOLERANCES, run_suite

log = logging.getLogger("amx")

METHODS = ("suv", "second_order", "bogoliubov")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class MetricConfig:
    variant: str = "kasner"
    r0: float = 1.0
    p: float = 1.0
    p1: float = 2.0 / 3.0
    p2: float = 2.0 / 3.0
    p3: float = -1.0 / 3.0
    t_ref: float = 1.0
    csv: str | None = None


@dataclass
class SpanConfig:
    t0: float = 1.0
    t1: float = 10.0
    outputs: int = 33


@dataclass
class GridConfig:
    n_k: int = 64
    k_min: float = 0.25
    k_max: float = 1.0
    n_delta: int = 16
    n_xi: int = 16


@dataclass
class ToleranceConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    checks: dict = field(default_factory=dict)


@dataclass
class EmtConfig:
    volume: float = 1.0
    use_printed_t33: bool = False
    # spectra need many modes but only percent-level accuracy each; keep a
    # separate, looser integration tolerance for the grid pipeline
    rel_tol: float = 1e-6


@dataclass
class RunConfig:
    metric: MetricConfig = field(default_factory=MetricConfig)
    span: SpanConfig = field(default_factory=SpanConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    emt: EmtConfig = field(default_factory=EmtConfig)
    seed: int = 0
    memory_budget_mb: int = 4096

    def validate(self) -> None:
        if self.metric.variant not in ("isotropic-power-law", "kasner", "tabulated"):
            raise ConfigError(f"unknown metric variant {self.metric.variant!r}")
        if self.metric.variant == "tabulated" and not self.metric.csv:
            raise ConfigError("tabulated metric needs a 'csv' path")
        if not self.span.t0 < self.span.t1:
            raise ConfigError("span requires t0 < t1")
        if self.span.outputs < 2:
            raise ConfigError("span.outputs must be >= 2")
        if min(self.grid.n_k, self.grid.n_delta, self.grid.n_xi) < 2:
            raise ConfigError("all grid counts must be >= 2")
        if not 0.0 < self.grid.k_min < self.grid.k_max:
            raise ConfigError("grid requires 0 < k_min < k_max")
        if self.tolerances.rel_tol <= 0.0 or self.tolerances.abs_tol <= 0.0 \
                or self.emt.rel_tol <= 0.0:
            raise ConfigError("tolerances must be positive")
        for tol in self.tolerances.checks.values():
            if tol < 0.0:
                raise ConfigError("check tolerances must be non-negative")
        unknown = set(self.tolerances.checks) - set(DEFAULT_CHECK_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown check names in tolerances.checks: "
                              f"{sorted(unknown)}")
        if self.memory_budget_mb <= 0:
            raise ConfigError("memory_budget_mb must be positive")


def _apply_section(obj, data: dict, path: str) -> None:
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ConfigError(f"unknown config key {path}.{key}")
        setattr(obj, key, value)


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    for section, value in data.items():
        if section == "metric":
            _apply_section(cfg.metric, value, "metric")
        elif section == "span":
            _apply_section(cfg.span, value, "span")
        elif section == "grid":
            _apply_section(cfg.grid, value, "grid")
        elif section == "tolerances":
            checks = value.pop("checks", None)
            _apply_section(cfg.tolerances, value, "tolerances")
            if checks is not None:
                if not isinstance(checks, dict):
                    raise ConfigError("tolerances.checks must be a table")
                cfg.tolerances.checks = {k: float(v) for k, v in checks.items()}
        elif section == "emt":
            _apply_section(cfg.emt, value, "emt")
        elif section == "seed":
            cfg.seed = int(value)
        elif section == "memory_budget_mb":
            cfg.memory_budget_mb = int(value)
        else:
            raise ConfigError(f"unknown config section {section!r}")
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Parse TOML (default) or JSON (by .json extension); None gives defaults."""
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with path.open("rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return config_from_dict(data)


def build_model(cfg: RunConfig) -> ScaleFactorModel:
    m = cfg.metric
    if m.variant == "isotropic-power-law":
        return IsotropicPowerLaw(r0=m.r0, p=m.p, t_ref=m.t_ref)
    if m.variant == "kasner":
        r1, r2 = kasner_constraint_check(m.p1, m.p2, m.p3)
        log.info("kasner constraint residuals: sum-1=%g, sumsq-1=%g", r1, r2)
        return Kasner(p1=m.p1, p2=m.p2, p3=m.p3, t_ref=m.t_ref)
    return load_tabulated_csv(m.csv)


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def default_workers() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Subcommand drivers
# ---------------------------------------------------------------------------

def run_mode(cfg: RunConfig, k: float, delta: float, xi: float, r: int,
             method: str, out_path: str | Path) -> None:
    """Evolve one mode and write its time series."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; allowed: {', '.join(METHODS)}")
    if r not in (+1, -1):
        raise ConfigError("helicity r must be +1 or -1")
    model = build_model(cfg)
    d = ModeDirection(k=k, delta=delta, xi=xi)
    t0, t1 = cfg.span.t0, cfg.span.t1
    times = np.linspace(t0, t1, cfg.span.outputs)
    rel, atol = cfg.tolerances.rel_tol, cfg.tolerances.abs_tol
    if method == "suv":
        sol = evolve_suv(model, d, r, t0, t1, rel, atol, times)
        s, u, v = sol.suv[:, 0], sol.suv[:, 1], sol.suv[:, 2]
        res = u * u + v * v - 4.0 * s * (s + 1.0)
        rows = zip(sol.t, s, u, v, res)
        write_csv(out_path, ["t", "S", "U", "V", "invariant_residual"], rows)
        log.info("mode run: %d steps, max invariant residual %g",
                 sol.stats.steps, sol.max_invariant_residual)
    elif method == "bogoliubov":
        sol = evolve_bogoliubov(model, d, r, t0, t1, rel, atol, times)
        suv = sol.suv_track()
        res = np.abs(np.abs(sol.phi) ** 2 - np.abs(sol.psi) ** 2 - 1.0)
        rows = zip(sol.t, suv[:, 0], suv[:, 1], suv[:, 2], res)
        write_csv(out_path, ["t", "S", "U", "V", "invariant_residual"], rows)
        log.info("mode run: %d steps, max normalization residual %g",
                 sol.stats.steps, sol.max_norm_residual)
    else:
        sol = evolve_second_order(model, d, r, t0, t1, rel_tol=rel,
                                  abs_tol=atol, output_times=times)
        rows = zip(sol.t, sol.y.real, sol.y.imag, sol.ydot.real, sol.ydot.imag)
        write_csv(out_path, ["t", "re_y", "im_y", "re_ydot", "im_ydot"], rows)
        log.info("mode run: %d steps", sol.stats.steps)


def _check_memory_budget(cfg: RunConfig, grid: EmtGrid, n_times: int) -> None:
    n_k, n_d, n_x = grid.shape
    # cache plus one working copy during assembly
    need = n_times * n_k * n_d * n_x * 2 * 3 * 8 * 2.5
    budget = cfg.memory_budget_mb * 2**20
    if need > budget:
        raise ConfigError(
            f"mode cache needs ~{need / 2**20:.0f} MiB, over the "
            f"{cfg.memory_budget_mb} MiB budget; shrink the grid or raise "
            f"memory_budget_mb")


def _emt_timeline(cfg: RunConfig, model: ScaleFactorModel, grid: EmtGrid,
                  workers: int):
    times = np.linspace(cfg.span.t0, cfg.span.t1, cfg.span.outputs)
    _check_memory_budget(cfg, grid, times.size)
    cache = build_mode_cache(model, grid, times, rel_tol=cfg.emt.rel_tol,
                             abs_tol=cfg.tolerances.abs_tol, workers=workers)
    samples = [integrate_emt(float(t), model, grid, cache,
                             volume=cfg.emt.volume,
                             use_printed_t33=cfg.emt.use_printed_t33)
               for t in times]
    return times, cache, samples


@dataclass
class EmtRunResult:
    times: np.ndarray
    samples: list
    refine_delta: float | None = None


def run_emt(cfg: RunConfig, out_path: str | Path, refine: bool = False,
            workers: int = 1) -> EmtRunResult:
    """Evolve the mode grid, integrate the tensor per output time, write CSV."""
    if cfg.span.outputs < 3:
        raise ConfigError("emt runs need span.outputs >= 3 for the "
                          "conservation diagnostic")
    model = build_model(cfg)
    g = cfg.grid
    grid = EmtGrid.from_counts(g.n_k, g.k_min, g.k_max, g.n_delta, g.n_xi)
    times, cache, samples = _emt_timeline(cfg, model, grid, workers)
    log.info("mode cache: %d modes, %d steps, max connection residual %g",
             2 * g.n_k * g.n_delta * g.n_xi, cache.steps,
             cache.max_connection_residual)
    resid, scale = conservation_residual(times, samples, model)
    rows = [(s.t, s.T00, s.T11, s.T22, s.T33, s.T12, s.T13, s.T23, rr, sc)
            for s, rr, sc in zip(samples, resid, scale)]
    write_csv(out_path, ["t", "T00", "T11", "T22", "T33", "T12", "T13", "T23",
                         "conservation_residual", "conservation_scale"], rows)

    refine_delta = None
    if refine:
        fine = EmtGrid.from_counts(2 * g.n_k, g.k_min, g.k_max,
                                   2 * g.n_delta, 2 * g.n_xi)
        _, _, fine_samples = _emt_timeline(cfg, model, fine, workers)
        t00_a, t00_b = samples[-1].T00, fine_samples[-1].T00
        denom = max(abs(t00_a), abs(t00_b))
        refine_delta = abs(t00_b - t00_a) / denom if denom > 0.0 else 0.0
        log.info("refine: T00(t1) %g -> %g, relative change %g",
                 t00_a, t00_b, refine_delta)
    return EmtRunResult(times=times, samples=samples, refine_delta=refine_delta)


def run_spectrum(cfg: RunConfig, t: float, out_path: str | Path,
                 workers: int = 1) -> None:
    """Write the helicity-summed spectral tensor over the grid at time t."""
    if not cfg.span.t0 <= t <= cfg.span.t1:
        raise ConfigError(f"t={t} outside span [{cfg.span.t0}, {cfg.span.t1}]")
    model = build_model(cfg)
    g = cfg.grid
    grid = EmtGrid.from_counts(g.n_k, g.k_min, g.k_max, g.n_delta, g.n_xi)
    times = np.array([cfg.span.t0]) if t == cfg.span.t0 else np.array([cfg.span.t0, t])
    _check_memory_budget(cfg, grid, times.size)
    cache = build_mode_cache(model, grid, times, rel_tol=cfg.emt.rel_tol,
                             abs_tol=cfg.tolerances.abs_tol, workers=workers)
    it = cache.time_index(t)
    ms, mu, theta, phi = _angle_tables(model, grid, t)
    comps = _spectral_tables(cache.suv[it], theta, phi, grid.k_nodes, ms,
                             cfg.emt.volume, cfg.emt.use_printed_t33)
    keys = ("T00", "T11", "T22", "T33", "T12", "T13", "T23")
    trace = comps["T00"] + comps["T11"] + comps["T22"] + comps["T33"]
    rows = []
    for ik, kv in enumerate(grid.k_nodes):
        for idl, dl in enumerate(grid.delta_nodes):
            for ix, xv in enumerate(grid.xi_nodes):
                rows.append((kv, dl, xv,
                             *(comps[key][ik, idl, ix] for key in keys),
                             trace[ik, idl, ix]))
    header = ["k", "delta", "xi"] + [f"{key}_spectral" for key in keys] + ["trace"]
    write_csv(out_path, header, rows)


def run_validate(cfg: RunConfig, out_path: str | Path | None) -> int:
    """Run the check suite; JSON report; exit status 0/1."""
    reports = run_suite(seed=cfg.seed, tolerances=cfg.tolerances.checks,
                        rel_tol=cfg.tolerances.rel_tol,
                        abs_tol=cfg.tolerances.abs_tol)
    payload = [{"check": r.check, "max_abs": r.max_abs, "max_rel": r.max_rel,
                "samples": r.samples, "pass": r.passed} for r in reports]
    text = json.dumps(payload, indent=2) + "\n"
    if out_path is not None:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)
    failed = [r.check for r in reports if not r.passed]
    for r in reports:
        state = "diag" if r.is_diagnostic else ("pass" if r.passed else "FAIL")
        log.info("%-34s %s  max_rel=%g", r.check, state, r.max_rel)
    if failed:
        log.error("failed checks: %s", ", ".join(failed))
        return 1
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amx",
        description="Photon modes and energy-momentum spectra in anisotropic "
                    "backgrounds")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", type=str, default=None,
                       help="TOML (or .json) run configuration")
        p.add_argument("--out", type=str, required=out_required,
                       help="output file path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p_mode = sub.add_parser("mode", help="single-mode time series (CSV)")
    common(p_mode)
    p_mode.add_argument("--k", type=float, default=1.0)
    p_mode.add_argument("--delta", type=float, default=math.pi / 3.0)
    p_mode.add_argument("--xi", type=float, default=math.pi / 5.0)
    p_mode.add_argument("--r", type=int, default=1, choices=(1, -1))
    p_mode.add_argument("--method", type=str, default="suv", choices=METHODS)

    p_emt = sub.add_parser("emt", help="integrated tensor timeline (CSV)")
    common(p_emt)
    p_emt.add_argument("--refine", action="store_true",
                       help="also run the doubled grid and report the change")
    p_emt.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: available parallelism)")

    p_spec = sub.add_parser("spectrum", help="spectral tensor at one time (CSV)")
    common(p_spec)
    p_spec.add_argument("--t", type=float, required=True)
    p_spec.add_argument("--workers", type=int, default=None)

    p_val = sub.add_parser("validate", help="identity/oracle suite (JSON)")
    common(p_val, out_required=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.command == "mode":
            run_mode(cfg, args.k, args.delta, args.xi, args.r, args.method,
                     args.out)
            return 0
        if args.command == "emt":
            workers = args.workers if args.workers else default_workers()
            run_emt(cfg, args.out, refine=args.refine, workers=workers)
            return 0
        if args.command == "spectrum":
            workers = args.workers if args.workers else default_workers()
            run_spectrum(cfg, args.t, args.out, workers=workers)
            return 0
        return run_validate(cfg, args.out)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except (ValueError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return 2
    except NumericalFailure as exc:
        log.error("numerical failure: %s (t=%s)", exc, exc.t)
        return 3


if __name__ == "__main__":
    sys.exit(main())
