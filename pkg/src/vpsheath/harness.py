"""Experiment orchestration: composite approximation, error norms, residuals,
convergence studies and case runs with CSV (and optional SVG) output."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from . import io, kinetic, layer, quasineutral
from .core import (DataKind, InitialData, SimulationConfig, make_initial_data)
from .errors import (GridMismatch, InvariantViolation, VacuumEncountered, VpSheathError,
                     WallTraceMismatch)
from .spectral import density, moment_table, momentum, reconstruct, unit_density_profile, wavenumbers

log = logging.getLogger(__name__)

OUTPUT_POINTS = 101
DEFAULT_LADDER = (10 ** -1.5, 10 ** -2.5, 1e-3, 10 ** -3.5)
NORMS = ("l2_f", "linf_f", "l2_phi", "linf_phi")
FAR_FIELD = 0.5
WALL_TRACE_TOL = 1e-10


def output_grid(L: float = 4.0, n: int = OUTPUT_POINTS):
    return np.linspace(0.0, 1.0, n), np.linspace(-L, 0.0, n)


def prepared_initial_data(kind, cfg: SimulationConfig) -> InitialData:
    """Initial data whose inflow profile has unit truncated density at order M."""
    data = make_initial_data(kind, cfg)
    return data.with_profile(unit_density_profile(data.profile, cfg.M, cfg.quad_nodes))


@dataclass(frozen=True)
class ExperimentSpec:
    case: DataKind
    epsilon_ladder: tuple
    output_times: tuple = (0.1,)
    output_dir: Path = Path("out")
    emit_svg: bool = False

    def __post_init__(self):
        object.__setattr__(self, "case", DataKind(self.case))
        ladder = tuple(float(e) for e in self.epsilon_ladder)
        if not ladder or any(e <= 0 for e in ladder):
            raise ValueError("epsilon ladder must be nonempty and positive")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("epsilon ladder must be strictly decreasing")
        times = tuple(float(t) for t in self.output_times)
        if not times or any(t < 0 for t in times) or list(times) != sorted(set(times)):
            raise ValueError("output times must be nonnegative and strictly increasing")
        object.__setattr__(self, "epsilon_ladder", ladder)
        object.__setattr__(self, "output_times", times)
        object.__setattr__(self, "output_dir", Path(self.output_dir))


@dataclass(frozen=True)
class WallTrace:
    """Velocity trace f0(t, 0, .) given by limit-solver coefficients.

    The truncated expansion ripples at the 1e-4 level near xi = 0, where the
    Bohm moment weights it by xi^-2.  Evaluated as a function the trace is
    therefore cut to zero on the exclusion zone and clipped at zero.
    """

    coeffs: np.ndarray
    L: float
    exclusion: float

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        values = reconstruct(self.coeffs, xi.ravel(), self.L).reshape(xi.shape)
        return np.where(xi < -self.exclusion, np.maximum(values, 0.0), 0.0)


def wall_trace(limit: quasineutral.LimitState, cfg: SimulationConfig) -> WallTrace:
    return WallTrace(coeffs=limit.coeffs.a[:, 0].copy(), L=cfg.L, exclusion=1e-3 * cfg.L)


def _coeffs_on(grid, a, x):
    if len(grid) == len(x) and np.allclose(grid, x, rtol=0, atol=1e-14):
        return a
    re = np.array([np.interp(x, grid, row.real) for row in a])
    im = np.array([np.interp(x, grid, row.imag) for row in a])
    return re + 1j * im


@dataclass(frozen=True)
class Composite:
    """Zeroth-order composite f0 + F0, phi0 + Phi0 on the output grid."""

    time: float
    epsilon: float
    x: np.ndarray
    xi: np.ndarray
    f0: np.ndarray
    F0: np.ndarray
    phi0: np.ndarray
    Phi0: np.ndarray
    coeffs: np.ndarray = field(repr=False)  # coefficients of f0 + F0 at x
    L: float = 4.0

    @property
    def f(self) -> np.ndarray:
        return self.f0 + self.F0

    @property
    def phi(self) -> np.ndarray:
        return self.phi0 + self.Phi0


def assemble_approximation(limit: quasineutral.LimitState, lay: layer.LayerSolution,
                           epsilon: float | None = None, x=None, xi=None,
                           L: float = 4.0) -> Composite:
    """f^A = f0 + F0 and phi^A = phi0 + Phi0 sampled on the output grid."""
    phi0_wall = limit.phi0.left
    if abs(lay.phi0_wall - phi0_wall) > WALL_TRACE_TOL:
        raise WallTraceMismatch(
            f"layer built for phi0(t,0)={lay.phi0_wall:.12g}, limit gives {phi0_wall:.12g}")
    eps = lay.epsilon if epsilon is None else epsilon
    gx, gxi = output_grid(L)
    x = gx if x is None else np.asarray(x, dtype=float)
    xi = gxi if xi is None else np.asarray(xi, dtype=float)
    a0 = _coeffs_on(limit.grid, limit.coeffs.a, x)
    if lay.F0_coeffs is not None and lay.wall_gap > 0:
        b = lay.F0_at(x)
    else:
        b = np.zeros_like(a0)
    f0 = reconstruct(a0, xi, L)
    F0 = reconstruct(b, xi, L)
    phi0 = np.interp(x, limit.grid, limit.phi0.values)
    Phi0 = lay.Phi0(x)
    return Composite(time=limit.time, epsilon=eps, x=x, xi=xi, f0=f0, F0=F0, phi0=phi0,
                     Phi0=Phi0, coeffs=a0 + b, L=L)


@dataclass(frozen=True)
class ErrorRow:
    epsilon: float
    t: float
    l2_f: float
    linf_f: float
    l2_phi: float
    linf_phi: float

    def as_tuple(self):
        return (self.epsilon, self.t, self.l2_f, self.linf_f, self.l2_phi, self.linf_phi)


def field_norms(df, dphi, x, xi):
    """Trapezoidal L2 and max norms of a phase-space field and a profile."""
    df = np.asarray(df, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    if df.shape != (len(x), len(xi)) or dphi.shape != (len(x),):
        raise GridMismatch(f"fields {df.shape}/{dphi.shape} do not match grid "
                           f"({len(x)}, {len(xi)})")
    l2_f = np.sqrt(np.trapezoid(np.trapezoid(df ** 2, xi, axis=1), x))
    l2_phi = np.sqrt(np.trapezoid(dphi ** 2, x))
    return float(l2_f), float(np.max(np.abs(df))), float(l2_phi), float(np.max(np.abs(dphi)))


def error_norms(exact: kinetic.KineticState, approx: Composite) -> ErrorRow:
    f = exact.sample(approx.x, approx.xi)
    phi = exact.phi_at(approx.x)
    norms = field_norms(f - approx.f, phi - approx.phi, approx.x, approx.xi)
    return ErrorRow(approx.epsilon, approx.time, *norms)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def fit_slope(eps, values) -> SlopeFit | None:
    """Least-squares slope of log(values) against log(eps); None for < 2 points."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = (eps > 0) & (values > 0) & np.isfinite(values)
    if np.count_nonzero(ok) < 2:
        return None
    lx, ly = np.log(eps[ok]), np.log(values[ok])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum((ly - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2)


_D1_INNER = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2_INNER = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1_EDGE = (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0,
            np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0)
_D2_EDGE = (np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0,
            np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0)


def _uniform_step(x):
    h = np.diff(x)
    if len(x) < 6 or np.ptp(h) > 1e-9 * h.mean():
        raise GridMismatch("finite differences need a uniform grid of at least 6 nodes")
    return float(h.mean())


def _stencil(values, inner, edge, h, power):
    v = np.moveaxis(np.asarray(values, dtype=float), 0, -1)
    n = v.shape[-1]
    out = np.empty_like(v)
    for k, c in enumerate(inner):
        out[..., 2:n - 2] = (out[..., 2:n - 2] if k else 0.0) + c * v[..., k:n - 4 + k]
    for row, coeffs in enumerate(edge):
        w = len(coeffs)
        out[..., row] = v[..., :w] @ coeffs
        sign = -1.0 if power == 1 else 1.0
        out[..., n - 1 - row] = sign * (v[..., ::-1][..., :w] @ coeffs)
    return np.moveaxis(out / h ** power, -1, 0)


def d_dx(values, x):
    """Fourth-order first derivative along axis 0 (one-sided at the ends)."""
    return _stencil(values, _D1_INNER, _D1_EDGE, _uniform_step(x), 1)


def d2_dx2(values, x):
    """Fourth-order second derivative along axis 0 (one-sided at the ends)."""
    return _stencil(values, _D2_INNER, _D2_EDGE, _uniform_step(x), 2)


def residuals(approx: Composite, epsilon: float | None = None, dfdt=None):
    """(R1, R2) of the composite on its grid.

    R1 = f_t + xi f_x + phi_x f_xi   (f_xi spectrally, x-derivatives by 4th-order FD)
    R2 = eps phi_xx - int f dxi + exp(-phi)
    """
    eps = approx.epsilon if epsilon is None else epsilon
    x, xi = approx.x, approx.xi
    M = (approx.coeffs.shape[0] - 1) // 2
    kappa = wavenumbers(M, approx.L)
    f = approx.f
    f_xi = reconstruct(1j * kappa[:, None] * approx.coeffs, xi, approx.L) * xi[None, :]
    phi = approx.phi
    R1 = xi[None, :] * d_dx(f, x) + d_dx(phi, x)[:, None] * f_xi
    if dfdt is not None:
        R1 = R1 + dfdt
    rho = density(approx.coeffs, moment_table(approx.L, M))
    R2 = eps * d2_dx2(phi, x) - rho + np.exp(-phi)
    return R1, R2


def time_derivative(times, fields):
    """Second-order differences of stacked fields over output times (axis 0).

    Central in the interior, one-sided second order at the ends; with fewer
    than three times the derivative is taken as zero.
    """
    fields = np.asarray(fields, dtype=float)
    if len(times) < 3:
        return np.zeros_like(fields)
    return np.gradient(fields, np.asarray(times, dtype=float), axis=0, edge_order=2)


@dataclass(frozen=True)
class EnvelopeFit:
    """|R2(x)| ~ sqrt(eps) (A + B exp(-c x / sqrt(eps))) near the wall."""

    A: float
    B: float
    c: float
    cost: float


def fit_residual_envelope(eps_list, x, r2_list, x_max: float = FAR_FIELD) -> EnvelopeFit:
    xs, es, ys = [], [], []
    for eps, r2 in zip(eps_list, r2_list):
        r2 = np.abs(np.asarray(r2, dtype=float))
        keep = (x <= x_max) & (r2 > 0) & np.isfinite(r2)
        xs.append(x[keep])
        es.append(np.full(np.count_nonzero(keep), eps))
        ys.append(r2[keep])
    xs, es, ys = map(np.concatenate, (xs, es, ys))
    if len(ys) < 3:
        raise ValueError("not enough nonzero residual samples for the envelope fit")
    se = np.sqrt(es)

    def resid(p):
        A, B, c = np.exp(p)
        return np.log(se * (A + B * np.exp(-c * xs / se))) - np.log(ys)

    start = np.log([max(np.median(ys / se), 1e-300), max(np.max(ys / se), 1e-300), 1.0])
    fit = least_squares(resid, start, method="lm")
    A, B, c = np.exp(fit.x)
    return EnvelopeFit(float(A), float(B), float(c), float(fit.cost))


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    far_residual: dict = field(default_factory=dict)  # epsilon -> sup_{x>=0.5} |R2|
    residual_slope: SlopeFit | None = None
    envelope: EnvelopeFit | None = None
    r2_profiles: dict = field(default_factory=dict, repr=False)
    composites: dict = field(default_factory=dict, repr=False)

    def series(self, norm: str, t: float | None = None):
        rows = [r for r in self.rows if t is None or abs(r.t - t) < 1e-12]
        return np.array([r.epsilon for r in rows]), np.array([getattr(r, norm) for r in rows])

    def strictly_decreasing(self, norm: str, t: float | None = None) -> bool:
        eps, vals = self.series(norm, t)
        order = np.argsort(-eps)
        vals = vals[order]
        return bool(len(vals) >= 2 and np.all(np.diff(vals) < 0))


def _index_for(t, dt, label):
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(1.0, t):
        raise ValueError(f"output time {t} is not a multiple of {label}={dt}")
    return n


def limit_states_at(cfg: SimulationConfig, initial: InitialData, times):
    """Limit states at the requested times (each a multiple of dt_limit)."""
    t_end = max(times)
    states = quasineutral.evolve_limit(cfg, initial, t_end)
    by_step = {s.step: s for s in states}
    return [by_step[_index_for(t, cfg.dt_limit, "dt_limit")] for t in times]


def quasi_static_layer(cfg: SimulationConfig, limit: quasineutral.LimitState):
    trace = wall_trace(limit, cfg)
    return layer.solve_layer_coupled(cfg, trace, limit.phi0.left, wall_coeffs=trace.coeffs)


def _rung(eps: float, cfg: SimulationConfig, case: DataKind, times):
    """Kinetic run, limit run, layers and composites for one epsilon."""
    cfg_e = cfg.replace(epsilon=eps)
    initial = prepared_initial_data(case, cfg_e)
    states = kinetic.evolve(cfg_e, initial, max(times))
    limits = limit_states_at(cfg_e, initial, times)
    rows, r2s, comps = [], [], []
    for t, lim in zip(times, limits):
        kin = states[_index_for(t, cfg.dt_kinetic, "dt_kinetic")]
        lay = quasi_static_layer(cfg_e, lim)
        comp = assemble_approximation(lim, lay, eps, L=cfg.L)
        rows.append(error_norms(kin, comp))
        r2s.append(residuals(comp, eps)[1])
        comps.append(comp)
    return rows, r2s, comps


def convergence_study(spec: ExperimentSpec, cfg: SimulationConfig | None = None,
                      workers: int | None = None) -> ErrorReport:
    """Kinetic-versus-composite errors along the epsilon ladder.

    Rungs run in a process pool when more than one worker is available;
    results are collected in ladder order.  A failing rung is recorded and
    the remaining rungs continue.
    """
    cfg = cfg or SimulationConfig()
    workers = workers or os.cpu_count() or 1
    ladder = spec.epsilon_ladder
    times = spec.output_times
    results = {}
    if workers > 1 and len(ladder) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(ladder))) as pool:
            futures = {eps: pool.submit(_rung, eps, cfg, spec.case, times) for eps in ladder}
            for eps in ladder:
                try:
                    results[eps] = futures[eps].result()
                except VpSheathError as exc:
                    results[eps] = exc
    else:
        for eps in ladder:
            try:
                results[eps] = _rung(eps, cfg, spec.case, times)
            except VpSheathError as exc:
                results[eps] = exc
    report = ErrorReport()
    x, _ = output_grid(cfg.L)
    t_last = times[-1]
    for eps in ladder:
        res = results[eps]
        if isinstance(res, Exception):
            report.failures[eps] = f"{type(res).__name__}: {res}"
            log.error("rung eps=%g failed: %s", eps, res)
            continue
        rows, r2s, comps = res
        report.rows.extend(rows)
        report.r2_profiles[eps] = r2s[-1]
        report.composites[eps] = comps[-1]
        report.far_residual[eps] = float(np.max(np.abs(r2s[-1][x >= FAR_FIELD])))
    if len(report.r2_profiles) >= 2:
        for norm in NORMS:
            report.slopes[norm] = fit_slope(*report.series(norm, t_last))
        eps_ok = sorted(report.far_residual, reverse=True)
        report.residual_slope = fit_slope(eps_ok, [report.far_residual[e] for e in eps_ok])
        try:
            report.envelope = fit_residual_envelope(
                eps_ok, x, [report.r2_profiles[e] for e in eps_ok])
        except ValueError as exc:
            log.warning("envelope fit skipped: %s", exc)
    else:
        for norm in NORMS:
            report.slopes[norm] = None
    return report


def write_error_report(report: ErrorReport, out_dir, emit_svg: bool = False) -> list[Path]:
    out = Path(out_dir)
    paths = [io.write_rows(out / "errors.csv", io.ERROR_HEADER,
                           (r.as_tuple() for r in report.rows))]
    slope_rows = []
    for norm in NORMS:
        s = report.slopes.get(norm)
        if s is not None:
            slope_rows.append((norm, s.slope, s.intercept, s.r_squared))
    if report.residual_slope is not None:
        s = report.residual_slope
        slope_rows.append(("sup_far_r2", s.slope, s.intercept, s.r_squared))
    paths.append(io.write_rows(out / "slopes.csv", ("quantity", "slope", "intercept",
                                                    "r_squared"), slope_rows))
    paths.append(io.write_rows(out / "far_residual.csv", ("epsilon", "sup_far_r2"),
                               sorted(report.far_residual.items(), reverse=True)))
    x, _ = output_grid()
    for eps, r2 in report.r2_profiles.items():
        t = report.composites[eps].time
        paths.append(io.write_profile(out / f"r2_eps{eps:.6g}.csv", t, x, r2))
    if report.failures:
        paths.append(io.write_rows(out / "failures.csv", ("epsilon", "error"),
                                   sorted(report.failures.items(), reverse=True)))
    if emit_svg and report.rows:
        from . import plots

        series = {}
        eps = None
        for norm in NORMS:
            eps, vals = report.series(norm, report.rows[-1].t)
            series[norm] = vals
        paths.append(plots.loglog_plot(out / "errors.svg", eps, series, report.slopes,
                                       title="kinetic minus composite"))
    return paths


@dataclass
class CaseResult:
    exit_code: int = 0
    files: list = field(default_factory=list)
    messages: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _check_composite(comp: Composite, lay: layer.LayerSolution, phi_b: float, L: float,
                     tol: float = 1e-8) -> list[str]:
    bad = []
    if abs(comp.phi[0] - phi_b) > tol:
        bad.append(f"t={comp.time:g}: phi^A(0) = {comp.phi[0]:.12g}, expected {phi_b}")
    if abs(comp.phi[-1]) > tol:
        bad.append(f"t={comp.time:g}: phi^A(1) = {comp.phi[-1]:.3g}, expected 0")
    v = lay.Phi0.values
    if np.any(np.diff(v) > tol) or v.min() < -tol or v.max() > lay.wall_gap + tol:
        bad.append(f"t={comp.time:g}: Phi0 not monotone within [0, gap]")
    if lay.F0_coeffs is not None:
        mom = float(np.max(np.abs(lay.momentum(L))))
        if mom > tol:
            bad.append(f"t={comp.time:g}: F0 momentum {mom:.3g} exceeds {tol:g}")
    return bad


def _write_time_level(out: Path, t: float, x, xi, cfg, kin, comp, lay, emit_svg, files):
    tag = f"t{t:.4f}"
    moments = moment_table(cfg.L, cfg.M)
    a_kin = kin.coeffs_at(x)
    files.append(io.write_field(out / f"f_{tag}.csv", t, x, xi, kin.sample(x, xi)))
    files.append(io.write_profile(out / f"phi_{tag}.csv", t, x, kin.phi_at(x)))
    files.append(io.write_profile(out / f"density_f_{tag}.csv", t, x, density(a_kin, moments)))
    files.append(io.write_profile(out / f"momentum_f_{tag}.csv", t, x, momentum(a_kin, cfg.L)))
    if comp is None:
        if emit_svg:
            from . import plots

            files.append(plots.heatmap(out / f"f_{tag}.svg", x, xi, kin.sample(x, xi),
                                       title=f"f at t={t:g}"))
            files.append(plots.line_plot(out / f"phi_{tag}.svg", x, {"phi": kin.phi_at(x)},
                                         ylabel="potential"))
        return
    b = lay.F0_at(x) if lay.F0_coeffs is not None else np.zeros_like(comp.coeffs)
    a0 = comp.coeffs - b
    files.append(io.write_field(out / f"f0_{tag}.csv", t, x, xi, comp.f0))
    files.append(io.write_field(out / f"F0_{tag}.csv", t, x, xi, comp.F0))
    files.append(io.write_profile(out / f"phi0_{tag}.csv", t, x, comp.phi0))
    files.append(io.write_profile(out / f"Phi0_{tag}.csv", t, x, comp.Phi0))
    files.append(io.write_profile(out / f"density_f0_{tag}.csv", t, x, density(a0, moments)))
    files.append(io.write_profile(out / f"density_F0_{tag}.csv", t, x, density(b, moments)))
    files.append(io.write_profile(out / f"momentum_f0_{tag}.csv", t, x, momentum(a0, cfg.L)))
    files.append(io.write_profile(out / f"momentum_F0_{tag}.csv", t, x, momentum(b, cfg.L)))
    if emit_svg:
        from . import plots

        files.append(plots.line_plot(
            out / f"phi_{tag}.svg", x,
            {"phi": kin.phi_at(x), "phi0": comp.phi0, "Phi0": comp.Phi0,
             "phi0 + Phi0": comp.phi}, ylabel="potential", title=f"t={t:g}"))
        files.append(plots.line_plot(
            out / f"density_{tag}.svg", x,
            {"f": density(a_kin, moments), "f0": density(a0, moments),
             "F0": density(b, moments)}, ylabel="density", title=f"t={t:g}"))
        for name, values in (("f", kin.sample(x, xi)), ("f0", comp.f0), ("F0", comp.F0)):
            files.append(plots.heatmap(out / f"{name}_{tag}.svg", x, xi, values,
                                       title=f"{name} at t={t:g}", label=name))


def run_case(spec: ExperimentSpec, cfg: SimulationConfig | None = None) -> CaseResult:
    """Kinetic, limit and layer solutions of one data family, written to CSV.

    For every epsilon of the ladder the files go to ``<output_dir>/eps_<eps>``.
    A VacuumEncountered from the limit path is recorded and the kinetic
    outputs are still produced.  Invariant violations give exit code 3.
    """
    cfg = cfg or SimulationConfig()
    result = CaseResult()
    x, xi = output_grid(cfg.L)
    times = spec.output_times
    for eps in spec.epsilon_ladder:
        cfg_e = cfg.replace(epsilon=eps)
        out = spec.output_dir / f"eps_{eps:.6g}"
        initial = prepared_initial_data(spec.case, cfg_e)
        entry = {"epsilon": eps, "case": spec.case.value, "times": list(times)}
        states = kinetic.evolve(cfg_e, initial, max(times))
        try:
            limits = limit_states_at(cfg_e, initial, times)
        except VacuumEncountered as exc:
            msg = f"limit path stopped: {exc}"
            result.messages.append(msg)
            entry["limit_error"] = msg
            limits = [None] * len(times)
        rows, comps = [], []
        entry["layers"] = []
        for t, lim in zip(times, limits):
            kin = states[_index_for(t, cfg.dt_kinetic, "dt_kinetic")]
            comp = lay = None
            if lim is not None:
                lay = quasi_static_layer(cfg_e, lim)
                comp = assemble_approximation(lim, lay, eps, L=cfg.L)
                rows.append(error_norms(kin, comp))
                comps.append(comp)
                result.violations.extend(_check_composite(comp, lay, cfg.phi_b, cfg.L))
                entry["layers"].append({
                    "t": t, "phi0_wall": lim.phi0.left, "wall_gap": lay.wall_gap,
                    "coercivity_c0": lay.coercivity,
                    "max_abs_F0_momentum": float(np.max(np.abs(lay.momentum(cfg.L)))),
                    "c_fit": None if lay.decay_fit is None else lay.decay_fit.c_fit})
            _write_time_level(out, t, x, xi, cfg_e, kin, comp, lay, spec.emit_svg,
                              result.files)
        if comps:
            steady = spec.case is DataKind.HOMOGENEOUS
            dfdt = time_derivative(times, [c.f for c in comps])
            sup_r1, sup_r2 = [], []
            for comp, ft in zip(comps, dfdt):
                R1, R2 = residuals(comp, eps, None if steady else ft)
                sup_r1.append(float(np.max(np.abs(R1))))
                sup_r2.append(float(np.max(np.abs(R2[x >= FAR_FIELD]))))
            entry["sup_r1"] = sup_r1
            entry["sup_far_r2"] = sup_r2
        report = ErrorReport(rows=rows)
        result.files.extend(write_error_report(report, out))
        entry["kinetic_steps"] = len(states) - 1
        result.summary[f"{eps:.6g}"] = entry
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(entry, fh, indent=2, sort_keys=True)
        result.files.append(out / "summary.json")
    if result.violations:
        result.exit_code = 3
    return result


def run_convergence(spec: ExperimentSpec, cfg: SimulationConfig | None = None,
                    workers: int | None = None) -> tuple[ErrorReport, list[Path]]:
    report = convergence_study(spec, cfg, workers)
    files = write_error_report(report, spec.output_dir, spec.emit_svg)
    return report, files


def raise_violations(result: CaseResult):
    if result.violations:
        raise InvariantViolation("; ".join(result.violations))


__all__ = [
    "Composite", "ErrorReport", "ErrorRow", "ExperimentSpec", "SlopeFit", "assemble_approximation",
    "convergence_study", "d2_dx2", "d_dx", "error_norms", "field_norms", "fit_residual_envelope",
    "fit_slope", "output_grid", "prepared_initial_data", "residuals", "run_case",
    "run_convergence", "wall_trace",
]
