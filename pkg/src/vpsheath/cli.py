"""Command line entry point.

Exit codes: 0 success, 2 solver failure, 3 invariant violation or invalid
input, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, io, kinetic, layer, quasineutral
from .core import DataKind, load_config
from .errors import (BohmViolated, BvpError, DomainTooShort, InvariantViolation,
                     NonpositiveWallGap, VacuumEncountered, VpSheathError)
from .spectral import density, moment_table, momentum, project, reconstruct

log = logging.getLogger("vpsheath")

EXIT_OK, EXIT_SOLVER, EXIT_INVARIANT, EXIT_IO = 0, 2, 3, 4
SOLVER_ERRORS = (BvpError, VacuumEncountered, NonpositiveWallGap, BohmViolated, DomainTooShort)


def _times(text: str | None, t_end: float):
    if not text:
        return (t_end,)
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ladder(text: str | None):
    if not text:
        return harness.DEFAULT_LADDER
    return tuple(float(v) for v in text.split(",") if v.strip())


def _write_state(out: Path, name: str, t, x, xi, f, phi, rho, mom, emit_svg, files):
    tag = "stationary" if not np.isfinite(t) else f"t{t:.4f}"
    files.append(io.write_field(out / f"{name}_{tag}.csv", t, x, xi, f))
    files.append(io.write_profile(out / f"{name.replace('f', 'phi', 1)}_{tag}.csv", t, x, phi))
    files.append(io.write_profile(out / f"density_{name}_{tag}.csv", t, x, rho))
    files.append(io.write_profile(out / f"momentum_{name}_{tag}.csv", t, x, mom))
    if emit_svg:
        from . import plots

        files.append(plots.heatmap(out / f"{name}_{tag}.svg", x, xi, f, title=f"{name}, {tag}",
                                   label=name))
        files.append(plots.line_plot(out / f"potential_{name}_{tag}.svg", x, {"potential": phi},
                                     ylabel="potential", title=tag))


def cmd_stationary(args, cfg):
    moments = moment_table(cfg.L, cfg.M)
    data = harness.prepared_initial_data(args.case, cfg)
    inflow = project(data.inflow, cfg.M, cfg.L, cfg.quad_nodes)
    state = kinetic.solve_stationary(cfg, moments, inflow)
    x, xi = harness.output_grid(cfg.L)
    a = state.coeffs_at(x)
    files = []
    _write_state(args.out, "f", float("inf"), x, xi, state.sample(x, xi), state.phi_at(x),
                 density(a, moments),
                 momentum(a, cfg.L), args.emit_svg, files)
    return files


def _kinetic_files(out, states, times, cfg, emit_svg, files):
    x, xi = harness.output_grid(cfg.L)
    moments = moment_table(cfg.L, cfg.M)
    for t in times:
        st = states[harness._index_for(t, cfg.dt_kinetic, "dt_kinetic")]
        a = st.coeffs_at(x)
        _write_state(out, "f", t, x, xi, st.sample(x, xi), st.phi_at(x),
                     density(a, moments), momentum(a, cfg.L), emit_svg, files)


def cmd_evolve(args, cfg):
    times = _times(args.times, cfg.t_end)
    states = kinetic.evolve(cfg, harness.prepared_initial_data(args.case, cfg), max(times))
    files = []
    _kinetic_files(args.out, states, times, cfg, args.emit_svg, files)
    return files


def cmd_limit(args, cfg):
    times = _times(args.times, cfg.t_end)
    data = harness.prepared_initial_data(args.case, cfg)
    states = harness.limit_states_at(cfg, data, times)
    x, xi = harness.output_grid(cfg.L)
    moments = moment_table(cfg.L, cfg.M)
    files = []
    for t, st in zip(times, states):
        a = harness._coeffs_on(st.grid, st.coeffs.a, x)
        _write_state(args.out, "f0", t, x, xi, reconstruct(a, xi, cfg.L),
                     np.interp(x, st.grid, st.phi0.values),
                     density(a, moments), momentum(a, cfg.L),
                     args.emit_svg, files)
    hist = states[-1].phi0_at_wall_history
    files.append(io.write_rows(args.out / "phi0_wall_history.csv", ("t", "phi0_wall"), hist))
    return files


def cmd_layer(args, cfg):
    times = _times(args.times, cfg.t_end)
    data = harness.prepared_initial_data(args.case, cfg)
    states = harness.limit_states_at(cfg, data, times)
    x, xi = harness.output_grid(cfg.L)
    files, summary = [], []
    for t, st in zip(times, states):
        lay = harness.quasi_static_layer(cfg, st)
        comp = harness.assemble_approximation(st, lay, cfg.epsilon, L=cfg.L)
        tag = f"t{t:.4f}"
        files.append(io.write_profile(args.out / f"Phi0_{tag}.csv", t, x, comp.Phi0))
        files.append(io.write_field(args.out / f"F0_{tag}.csv", t, x, xi, comp.F0))
        if lay.F0_coeffs is not None:
            b = lay.F0_at(x)
            files.append(io.write_profile(args.out / f"momentum_F0_{tag}.csv", t, x,
                                          momentum(b, cfg.L)))
        if args.emit_svg:
            from . import plots

            files.append(plots.line_plot(args.out / f"Phi0_{tag}.svg", x, {"Phi0": comp.Phi0},
                                         ylabel="potential", title=tag))
            files.append(plots.heatmap(args.out / f"F0_{tag}.svg", x, xi, comp.F0,
                                       title=f"F0, {tag}", label="F0"))
        fit = lay.decay_fit
        summary.append({"t": t, "wall_gap": lay.wall_gap, "coercivity_c0": lay.coercivity,
                        "c_fit": None if fit is None else fit.c_fit,
                        "envelope_ratio": None if fit is None else fit.envelope_ratio})
    path = args.out / "layer_summary.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    files.append(path)
    return files


def cmd_converge(args, cfg):
    spec = harness.ExperimentSpec(case=args.case, epsilon_ladder=_ladder(args.eps_ladder),
                                  output_times=_times(args.times, cfg.t_end),
                                  output_dir=args.out, emit_svg=args.emit_svg)
    report, files = harness.run_convergence(spec, cfg, args.workers)
    for row in report.rows:
        print(f"eps={row.epsilon:.4g} t={row.t:g} l2_f={row.l2_f:.3e} linf_f={row.linf_f:.3e} "
              f"l2_phi={row.l2_phi:.3e} linf_phi={row.linf_phi:.3e}")
    for norm, fit in report.slopes.items():
        if fit is not None:
            print(f"slope {norm}: {fit.slope:.4f} (r^2 = {fit.r_squared:.4f})")
    for eps, msg in report.failures.items():
        print(f"eps={eps:.4g} failed: {msg}", file=sys.stderr)
    if report.failures:
        raise SolverFailure(f"{len(report.failures)} rung(s) failed")
    return files


def cmd_case(args, cfg):
    ladder = _ladder(args.eps_ladder) if args.eps_ladder else (cfg.epsilon,)
    spec = harness.ExperimentSpec(case=args.case, epsilon_ladder=ladder,
                                  output_times=_times(args.times, cfg.t_end),
                                  output_dir=args.out, emit_svg=args.emit_svg)
    result = harness.run_case(spec, cfg)
    for msg in result.messages:
        print(msg, file=sys.stderr)
    harness.raise_violations(result)
    return result.files


class SolverFailure(VpSheathError, RuntimeError):
    pass


COMMANDS = {
    "stationary": (cmd_stationary, "stationary kinetic solution"),
    "evolve": (cmd_evolve, "time-dependent kinetic solution"),
    "limit": (cmd_limit, "quasi-neutral limit solution"),
    "layer": (cmd_layer, "sheath corrector on top of the limit solution"),
    "converge": (cmd_converge, "kinetic-versus-composite convergence study"),
    "case": (cmd_case, "full case run with all fields and moments"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vpsheath", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="JSON configuration file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--emit-svg", action="store_true", help="also write SVG figures")
        p.add_argument("--case", default="homogeneous", choices=[k.value for k in DataKind])
        if name != "stationary":
            p.add_argument("--times", default=None, help="comma list of output times")
        if name in ("converge", "case"):
            p.add_argument("--eps-ladder", default=None,
                           help="comma list of strictly decreasing epsilon values")
        if name == "converge":
            p.add_argument("--workers", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command][0](args, cfg)
    except json.JSONDecodeError as exc:
        print(f"error: cannot parse configuration: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SOLVER_ERRORS + (SolverFailure,)) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvariantViolation, ValueError) as exc:
        print(f"invalid: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    for path in files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
