import numpy as np
import pytest

from vpsheath import harness, io, kinetic, layer, quasineutral
from vpsheath.core import SimulationConfig
from vpsheath.errors import GridMismatch, WallTraceMismatch
from vpsheath.spectral import reconstruct


@pytest.mark.parametrize("p", [0.25, 0.5, 1.0])
def test_slope_fitter_recovers_exponents(p):
    eps = np.array(harness.DEFAULT_LADDER)
    fit = harness.fit_slope(eps, 3.7 * eps ** p)
    assert fit.slope == pytest.approx(p, abs=1e-10)
    assert fit.intercept == pytest.approx(np.log(3.7), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_slope_fitter_needs_two_points():
    assert harness.fit_slope([1e-2], [0.1]) is None
    assert harness.fit_slope([1e-2, 1e-3], [0.1, 0.0]) is None


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        harness.ExperimentSpec("homogeneous", (1e-2, 1e-1))
    with pytest.raises(ValueError):
        harness.ExperimentSpec("homogeneous", (1e-2, -1e-3))
    with pytest.raises(ValueError):
        harness.ExperimentSpec("homogeneous", (1e-2,), output_times=(0.2, 0.1))
    with pytest.raises(ValueError):
        harness.ExperimentSpec("plasma", (1e-2,))
    spec = harness.ExperimentSpec("case2", [0.1, 0.01], [0.1], str(tmp_path))
    assert spec.epsilon_ladder == (0.1, 0.01) and spec.output_dir == tmp_path


def test_finite_differences_are_fourth_order():
    errs1, errs2 = [], []
    for n in (26, 51, 101, 201):
        x = np.linspace(0, 1, n)
        u = np.sin(3 * x) * np.exp(x)
        du = np.exp(x) * (np.sin(3 * x) + 3 * np.cos(3 * x))
        d2u = np.exp(x) * (-8 * np.sin(3 * x) + 6 * np.cos(3 * x))
        errs1.append(np.max(np.abs(harness.d_dx(u, x) - du)))
        errs2.append(np.max(np.abs(harness.d2_dx2(u, x) - d2u)))
    o1 = np.log2(np.array(errs1[:-1]) / errs1[1:])
    o2 = np.log2(np.array(errs2[:-1]) / errs2[1:])
    assert np.all(o1 > 3.7) and np.all(o2 > 3.5)


def test_finite_differences_act_along_first_axis():
    x = np.linspace(0, 1, 11)
    u = np.outer(x ** 2, np.arange(3.0))
    assert np.allclose(harness.d_dx(u, x), np.outer(2 * x, np.arange(3.0)))
    with pytest.raises(GridMismatch):
        harness.d_dx(x, np.sqrt(x))


def test_time_derivative():
    t = np.array([0.0, 0.1, 0.2, 0.3])
    fields = t[:, None] ** 2 * np.ones((1, 4))
    assert np.allclose(harness.time_derivative(t, fields), 2 * t[:, None])
    assert np.all(harness.time_derivative(t[:2], fields[:2]) == 0)


@pytest.fixture(scope="module")
def homogeneous_pieces():
    cfg = SimulationConfig(epsilon=1e-1)
    data = harness.prepared_initial_data("homogeneous", cfg)
    limit = quasineutral.evolve_limit(cfg, data, 0.01)[-1]
    lay = harness.quasi_static_layer(cfg, limit)
    states = kinetic.evolve(cfg, data, 0.01)
    return cfg, data, limit, lay, states


def test_homogeneous_composite_reduces_to_sigma_plus_layer(homogeneous_pieces):
    cfg, data, limit, lay, _ = homogeneous_pieces
    comp = harness.assemble_approximation(limit, lay, L=cfg.L)
    assert comp.f0.shape == (101, 101)
    assert np.max(np.abs(comp.phi0)) < 1e-12
    assert np.allclose(comp.phi, comp.Phi0, atol=1e-12)
    sigma_trunc = reconstruct(limit.inflow, comp.xi, cfg.L)
    assert np.max(np.abs(comp.f0 - sigma_trunc[None, :])) < 1e-12
    assert comp.phi[0] == pytest.approx(1.0, abs=1e-10)
    assert comp.phi[-1] == pytest.approx(0.0, abs=1e-10)
    assert np.max(np.abs(comp.f[-1] - sigma_trunc)) < 1e-10


def test_zero_layer_composite_equals_limit(homogeneous_pieces):
    cfg, _, limit, _, _ = homogeneous_pieces
    lay = layer.solve_layer_coupled(cfg.replace(phi_b=1e-30), harness.wall_trace(limit, cfg),
                                    limit.phi0.left)
    comp = harness.assemble_approximation(limit, lay, L=cfg.L)
    assert np.all(comp.F0 == 0) and np.all(comp.Phi0 == 0)
    assert np.array_equal(comp.phi, comp.phi0)


def test_wall_trace_mismatch(homogeneous_pieces):
    cfg, _, limit, lay, _ = homogeneous_pieces
    shifted = layer.LayerSolution(Phi0=lay.Phi0, F0_coeffs=lay.F0_coeffs,
                                  wall_gap=lay.wall_gap, epsilon=lay.epsilon,
                                  phi0_wall=lay.phi0_wall + 1e-9, solution=lay.solution, M=lay.M)
    with pytest.raises(WallTraceMismatch):
        harness.assemble_approximation(limit, shifted)


def test_wall_trace_is_cleaned_near_zero_velocity(homogeneous_pieces):
    cfg, _, limit, _, _ = homogeneous_pieces
    trace = harness.wall_trace(limit, cfg)
    xi = np.linspace(-4, 0, 4001)
    v = trace(xi)
    assert np.all(v >= 0) and np.all(v[xi >= -trace.exclusion] == 0)


def _exact_composite(state, cfg, offset=0.0):
    x, xi = harness.output_grid(cfg.L)
    return harness.Composite(time=state.time, epsilon=cfg.epsilon, x=x, xi=xi,
                             f0=state.sample(x, xi), F0=np.zeros((101, 101)),
                             phi0=state.phi_at(x) + offset, Phi0=np.zeros(101),
                             coeffs=state.coeffs_at(x), L=cfg.L)


def test_error_norms_of_identical_fields_vanish(homogeneous_pieces):
    cfg, *_, states = homogeneous_pieces
    row = harness.error_norms(states[-1], _exact_composite(states[-1], cfg))
    assert (row.l2_f, row.linf_f, row.l2_phi, row.linf_phi) == (0, 0, 0, 0)


def test_constant_potential_offset(homogeneous_pieces):
    cfg, *_, states = homogeneous_pieces
    row = harness.error_norms(states[-1], _exact_composite(states[-1], cfg, offset=-0.125))
    assert row.linf_phi == pytest.approx(0.125, abs=1e-15)
    assert row.l2_phi == pytest.approx(0.125, abs=1e-14)
    assert row.l2_f == 0


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        harness.field_norms(np.zeros((3, 4)), np.zeros(3), np.arange(3.0), np.arange(5.0))


def test_residuals_of_a_stationary_solution_are_small(inflow, moments):
    cfg = SimulationConfig(epsilon=1e-1)
    state = kinetic.solve_stationary(cfg, moments, inflow)
    R1, R2 = harness.residuals(_exact_composite(state, cfg), cfg.epsilon)
    # measured 1.1e-5 and 1.2e-4; interpolation onto the output grid dominates
    assert np.max(np.abs(R2)) < 1e-4
    assert np.max(np.abs(R1)) < 1e-3


def test_envelope_fit_recovers_synthetic_rate():
    x, _ = harness.output_grid()
    eps_list = [1e-2, 1e-3]
    profiles = [np.sqrt(e) * (0.1 + 2.0 * np.exp(-3.0 * x / np.sqrt(e))) for e in eps_list]
    fit = harness.fit_residual_envelope(eps_list, x, profiles)
    assert fit.c == pytest.approx(3.0, rel=1e-6)
    assert fit.A == pytest.approx(0.1, rel=1e-6) and fit.B == pytest.approx(2.0, rel=1e-6)


def test_single_rung_study_has_norms_but_no_slopes(tmp_path):
    spec = harness.ExperimentSpec("homogeneous", (1e-1,), (0.01,), tmp_path)
    report, files = harness.run_convergence(spec, workers=1)
    assert len(report.rows) == 1 and all(v is None for v in report.slopes.values())
    assert report.rows[0].l2_f > 0
    header, data = io.read_table(tmp_path / "errors.csv")
    assert tuple(header) == io.ERROR_HEADER and data.shape == (1, 6)


def test_study_continues_past_failed_rung(tmp_path, monkeypatch):
    real = harness._rung

    def flaky(eps, cfg, case, times):
        if eps < 0.05:
            from vpsheath.errors import NewtonDiverged
            raise NewtonDiverged("forced")
        return real(eps, cfg, case, times)

    monkeypatch.setattr(harness, "_rung", flaky)
    spec = harness.ExperimentSpec("homogeneous", (1e-1, 1e-2, 10 ** -1.5 / 10), (0.01,), tmp_path)
    report = harness.convergence_study(spec, workers=1)
    assert len(report.rows) == 1 and len(report.failures) == 2


def test_pool_and_serial_studies_agree(tmp_path):
    spec = harness.ExperimentSpec("homogeneous", (1e-1, 10 ** -1.5), (0.01,), tmp_path)
    a = harness.convergence_study(spec, workers=1)
    b = harness.convergence_study(spec, workers=2)
    assert [r.as_tuple() for r in a.rows] == [r.as_tuple() for r in b.rows]
    assert a.slopes["l2_f"] is not None


def test_case_run_writes_files_and_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        spec = harness.ExperimentSpec("case2", (1e-1,), (0.01, 0.02), tmp_path / f"run{k}")
        res = harness.run_case(spec)
        assert res.exit_code == 0 and not res.violations
        outs.append(sorted(p for p in res.files if p.suffix == ".csv"))
    assert len(outs[0]) > 20
    for a, b in zip(*outs):
        assert a.name == b.name and a.read_bytes() == b.read_bytes()
    t, x, mom = io.read_profile(outs[0][0].parent / "momentum_F0_t0.0200.csv")
    assert np.max(np.abs(mom)) <= 1e-8 and t == 0.02


def test_vacuum_case_records_limit_failure_and_keeps_kinetic_output(tmp_path):
    spec = harness.ExperimentSpec("vacuum", (1e-1,), (0.01,), tmp_path)
    res = harness.run_case(spec)
    assert res.exit_code == 0
    entry = res.summary["0.1"]
    assert "limit path stopped" in entry["limit_error"]
    names = {p.name for p in res.files}
    assert "f_t0.0100.csv" in names and "phi_t0.0100.csv" in names
    assert not any(n.startswith("F0_") for n in names)


def test_svg_output(tmp_path):
    spec = harness.ExperimentSpec("homogeneous", (1e-1,), (0.01,), tmp_path, emit_svg=True)
    res = harness.run_case(spec)
    svgs = [p for p in res.files if p.suffix == ".svg"]
    assert svgs and all(p.read_text().lstrip().startswith("<?xml") for p in svgs)
