"""Full epsilon-dependent Vlasov-Poisson solver.

Expanding f in the weighted Fourier basis turns the stationary and the
implicit-Euler kinetic problems into first-order boundary value systems in x
for the potential, its slope and the complex coefficients a_j(x).

Real state layout of every system here (n = 2 + 2(2M+1) unknowns):

    [phi, phi_x, Re a_{-M..M}, Im a_{-M..M}]
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bvp
from .core import InitialData, PotentialProfile, SimulationConfig
from .errors import BvpError, VacuumEncountered
from .spectral import (MomentTable, SpectralCoeffs, conjugate_asymmetry, density,
                       moment_table, project, project_field, reconstruct,
                       wavenumbers)

log = logging.getLogger(__name__)

CONTINUATION_START = 0.1
CONTINUATION_RATIO = np.sqrt(10.0)


def epsilon_ladder(target: float, start: float = CONTINUATION_START,
                   ratio: float = CONTINUATION_RATIO) -> list[float]:
    """Geometric continuation ladder from ``start`` down to ``target``."""
    if target >= start:
        return [float(target)]
    ladder = []
    eps = start
    while eps > target * ratio * (1 + 1e-12):
        ladder.append(eps)
        eps /= ratio
    ladder.append(float(target))
    return ladder


def pack(phi, dphi, a) -> np.ndarray:
    a = np.asarray(a)
    return np.vstack([np.atleast_2d(phi), np.atleast_2d(dphi), a.real, a.imag])


def unpack(y, M: int):
    nm = 2 * M + 1
    return y[0], y[1], y[2:2 + nm] + 1j * y[2 + nm:2 + 2 * nm]


class _Memo:
    """Remember the last few evaluations of a coefficient field ``x -> a``."""

    def __init__(self, fn, size: int = 4):
        self.fn = fn
        self.size = size
        self.cache: dict = {}

    def __call__(self, x):
        key = (x.shape, x.tobytes())
        hit = self.cache.get(key)
        if hit is None:
            hit = self.fn(x)
            if len(self.cache) >= self.size:
                self.cache.pop(next(iter(self.cache)))
            self.cache[key] = hit
        return hit


@dataclass(frozen=True)
class SpectralPoissonSystem:
    """Coefficient transport coupled to a Poisson equation.

    eps phi'' = Re sum_j m_j a_j + charge(phi)
    a_k'      = -i kappa_k phi' (a_k + shift_k) + c sum_j m_{j-k} (a_j - prev_j(x))

    with c = 2/(L^2 dt) when ``prev`` is given and c = 0 otherwise.  BCs:
    phi(0) = phi_left, phi(1) = 0, a(1) = inflow.  ``charge`` returns the
    value and derivative of the electron term; the kinetic problem uses
    -exp(-phi).
    """

    epsilon: float
    L: float
    M: int
    moments: MomentTable
    inflow: np.ndarray
    phi_left: float
    charge: Callable
    shift: np.ndarray | None = None
    prev: Callable | None = None
    dt: float | None = None

    @property
    def dim(self) -> int:
        return 2 + 2 * (2 * self.M + 1)

    def _parts(self):
        w = self.moments.density_weights
        kappa = wavenumbers(self.M, self.L)
        if self.prev is not None:
            c = 2.0 / (self.L ** 2 * self.dt)
            T = c * self.moments.toeplitz("m")
        else:
            T = None
        return w, kappa, T

    def rhs(self, x, y):
        w, kappa, T = self._parts()
        phi, p, a = unpack(y, self.M)
        rho = np.real(w @ a)
        q, _ = self.charge(phi)
        carried = a if self.shift is None else a + self.shift[:, None]
        da = -1j * kappa[:, None] * p * carried
        if T is not None:
            da = da + T @ (a - self.prev(x))
        return np.vstack([p, (rho + q) / self.epsilon, da.real, da.imag])

    def jac(self, x, y):
        w, kappa, T = self._parts()
        nm = 2 * self.M + 1
        n = self.dim
        m = y.shape[1]
        phi, p, a = unpack(y, self.M)
        _, dq = self.charge(phi)
        J = np.zeros((n, n, m))
        J[0, 1] = 1.0
        J[1, 0] = dq / self.epsilon
        J[1, 2:2 + nm] = (w.real / self.epsilon)[:, None]
        J[1, 2 + nm:] = (-w.imag / self.epsilon)[:, None]
        carried = a if self.shift is None else a + self.shift[:, None]
        dp = -1j * kappa[:, None] * carried
        J[2:2 + nm, 1] = dp.real
        J[2 + nm:, 1] = dp.imag
        re = np.zeros((nm, nm)) if T is None else T.real
        im = np.zeros((nm, nm)) if T is None else T.imag
        im_x = im[:, :, None] - np.eye(nm)[:, :, None] * (kappa[:, None] * p)[:, None, :]
        J[2:2 + nm, 2:2 + nm] = re[:, :, None]
        J[2 + nm:, 2 + nm:] = re[:, :, None]
        J[2:2 + nm, 2 + nm:] = -im_x
        J[2 + nm:, 2:2 + nm] = im_x
        return J

    def bc(self, ya, yb):
        nm = 2 * self.M + 1
        return np.concatenate([[ya[0] - self.phi_left, yb[0]],
                               yb[2:2 + nm] - self.inflow.real,
                               yb[2 + nm:] - self.inflow.imag])

    def bc_jac(self, ya, yb):
        n = self.dim
        da = np.zeros((n, n))
        db = np.zeros((n, n))
        da[0, 0] = 1.0
        db[1, 0] = 1.0
        db[2:, 2:] = np.eye(n - 2)
        return da, db

    def default_guess(self, x):
        """Linear potential between the boundary values, inflow coefficients."""
        x = np.asarray(x, dtype=float)
        phi = self.phi_left * (1.0 - x)
        a = np.repeat(self.inflow[:, None], len(x), axis=1)
        return pack(phi, np.full_like(x, -self.phi_left), a)

    def problem(self, mesh=None, guess=None, name="spectral-poisson") -> bvp.BvpProblem:
        if mesh is None:
            mesh = bvp.layered_mesh(np.sqrt(self.epsilon))
        return bvp.BvpProblem(dim=self.dim, rhs=self.rhs, bc=self.bc,
                              initial_mesh=mesh,
                              initial_guess=self.default_guess if guess is None else guess,
                              jac=self.jac, bc_jac=self.bc_jac, name=name)


def boltzmann_charge(phi):
    e = np.exp(-phi)
    return -e, e


def _stationary_system(cfg: SimulationConfig, moments: MomentTable, inflow) -> SpectralPoissonSystem:
    inflow = np.asarray(inflow, dtype=complex)
    if moments.M < cfg.M or len(inflow) != 2 * cfg.M + 1:
        raise ValueError("moment table or inflow does not match the spectral order")
    return SpectralPoissonSystem(epsilon=cfg.epsilon, L=cfg.L, M=cfg.M, moments=moments,
                                 inflow=inflow, phi_left=cfg.phi_b, charge=boltzmann_charge)


def build_stationary_system(cfg: SimulationConfig, moments: MomentTable, inflow) -> bvp.BvpProblem:
    """Stationary kinetic problem as a first-order BVP on [0, 1]."""
    return _stationary_system(cfg, moments, inflow).problem(name="stationary")


@dataclass(frozen=True)
class KineticState:
    """Snapshot (phi, a_j) of the kinetic solution at one time level."""

    time: float
    phi: PotentialProfile
    coeffs: SpectralCoeffs
    config: SimulationConfig
    inflow: np.ndarray = field(repr=False)
    step: int = 0
    solution: bvp.BvpSolution | None = field(default=None, repr=False)
    source: Callable | None = field(default=None, repr=False)

    def coeffs_at(self, x) -> np.ndarray:
        """Coefficient field at arbitrary x, shape (2M+1, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.source is not None:
            return self.source(x)
        return unpack(self.solution(x), self.config.M)[2]

    def phi_at(self, x) -> np.ndarray:
        return self.phi(np.asarray(x, dtype=float))

    def density(self, moments: MomentTable | None = None) -> np.ndarray:
        moments = moments or moment_table(self.config.L, self.config.M)
        return self.coeffs.density(moments)

    @property
    def vacuum_adjacent(self) -> bool:
        return bool(np.min(self.density()) <= 0.0)

    def sample(self, x, xi) -> np.ndarray:
        """f(x, xi) on a tensor grid, shape (len(x), len(xi))."""
        return reconstruct(self.coeffs_at(x), np.asarray(xi, dtype=float), self.config.L)

    def poisson_residual(self) -> float:
        """sup |eps phi'' - density + exp(-phi)| with the collocation phi''."""
        if self.solution is None:
            return 0.0
        cfg = self.config
        _, _, a = unpack(self.solution.z, cfg.M)
        d2 = self.solution.dz[1]
        rho = density(a, moment_table(cfg.L, cfg.M))
        return float(np.max(np.abs(cfg.epsilon * d2 - rho + np.exp(-self.solution.z[0]))))


def _state_from_solution(sol: bvp.BvpSolution, cfg, inflow, time, step) -> KineticState:
    phi, p, a = unpack(sol.z, cfg.M)
    return KineticState(time=float(time),
                        phi=PotentialProfile(sol.mesh, phi, p),
                        coeffs=SpectralCoeffs(cfg.M, sol.mesh, a),
                        config=cfg, inflow=inflow, step=step, solution=sol)


def solve_stationary(cfg: SimulationConfig, moments: MomentTable, inflow,
                     ladder=None, options: bvp.BvpOptions | None = None) -> KineticState:
    """Stationary kinetic state, reached by continuation in epsilon."""
    ladder = epsilon_ladder(cfg.epsilon) if ladder is None else ladder
    options = options or bvp.BvpOptions.from_config(cfg)

    def family(eps):
        return build_stationary_system(cfg.replace(epsilon=eps), moments, inflow)

    sol = bvp.continuation_solve(family, ladder, options)
    return _state_from_solution(sol, cfg, np.asarray(inflow, dtype=complex), np.nan, 0)


def step_implicit_euler(prev: KineticState, cfg: SimulationConfig, moments: MomentTable,
                        options: bvp.BvpOptions | None = None) -> KineticState:
    """Advance the kinetic state by one implicit Euler step of size dt_kinetic."""
    options = options or bvp.BvpOptions.from_config(cfg)
    step = prev.step + 1
    system = SpectralPoissonSystem(
        epsilon=cfg.epsilon, L=cfg.L, M=cfg.M, moments=moments, inflow=prev.inflow,
        phi_left=cfg.phi_b, charge=boltzmann_charge,
        prev=_Memo(prev.coeffs_at), dt=cfg.dt_kinetic)
    if prev.solution is not None:
        mesh, guess = prev.solution.mesh, prev.solution.z
    else:
        mesh = prev.coeffs.grid
        guess = pack(prev.phi.values, prev.phi.derivative(mesh), prev.coeffs.a)
    problem = system.problem(mesh=mesh, guess=guess, name=f"implicit Euler step {step}")
    try:
        sol = bvp.solve(problem, options)
    except BvpError as exc:
        raise type(exc)(f"step {step} (t={step * cfg.dt_kinetic:g}): {exc}") from exc
    state = _state_from_solution(sol, cfg, prev.inflow, step * cfg.dt_kinetic, step)
    drift = conjugate_asymmetry(state.coeffs.a)
    if drift > 1e-9:
        log.warning("conjugate symmetry drift %.3g at step %d", drift, step)
    return state


def _poisson_problem(cfg: SimulationConfig, rho: Callable, eps: float) -> bvp.BvpProblem:
    def rhs(x, y):
        return np.vstack([y[1], (rho(x) - np.exp(-y[0])) / eps])

    def jac(x, y):
        J = np.zeros((2, 2, y.shape[1]))
        J[0, 1] = 1.0
        J[1, 0] = np.exp(-y[0]) / eps
        return J

    def bc(ya, yb):
        return np.array([ya[0] - cfg.phi_b, yb[0]])

    def guess(x):
        return np.vstack([cfg.phi_b * (1.0 - x), np.full_like(x, -cfg.phi_b)])

    return bvp.BvpProblem(dim=2, rhs=rhs, bc=bc, jac=jac,
                          initial_mesh=bvp.layered_mesh(np.sqrt(eps)),
                          initial_guess=guess, name="initial Poisson")


def initial_state(cfg: SimulationConfig, initial: InitialData,
                  options: bvp.BvpOptions | None = None) -> KineticState:
    """Projected initial data and the potential of the frozen initial density."""
    options = options or bvp.BvpOptions.from_config(cfg)
    moments = moment_table(cfg.L, cfg.M)
    source = _Memo(lambda x: project_field(initial, x, cfg.M, cfg.L, cfg.quad_nodes))
    rho = lambda x: density(source(x), moments)
    sol = bvp.continuation_solve(lambda eps: _poisson_problem(cfg, rho, eps),
                                 epsilon_ladder(cfg.epsilon), options)
    inflow = project(initial.inflow, cfg.M, cfg.L, cfg.quad_nodes)
    a = source(sol.mesh)
    return KineticState(time=0.0, phi=PotentialProfile(sol.mesh, sol.z[0], sol.z[1]),
                        coeffs=SpectralCoeffs(cfg.M, sol.mesh, a), config=cfg,
                        inflow=inflow, step=0, solution=None, source=source)


def _check_vacuum(state: KineticState, moments):
    rho = state.coeffs.density(moments)
    if np.min(rho) <= 0.0:
        node = int(np.argmin(rho))
        raise VacuumEncountered(
            f"nonpositive kinetic density {rho[node]:.3g} at x={state.coeffs.grid[node]:.4g}",
            node=node, time=state.time)


def evolve(cfg: SimulationConfig, initial: InitialData, t_end: float | None = None,
           options: bvp.BvpOptions | None = None) -> list[KineticState]:
    """States at t = 0, dt, 2 dt, ..., t_end."""
    t_end = cfg.t_end if t_end is None else t_end
    steps = int(round(t_end / cfg.dt_kinetic))
    if abs(steps * cfg.dt_kinetic - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt_kinetic={cfg.dt_kinetic}")
    moments = moment_table(cfg.L, cfg.M)
    state = initial_state(cfg, initial, options)
    states = [state]
    for _ in range(steps):
        state = step_implicit_euler(state, cfg, moments, options)
        _check_vacuum(state, moments)
        states.append(state)
        log.info("kinetic t=%.4g: %d nodes", state.time, len(state.coeffs.grid))
    return states
