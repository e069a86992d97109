"""Quasi-neutral limit solver: phi0 = -log(density) plus explicit upwind transport.

The coefficient update is the xi-weighted projection of the phase-space
upwind scheme.  For xi < 0 the upwind neighbour of x_r is x_{r+1}:

    a_r <- a_r + (2/L^2)(dt/dx) [ K (a_{r+1} - a_r) + (phi_{r+1} - phi_r) K D a_r ]

with K[k, j] = k_{j-k} and D = diag(i 4 pi j / L^2).  The last node x_N = 1
carries the inflow coefficients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import InitialData, PotentialProfile, SimulationConfig
from .errors import CflViolation, VacuumEncountered
from .spectral import (MomentTable, SpectralCoeffs, moment_table, project, project_field,
                       wavenumbers)

log = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-8


@dataclass(frozen=True)
class LimitState:
    time: float
    coeffs: SpectralCoeffs
    phi0: PotentialProfile
    inflow: np.ndarray = field(repr=False)
    phi0_at_wall_history: np.ndarray = field(repr=False, default=None)
    step: int = 0

    @property
    def grid(self) -> np.ndarray:
        return self.coeffs.grid

    def density(self, moments: MomentTable) -> np.ndarray:
        return self.coeffs.density(moments)


def phi_from_density(coeffs: SpectralCoeffs, moments: MomentTable,
                     floor: float = DENSITY_FLOOR, time: float | None = None) -> PotentialProfile:
    """phi0 = -log(density) node by node."""
    rho = coeffs.density(moments)
    bad = np.nonzero(~(rho > floor))[0]
    if len(bad):
        node = int(bad[0])
        raise VacuumEncountered(
            f"density {rho[node]:.3g} at x={coeffs.grid[node]:.4g} is below the floor {floor:g}",
            node=node, time=time)
    return PotentialProfile(coeffs.grid, -np.log(rho))


def limit_operators(moments: MomentTable):
    """(K, K D) of the projected transport and field terms."""
    K = moments.toeplitz("k")
    D = 1j * wavenumbers(moments.M, moments.L)
    return K, K * D[None, :]


def check_cfl(cfg: SimulationConfig):
    if cfg.cfl > 1.0 + 1e-12:
        raise CflViolation(f"CFL number dt_limit*L/dx = {cfg.cfl:.3g} exceeds 1")


def upwind_step(state: LimitState, cfg: SimulationConfig, moments: MomentTable,
                stencil: str = "upwind") -> LimitState:
    """One explicit step of size dt_limit.

    ``stencil="printed"`` differences against x_{r-1} instead, which is
    downwind for xi < 0; it is kept only to demonstrate its instability.  Its
    outflow node uses a linearly extrapolated ghost value.
    """
    check_cfl(cfg)
    K, KD = limit_operators(moments)
    lam = 2.0 / cfg.L ** 2 * cfg.dt_limit / cfg.dx
    a = state.coeffs.a
    phi = state.phi0.values
    new = a.copy()
    if stencil == "upwind":
        da = a[:, 1:] - a[:, :-1]
        dphi = phi[1:] - phi[:-1]
        new[:, :-1] = a[:, :-1] + lam * (K @ da + dphi * (KD @ a[:, :-1]))
    elif stencil == "printed":
        ghost_a = 2 * a[:, :1] - a[:, 1:2]
        ghost_phi = 2 * phi[:1] - phi[1:2]
        left_a = np.concatenate([ghost_a, a[:, :-2]], axis=1)
        left_phi = np.concatenate([ghost_phi, phi[:-2]])
        body = a[:, :-1]
        new[:, :-1] = body - lam * (K @ (left_a - body) + (left_phi - phi[:-1]) * (KD @ body))
    else:
        raise ValueError(f"unknown stencil {stencil!r}")
    new[:, -1] = state.inflow
    step = state.step + 1
    time = step * cfg.dt_limit
    coeffs = SpectralCoeffs(state.coeffs.M, state.grid, new)
    phi0 = phi_from_density(coeffs, moments, time=time)
    hist = np.vstack([state.phi0_at_wall_history, [[time, phi0.values[0]]]])
    return LimitState(time=time, coeffs=coeffs, phi0=phi0, inflow=state.inflow,
                      phi0_at_wall_history=hist, step=step)


def limit_grid(cfg: SimulationConfig) -> np.ndarray:
    n = int(round(1.0 / cfg.dx))
    if abs(n * cfg.dx - 1.0) > 1e-9:
        raise ValueError(f"dx={cfg.dx} does not divide the unit interval")
    return np.linspace(0.0, 1.0, n + 1)


def initial_limit_state(cfg: SimulationConfig, initial: InitialData) -> LimitState:
    moments = moment_table(cfg.L, cfg.M)
    grid = limit_grid(cfg)
    a = project_field(initial, grid, cfg.M, cfg.L, cfg.quad_nodes)
    inflow = project(initial.inflow, cfg.M, cfg.L, cfg.quad_nodes)
    a[:, -1] = inflow
    coeffs = SpectralCoeffs(cfg.M, grid, a)
    phi0 = phi_from_density(coeffs, moments, time=0.0)
    return LimitState(time=0.0, coeffs=coeffs, phi0=phi0, inflow=inflow,
                      phi0_at_wall_history=np.array([[0.0, phi0.values[0]]]))


def evolve_limit(cfg: SimulationConfig, initial: InitialData, t_end: float | None = None,
                 save_every: int = 1, stencil: str = "upwind",
                 allow_nonconforming: bool = False) -> list[LimitState]:
    """Limit states at t = 0 and every ``save_every`` steps up to t_end.

    Data without a positive lower density bound (the vacuum family) is
    rejected with VacuumEncountered unless ``allow_nonconforming`` is set:
    the limit relation phi0 = -log(density) then has no uniform meaning and
    the wall potential phi0(t, 0) exceeds phi_b, leaving no sheath to attach.
    """
    check_cfl(cfg)
    if not initial.conforming and not allow_nonconforming:
        grid = limit_grid(cfg)
        a = project_field(initial, grid, cfg.M, cfg.L, cfg.quad_nodes)
        rho = moment_table(cfg.L, cfg.M).density_weights @ a
        node = int(np.argmin(rho.real))
        raise VacuumEncountered(
            f"{initial.kind.value} data has near-vacuum density {rho.real[node]:.3g} "
            f"at x={grid[node]:.4g}; the quasi-neutral limit is not applicable",
            node=node, time=0.0)
    t_end = cfg.t_end if t_end is None else t_end
    steps = int(round(t_end / cfg.dt_limit))
    if abs(steps * cfg.dt_limit - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt_limit={cfg.dt_limit}")
    moments = moment_table(cfg.L, cfg.M)
    state = initial_limit_state(cfg, initial)
    states = [state]
    for n in range(1, steps + 1):
        state = upwind_step(state, cfg, moments, stencil)
        if n % save_every == 0 or n == steps:
            states.append(state)
    return states
