"""Zeroth-order plasma sheath (F0, Phi0) at the wall x = 0.

Two independent routes are provided:

* ``solve_layer_coupled``: the spectral coefficient system for F0 coupled to
  the layer Poisson equation, solved on [0, 1] in x;
* ``solve_layer_scalar``: the scalar ODE  Phi'' = n_i(Phi) - exp(-phi0_w - Phi)
  in the stretched variable x_bar = x / sqrt(eps), where n_i(Phi) is the ion
  density  int f_w(xi) (-xi) / sqrt(xi^2 + 2 Phi) dxi  of the accelerated wall
  trace f_w = f0(t, 0, .).

Writing the right-hand side as S(Phi) Phi defines the coercivity coefficient
S; its value at Phi = 0 is the Bohm margin of f_w.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bvp
from .core import PotentialProfile, SimulationConfig, check_bohm, velocity_quadrature
from .errors import BohmViolated, DomainTooShort, FitWindowEmpty, NonpositiveWallGap
from .kinetic import SpectralPoissonSystem, epsilon_ladder, unpack
from .spectral import (MomentTable, SpectralCoeffs, moment_table, momentum, project,
                       wavenumbers)

log = logging.getLogger(__name__)

TAIL_DECADES = 40.0
FIT_WINDOW = (1e-6, 0.5)
GAP_TOL = 1e-14


@dataclass(frozen=True)
class DecayFit:
    """Exponential fit Phi0 ~ C exp(-c x/sqrt(eps)) on the fit window."""

    c_fit: float
    C_fit: float
    r_squared: float
    window: tuple[float, float]
    envelope_ratio: float  # max over the window of Phi0 / (gap exp(-c_fit x_bar))

    @property
    def envelope_holds(self) -> bool:
        return self.envelope_ratio <= 1.0 + 1e-12


@dataclass(frozen=True)
class LayerSolution:
    Phi0: PotentialProfile
    F0_coeffs: SpectralCoeffs | None
    wall_gap: float
    epsilon: float
    phi0_wall: float
    decay_fit: DecayFit | None = None
    coercivity: float = np.nan  # c0 = min of S along the solution
    solution: bvp.BvpSolution | None = field(default=None, repr=False)
    M: int | None = None

    def F0_at(self, x) -> np.ndarray:
        """F0 coefficients at arbitrary x in [0, 1], shape (2M+1, len(x))."""
        if self.solution is None or self.F0_coeffs is None:
            raise ValueError("this layer solution carries no F0 coefficients")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return unpack(self.solution(x), self.M)[2]

    def momentum(self, L: float) -> np.ndarray:
        """int xi F0 dxi at the solution nodes."""
        if self.F0_coeffs is None:
            raise ValueError("this layer solution carries no F0 coefficients")
        return momentum(self.F0_coeffs.a, L)


class IonDensity:
    """n_i(Phi) and its derivative for a fixed wall trace (vectorized in Phi).

    Newton iterates may dip below Phi = 0, where the kernel is undefined for
    slow ions; there n_i is continued linearly from Phi = 0.
    """

    def __init__(self, f_wall: Callable, L: float, quad_nodes: int = 400):
        xi, w = velocity_quadrature(L, quad_nodes)
        self.xi = xi
        self.wf = w * np.asarray(f_wall(xi), dtype=float) * (-xi)
        self.slope0 = -float(self.wf @ (1.0 / np.abs(xi) ** 3))

    def _kernel(self, Phi, power):
        s = np.sqrt(self.xi[:, None] ** 2 + 2.0 * np.maximum(Phi.ravel(), 0.0)[None, :])
        return (self.wf @ s ** -power).reshape(Phi.shape)

    def __call__(self, Phi):
        Phi = np.asarray(Phi, dtype=float)
        return self._kernel(Phi, 1) + self.slope0 * np.minimum(Phi, 0.0)

    def derivative(self, Phi):
        Phi = np.asarray(Phi, dtype=float)
        return np.where(Phi >= 0.0, -self._kernel(Phi, 3), self.slope0)


def coercivity(n_i: IonDensity, phi0_wall: float, Phi) -> np.ndarray:
    """S(Phi) = (n_i(Phi) - exp(-phi0_w - Phi)) / Phi, with S(0) = Bohm margin."""
    Phi = np.atleast_1d(np.asarray(Phi, dtype=float))
    e = np.exp(-phi0_wall)
    g = n_i(Phi) - e * np.exp(-Phi)
    dg0 = n_i.derivative(np.zeros(1))[0] + e
    small = np.abs(Phi) < 1e-8
    out = np.empty_like(Phi)
    out[~small] = g[~small] / Phi[~small]
    out[small] = dg0
    return out


def _check_inputs(cfg: SimulationConfig, f_wall, phi0_wall):
    gap = cfg.phi_b - phi0_wall
    if gap < -GAP_TOL:
        raise NonpositiveWallGap(
            f"wall gap phi_b - phi0(t,0) = {gap:.6g} is negative; no sheath forms")
    margin = check_bohm(f_wall, cfg.L, cfg.quad_nodes)
    if not margin > 0:
        raise BohmViolated(f"Bohm margin {margin:.6g} of the wall trace is not positive")
    return max(gap, 0.0), margin


def decay_rate_fit(Phi0: PotentialProfile, epsilon: float,
                   wall_gap: float | None = None, window=FIT_WINDOW) -> DecayFit:
    """Fit log Phi0 = log C - c x/sqrt(eps) on the nodes where Phi0/gap lies in ``window``."""
    gap = Phi0.left if wall_gap is None else wall_gap
    x = Phi0.grid
    v = Phi0.values
    lo, hi = window
    mask = (v >= lo * gap) & (v <= hi * gap) if gap > 0 else np.zeros_like(v, bool)
    if np.count_nonzero(mask) < 3:
        raise FitWindowEmpty(f"fewer than 3 nodes with Phi0/gap in [{lo:g}, {hi:g}]")
    xb = x[mask] / np.sqrt(epsilon)
    y = np.log(v[mask])
    A = np.vstack([np.ones_like(xb), -xb]).T
    (logC, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([logC, c])
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    ratio = float(np.max(v[mask] / (gap * np.exp(-c * xb))))
    return DecayFit(c_fit=float(c), C_fit=float(np.exp(logC)), r_squared=r2,
                    window=(float(x[mask][0]), float(x[mask][-1])), envelope_ratio=ratio)


def _safe_fit(Phi0, epsilon, gap):
    try:
        return decay_rate_fit(Phi0, epsilon, gap)
    except FitWindowEmpty:
        return None


def _zero_layer(cfg, phi0_wall, M=None, with_coeffs=False) -> LayerSolution:
    grid = np.linspace(0.0, 1.0, 11)
    coeffs = None
    if with_coeffs:
        coeffs = SpectralCoeffs(M, grid, np.zeros((2 * M + 1, len(grid)), complex))
    return LayerSolution(Phi0=PotentialProfile(grid, np.zeros_like(grid), np.zeros_like(grid)),
                         F0_coeffs=coeffs, wall_gap=0.0, epsilon=cfg.epsilon,
                         phi0_wall=phi0_wall, M=M)


def _layer_charge(phi0_wall):
    e = np.exp(-phi0_wall)

    def charge(Phi):
        ex = np.exp(-Phi)
        return -e * (ex - 1.0), e * ex

    return charge


def solve_layer_coupled(cfg: SimulationConfig, f0_wall: Callable, phi0_wall: float,
                        moments: MomentTable | None = None, ladder=None,
                        options: bvp.BvpOptions | None = None,
                        wall_coeffs=None) -> LayerSolution:
    """Spectral sheath problem on [0, 1]:

        b_k'   = -i kappa_k Phi' (b_k + s_k),    b(1) = 0
        eps Phi'' = Re sum_j m_j b_j - exp(-phi0_w) (exp(-Phi) - 1)

    with s the coefficients of the wall trace, Phi(0) = gap, Phi(1) = 0.
    ``wall_coeffs`` supplies s directly (e.g. from the limit solver);
    otherwise ``f0_wall`` is projected.
    """
    gap, _ = _check_inputs(cfg, f0_wall, phi0_wall)
    if gap == 0.0:
        return _zero_layer(cfg, phi0_wall, cfg.M, with_coeffs=True)
    moments = moments or moment_table(cfg.L, cfg.M)
    options = options or bvp.BvpOptions.from_config(cfg)
    if wall_coeffs is None:
        s = project(f0_wall, cfg.M, cfg.L, cfg.quad_nodes)
    else:
        s = np.asarray(wall_coeffs, dtype=complex)
    charge = _layer_charge(phi0_wall)
    n_i = IonDensity(f0_wall, cfg.L, cfg.quad_nodes)
    S0 = float(coercivity(n_i, phi0_wall, 0.0)[0])
    kappa = wavenumbers(cfg.M, cfg.L)

    def family(eps):
        system = SpectralPoissonSystem(epsilon=eps, L=cfg.L, M=cfg.M, moments=moments,
                                       inflow=np.zeros(2 * cfg.M + 1, complex),
                                       phi_left=gap, charge=charge, shift=s)
        rate = np.sqrt(max(S0, 1e-3) / eps)

        def guess(x):
            Phi = gap * np.exp(-rate * x)
            b = s[:, None] * (np.exp(-1j * np.outer(kappa, Phi)) - 1.0)
            return np.vstack([Phi, -rate * Phi, b.real, b.imag])

        return system.problem(guess=guess, name="coupled layer")

    ladder = epsilon_ladder(cfg.epsilon) if ladder is None else ladder
    sol = bvp.continuation_solve(family, ladder, options)
    Phi, dPhi, b = unpack(sol.z, cfg.M)
    profile = PotentialProfile(sol.mesh, Phi, dPhi)
    c0 = float(np.min(coercivity(n_i, phi0_wall, Phi)))
    return LayerSolution(Phi0=profile, F0_coeffs=SpectralCoeffs(cfg.M, sol.mesh, b),
                         wall_gap=gap, epsilon=cfg.epsilon, phi0_wall=phi0_wall,
                         decay_fit=_safe_fit(profile, cfg.epsilon, gap), coercivity=c0,
                         solution=sol, M=cfg.M)


def solve_layer_scalar(cfg: SimulationConfig, f0_wall: Callable, phi0_wall: float,
                       x_end: float | None = None,
                       options: bvp.BvpOptions | None = None) -> LayerSolution:
    """Scalar sheath ODE in x_bar on [0, x_end], mapped back to x in [0, 1].

    By default the half line is truncated at x_bar = 40/sqrt(c0) with c0 the
    smallest value of S on [0, gap]; since Phi'' >= c0 Phi the solution lies
    below gap exp(-sqrt(c0) x_bar), so the far condition Phi = 0 is accurate
    to that bound.  Passing ``x_end = 1/sqrt(eps)`` reproduces the finite
    domain of the coupled problem instead.
    """
    gap, _ = _check_inputs(cfg, f0_wall, phi0_wall)
    if gap == 0.0:
        return _zero_layer(cfg, phi0_wall)
    options = options or bvp.BvpOptions.from_config(cfg)
    n_i = IonDensity(f0_wall, cfg.L, cfg.quad_nodes)
    c0_bound = float(np.min(coercivity(n_i, phi0_wall, np.linspace(0.0, gap, 201))))
    if not c0_bound > 0:
        raise BohmViolated(f"coercivity S drops to {c0_bound:.3g} on [0, gap]")
    if x_end is None:
        x_end = TAIL_DECADES / np.sqrt(c0_bound)
        if gap * np.exp(-np.sqrt(c0_bound) * x_end) > 1e-8 * gap:  # pragma: no cover
            raise DomainTooShort(f"x_bar_max = {x_end:.3g} too short for the decay")
    e = np.exp(-phi0_wall)

    def rhs(xb, y):
        return np.vstack([y[1], n_i(y[0]) - e * np.exp(-y[0])])

    def jac(xb, y):
        J = np.zeros((2, 2, y.shape[1]))
        J[0, 1] = 1.0
        J[1, 0] = n_i.derivative(y[0]) + e * np.exp(-y[0])
        return J

    rate = np.sqrt(c0_bound)
    mesh = np.linspace(0.0, x_end, max(41, int(4 * x_end) + 1))
    problem = bvp.BvpProblem(
        dim=2, rhs=rhs, jac=jac, bc=lambda ya, yb: np.array([ya[0] - gap, yb[0]]),
        initial_mesh=mesh,
        initial_guess=lambda xb: np.vstack([gap * np.exp(-rate * xb),
                                            -rate * gap * np.exp(-rate * xb)]),
        name="scalar layer")
    sol = bvp.solve(problem, options)
    if abs(sol.z[0, -1]) > 1e-8 * gap:  # pragma: no cover - the BC pins it
        raise DomainTooShort(f"Phi0 at x_bar_max is {sol.z[0, -1]:.3g}")
    profile = _stretched_to_unit(sol, cfg.epsilon)
    c0 = float(np.min(coercivity(n_i, phi0_wall, sol.z[0])))
    return LayerSolution(Phi0=profile, F0_coeffs=None, wall_gap=gap, epsilon=cfg.epsilon,
                         phi0_wall=phi0_wall, decay_fit=_safe_fit(profile, cfg.epsilon, gap),
                         coercivity=c0, solution=sol)


def _stretched_to_unit(sol: bvp.BvpSolution, epsilon: float) -> PotentialProfile:
    """Map a solution in x_bar to x = sqrt(eps) x_bar, restricted or zero-padded to [0, 1]."""
    scale = np.sqrt(epsilon)
    x = sol.mesh * scale
    Phi = sol.z[0]
    dPhi = sol.z[1] / scale
    if x[-1] >= 1.0:
        keep = x < 1.0
        end = sol(np.array([1.0 / scale]))
        x = np.append(x[keep], 1.0)
        Phi = np.append(Phi[keep], end[0, 0])
        dPhi = np.append(dPhi[keep], end[1, 0] / scale)
    else:
        x = np.append(x, 1.0)
        Phi = np.append(Phi, 0.0)
        dPhi = np.append(dPhi, 0.0)
    return PotentialProfile(x, Phi, dPhi)


def analytic_layer_homogeneous(f0_wall: Callable, Phi0: PotentialProfile) -> Callable:
    """F0(x, xi) = f_w(-sqrt(xi^2 - 2 Phi0(x))) chi(xi^2 > 2 Phi0) chi(xi < 0) - f_w(xi).

    The returned evaluator broadcasts over x and xi.
    """

    def F0(x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        Phi = np.maximum(Phi0(x), 0.0)
        arg = xi ** 2 - 2.0 * Phi
        inside = (arg > 0) & (xi < 0)
        root = -np.sqrt(np.where(inside, arg, 0.0))
        accelerated = np.where(inside, f0_wall(root), 0.0)
        return accelerated - np.where(xi < 0, f0_wall(xi), 0.0)

    return F0
