"""Shared configuration, velocity profiles, initial data and admissibility checks.

Velocity integrals over [-L, 0] use composite Gauss-Legendre quadrature.  The
ion distribution is supported in xi < 0 (ions stream towards the wall at x=0).
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import CflViolation, DegenerateProfile, SingularIntegrand

WIDTH_SQ = 10 ** -0.8
PANEL_ORDER = 10


@dataclass(frozen=True)
class SimulationConfig:
    """Numerical and physical parameters of a run.

    Defaults are the reference experiment settings where those
    exist; the solver tolerances and quadrature size are our own choices.
    """

    epsilon: float = 1e-2
    L: float = 4.0
    M: int = 10
    dx: float = 0.01
    dt_kinetic: float = 0.01
    dt_limit: float = 0.001
    t_end: float = 0.1
    phi_b: float = 1.0
    newton_tol: float = 1e-10
    mesh_tol: float = 1e-6
    quad_nodes: int = 400

    def __post_init__(self):
        for name in ("epsilon", "L", "dx", "dt_kinetic", "dt_limit", "phi_b",
                     "newton_tol", "mesh_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if int(self.M) != self.M or self.M < 0:
            raise ValueError(f"M must be a nonnegative integer, got {self.M!r}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.quad_nodes < PANEL_ORDER:
            raise ValueError(f"quad_nodes must be at least {PANEL_ORDER}")
        if self.cfl > 1.0 + 1e-12:
            raise CflViolation(
                f"upwind CFL number dt_limit*L/dx = {self.cfl:.3g} exceeds 1")

    @property
    def cfl(self) -> float:
        return self.dt_limit / self.dx * self.L

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(unknown)}")
        values = dict(data)
        if "M" in values:
            values["M"] = int(values["M"])
        if "quad_nodes" in values:
            values["quad_nodes"] = int(values["quad_nodes"])
        return cls(**values)


def load_config(path: str | Path | None) -> SimulationConfig:
    """Read a JSON configuration; missing keys fall back to the defaults."""
    if path is None:
        return SimulationConfig()
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("configuration must be a JSON object")
    return SimulationConfig.from_dict(data)


@lru_cache(maxsize=64)
def _unit_panel(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre(a: float, b: float, n: int = 400, order: int = PANEL_ORDER):
    """Nodes and weights of composite Gauss-Legendre quadrature on [a, b].

    ``n`` is the total node count, rounded up to a whole number of panels.
    """
    panels = max(1, -(-int(n) // order))
    t, w = _unit_panel(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=16)
def velocity_quadrature(L: float, n: int = 400):
    nodes, weights = gauss_legendre(-L, 0.0, n)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@dataclass(frozen=True)
class VelocityProfile:
    """Truncated Gaussian sigma(xi) = exp(-(xi - center)^2 / width_sq) / norm_d."""

    center: float
    width_sq: float
    norm_d: float
    L: float = 4.0

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-(xi - self.center) ** 2 / self.width_sq) / self.norm_d

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=float)
        return -2.0 * (xi - self.center) / self.width_sq * self(xi)

    def mass(self, quad_nodes: int = 400) -> float:
        nodes, weights = velocity_quadrature(self.L, quad_nodes)
        return float(weights @ self(nodes))

    def scaled(self, factor: float) -> "VelocityProfile":
        """Profile multiplied by ``factor`` (the normalization absorbs it)."""
        return dataclasses.replace(self, norm_d=self.norm_d / factor)


def normalize_sigma(center: float, width_sq: float = WIDTH_SQ, L: float = 4.0,
                    quad_nodes: int = 400) -> VelocityProfile:
    """Build the Gaussian inflow profile with unit mass on [-L, 0]."""
    if not width_sq > 0:
        raise ValueError("width_sq must be positive")
    nodes, weights = velocity_quadrature(L, quad_nodes)
    raw = float(weights @ np.exp(-(nodes - center) ** 2 / width_sq))
    if not raw > 1e-250 or not np.isfinite(raw):
        raise DegenerateProfile(
            f"Gaussian centred at {center} has no resolvable mass on [-{L}, 0]")
    return VelocityProfile(center=float(center), width_sq=float(width_sq),
                           norm_d=raw, L=float(L))


def check_bohm(f_boundary: Callable, L: float = 4.0, quad_nodes: int = 400,
               exclusion: float | None = None, zero_tol: float = 1e-10) -> float:
    """Bohm margin  int f dxi - int xi^-2 f dxi  of a wall distribution.

    A positive value means the Bohm condition holds.  The distribution must
    vanish on [-exclusion, 0] (default exclusion radius 1e-3 L), otherwise the
    xi^-2 moment is not finite and SingularIntegrand is raised.
    """
    r = 1e-3 * L if exclusion is None else exclusion
    probe = np.linspace(-r, 0.0, 65)
    near = np.abs(np.asarray(f_boundary(probe), dtype=float))
    if near.max() > zero_tol:
        raise SingularIntegrand(
            f"distribution is {near.max():.3g} within {r:.3g} of xi=0")
    nodes, weights = velocity_quadrature(L, quad_nodes)
    mass = float(weights @ f_boundary(nodes))
    tail_nodes, tail_weights = gauss_legendre(-L, -r, quad_nodes)
    inv2 = float(tail_weights @ (f_boundary(tail_nodes) / tail_nodes ** 2))
    return mass - inv2


class DataKind(enum.Enum):
    HOMOGENEOUS = "homogeneous"
    CASE_I = "case1"
    CASE_II = "case2"
    VACUUM = "vacuum"


def _heaviside(s):
    return np.where(s > 0, 1.0, np.where(s < 0, 0.0, 0.5))


@dataclass(frozen=True)
class InitialData:
    """Initial ion distribution f0(x, xi) built from a velocity profile.

    * HOMOGENEOUS:  sigma(xi)
    * CASE_I:       sigma(xi + 1 - x)
    * CASE_II:      sigma(xi - 1 + x)
    * VACUUM:       (exp(-(0.8-x)^2 / (0.1*0.8^2)) H(0.8-x) + H(x-0.8)) sigma(xi)

    The vacuum data has a near-empty region at the wall and is flagged as
    non-conforming: the quasi-neutral potential -log(density) is not
    meaningful there.
    """

    kind: DataKind
    profile: VelocityProfile
    support_bounds: tuple[float, float] = field(default=(-4.0, 0.0))

    def __post_init__(self):
        lo, hi = self.support_bounds
        if lo < -self.profile.L - 1e-12 or hi > 1e-12 or lo >= hi:
            raise ValueError(f"support bounds {self.support_bounds} not inside [-L, 0]")

    @property
    def conforming(self) -> bool:
        return self.kind is not DataKind.VACUUM

    def __call__(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        sigma = self.profile
        if self.kind is DataKind.HOMOGENEOUS:
            val = sigma(xi + 0.0 * x)
        elif self.kind is DataKind.CASE_I:
            val = sigma(xi + 1.0 - x)
        elif self.kind is DataKind.CASE_II:
            val = sigma(xi - 1.0 + x)
        else:
            ramp = np.exp(-(0.8 - x) ** 2 / (0.1 * 0.8 ** 2)) * _heaviside(0.8 - x)
            val = (ramp + _heaviside(x - 0.8)) * sigma(xi)
        lo, hi = self.support_bounds
        return np.where((xi >= lo) & (xi <= hi), val, 0.0)

    def inflow(self, xi):
        """Boundary distribution imposed at x = 1 (always the profile itself)."""
        return self.profile(xi)

    def with_profile(self, profile: VelocityProfile) -> "InitialData":
        return dataclasses.replace(self, profile=profile)


DEFAULT_CENTERS = {
    DataKind.HOMOGENEOUS: -2.0,
    DataKind.CASE_I: -2.0,
    DataKind.CASE_II: -3.0,
    DataKind.VACUUM: -2.0,
}


def make_initial_data(kind: DataKind | str, cfg: SimulationConfig | None = None,
                      center: float | None = None) -> InitialData:
    """Initial data of one of the four experiment families."""
    cfg = cfg or SimulationConfig()
    kind = DataKind(kind)
    c = DEFAULT_CENTERS[kind] if center is None else center
    profile = normalize_sigma(c, WIDTH_SQ, cfg.L, cfg.quad_nodes)
    return InitialData(kind, profile, (-cfg.L, 0.0))


@dataclass(frozen=True)
class PotentialProfile:
    """Real potential sampled on increasing nodes, optionally with its slope.

    With a slope the profile interpolates by cubic Hermite pieces, otherwise
    by a not-a-knot cubic spline.
    """

    grid: np.ndarray
    values: np.ndarray
    slope: np.ndarray | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if len(grid) > 1 and np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.slope is not None:
            object.__setattr__(self, "slope", np.asarray(self.slope, dtype=float))

    @property
    def left(self) -> float:
        return float(self.values[0])

    @property
    def right(self) -> float:
        return float(self.values[-1])

    def _interpolant(self):
        if self.slope is not None:
            return CubicHermiteSpline(self.grid, self.values, self.slope)
        return CubicSpline(self.grid, self.values)

    def __call__(self, x):
        if len(self.grid) == 1:
            return np.full(np.shape(x), self.values[0])
        return self._interpolant()(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self._interpolant().derivative()(np.asarray(x, dtype=float))
