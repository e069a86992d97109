"""Kinetic plasma sheath solver and its quasi-neutral limit.

Modules:
    core: configuration, velocity profiles, initial data.
    spectral: weighted Fourier basis in velocity.
    bvp: Lobatto collocation two-point boundary value solver.
    kinetic: stationary and implicit-Euler spectral Vlasov-Poisson solver.
    quasineutral: limit system with an upwind transport step.
    layer: sheath corrector (Phi0, F0) at the wall.
    harness: composite approximation, errors, residuals and experiment runs.
"""

from .core import DataKind, SimulationConfig, load_config, make_initial_data
from .errors import VpSheathError

__version__ = "0.1.0"

__all__ = ["DataKind", "SimulationConfig", "VpSheathError", "load_config", "make_initial_data"]
