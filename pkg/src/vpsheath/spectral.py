"""Velocity discretization in the weighted Fourier basis e_j(xi) = exp(2 i j pi xi^2 / L^2).

On [-L, 0] the basis is orthogonal under the weight xi dxi:

    int_{-L}^0 xi e_j(xi) conj(e_k(xi)) dxi = -L^2/2 delta_jk,

so coefficients are obtained by a weighted projection and the momentum of a
truncated expansion only sees a_0.  In the variable u = xi^2 this is an
ordinary Fourier series of period L^2.

Coefficient arrays are complex with the mode index j = -M..M along axis 0;
trailing axes (typically spatial nodes) are carried along untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import velocity_quadrature
from .errors import NonRealReconstruction
from .special import fresnel_cs


def fresnel_moment(j: int, L: float) -> complex:
    """m_j = int_{-L}^0 e_j(xi) dxi in closed form."""
    j = int(j)
    if j == 0:
        return complex(L)
    r = 2.0 * np.sqrt(abs(j))
    c, s = fresnel_cs(r)
    return complex(L / r * c, np.sign(j) * L / r * s)


def second_moment(j: int, L: float, m_j: complex | None = None) -> complex:
    """k_j = int_{-L}^0 xi^2 e_j(xi) dxi, from m_j by one integration by parts."""
    j = int(j)
    if j == 0:
        return complex(L ** 3 / 3.0)
    if m_j is None:
        m_j = fresnel_moment(j, L)
    return L * L * 1j / (4.0 * j * np.pi) * (-L + m_j)


@dataclass(frozen=True)
class MomentTable:
    """Moments m_j and k_j for j = -2M..2M (index j + 2M)."""

    L: float
    M: int
    m: np.ndarray
    k: np.ndarray

    def m_at(self, j):
        return self.m[np.asarray(j) + 2 * self.M]

    def k_at(self, j):
        return self.k[np.asarray(j) + 2 * self.M]

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @property
    def density_weights(self) -> np.ndarray:
        """m_j for j = -M..M, so that density = Re(density_weights @ a)."""
        return self.m_at(self.modes)

    def toeplitz(self, which: str = "m") -> np.ndarray:
        """Matrix T[k, j] = t_{j-k} over j, k in -M..M (Hermitian)."""
        modes = self.modes
        diff = modes[None, :] - modes[:, None]
        return self.m_at(diff) if which == "m" else self.k_at(diff)


@lru_cache(maxsize=32)
def moment_table(L: float, M: int) -> MomentTable:
    js = np.arange(-2 * M, 2 * M + 1)
    m = np.array([fresnel_moment(j, L) for j in js])
    k = np.array([second_moment(j, L, mj) for j, mj in zip(js, m)])
    m.flags.writeable = False
    k.flags.writeable = False
    return MomentTable(L=float(L), M=int(M), m=m, k=k)


def wavenumbers(M: int, L: float) -> np.ndarray:
    """Factors 4 pi j / L^2 with d/dxi e_j = i (4 pi j / L^2) xi e_j."""
    return 4.0 * np.pi * np.arange(-M, M + 1) / L ** 2


@lru_cache(maxsize=32)
def _projection_matrix(M: int, L: float, quad_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    xi, w = velocity_quadrature(L, quad_nodes)
    js = np.arange(-M, M + 1)
    # a_j = -(2/L^2) sum_q w_q xi_q conj(e_j(xi_q)) f(xi_q)
    P = -(2.0 / L ** 2) * np.exp(-2j * np.pi * np.outer(js, xi ** 2) / L ** 2) * (w * xi)
    P.flags.writeable = False
    return P, xi


def project(f, M: int, L: float, quad_nodes: int = 400) -> np.ndarray:
    """Coefficients a_{-M..M} of a velocity function ``f(xi)`` on [-L, 0]."""
    P, xi = _projection_matrix(int(M), float(L), int(quad_nodes))
    return P @ np.asarray(f(xi), dtype=float)


def project_field(f0, x, M: int, L: float, quad_nodes: int = 400) -> np.ndarray:
    """Project ``f0(x, xi)`` at every node of ``x``; result has shape (2M+1, len(x))."""
    P, xi = _projection_matrix(int(M), float(L), int(quad_nodes))
    x = np.asarray(x, dtype=float)
    values = np.asarray(f0(x[:, None], xi[None, :]), dtype=float)
    return P @ values.T


def basis(xi, M: int, L: float) -> np.ndarray:
    """Matrix of e_j(xi) with shape (2M+1, len(xi))."""
    xi = np.asarray(xi, dtype=float)
    js = np.arange(-M, M + 1)
    return np.exp(2j * np.pi * np.multiply.outer(js, xi ** 2) / L ** 2)


def reconstruct(a, xi, L: float, imag_tol: float = 1e-8) -> np.ndarray:
    """Evaluate sum_j a_j e_j(xi).

    ``a`` has shape (2M+1, ...); the result has shape a.shape[1:] + xi.shape.
    The expansion must represent a real function: NonRealReconstruction is
    raised when the imaginary part exceeds ``imag_tol`` relative to the data.
    """
    a = np.asarray(a)
    M = (a.shape[0] - 1) // 2
    E = basis(np.ravel(xi), M, L)
    vals = np.tensordot(a, E, axes=([0], [0]))
    scale = max(1.0, float(np.abs(vals.real).max(initial=0.0)))
    if np.abs(vals.imag).max(initial=0.0) > imag_tol * scale:
        raise NonRealReconstruction(
            f"imaginary part {np.abs(vals.imag).max():.3g} in reconstruction; "
            "coefficients are not conjugate symmetric")
    return vals.real.reshape(a.shape[1:] + np.shape(xi))


def density(a, moments: MomentTable) -> np.ndarray:
    """int f dxi = Re sum_j m_j a_j (vectorized over trailing axes)."""
    a = np.asarray(a)
    return np.real(np.tensordot(moments.density_weights, a, axes=([0], [0])))


def momentum(a, L: float) -> np.ndarray:
    """int xi f dxi = -(L^2/2) Re a_0, exact on the truncated span."""
    a = np.asarray(a)
    M = (a.shape[0] - 1) // 2
    return -(L * L / 2.0) * np.real(a[M])


def conjugate_asymmetry(a) -> float:
    """max |a_{-j} - conj(a_j)|, zero for expansions of real functions."""
    a = np.asarray(a)
    return float(np.abs(a[::-1] - np.conj(a)).max(initial=0.0))


def symmetrize(a) -> np.ndarray:
    """Closest conjugate-symmetric coefficient array."""
    a = np.asarray(a)
    return 0.5 * (a + np.conj(a[::-1]))


def unit_density_profile(profile, M: int, quad_nodes: int = 400):
    """Rescale a velocity profile so its truncated expansion has density one.

    Truncation at order M perturbs the density of the projected profile (by
    about 6e-5 for the centred Gaussian at M=10).  Rescaling keeps the discrete
    inflow exactly quasi-neutral so that the homogeneous state has zero
    potential on the discrete level too.
    """
    moments = moment_table(profile.L, M)
    rho = float(density(project(profile, M, profile.L, quad_nodes), moments))
    return profile.scaled(1.0 / rho)


@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficient field a_j(x_r) on spatial nodes ``grid``."""

    M: int
    grid: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        if self.a.shape != (2 * self.M + 1, len(self.grid)):
            raise ValueError(f"coefficient array shape {self.a.shape} does not match "
                             f"M={self.M} and {len(self.grid)} nodes")

    def density(self, moments: MomentTable) -> np.ndarray:
        return density(self.a, moments)

    def momentum(self, L: float) -> np.ndarray:
        return momentum(self.a, L)

    def values(self, xi, L: float) -> np.ndarray:
        """f(x_r, xi) with shape (len(grid), len(xi))."""
        return reconstruct(self.a, xi, L)
