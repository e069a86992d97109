"""Two-point boundary value solver: 3-stage Lobatto IIIA collocation.

The solution is a C^1 piecewise cubic collocating the ODE at the nodes and
midpoint of every interval (fourth order).  The nonlinear collocation system
is solved by damped Newton iteration; intervals whose scaled defect exceeds
the mesh tolerance are bisected and the system re-solved.

Conventions: ``rhs(x, y)`` receives x of shape (m,) and y of shape (n, m) and
returns dy/dx with shape (n, m).  ``bc(ya, yb)`` returns n residuals.
Optional analytic Jacobians: ``jac(x, y)`` -> (n, n, m) with
jac[i, k, :] = d rhs_i / d y_k, and ``bc_jac(ya, yb)`` -> (dbc/dya, dbc/dyb).
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import BvpError, MeshLimitExceeded, NewtonDiverged, SingularJacobian

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_SQRT_EPS = np.sqrt(_EPS)
# interior nodes of 5-point Lobatto quadrature on [0, 1]; the defect vanishes
# at the collocation points 0, 1/2, 1 so these are where it is sampled
_DEFECT_POINTS = 0.5 + 0.5 * np.sqrt(3.0 / 7.0) * np.array([-1.0, 1.0])
DAMPING_STEPS = 9  # factors 1, 1/2, ..., 1/2^8


@dataclass(frozen=True)
class BvpOptions:
    newton_tol: float = 1e-10
    mesh_tol: float = 1e-6
    max_nodes: int = 5000
    max_newton: int = 50
    max_refinements: int = 40

    @classmethod
    def from_config(cls, cfg, **overrides) -> "BvpOptions":
        opts = cls(newton_tol=cfg.newton_tol, mesh_tol=cfg.mesh_tol)
        return dataclasses.replace(opts, **overrides)


@dataclass(frozen=True)
class BvpProblem:
    """Nonlinear first-order system on [a, b] with n boundary conditions."""

    dim: int
    rhs: Callable
    bc: Callable
    initial_mesh: np.ndarray
    initial_guess: Callable | np.ndarray
    jac: Callable | None = None
    bc_jac: Callable | None = None
    name: str = "bvp"

    def __post_init__(self):
        mesh = np.asarray(self.initial_mesh, dtype=float)
        if mesh.ndim != 1 or len(mesh) < 2 or np.any(np.diff(mesh) <= 0):
            raise ValueError("initial mesh must be strictly increasing with >= 2 nodes")
        object.__setattr__(self, "initial_mesh", mesh)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.initial_mesh[0]), float(self.initial_mesh[-1])

    def guess_values(self) -> np.ndarray:
        if callable(self.initial_guess):
            y = np.asarray(self.initial_guess(self.initial_mesh), dtype=float)
        else:
            y = np.array(self.initial_guess, dtype=float)
        y = y.reshape(self.dim, len(self.initial_mesh))
        if not np.all(np.isfinite(y)):
            raise ValueError("initial guess is not finite")
        return y

    def with_guess(self, mesh, values) -> "BvpProblem":
        return dataclasses.replace(self, initial_mesh=np.asarray(mesh, dtype=float),
                                   initial_guess=np.asarray(values, dtype=float))


def hermite_eval(mesh, y, f, xs, derivative: bool = False):
    """Evaluate the piecewise cubic Hermite interpolant (or its derivative)."""
    xs = np.asarray(xs, dtype=float)
    flat = xs.ravel()
    i = np.clip(np.searchsorted(mesh, flat, side="right") - 1, 0, len(mesh) - 2)
    h = mesh[i + 1] - mesh[i]
    t = (flat - mesh[i]) / h
    y0, y1, f0, f1 = y[:, i], y[:, i + 1], f[:, i], f[:, i + 1]
    if derivative:
        d00 = 6 * t * t - 6 * t
        d10 = 3 * t * t - 4 * t + 1
        d11 = 3 * t * t - 2 * t
        out = (d00 * (y0 - y1)) / h + d10 * f0 + d11 * f1
    else:
        t2, t3 = t * t, t * t * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        out = h00 * y0 + h * h10 * f0 + h01 * y1 + h * h11 * f1
    return out.reshape((y.shape[0],) + xs.shape)


@dataclass(frozen=True)
class BvpSolution:
    mesh: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    max_defect: float
    newton_iters: int
    bc_residual: float
    interval_defects: np.ndarray = field(repr=False, default=None)
    path: tuple = field(repr=False, default=())

    def __call__(self, xs) -> np.ndarray:
        return hermite_eval(self.mesh, self.z, self.dz, xs)

    def derivative(self, xs) -> np.ndarray:
        return hermite_eval(self.mesh, self.z, self.dz, xs, derivative=True)


class _Collocation:
    """Residual and Jacobian of the collocation equations on a fixed mesh."""

    def __init__(self, problem: BvpProblem, mesh: np.ndarray):
        self.p = problem
        self.n = problem.dim
        self.x = mesh
        self.h = np.diff(mesh)
        self.xm = mesh[:-1] + 0.5 * self.h

    def rhs(self, x, y):
        return np.asarray(self.p.rhs(x, y), dtype=float)

    def midpoints(self, y, f):
        return 0.5 * (y[:, 1:] + y[:, :-1]) - self.h / 8.0 * (f[:, 1:] - f[:, :-1])

    def residual(self, y):
        f = self.rhs(self.x, y)
        ym = self.midpoints(y, f)
        fm = self.rhs(self.xm, ym)
        col = y[:, 1:] - y[:, :-1] - self.h / 6.0 * (f[:, :-1] + f[:, 1:] + 4.0 * fm)
        bc = np.asarray(self.p.bc(y[:, 0], y[:, -1]), dtype=float)
        if bc.shape != (self.n,):
            raise ValueError(f"bc returned {bc.shape}, expected ({self.n},)")
        return np.concatenate([col.T.ravel(), bc]), f, ym, fm

    def _fun_jac(self, x, y, f0):
        if self.p.jac is not None:
            return np.asarray(self.p.jac(x, y), dtype=float)
        n, m = y.shape
        J = np.empty((n, n, m))
        step = _SQRT_EPS * (1.0 + np.abs(y))
        for k in range(n):
            yp = y.copy()
            yp[k] += step[k]
            J[:, k, :] = (self.rhs(x, yp) - f0) / step[k]
        return J

    def _bc_jac(self, ya, yb):
        if self.p.bc_jac is not None:
            da, db = self.p.bc_jac(ya, yb)
            return np.asarray(da, dtype=float), np.asarray(db, dtype=float)
        n = self.n
        b0 = np.asarray(self.p.bc(ya, yb), dtype=float)
        da = np.empty((n, n))
        db = np.empty((n, n))
        for k in range(n):
            s = _SQRT_EPS * (1.0 + abs(ya[k]))
            yp = ya.copy()
            yp[k] += s
            da[:, k] = (np.asarray(self.p.bc(yp, yb)) - b0) / s
            s = _SQRT_EPS * (1.0 + abs(yb[k]))
            yp = yb.copy()
            yp[k] += s
            db[:, k] = (np.asarray(self.p.bc(ya, yp)) - b0) / s
        return da, db

    def jacobian(self, y, f, ym, fm):
        n = self.n
        m = len(self.x)
        J = self._fun_jac(self.x, y, f)          # (n, n, m)
        Jm = self._fun_jac(self.xm, ym, fm)      # (n, n, m-1)
        J = np.moveaxis(J, 2, 0)
        Jm = np.moveaxis(Jm, 2, 0)
        h = self.h[:, None, None]
        eye = np.eye(n)[None]
        A = -eye - h / 6.0 * (J[:-1] + 4.0 * Jm @ (0.5 * eye + h / 8.0 * J[:-1]))
        B = eye - h / 6.0 * (J[1:] + 4.0 * Jm @ (0.5 * eye - h / 8.0 * J[1:]))
        da, db = self._bc_jac(y[:, 0], y[:, -1])

        blk_r = np.arange(m - 1)[:, None, None] * n + np.arange(n)[None, :, None]
        blk_c = np.arange(m - 1)[:, None, None] * n + np.arange(n)[None, None, :]
        blk_r = np.broadcast_to(blk_r, (m - 1, n, n))
        blk_c = np.broadcast_to(blk_c, (m - 1, n, n))
        bc_r = (m - 1) * n + np.repeat(np.arange(n), n)
        bc_c = np.tile(np.arange(n), n)
        rows = np.concatenate([blk_r.ravel(), blk_r.ravel(), bc_r, bc_r])
        cols = np.concatenate([blk_c.ravel(), (blk_c + n).ravel(), bc_c,
                               bc_c + (m - 1) * n])
        vals = np.concatenate([A.ravel(), B.ravel(), da.ravel(), db.ravel()])
        size = n * m
        return sparse.csc_matrix((vals, (rows, cols)), shape=(size, size))

    def defects(self, y, f):
        """Largest scaled defect |S' - f| / (1 + |f|) in every interval."""
        worst = np.zeros(len(self.h))
        for tau in _DEFECT_POINTS:
            xs = self.x[:-1] + tau * self.h
            S = hermite_eval(self.x, y, f, xs)
            dS = hermite_eval(self.x, y, f, xs, derivative=True)
            fs = self.rhs(xs, S)
            r = np.abs(dS - fs) / (1.0 + np.abs(fs))
            worst = np.maximum(worst, r.max(axis=0))
        return worst


def _scaled_norm(dy_flat, y):
    n, m = y.shape
    dy = dy_flat.reshape(m, n).T
    return float(np.max(np.abs(dy) / (1.0 + np.abs(y))))


def _finish(col, y, step):
    # the last (tiny) correction is applied too so the returned state is
    # accurate well below the tolerance that stopped the iteration
    n, m = y.shape
    y = y + step.reshape(m, n).T
    res, f, _, _ = col.residual(y)
    return y, f, res


def _newton(col: _Collocation, y: np.ndarray, opts: BvpOptions):
    n, m = y.shape
    res, f, ym, fm = col.residual(y)
    if not np.all(np.isfinite(res)):
        raise NewtonDiverged(f"{col.p.name}: residual not finite at the initial guess")
    for it in range(1, opts.max_newton + 1):
        jac = col.jacobian(y, f, ym, fm)
        try:
            lu = splu(jac, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularJacobian(f"{col.p.name}: collocation Jacobian is singular") from exc
        step = lu.solve(-res)
        if not np.all(np.isfinite(step)):
            raise SingularJacobian(f"{col.p.name}: Newton step not finite")
        norm0 = _scaled_norm(step, y)
        if norm0 <= opts.newton_tol:
            y, f, res = _finish(col, y, step)
            return y, f, it, res
        lam = 1.0
        for _ in range(DAMPING_STEPS):
            y_try = y + lam * step.reshape(m, n).T
            res_try, f_try, ym_try, fm_try = col.residual(y_try)
            if np.all(np.isfinite(res_try)):
                # natural monotonicity test: simplified Newton correction with
                # the current factorization must shrink
                next_step = lu.solve(-res_try)
                norm1 = _scaled_norm(next_step, y_try)
                if norm1 <= (1.0 - 0.5 * lam) * norm0 or norm1 <= opts.newton_tol:
                    break
            lam *= 0.5
        else:
            raise NewtonDiverged(
                f"{col.p.name}: damping exhausted at Newton iteration {it} "
                f"(step norm {norm0:.3g})")
        y, res, f, ym, fm = y_try, res_try, f_try, ym_try, fm_try
        if lam == 1.0 and norm1 <= opts.newton_tol:
            y, f, res = _finish(col, y, next_step)
            return y, f, it, res
    raise NewtonDiverged(f"{col.p.name}: no convergence in {opts.max_newton} iterations")


def _refine(mesh, y, f, mask):
    idx = np.nonzero(mask)[0]
    new_x = 0.5 * (mesh[idx] + mesh[idx + 1])
    new_y = hermite_eval(mesh, y, f, new_x)
    x_all = np.concatenate([mesh, new_x])
    y_all = np.concatenate([y, new_y], axis=1)
    order = np.argsort(x_all, kind="stable")
    return x_all[order], y_all[:, order]


def solve(problem: BvpProblem, options: BvpOptions | None = None) -> BvpSolution:
    """Solve ``problem`` to the Newton and mesh tolerances in ``options``."""
    opts = options or BvpOptions()
    mesh = problem.initial_mesh
    y = problem.guess_values()
    total_iters = 0
    for _ in range(opts.max_refinements):
        col = _Collocation(problem, mesh)
        y, f, iters, res = _newton(col, y, opts)
        total_iters += iters
        defects = col.defects(y, f)
        worst = float(defects.max())
        log.debug("%s: %d nodes, %d Newton iterations, defect %.3g",
                  problem.name, len(mesh), iters, worst)
        if worst <= opts.mesh_tol:
            bc_res = float(np.max(np.abs(res[-problem.dim:])))
            return BvpSolution(mesh=mesh, z=y, dz=f, max_defect=worst,
                               newton_iters=total_iters, bc_residual=bc_res,
                               interval_defects=defects)
        mesh, y = _refine(mesh, y, f, defects > opts.mesh_tol)
        if len(mesh) > opts.max_nodes:
            raise MeshLimitExceeded(
                f"{problem.name}: refinement needs {len(mesh)} nodes "
                f"(limit {opts.max_nodes}), defect {worst:.3g}")
    raise MeshLimitExceeded(f"{problem.name}: defect not reduced below "
                            f"{opts.mesh_tol} after {opts.max_refinements} refinements")


def continuation_solve(family: Callable[[float], BvpProblem], ladder: Sequence[float],
                       options: BvpOptions | None = None) -> BvpSolution:
    """Solve along a strictly decreasing parameter ladder, warm-starting each rung.

    The returned solution belongs to the last rung; ``path`` holds the
    solutions of all rungs in order.
    """
    ladder = [float(v) for v in ladder]
    if not ladder:
        raise ValueError("empty continuation ladder")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("continuation ladder must be strictly decreasing")
    path = []
    sol = None
    for k, eps in enumerate(ladder):
        problem = family(eps)
        if sol is not None:
            problem = problem.with_guess(sol.mesh, sol.z)
        try:
            sol = solve(problem, options)
        except BvpError as exc:
            raise type(exc)(f"continuation rung {k} (parameter {eps:g}): {exc}") from exc
        path.append(sol)
    return dataclasses.replace(sol, path=tuple(path))


def layered_mesh(width: float, n_bulk: int = 40, per_width: int = 12,
                 a: float = 0.0, b: float = 1.0) -> np.ndarray:
    """Mesh on [a, b] graded geometrically towards ``a`` on the scale ``width``.

    Spacing starts at width/per_width and grows geometrically until it reaches
    the uniform bulk spacing (b - a)/n_bulk.
    """
    span = b - a
    bulk = span / n_bulk
    h0 = min(width / per_width, bulk)
    if h0 >= bulk:
        return np.linspace(a, b, n_bulk + 1)
    ratio = 1.15
    pts = [a]
    h = h0
    while pts[-1] + h < b and h < bulk:
        pts.append(pts[-1] + h)
        h *= ratio
    rest = b - pts[-1]
    k = max(1, int(np.ceil(rest / bulk)))
    pts.extend(pts[-1] + rest * np.arange(1, k + 1) / k)
    mesh = np.array(pts)
    mesh[-1] = b
    return mesh
