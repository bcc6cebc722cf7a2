"""Continuum-limit equations on a uniform label grid.

The label integral is taken with the cell rule induced by the grid, which
makes the semi-discretised continuum equation the same ODE system as the
microscopic one with cell-averaged weights.  The solvers below call the
microscopic right-hand sides directly, so a step-function initial datum on
``M = N`` cells reproduces the particle trajectory bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import dynamics
from .errors import ArgumentError
from .interactions import _as_2d
from .kernels import GAUSS_ORDER, GraphonKernel, discretize_cell_average, midpoints


@dataclass
class ContinuumField:
    """Piecewise-constant profiles ``x(xi)`` (and ``m(xi)``) on ``M`` equal cells."""

    x: np.ndarray
    m: np.ndarray | None = None

    def __post_init__(self):
        self.x = _as_2d(self.x)
        if self.x.shape[0] < 1:
            raise ArgumentError("a field needs at least one cell")
        if not np.all(np.isfinite(self.x)):
            raise ArgumentError("field values must be finite")
        if self.m is not None:
            self.m = np.asarray(self.m, dtype=float)
            if self.m.shape != (self.M,):
                raise ArgumentError("m must have one value per cell")

    @property
    def M(self):
        return self.x.shape[0]

    @property
    def grid(self):
        return midpoints(self.M)

    def __call__(self, xi):
        """Step evaluation with right-open cells."""
        xi = np.asarray(xi, dtype=float)
        k = np.minimum((xi * self.M).astype(np.int64), self.M - 1)
        return self.x[k]


def embed_step(x, m=None) -> ContinuumField:
    """Step function whose value on cell ``i`` is ``x_i``."""
    return ContinuumField(np.array(_as_2d(x)), None if m is None else np.array(m, dtype=float))


def restrict_cell_average(x0, N, order=GAUSS_ORDER):
    """Cell means ``N * integral`` of ``x0`` over each cell, by Gauss-Legendre per cell."""
    if N < 1:
        raise ArgumentError(f"N must be >= 1, got {N}")
    u, w = np.polynomial.legendre.leggauss(order)
    nodes = (np.arange(N)[:, None] + 0.5 * (u[None, :] + 1.0)) / N
    vals = np.asarray(x0(nodes.ravel()), dtype=float)
    vals = vals.reshape(N, order, -1)
    out = np.einsum("b,ibk->ik", w / 2.0, vals)
    # cells where x0 is constant keep the value exactly (weights sum to 2 only up to round-off)
    flat = np.all(vals == vals[:, :1, :], axis=1)
    out[flat] = vals[:, 0, :][flat]
    return out


def _field_x(f):
    return f.x if isinstance(f, ContinuumField) else _as_2d(f)


def solve_continuum(kernel: GraphonKernel, phi, x0: ContinuumField, dt, T, scheme="rk4",
                    record_every=1, weights=None):
    """Integrate the continuum equation with cell-averaged kernel on ``x0``'s grid.

    ``weights`` may supply the ``M x M`` cell matrix directly.
    """
    W = discretize_cell_average(kernel, x0.M) if weights is None else np.asarray(weights, float)
    guard = dynamics.separation_guard() if phi.singular else None
    return dynamics.integrate(dynamics.static_system(W, phi), (x0.x,), dt, T, scheme,
                              guard=guard, record_every=record_every)


def solve_continuum_weights(phi, psi, x0: ContinuumField, dt, T, m0=None, scheme="rk4",
                            record_every=1):
    """Opinions with evolving weight profile ``m``; returns states ``(x, m)``."""
    m = x0.m if m0 is None else np.asarray(m0, dtype=float)
    if m is None:
        raise ArgumentError("weighted continuum solve needs an initial weight profile m0")
    if np.any(m <= 0):
        raise ArgumentError("initial weights must be > 0")
    if psi.form not in ("none", "conserving_S", "pairwise_competition"):
        raise ArgumentError(f"unsupported weight dynamics {psi.form!r}")
    guard = dynamics.separation_guard() if dynamics.needs_guard(phi, psi) else None
    return dynamics.integrate(dynamics.opinion_system(phi, psi), (x0.x, m), dt, T, scheme,
                              guard=guard, record_every=record_every)


def solve_continuum_adaptive(omega, phi, H, eps, x0: ContinuumField, W0: GraphonKernel, dt, T,
                             scheme="rk4", record_every=1):
    """Coupled phase field and step kernel; returns states ``(x, W)``."""
    if W0.form != "step" or W0.n != x0.M:
        raise ArgumentError("initial kernel must be a step kernel with one block per cell")
    if not eps > 0:
        raise ArgumentError("eps must be > 0")
    return dynamics.integrate(dynamics.adaptive_system(omega, phi, H, eps),
                              (x0.x, np.array(W0.values)), dt, T, scheme,
                              record_every=record_every)


# errors ---------------------------------------------------------------------

def _align(a, b):
    a, b = _field_x(a), _field_x(b)
    if a.shape[1] != b.shape[1]:
        raise ArgumentError("fields differ in dimension")
    Ma, Mb = a.shape[0], b.shape[0]
    if Ma == Mb:
        return a, b
    lo, hi = (a, b) if Ma < Mb else (b, a)
    if hi.shape[0] % lo.shape[0]:
        raise ArgumentError(f"incompatible grids: {Ma} and {Mb} cells")
    lo = np.repeat(lo, hi.shape[0] // lo.shape[0], axis=0)
    return (lo, hi) if Ma < Mb else (hi, lo)


def l2_error(a, b):
    """``sqrt((1/M) sum_k |a_k - b_k|^2)`` after step prolongation to the finer grid."""
    a, b = _align(a, b)
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def linf_error(a, b):
    a, b = _align(a, b)
    return float(np.max(np.sqrt(np.sum((a - b) ** 2, axis=1))))


def holder_estimate(x, alpha, grid=None):
    """Largest ``|x_k - x_l| / |xi_k - xi_l|^alpha`` over grid pairs."""
    if not 0 < alpha <= 1:
        raise ArgumentError(f"alpha must lie in (0, 1], got {alpha}")
    x = _as_2d(x)
    g = midpoints(x.shape[0]) if grid is None else np.asarray(grid, dtype=float)
    if x.shape[0] < 2:
        return 0.0
    dx = np.sqrt(np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1))
    dg = np.abs(g[:, None] - g[None, :])
    off = ~np.eye(len(g), dtype=bool)
    return float(np.max(dx[off] / dg[off] ** alpha))


def write_field_csv(path, traj, torus=False):
    """Rows ``t, xi, x_1..x_d[, m]`` for every recorded time and cell."""
    xs = traj.states[0]
    ms = traj.states[1] if len(traj.states) > 1 and traj.states[1].ndim == 2 else None
    M, d = xs.shape[1], xs.shape[2]
    grid = midpoints(M)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "xi"] + [f"x{k}" for k in range(d)] + (["m"] if ms is not None else []))
        for n, t in enumerate(traj.t):
            xv = np.mod(xs[n], 2 * np.pi) if torus else xs[n]
            for c in range(M):
                row = [f"{t:.17g}", f"{grid[c]:.17g}"] + [f"{v:.17g}" for v in xv[c]]
                if ms is not None:
                    row.append(f"{ms[n][c]:.17g}")
                w.writerow(row)
