"""Mean-field limits solved by characteristics.

A measure on label x state space is represented by ``K`` fibers at the label
midpoints, each carrying ``P`` atoms with transport masses ``a`` summing to
one.  Atoms move with the mean-field velocity and keep their masses, so the
label marginal never changes.  The pairwise sums reuse the compiled kernels
of the microscopic solvers: with one atom per fiber and the cell-averaged
kernel the non-exchangeable solver performs exactly the continuum solver's
floating-point operations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _accel, dynamics
from .dynamics import Trajectory
from .errors import ArgumentError, CapabilityError, DivergenceError
from .interactions import Interaction, WeightDynamics, _as_2d
from .kernels import FiberKernel, GraphonKernel, discretize_cell_average, midpoints


@dataclass
class MFParticleEnsemble:
    """Atoms ``x[k, p]`` with transport masses ``a[k, p]`` (and optional weights ``m``)."""

    x: np.ndarray
    a: np.ndarray
    m: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 2:
            x = x[:, :, None]
        if x.ndim != 3:
            raise ArgumentError(f"atoms must have shape (K, P) or (K, P, d), got {x.shape}")
        self.x = np.ascontiguousarray(x)
        self.a = np.asarray(self.a, dtype=float)
        if self.a.shape != x.shape[:2]:
            raise ArgumentError("transport masses must have shape (K, P)")
        if np.any(self.a < 0):
            raise ArgumentError("transport masses must be >= 0")
        if np.any(np.abs(self.a.sum(axis=1) - 1.0) > 1e-10):
            raise ArgumentError("every fiber must carry total transport mass 1")
        if not np.all(np.isfinite(x)):
            raise ArgumentError("atom positions must be finite")
        if self.m is not None:
            self.m = np.asarray(self.m, dtype=float)
            if self.m.shape != self.a.shape or np.any(self.m <= 0):
                raise ArgumentError("weights m must be positive with shape (K, P)")

    @property
    def K(self):
        return self.x.shape[0]

    @property
    def P(self):
        return self.x.shape[1]

    @property
    def d(self):
        return self.x.shape[2]

    @property
    def xi(self):
        return midpoints(self.K)

    @classmethod
    def single_atom(cls, x):
        """One unit atom per fiber, e.g. from a continuum field."""
        x = _as_2d(x)
        return cls(x[:, None, :], np.ones((x.shape[0], 1)))

    @classmethod
    def spread(cls, centers, P, width, law="uniform"):
        """``P`` equal-mass atoms per fiber placed symmetrically around ``centers``.

        ``law='uniform'`` uses midpoint offsets on ``[-width, width]``;
        ``'gaussian'`` uses quantiles of a standard normal truncated to ``3 sigma``
        with ``sigma = width / 3``.
        """
        c = _as_2d(centers)
        u = (np.arange(P) + 0.5) / P
        if law == "uniform":
            off = width * (2.0 * u - 1.0)
        elif law == "gaussian":
            from scipy.stats import truncnorm
            off = (width / 3.0) * truncnorm.ppf(u, -3.0, 3.0)
        else:
            raise ArgumentError(f"unknown fiber law {law!r}")
        x = c[:, None, :] + off[None, :, None]
        return cls(x, np.full((c.shape[0], P), 1.0 / P))

    def fiber_mean(self):
        return np.einsum("kp,kpd->kd", self.a, self.x)


# coupling matrices ----------------------------------------------------------

def coupling_matrix(kernel, K):
    """``C[k, l]`` such that the label integral is ``(1/K) sum_l C[k, l] (...)``.

    Graphon kernels are cell-averaged on the fiber grid; a :class:`FiberKernel`
    contributes ``K`` times its fiber mass landing in each cell.
    """
    if isinstance(kernel, FiberKernel):
        if kernel.K != K:
            raise ArgumentError(f"fiber kernel has {kernel.K} fibers, ensemble has {K}")
        return K * kernel.cell_matrix(K)
    if isinstance(kernel, GraphonKernel):
        return discretize_cell_average(kernel, K)
    C = np.asarray(kernel, dtype=float)
    if C.shape != (K, K):
        raise ArgumentError(f"coupling matrix must be {K}x{K}")
    return C


def _effective(C, a):
    """Flattened weights ``C[k, l] * a[l, b]`` over atoms ``(k, p)`` x ``(l, b)``."""
    K, P = a.shape
    Weff = C[:, :, None] * a[None, :, :]
    return np.ascontiguousarray(np.repeat(Weff.reshape(K, K * P), P, axis=0))


def velocity_field(ens: MFParticleEnsemble, kernel, phi: Interaction, xi, x):
    """Mean-field velocity at label ``xi`` and state ``x``.

    The label row is that of the fiber cell containing ``xi``.
    """
    K = ens.K
    C = coupling_matrix(kernel, K)
    k = min(int(float(xi) * K), K - 1)
    w = (C[k][:, None] * ens.a).reshape(1, -1)
    q = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return phi.pair_sum(w, q, ens.x.reshape(-1, ens.d))[0] / K


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def solve_mfl_nonexchangeable(kernel, phi: Interaction, ens0: MFParticleEnsemble, dt, T,
                              scheme="rk4", record_every=1):
    """Transport of every fiber by the non-exchangeable mean-field velocity.

    States in the trajectory have shape ``(K * P, d)`` in fiber-major order.
    """
    K, P, d = ens0.x.shape
    C = coupling_matrix(kernel, K)
    Weff = C if P == 1 and np.all(ens0.a == 1.0) else _effective(C, ens0.a)
    guard = dynamics.separation_guard() if phi.singular else None

    def rhs(t, ys):
        return (phi.pair_sum(Weff, ys[0], ys[0]) / K,)
    return dynamics.integrate(rhs, (_flat(ens0.x),), dt, T, scheme, guard=guard,
                              record_every=record_every)


def solve_mfl_exchangeable(phi: Interaction, x0, a0, dt, T, scheme="rk4", record_every=1):
    """Atoms ``x0`` with masses ``a0`` moving by ``dx = sum_b a_b phi(x, x_b)``."""
    x0 = _as_2d(x0)
    a = np.ascontiguousarray(a0, dtype=float)
    if a.shape != (x0.shape[0],) or np.any(a < 0) or abs(a.sum() - 1.0) > 1e-10:
        raise ArgumentError("atom masses must be nonnegative and sum to 1")
    guard = dynamics.separation_guard() if phi.singular else None

    def rhs(t, ys):
        return (phi.pair_sum(a, ys[0], ys[0], row_bcast=True),)
    return dynamics.integrate(rhs, (x0,), dt, T, scheme, guard=guard, record_every=record_every)


def _weighted_source(x, m, w, psi: WeightDynamics):
    """``m_i`` times the ``k``-fold ``w``-weighted mean of ``S(x_i, y_1.., y_k)``."""
    n = x.shape[0]
    if psi.form == "none":
        return np.zeros(n)
    if psi.s is not None:
        acc = np.empty(n)
        _accel.source_k1(w, x, psi.s.code, psi.s.kappa, acc)
        return m * acc
    if psi.k == 1:
        S = np.asarray(psi.S_eval(x[:, None, :], x[None, :, :]), dtype=float)
        acc = np.empty((n, 1))
        _accel.row_sums(np.ascontiguousarray((w[None, :] * S)[:, :, None]), acc)
        return m * acc[:, 0]
    S = np.asarray(psi.S_eval(x[:, None, None, :], x[None, :, None, :], x[None, None, :, :]),
                   dtype=float)
    inner = np.empty((n * n, 1))
    _accel.row_sums(np.ascontiguousarray((w[None, None, :] * S).reshape(n * n, n, 1)), inner)
    acc = np.empty((n, 1))
    _accel.row_sums(np.ascontiguousarray((w[None, :] * inner.reshape(n, n))[:, :, None]), acc)
    return m * acc[:, 0]


def solve_mfl_weighted(phi: Interaction, psi: WeightDynamics, x0, a0, m0, dt, T, scheme="rk4",
                       record_every=1):
    """Exchangeable transport with source: states ``(x, m)``.

    ``dx = sum_b a_b m_b phi(x, x_b)`` and ``dm = m * (k-fold a*m-weighted mean of S)``.
    """
    if psi.form not in ("none", "conserving_S"):
        raise ArgumentError(f"weighted mean field supports none/conserving_S, got {psi.form!r}")
    if psi.form == "conserving_S" and psi.k > 2:
        raise CapabilityError("k-fold source supports k <= 2")
    x0 = _as_2d(x0)
    a = np.asarray(a0, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    if a.shape != (x0.shape[0],) or m0.shape != a.shape:
        raise ArgumentError("x0, a0 and m0 must describe the same atoms")
    if np.any(m0 <= 0):
        raise ArgumentError("initial weights must be > 0")
    if abs(a.sum() - 1.0) > 1e-10 or np.any(a < 0):
        raise ArgumentError("atom masses must be nonnegative and sum to 1")
    guard = dynamics.separation_guard() if dynamics.needs_guard(phi, psi) else None

    def rhs(t, ys):
        x, m = ys
        w = np.ascontiguousarray(a * m)
        return phi.pair_sum(w, x, x, row_bcast=True), _weighted_source(x, m, w, psi)
    return dynamics.integrate(rhs, (x0, m0), dt, T, scheme, guard=guard, record_every=record_every)


def solve_mfl_adaptive_kuramoto(ens0: MFParticleEnsemble, eta0, omega, phi: Interaction, H, eps,
                                dt, T, scheme="rk4", record_every=1):
    """Decoupled-oscillator mean field with exponential memory of ``H``.

    The effective coupling between atoms is ``e^{-eps t} C0 - I(t)`` where
    ``C0`` comes from ``eta0`` and ``I`` is the history integral
    ``eps * int_0^t e^{-eps (t - s)} H(x(s), y(s)) ds`` advanced by the
    exponential trapezoid recurrence.  Inside an RK4 step the stage values of
    ``I`` use the same recurrence over the partial step.  Returns states ``x``.
    """
    if eps < 0:
        raise ArgumentError("eps must be >= 0")
    K, P, d = ens0.x.shape
    if d != 1:
        raise CapabilityError("adaptive Kuramoto mean field needs scalar phases")
    n_steps = dynamics.step_count(dt, T)
    C0 = coupling_matrix(eta0, K)
    base = _effective(C0, ens0.a)
    mass = np.repeat(ens0.a.reshape(1, -1), K * P, axis=0)   # a[l, b] per column
    x = _flat(ens0.x).copy()

    def Hmat(y):
        return np.asarray(H(y[:, None, 0], y[None, :, 0]), dtype=float)

    I = np.zeros((K * P, K * P))
    Hn = Hmat(x)

    def I_at(h, y):
        if eps == 0 or h == 0:
            return I
        dec = math.exp(-eps * h)
        return dec * I + 0.5 * eps * h * (dec * Hn + Hmat(y))

    def vel(t, h, y):
        W = math.exp(-eps * t) * base - mass * I_at(h, y)
        return dynamics.eval_omega(omega, y, t) + phi.pair_sum(np.ascontiguousarray(W), y, y) / K

    times = [0.0]
    rec = [x.copy()]
    for n in range(n_steps):
        t = n * dt
        k1 = vel(t, 0.0, x)
        if scheme == "euler":
            x_new = x + dt * k1
        elif scheme == "rk4":
            k2 = vel(t + 0.5 * dt, 0.5 * dt, x + 0.5 * dt * k1)
            k3 = vel(t + 0.5 * dt, 0.5 * dt, x + 0.5 * dt * k2)
            k4 = vel(t + dt, dt, x + dt * k3)
            x_new = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            raise ArgumentError(f"unknown scheme {scheme!r}")
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(f"non-finite state at t={(n + 1) * dt:.6g}")
        if eps > 0:
            H_new = Hmat(x_new)
            dec = math.exp(-eps * dt)
            I = dec * I + 0.5 * eps * dt * (dec * Hn + H_new)
            Hn = H_new
        x = x_new
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            times.append((n + 1) * dt)
            rec.append(x.copy())
    return Trajectory(np.array(times), (np.stack(rec),))


# bridging constructions -----------------------------------------------------

@dataclass(frozen=True)
class StepLabelFunction:
    """``x0(xi) = values[i]`` on ``[breaks[i], breaks[i + 1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        i = np.searchsorted(self.breaks, xi, side="right") - 1
        # zero-width cells never win: searchsorted lands on the last equal break
        return self.values[np.clip(i, 0, len(self.values) - 1)]

    def pushforward(self):
        """Atoms and their label-interval lengths."""
        return self.values, np.diff(self.breaks)


def dirac_decomposition(x, a) -> StepLabelFunction:
    """Step label function whose Lebesgue pushforward is ``sum_i a_i delta_{x_i}``."""
    x = _as_2d(x)
    a = np.asarray(a, dtype=float)
    if a.shape != (x.shape[0],):
        raise ArgumentError("one mass per atom required")
    if np.any(a < 0):
        raise ArgumentError("masses must be >= 0")
    if abs(a.sum() - 1.0) > 1e-10:
        raise ArgumentError(f"masses must sum to 1, got {a.sum()}")
    b = np.concatenate([[0.0], np.cumsum(a)])
    b[-1] = 1.0
    return StepLabelFunction(b, x)


def burgers_primitive(x, m, query):
    """``F_N(q) = -1/2 + (1/N) sum_j m_j H(q - x_j)`` with ``H(0) = 1``."""
    x = _as_2d(x)
    if x.shape[1] != 1:
        raise ArgumentError("the primitive is defined for d = 1")
    m = np.asarray(m, dtype=float)
    N = x.shape[0]
    order = np.argsort(x[:, 0], kind="stable")
    xs = x[order, 0]
    csum = np.concatenate([[0.0], np.cumsum(m[order])])
    idx = np.searchsorted(xs, np.asarray(query, dtype=float), side="right")
    return -0.5 + csum[idx] / N


def primitive_l1_distance(xa, ma, xb, mb):
    """Exact ``integral |F_a - F_b|`` over the hull of both supports."""
    pts = np.unique(np.concatenate([_as_2d(xa)[:, 0], _as_2d(xb)[:, 0]]))
    if pts.size < 2:
        return 0.0
    Fa = burgers_primitive(xa, ma, pts[:-1])
    Fb = burgers_primitive(xb, mb, pts[:-1])
    return float(np.sum(np.abs(Fa - Fb) * np.diff(pts)))


def write_ensemble_csv(path, traj, K, P, a, m_traj=None):
    """Rows ``t, xi, atom_index, x..., a, m`` for each recorded time."""
    xs = traj.states[0]
    d = xs.shape[-1]
    xi = np.repeat(midpoints(K), P)
    a = np.asarray(a, dtype=float).reshape(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "xi", "atom_index"] + [f"x{k}" for k in range(d)] + ["a", "m"])
        for n, t in enumerate(traj.t):
            for r in range(K * P):
                mv = "" if m_traj is None else f"{m_traj[n][r]:.17g}"
                w.writerow([f"{t:.17g}", f"{xi[r]:.17g}", r % P]
                           + [f"{v:.17g}" for v in xs[n][r]] + [f"{a[r]:.17g}", mv])
