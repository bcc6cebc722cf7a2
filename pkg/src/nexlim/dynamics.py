"""Microscopic particle systems and the fixed-step integrator.

State vectors are plain arrays: positions ``x`` of shape ``(N, d)``, agent
weights ``m`` of shape ``(N,)`` and edge weights ``W`` of shape ``(N, N)``.
Right-hand sides for :func:`integrate` take ``(t, ys)`` with ``ys`` a tuple
of such arrays and return a tuple of derivatives of matching shapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _accel
from .errors import ArgumentError, CapabilityError, DivergenceError, SeparationError
from .interactions import Interaction, OddFunction, WeightDynamics, _as_2d
from .kernels import check_weight_matrix

TWO_PI = 2.0 * math.pi
GAP_FLOOR = 1e-9


@dataclass
class ParticleState:
    t: float
    x: np.ndarray
    m: np.ndarray | None = None
    torus: bool = False

    def __post_init__(self):
        self.x = _as_2d(self.x)
        if self.m is not None:
            self.m = np.asarray(self.m, dtype=float)
            if self.m.shape != (self.x.shape[0],):
                raise ArgumentError("agent weights must have one entry per particle")

    @property
    def N(self):
        return self.x.shape[0]

    def output_x(self):
        return np.mod(self.x, TWO_PI) if self.torus else self.x


@dataclass
class CoupledNetworkState:
    t: float
    x: np.ndarray
    W: np.ndarray

    def __post_init__(self):
        self.x = _as_2d(self.x)
        self.W = np.asarray(self.W, dtype=float)
        if self.W.shape != (self.x.shape[0],) * 2:
            raise ArgumentError("edge weight matrix must be N x N")


# right-hand sides ------------------------------------------------------------

def rhs_static(x, W, phi: Interaction):
    """``dx_i = (1/N) sum_j W_ij phi(x_i, x_j)``."""
    x = _as_2d(x)
    W = np.asarray(W, dtype=float)
    N = x.shape[0]
    if W.shape != (N, N):
        raise ArgumentError(f"weight matrix shape {W.shape} does not match N={N}")
    return phi.pair_sum(W, x, x) / N


def particle_labels(N):
    """Labels ``i / N`` for ``i = 1..N``."""
    return np.arange(1, N + 1) / N


def rhs_general_label(t, x, G, labels=None):
    """``dx_i = (1/N) sum_j G(t, xi_i, xi_j, x_i, x_j)`` with ``xi_i = i / N`` by default."""
    x = _as_2d(x)
    N, d = x.shape
    lab = particle_labels(N) if labels is None else np.asarray(labels, dtype=float)
    terms = np.asarray(G(t, lab[:, None, None], lab[None, :, None], x[:, None, :], x[None, :, :]),
                       dtype=float)
    terms = np.ascontiguousarray(np.broadcast_to(terms, (N, N, d)))
    out = np.empty((N, d))
    _accel.row_sums(terms, out)
    return out / N


def weight_source(x, m, psi: WeightDynamics, phi: Interaction | None = None, A=None):
    """Agent-weight derivative ``psi_i(x, m)`` for the supported weight dynamics."""
    x = _as_2d(x)
    m = np.ascontiguousarray(m, dtype=float)
    N = x.shape[0]
    if psi.form == "none":
        return np.zeros(N)
    if psi.form == "conserving_S":
        if psi.s is not None:
            acc = np.empty(N)
            _accel.source_k1(m, x, psi.s.code, psi.s.kappa, acc)
            return m * (acc / N)
        if psi.k == 1:
            S = np.asarray(psi.S_eval(x[:, None, :], x[None, :, :]), dtype=float)
            terms = np.ascontiguousarray((m[None, :] * S)[:, :, None])
            acc = np.empty((N, 1))
            _accel.row_sums(terms, acc)
            return m * (acc[:, 0] / N)
        S = np.asarray(psi.S_eval(x[:, None, None, :], x[None, :, None, :], x[None, None, :, :]),
                       dtype=float)
        inner = np.empty((N * N, 1))
        _accel.row_sums(np.ascontiguousarray((m[None, None, :] * S).reshape(N * N, N, 1)), inner)
        terms = np.ascontiguousarray((m[None, :] * inner.reshape(N, N))[:, :, None])
        acc = np.empty((N, 1))
        _accel.row_sums(terms, acc)
        return m * (acc[:, 0] / (N * N))
    if psi.form == "pairwise_competition":
        if x.shape[1] != 1:
            raise CapabilityError("pairwise competition is implemented for d = 1 only")
        if A is None:
            A = phi.pair_sum(m, x, x, row_bcast=True)
        B = np.empty(N)
        _accel.competition_sum(m, x, np.ascontiguousarray(A[:, 0]), psi.s.code, psi.s.kappa, B)
        return m * B / (2.0 * N * N)
    raise CapabilityError(f"weight dynamics {psi.form!r} does not act on agent weights")


def rhs_opinion_weights(x, m, phi: Interaction, psi: WeightDynamics):
    """Opinions with evolving agent weights: returns ``(dx, dm)``."""
    x = _as_2d(x)
    N = x.shape[0]
    if m is None:
        raise ArgumentError("opinion dynamics with weights needs m")
    if psi.form not in ("none", "conserving_S", "pairwise_competition"):
        raise ArgumentError(f"unsupported weight dynamics {psi.form!r}")
    A = phi.pair_sum(m, x, x, row_bcast=True)
    return A / N, weight_source(x, m, psi, phi, A)


def rhs_pairwise_competition(x, m, phi: Interaction, s: OddFunction):
    """Pairwise-competition model: returns ``(dx, dm)``; d = 1."""
    x = _as_2d(x)
    if x.shape[1] != 1:
        raise CapabilityError("pairwise competition is implemented for d = 1 only")
    return rhs_opinion_weights(x, m, phi, WeightDynamics("pairwise_competition", s=s))


def eval_omega(omega, x, t):
    """Intrinsic term: None, a scalar, a per-particle array or ``omega(x, t)``."""
    if omega is None:
        return 0.0
    if callable(omega):
        return np.asarray(omega(x, t), dtype=float).reshape(x.shape)
    return np.broadcast_to(np.asarray(omega, dtype=float).reshape(-1, 1), x.shape)


def rhs_adaptive_kuramoto(t, x, W, omega, phi: Interaction, H, eps):
    """Adaptive network: returns ``(dx, dW)`` with ``dW = -eps (W + H(x_i, x_j))``."""
    if not eps > 0:
        raise ArgumentError(f"eps must be > 0, got {eps}")
    x = _as_2d(x)
    N = x.shape[0]
    dx = eval_omega(omega, x, t) + phi.pair_sum(W, x, x) / N
    Hm = np.asarray(H(x[:, None, 0], x[None, :, 0]), dtype=float)
    return dx, -eps * (W + Hm)


def min_gap(x):
    """Smallest pairwise distance between 1-D opinions."""
    v = np.sort(_as_2d(x)[:, 0])
    if v.size < 2:
        return math.inf
    return float(np.min(np.diff(v)))


# integration -----------------------------------------------------------------

@dataclass
class Trajectory:
    """Recorded states; ``states[c][n]`` is component ``c`` at time ``t[n]``."""

    t: np.ndarray
    states: tuple

    def final(self, c=0):
        return self.states[c][-1]

    def __len__(self):
        return len(self.t)


def separation_guard(gap_floor=GAP_FLOOR, component=0):
    def guard(t, ys):
        g = min_gap(ys[component])
        if g < gap_floor:
            raise SeparationError(f"opinions collided at t={t:.6g}: min gap {g:.3g} < {gap_floor:g}",
                                  t=t, gap=g)
    return guard


def step_count(dt, T):
    if not dt > 0:
        raise ArgumentError(f"dt must be > 0, got {dt}")
    if T < 0:
        raise ArgumentError(f"T must be >= 0, got {T}")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ArgumentError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def integrate(rhs: Callable, y0: Sequence, dt, T, scheme="rk4", guard=None, record_every=1):
    """Fixed-step explicit integration of ``dy/dt = rhs(t, y)``.

    ``y0`` is an array or a tuple of arrays; ``t_n = n * dt``.  States are
    recorded every ``record_every`` steps plus the final step.  A ``guard(t, ys)``
    callable may raise to abort the run (singular dynamics).
    """
    single = isinstance(y0, np.ndarray)
    ys = (np.array(y0, dtype=float),) if single else tuple(np.array(y, dtype=float) for y in y0)
    n_steps = step_count(dt, T)
    if scheme not in ("rk4", "euler"):
        raise ArgumentError(f"unknown scheme {scheme!r}")
    f = (lambda t, y: (rhs(t, y[0]),)) if single else rhs
    half = 0.5 * dt
    sixth = dt / 6.0

    times = [0.0]
    records = [[y.copy()] for y in ys]
    if guard is not None:
        guard(0.0, ys)
    for n in range(n_steps):
        t = n * dt
        k1 = f(t, ys)
        if scheme == "euler":
            ys = tuple(y + dt * a for y, a in zip(ys, k1))
        else:
            k2 = f(t + half, tuple(y + half * a for y, a in zip(ys, k1)))
            k3 = f(t + half, tuple(y + half * a for y, a in zip(ys, k2)))
            k4 = f(t + dt, tuple(y + dt * a for y, a in zip(ys, k3)))
            ys = tuple(y + sixth * (a + 2.0 * b + 2.0 * c + e)
                       for y, a, b, c, e in zip(ys, k1, k2, k3, k4))
        t_new = (n + 1) * dt
        for y in ys:
            if not np.all(np.isfinite(y)):
                raise DivergenceError(f"non-finite state at t={t_new:.6g}")
        if guard is not None:
            guard(t_new, ys)
        if (n + 1) % record_every == 0 or n + 1 == n_steps:
            times.append(t_new)
            for rec, y in zip(records, ys):
                rec.append(y.copy())
    return Trajectory(np.array(times), tuple(np.stack(r) for r in records))


# ready-made systems ----------------------------------------------------------

def static_system(W, phi):
    W = check_weight_matrix(W)
    return lambda t, ys: (rhs_static(ys[0], W, phi),)


def opinion_system(phi, psi):
    return lambda t, ys: rhs_opinion_weights(ys[0], ys[1], phi, psi)


def adaptive_system(omega, phi, H, eps):
    return lambda t, ys: rhs_adaptive_kuramoto(t, ys[0], ys[1], omega, phi, H, eps)


def needs_guard(phi=None, psi=None):
    return bool((phi is not None and phi.singular) or (psi is not None and psi.singular))


def weights_variation_of_constants(t, x_traj, W0, H, eps):
    """Edge weights rebuilt from a phase trajectory by variation of constants.

    ``W(t) = e^{-eps t} W0 - eps * integral_0^t e^{-eps (t - s)} H(x_i(s), x_j(s)) ds``
    with the integral taken by the trapezoid rule on the trajectory grid.
    Returns an array of shape ``(len(t), N, N)``.
    """
    t = np.asarray(t, dtype=float)
    W0 = np.asarray(W0, dtype=float)
    out = np.empty((len(t),) + W0.shape)
    out[0] = W0
    if eps == 0:
        out[1:] = W0
        return out
    dts = np.diff(t)
    if dts.size and np.ptp(dts) > 1e-9 * max(1.0, dts[0]):
        raise ArgumentError("variation of constants needs a uniform time grid")
    x_traj = np.asarray(x_traj, dtype=float)
    if x_traj.ndim == 3:
        x_traj = x_traj[..., 0]
    acc = np.zeros_like(W0)
    H_prev = np.asarray(H(x_traj[0][:, None], x_traj[0][None, :]), dtype=float)
    for n in range(1, len(t)):
        dt = t[n] - t[n - 1]
        decay = math.exp(-eps * dt)
        H_next = np.asarray(H(x_traj[n][:, None], x_traj[n][None, :]), dtype=float)
        acc = decay * acc + 0.5 * eps * dt * (decay * H_prev + H_next)
        out[n] = math.exp(-eps * t[n]) * W0 - acc
        H_prev = H_next
    return out
