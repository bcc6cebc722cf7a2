"""Discrete measures on the state space and on label x state space, with W1 and BL metrics.

Measures here are finite atom lists.  The general metrics solve small linear
programs with HiGHS; the one-dimensional Wasserstein distance uses the
closed-form CDF integral.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .dynamics import ParticleState, particle_labels
from .errors import ArgumentError, CapabilityError, NexlimError
from .interactions import _as_2d

MAX_LP_ATOMS = 512
MERGE_TOL = 1e-12
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class DiscreteMeasure:
    """Atoms ``x`` of shape ``(n, d)`` carrying nonnegative ``mass``."""

    x: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        self.x = _as_2d(self.x)
        self.mass = np.asarray(self.mass, dtype=float).reshape(-1)
        if self.mass.shape != (self.x.shape[0],):
            raise ArgumentError("one mass per atom required")
        if np.any(self.mass < 0) or not np.all(np.isfinite(self.mass)):
            raise ArgumentError("masses must be finite and >= 0")

    @property
    def total(self):
        return float(np.sum(self.mass))

    @classmethod
    def dirac(cls, x, mass=1.0):
        return cls(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1), [mass])


@dataclass
class LabeledEmpiricalMeasure:
    """Atoms ``(xi, x, mass)`` on ``I x R^d``."""

    xi: np.ndarray
    x: np.ndarray
    mass: np.ndarray
    total: float | None = None

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(-1)
        self.x = _as_2d(self.x)
        self.mass = np.asarray(self.mass, dtype=float).reshape(-1)
        n = self.x.shape[0]
        if self.xi.shape != (n,) or self.mass.shape != (n,):
            raise ArgumentError("labels, positions and masses differ in length")
        if np.any(self.mass < 0):
            raise ArgumentError("masses must be >= 0")
        s = float(np.sum(self.mass))
        if self.total is None:
            self.total = s
        elif abs(self.total - s) > 1e-12 * max(1.0, abs(s)):
            raise ArgumentError(f"recorded total {self.total} differs from mass sum {s}")

    @property
    def is_probability(self):
        return abs(self.total - 1.0) <= 1e-10

    def points(self):
        """Product-space coordinates: label column followed by the state."""
        return np.column_stack([self.xi, self.x])


@dataclass
class FiberedMeasure:
    """``K`` fibers at label midpoints, each a normalised atom list."""

    xi: np.ndarray
    fibers: list

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float).reshape(-1)
        if len(self.fibers) != self.xi.size:
            raise ArgumentError("one fiber per label required")
        fixed = []
        for k, f in enumerate(self.fibers):
            if not isinstance(f, DiscreteMeasure):
                f = DiscreteMeasure(*f)
            if f.x.shape[0] and abs(f.total - 1.0) > 1e-10:
                raise ArgumentError(f"fiber {k} has mass {f.total}, expected 1")
            fixed.append(f)
        self.fibers = fixed

    @property
    def K(self):
        return len(self.fibers)


# construction ---------------------------------------------------------------

def from_particles(state: ParticleState, weighting="uniform", labels=None):
    """Empirical measure of a particle state, masses ``1/N`` or ``m_i / N``."""
    N = state.N
    lab = particle_labels(N) if labels is None else np.asarray(labels, dtype=float)
    if weighting == "uniform":
        mass = np.full(N, 1.0 / N)
    elif weighting == "agent_weights":
        if state.m is None:
            raise ArgumentError("agent_weights weighting needs agent weights m")
        mass = state.m / N
    else:
        raise ArgumentError(f"unknown weighting {weighting!r}")
    return LabeledEmpiricalMeasure(lab, state.output_x(), mass)


def fibered_from_particles(state: ParticleState, n, m):
    """Group consecutive particles into ``n`` fibers of ``m`` atoms each."""
    if n < 1 or m < 1 or state.N != n * m:
        raise ArgumentError(f"N={state.N} is not n*m = {n}*{m}")
    x = state.output_x()
    fibers = [DiscreteMeasure(x[k * m:(k + 1) * m], np.full(m, 1.0 / m)) for k in range(n)]
    return FiberedMeasure((np.arange(n) + 0.5) / n, fibers)


# metrics --------------------------------------------------------------------

def _check_totals(mu, nu):
    if abs(mu.total - nu.total) > 1e-10:
        raise ArgumentError(f"measures have unequal total mass: {mu.total} vs {nu.total}")


def wasserstein1_1d(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """``integral |F_mu - F_nu|`` over the merged sorted support."""
    if mu.x.shape[1] != 1 or nu.x.shape[1] != 1:
        raise ArgumentError("wasserstein1_1d needs d = 1")
    _check_totals(mu, nu)
    pts = np.concatenate([mu.x[:, 0], nu.x[:, 0]])
    signed = np.concatenate([mu.mass, -nu.mass])
    order = np.argsort(pts, kind="stable")
    pts, signed = pts[order], signed[order]
    F = np.cumsum(signed)[:-1]
    return float(np.sum(np.abs(F) * np.diff(pts)))


def _coords(meas):
    if isinstance(meas, LabeledEmpiricalMeasure):
        return meas.points(), meas.mass
    return meas.x, meas.mass


def _resolve_metric(metric, mu):
    if metric is None:
        metric = "product" if isinstance(mu, LabeledEmpiricalMeasure) else "euclidean"
    if callable(metric):
        return metric
    if metric == "euclidean":
        return lambda a, b: np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1))
    if metric == "product":
        def prod(a, b):
            dl = np.abs(a[:, None, 0] - b[None, :, 0])
            dx = np.sqrt(np.sum((a[:, None, 1:] - b[None, :, 1:]) ** 2, axis=-1))
            return dl + dx
        return prod
    raise ArgumentError(f"unknown metric {metric!r}")


def _merge(points, mass):
    """Collapse points that coincide within MERGE_TOL; returns (points, mass)."""
    if points.shape[0] == 0:
        return points, mass
    order = np.lexsort(points.T[::-1])
    p, w = points[order], mass[order]
    new_group = np.ones(len(p), dtype=bool)
    new_group[1:] = np.any(np.abs(np.diff(p, axis=0)) > MERGE_TOL, axis=1)
    starts = np.flatnonzero(new_group)
    return p[starts], np.add.reduceat(w, starts)


def _support(mu, nu, metric):
    pa, ma = _coords(mu)
    pb, mb = _coords(nu)
    if pa.shape[1] != pb.shape[1]:
        raise ArgumentError("measures live in different dimensions")
    if pa.shape[0] + pb.shape[0] > MAX_LP_ATOMS:
        raise CapabilityError(f"combined support {pa.shape[0] + pb.shape[0]} exceeds "
                              f"{MAX_LP_ATOMS} atoms")
    f = _resolve_metric(metric, mu)
    return _merge(pa, ma), _merge(pb, mb), f


def _solve(c, **kw):
    res = linprog(c, method="highs", options=_LP_OPTIONS, **kw)
    if res.status != 0:
        raise NexlimError(f"LP solver failed: {res.message}")
    return res


def wasserstein1_lp(mu, nu, metric=None):
    """Optimal transport cost between equal-mass discrete measures.

    ``metric`` is ``'euclidean'``, ``'product'`` (``|xi - zeta| + |x - y|``,
    the default for labeled measures) or a callable returning the cost matrix.
    """
    _check_totals(mu, nu)
    (pa, ma), (pb, mb), f = _support(mu, nu, metric)
    C = np.asarray(f(pa, pb), dtype=float)
    n, m = C.shape
    if n == 1 or m == 1:
        return float(np.sum(C * (mb[None, :] if n == 1 else ma[:, None])))
    # rows: source marginals, then target marginals (one redundant row dropped)
    rows = sparse.vstack([sparse.kron(sparse.eye(n), np.ones((1, m))),
                          sparse.kron(np.ones((1, n)), sparse.eye(m)).tocsr()[:-1]]).tocsr()
    b = np.concatenate([ma, mb[:-1] * (ma.sum() / mb.sum())])
    res = _solve(C.ravel(), A_eq=rows, b_eq=b, bounds=(0, None))
    return float(max(res.fun, 0.0))


def bounded_lipschitz(mu, nu, metric=None):
    """``sup sum f (mu - nu)`` over ``|f| <= 1``, ``Lip(f) <= 1`` on the joint support."""
    (pa, ma), (pb, mb), f = _support(mu, nu, metric)
    pts, signed = _merge(np.vstack([pa, pb]), np.concatenate([ma, -mb]))
    n = pts.shape[0]
    if n == 1:
        return float(abs(signed[0]))
    if pts.shape[1] == 1 and metric in (None, "euclidean"):
        # on the line only neighbouring constraints bind
        i = np.arange(n - 1)
        j = i + 1
        dist = np.diff(pts[:, 0])
    else:
        i, j = np.triu_indices(n, 1)
        dist = np.asarray(f(pts, pts), dtype=float)[i, j]
    k = len(i)
    r = np.arange(k)
    G = sparse.csr_matrix((np.concatenate([np.ones(k), -np.ones(k)]),
                           (np.concatenate([r, r]), np.concatenate([i, j]))), shape=(k, n))
    res = _solve(-signed, A_ub=sparse.vstack([G, -G]).tocsr(),
                 b_ub=np.concatenate([dist, dist]), bounds=(-1, 1))
    return float(max(-res.fun, 0.0))


def l1_bl_fibered(mu: FiberedMeasure, nu: FiberedMeasure, metric=None):
    """Label-averaged BL distance ``(1/K) sum_k d_BL(mu^k, nu^k)``."""
    if mu.K != nu.K:
        raise ArgumentError(f"fiber counts differ: {mu.K} vs {nu.K}")
    return float(np.mean([bounded_lipschitz(a, b, metric) for a, b in zip(mu.fibers, nu.fibers)]))


# projections ----------------------------------------------------------------

def label_marginal(mu: LabeledEmpiricalMeasure) -> DiscreteMeasure:
    lab, inv = np.unique(mu.xi, return_inverse=True)
    mass = np.zeros(lab.size)
    np.add.at(mass, inv, mu.mass)
    return DiscreteMeasure(lab[:, None], mass)


def fiber_mean(mu: FiberedMeasure):
    out = []
    for k, f in enumerate(mu.fibers):
        if f.x.shape[0] == 0 or f.total == 0:
            raise ArgumentError(f"fiber {k} is empty")
        out.append(f.mass @ f.x / f.total)
    return np.array(out)


def collapse_labels(mu) -> DiscreteMeasure:
    """Drop labels (a fibered measure is integrated in the label) and merge coincident atoms."""
    if isinstance(mu, FiberedMeasure):
        x = np.vstack([f.x for f in mu.fibers])
        mass = np.concatenate([f.mass / mu.K for f in mu.fibers])
    elif isinstance(mu, LabeledEmpiricalMeasure):
        x, mass = mu.x, mu.mass
    else:
        x, mass = mu.x, mu.mass
    return DiscreteMeasure(*_merge(x, mass))


# CSV ------------------------------------------------------------------------

def save_measure_csv(mu: LabeledEmpiricalMeasure, path):
    d = mu.x.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi"] + [f"x{k}" for k in range(d)] + ["mass"])
        for a in range(mu.mass.size):
            w.writerow([f"{mu.xi[a]:.17g}"] + [f"{v:.17g}" for v in mu.x[a]] + [f"{mu.mass[a]:.17g}"])


def load_measure_csv(path) -> LabeledEmpiricalMeasure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "xi" or rows[0][-1] != "mass":
        raise ArgumentError(f"{path}: header must be xi, x..., mass")
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    return LabeledEmpiricalMeasure(data[:, 0], data[:, 1:-1], data[:, -1])
