"""Graph-limit objects: graphons, step kernels, fiber kernels, random-graph laws.

A :class:`GraphonKernel` is a bounded function on the unit square.  Three
forms exist: named analytic presets, step (pixel) kernels built from an
``n x n`` value matrix on equal-area blocks, and the torus band
``1[min(|xi - zeta|, 1 - |xi - zeta|) <= r]``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _accel, rng
from .errors import ArgumentError, CapabilityError

GAUSS_ORDER = 8
# boundary slack for indicator presets, absorbs representation error of labels
# such as 0.25 - 0.05 that should land exactly on the band edge
_EDGE_TOL = 1e-12


def _constant(c):
    return lambda xi, zeta: np.full(np.broadcast(xi, zeta).shape, float(c))


def _product(xi, zeta):
    return xi * zeta


def _exp_abs_diff(xi, zeta):
    return np.exp(-np.abs(xi - zeta))


def _half_plane(xi, zeta):
    return np.where(xi + zeta <= 1.0, 1.0, 0.0)


PRESETS: dict[str, tuple[Callable, int]] = {
    # name -> (factory taking the parameter list, number of parameters)
    "constant": (lambda c: _constant(c), 1),
    "product": (lambda: _product, 0),
    "exp_abs_diff": (lambda: _exp_abs_diff, 0),
    "half_plane": (lambda: _half_plane, 0),
}


@dataclass(frozen=True, eq=False)
class GraphonKernel:
    """Bounded kernel ``w`` on ``[0, 1]^2``.

    Use the constructors :meth:`preset`, :meth:`step`, :meth:`torus_band`
    or :meth:`from_function` rather than building instances directly.
    """

    form: str
    bound: float
    symmetric: bool
    name: str = ""
    params: tuple = ()
    values: np.ndarray | None = None
    func: Callable | None = field(default=None, repr=False)

    # construction ---------------------------------------------------------

    @classmethod
    def preset(cls, name, *params):
        if name == "torus_band":
            return cls.torus_band(*params)
        if name not in PRESETS:
            raise ArgumentError(f"unknown kernel preset {name!r}; known: "
                                f"{sorted(PRESETS) + ['torus_band', 'step']}")
        factory, nparams = PRESETS[name]
        if len(params) != nparams:
            raise ArgumentError(f"preset {name!r} takes {nparams} parameter(s), got {len(params)}")
        params = tuple(float(p) for p in params)
        bound = abs(params[0]) if name == "constant" else 1.0
        return cls("preset", bound, True, name, params, None, factory(*params))

    @classmethod
    def constant(cls, c):
        return cls.preset("constant", c)

    @classmethod
    def step(cls, values):
        v = np.array(values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ArgumentError(f"step values must be a non-empty square matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("step values must be finite")
        v.setflags(write=False)
        return cls("step", float(np.max(np.abs(v))), bool(np.array_equal(v, v.T)),
                   "step", (v.shape[0],), v)

    @classmethod
    def torus_band(cls, r):
        r = float(r)
        if not 0.0 < r < 0.5:
            raise ArgumentError(f"torus_band radius must lie in (0, 1/2), got {r}")
        return cls("torus_band", 1.0, True, "torus_band", (r,))

    @classmethod
    def from_function(cls, func, bound, symmetric=False, name="function"):
        """Wrap a vectorised ``func(xi, zeta)``; ``bound`` must dominate ``|func|``."""
        return cls("function", float(bound), bool(symmetric), name, (), None, func)

    # evaluation -----------------------------------------------------------

    @property
    def n(self):
        return self.values.shape[0] if self.form == "step" else None

    def __call__(self, xi, zeta):
        """Vectorised evaluation without range checks."""
        xi = np.asarray(xi, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        if self.form == "step":
            n = self.values.shape[0]
            i = np.minimum((xi * n).astype(np.int64), n - 1)
            j = np.minimum((zeta * n).astype(np.int64), n - 1)
            return self.values[i, j]
        if self.form == "torus_band":
            d = np.abs(xi - zeta)
            d = np.minimum(d, 1.0 - d)
            return np.where(d <= self.params[0] + _EDGE_TOL, 1.0, 0.0)
        return np.asarray(self.func(xi, zeta), dtype=float)

    def scaled(self, c):
        c = float(c)
        if self.form == "step":
            return GraphonKernel.step(c * self.values)
        if self.form == "preset" and self.name == "constant":
            return GraphonKernel.constant(c * self.params[0])
        base = self
        return GraphonKernel.from_function(lambda xi, zeta: c * base(xi, zeta),
                                           abs(c) * self.bound, self.symmetric,
                                           f"{c}*{self.name}")


def eval(kernel: GraphonKernel, xi, zeta):  # noqa: A001 - mirrors the operation name
    """Pointwise value ``w(xi, zeta)`` for labels in ``[0, 1]``."""
    xi_a = np.asarray(xi, dtype=float)
    zeta_a = np.asarray(zeta, dtype=float)
    for name, v in (("xi", xi_a), ("zeta", zeta_a)):
        if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
            raise ArgumentError(f"label {name} outside [0, 1]: {v}")
    out = kernel(xi_a, zeta_a)
    return float(out) if out.ndim == 0 else out


# discretisation -------------------------------------------------------------

def midpoints(N):
    return (np.arange(N) + 0.5) / N


def check_weight_matrix(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
        raise ArgumentError(f"weight matrix must be square and non-empty, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ArgumentError("weight matrix has non-finite entries")
    return W


def step_from_matrix(W) -> GraphonKernel:
    """Pixel kernel whose block ``(i, j)`` carries ``W[i, j]``."""
    return GraphonKernel.step(check_weight_matrix(W))


def ring_adjacency(N, k):
    """Adjacency of the ring where each node links to its ``k`` nearest neighbours per side."""
    if not (1 <= k and 2 * k < N):
        raise ArgumentError(f"ring_adjacency needs 1 <= k < N/2, got N={N}, k={k}")
    idx = np.arange(N)
    d = np.abs(idx[:, None] - idx[None, :])
    d = np.minimum(d, N - d)
    return ((d >= 1) & (d <= k)).astype(float)


def discretize_pointwise(kernel, gridpoints):
    g = np.asarray(gridpoints, dtype=float)
    if g.ndim != 1 or np.any(g < 0.0) or np.any(g > 1.0):
        raise ArgumentError("grid points must be a 1-D array of labels in [0, 1]")
    return kernel(g[:, None], g[None, :])


def _tent_cdf(u):
    # CDF of the sum of two independent U(-1/2, 1/2) scaled to support [-1, 1]
    u = np.clip(u, -1.0, 1.0)
    return np.where(u <= 0.0, 0.5 * (1.0 + u) ** 2, 1.0 - 0.5 * (1.0 - u) ** 2)


def _step_overlap(N, n):
    # P[i, a] = N * |cell_i intersect block_a|
    e_fine = np.arange(N + 1) / N
    e_coarse = np.arange(n + 1) / n
    lo = np.maximum(e_fine[:-1, None], e_coarse[None, :-1])
    hi = np.minimum(e_fine[1:, None], e_coarse[None, 1:])
    return np.clip(hi - lo, 0.0, None) * N


def discretize_cell_average(kernel, N):
    """Cell means ``N^2 * integral`` of ``w`` over each ``(i, j)`` cell."""
    if N < 1:
        raise ArgumentError(f"N must be >= 1, got {N}")
    if kernel.form == "step":
        v = kernel.values
        n = v.shape[0]
        if N % n == 0:
            f = N // n
            return np.repeat(np.repeat(v, f, axis=0), f, axis=1)
        if n % N == 0:
            f = n // N
            return v.reshape(N, f, N, f).mean(axis=(1, 3))
        P = _step_overlap(N, n)
        return P @ v @ P.T
    idx = np.arange(N)
    if kernel.form == "preset" and kernel.name == "half_plane":
        # sum xi + zeta over a cell is tent-distributed; cell edge offset s is an integer
        s = (N - idx[:, None] - idx[None, :]).astype(float)
        return _tent_cdf(s - 1.0)
    if kernel.form == "torus_band":
        r = kernel.params[0]
        h = 1.0 / N
        delta0 = (idx[:, None] - idx[None, :]) * h
        total = np.zeros((N, N))
        for shift in (-1.0, 0.0, 1.0):
            lo = (shift - r - delta0) / h
            hi = (shift + r - delta0) / h
            total += _tent_cdf(hi) - _tent_cdf(lo)
        return total
    if kernel.form == "preset" and kernel.name == "constant":
        return np.full((N, N), kernel.params[0])
    return _gauss_cell_average(kernel, N)


def _gauss_cell_average(kernel, N, order=GAUSS_ORDER):
    u, wq = np.polynomial.legendre.leggauss(order)
    nodes = ((np.arange(N)[:, None] + 0.5 * (u[None, :] + 1.0)) / N).ravel()
    wq = wq / 2.0
    out = np.empty((N, N))
    chunk = max(1, 2_000_000 // (order * order * N))
    for r0 in range(0, N, chunk):
        r1 = min(N, r0 + chunk)
        rows = nodes[r0 * order:r1 * order]
        vals = kernel(rows[:, None], nodes[None, :]).reshape(r1 - r0, order, N, order)
        out[r0:r1] = np.einsum("a,iajb,b->ij", wq, vals, wq)
    return out


# random graphs --------------------------------------------------------------

def _labels(N, mode, seed):
    if mode == "rd":
        return midpoints(N)
    if mode == "rr":
        return rng.uniform(seed, rng.LABELS, np.arange(N))
    raise ArgumentError(f"mode must be 'rr' or 'rd', got {mode!r}")


def sample_labels(N, mode, seed):
    """Particle labels used by the random-graph samplers."""
    return _labels(N, mode, seed)


def _edge_uniforms(N, seed, stream, symmetric):
    i = np.arange(N)[:, None]
    j = np.arange(N)[None, :]
    if symmetric:
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        return rng.uniform(seed, stream, lo, hi)
    return rng.uniform(seed, stream, i, j)


def sample_w_random(kernel, N, mode, seed):
    """Unweighted w-random graph: edge ``(i, j)`` present with probability ``w(Z_i, Z_j)``."""
    Z = _labels(N, mode, seed)
    P = kernel(Z[:, None], Z[None, :])
    if np.any(P < 0.0) or np.any(P > 1.0):
        raise ArgumentError("w-random sampling needs kernel values in [0, 1]")
    U = _edge_uniforms(N, seed, rng.EDGES, kernel.symmetric)
    W = (U < P).astype(float)
    np.fill_diagonal(W, 0.0)
    return W


@dataclass(frozen=True)
class RandomGraphLaw:
    """Law of a q-weighted random graph.

    ``bernoulli``: weight 1 with probability ``p``; ``scaled_bernoulli``: weight
    ``scale`` with probability ``p``; ``uniform_band``: weight uniform on
    ``[center - halfwidth, center + halfwidth]``.
    """

    form: str
    kernel: GraphonKernel
    scale: float = 1.0
    halfwidth: float = 0.0

    def __post_init__(self):
        if self.form not in ("bernoulli", "scaled_bernoulli", "uniform_band"):
            raise ArgumentError(f"unknown random graph law {self.form!r}")
        if self.form == "scaled_bernoulli" and not self.scale > 0:
            raise ArgumentError("scaled_bernoulli needs scale > 0")
        if self.halfwidth < 0:
            raise ArgumentError("uniform_band needs halfwidth >= 0")

    @classmethod
    def bernoulli(cls, p):
        return cls("bernoulli", p)

    @classmethod
    def scaled_bernoulli(cls, p, c):
        return cls("scaled_bernoulli", p, scale=float(c))

    @classmethod
    def uniform_band(cls, center, h):
        return cls("uniform_band", center, halfwidth=float(h))


def sample_q_weighted(law, N, mode, seed):
    """Weighted random graph; every ordered pair (diagonal included) gets a weight."""
    Z = _labels(N, mode, seed)
    base = law.kernel(Z[:, None], Z[None, :])
    sym = law.kernel.symmetric
    if law.form == "uniform_band":
        lo = base - law.halfwidth
        if np.any(lo < 0.0):
            raise ArgumentError("uniform_band support must stay in R_+")
        U = _edge_uniforms(N, seed, rng.WEIGHTS, sym)
        return lo + 2.0 * law.halfwidth * U
    if np.any(base < 0.0) or np.any(base > 1.0):
        raise ArgumentError("Bernoulli laws need probabilities in [0, 1]")
    U = _edge_uniforms(N, seed, rng.EDGES, sym)
    W = (U < base).astype(float)
    return W * law.scale if law.form == "scaled_bernoulli" else W


def first_moment_kernel(law) -> GraphonKernel:
    """Kernel of expected edge weights."""
    if law.form == "scaled_bernoulli":
        return law.kernel.scaled(law.scale)
    return law.kernel


# norms ----------------------------------------------------------------------

def _require_step(kernel):
    if kernel.form != "step":
        raise ArgumentError("operation needs a step kernel")
    return kernel.values


MAX_EXACT_CUT = 24
MAX_EXACT_PERMUTATION = 8


def cut_norm_exact(kernel):
    """Cut norm of a step kernel, exact by enumeration of row subsets."""
    v = _require_step(kernel)
    n = v.shape[0]
    if n > MAX_EXACT_CUT:
        raise CapabilityError(f"cut_norm_exact supports n <= {MAX_EXACT_CUT} blocks "
                              f"(got {n}); use cut_norm_lower")
    return _accel.cut_max_abs(np.ascontiguousarray(v)) / (n * n)


def cut_norm_lower(kernel, restarts=16, seed=0):
    """Lower bound on the cut norm by alternating greedy row/column selection."""
    v = _require_step(kernel)
    n = v.shape[0]
    gen = np.random.default_rng(seed)
    best = abs(float(v.sum()))
    for _ in range(max(1, restarts)):
        rows = gen.random(n) < 0.5
        value = -1.0
        while True:
            c = v[rows].sum(axis=0)
            pos, neg = c[c >= 0].sum(), -c[c < 0].sum()
            cols = c >= 0 if pos >= neg else c < 0
            sign = 1.0 if pos >= neg else -1.0
            r = sign * v[:, cols].sum(axis=1)
            rows_new = r >= 0
            new_value = r[rows_new].sum()
            if new_value <= value:
                break
            value, rows = new_value, rows_new
        best = max(best, value)
    return best / (n * n)


def l1_norm(kernel):
    return float(np.mean(np.abs(_require_step(kernel))))


def cut_distance_exact(a, b):
    """Cut distance minimised over block permutations of ``b``."""
    va, vb = _require_step(a), _require_step(b)
    n = va.shape[0]
    if vb.shape[0] != n:
        raise ArgumentError(f"block counts differ: {n} vs {vb.shape[0]}")
    if n > MAX_EXACT_PERMUTATION:
        raise CapabilityError(f"cut_distance_exact supports n <= {MAX_EXACT_PERMUTATION}")
    best = np.inf
    for perm in itertools.permutations(range(n)):
        p = np.array(perm)
        diff = np.ascontiguousarray(va - vb[np.ix_(p, p)])
        best = min(best, _accel.cut_max_abs(diff))
    return best / (n * n)


# fiber kernels --------------------------------------------------------------

@dataclass(frozen=True)
class FiberKernel:
    """Label-indexed family of discrete measures on labels.

    ``labels[k]`` and ``masses[k]`` hold the atoms of the fiber at midpoint
    ``(k + 1/2) / K``.
    """

    labels: tuple
    masses: tuple

    def __post_init__(self):
        if len(self.labels) < 1 or len(self.labels) != len(self.masses):
            raise ArgumentError("fiber kernel needs K >= 1 fibers with matching atoms")
        for z, m in zip(self.labels, self.masses):
            z, m = np.asarray(z), np.asarray(m)
            if z.shape != m.shape:
                raise ArgumentError("atom labels and masses differ in length")
            if np.any(z < 0) or np.any(z > 1):
                raise ArgumentError("atom labels must lie in [0, 1]")
            if np.any(~np.isfinite(m)) or np.any(m < 0):
                raise ArgumentError("atom masses must be finite and >= 0")

    @property
    def K(self):
        return len(self.labels)

    @property
    def grid(self):
        return midpoints(self.K)

    def total_mass(self, k):
        return float(np.sum(self.masses[k]))

    def cell_matrix(self, cells=None):
        """``E[k, l]`` = mass of fiber ``k`` falling in label cell ``l``."""
        L = self.K if cells is None else cells
        E = np.zeros((self.K, L))
        for k, (z, m) in enumerate(zip(self.labels, self.masses)):
            cell = np.minimum((np.asarray(z) * L).astype(np.int64), L - 1)
            np.add.at(E[k], cell, m)
        return E


def fiber_from_graphon(kernel, K, atoms_per_fiber):
    if K < 1 or atoms_per_fiber < 1:
        raise ArgumentError("K and atoms_per_fiber must be >= 1")
    xi = midpoints(K)
    zeta = midpoints(atoms_per_fiber)
    vals = kernel(xi[:, None], zeta[None, :]) / atoms_per_fiber
    return FiberKernel(tuple(zeta.copy() for _ in range(K)),
                       tuple(vals[k].copy() for k in range(K)))


# CSV ------------------------------------------------------------------------

def save_step_csv(kernel, path):
    v = _require_step(kernel)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", v.shape[0]])
        for row in v:
            w.writerow([f"{x:.17g}" for x in row])


def load_step_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "n":
        raise ArgumentError(f"{path}: first row must be the header 'n,<count>'")
    n = int(rows[0][1])
    values = np.array([[float(x) for x in r] for r in rows[1:n + 1]])
    if values.shape != (n, n):
        raise ArgumentError(f"{path}: expected {n}x{n} values, got {values.shape}")
    return GraphonKernel.step(values)
