"""Interaction functions phi(x, y) and weight-dynamics specifications.

Two-argument convention throughout: ``phi(x, y)`` is the effect of a particle
at ``y`` on one at ``x``.  Difference-form models ``phi~(y - x)`` are covered
by the presets below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _accel
from .errors import ArgumentError, CapabilityError

_FORMS = {
    "linear_diff": _accel.LINEAR_DIFF,
    "linear": _accel.LINEAR,
    "sine": _accel.SINE,
    "hk_bump": _accel.HK_BUMP,
    "sgn_diff": _accel.SGN_DIFF,
}


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ArgumentError(f"positions must be (N,) or (N, d), got shape {x.shape}")
    return np.ascontiguousarray(x)


@dataclass(frozen=True)
class Interaction:
    """An interaction function ``phi``.

    Forms: ``linear_diff`` (``lam * (y - x)``), ``linear`` (``lam1 * x + lam2 * y``),
    ``sine`` (``K * sin(y - x)``), ``hk_bump`` (``(y - x) 1[|y - x| <= R]``),
    ``sgn_diff`` (``sgn(y - x)``, ``sgn(0) = 0``), ``tabulated`` (``phi~(y - x)``
    by linear interpolation of a table, d = 1) and ``custom`` (any vectorised
    callable).
    """

    form: str
    p0: float = 1.0
    p1: float = 0.0
    lipschitz: float | None = None
    table: tuple | None = None
    func: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.form not in _FORMS and self.form not in ("tabulated", "custom"):
            raise ArgumentError(f"unknown interaction form {self.form!r}")
        if self.form == "custom" and self.func is None:
            raise ArgumentError("custom interaction needs a callable")

    @classmethod
    def linear_diff(cls, lam=1.0):
        return cls("linear_diff", float(lam), lipschitz=2 * abs(lam))

    @classmethod
    def linear(cls, lam1, lam2):
        return cls("linear", float(lam1), float(lam2), lipschitz=abs(lam1) + abs(lam2))

    @classmethod
    def sine(cls, coupling=1.0):
        return cls("sine", float(coupling), lipschitz=2 * abs(coupling))

    @classmethod
    def hk_bump(cls, R):
        return cls("hk_bump", float(R))

    @classmethod
    def sgn_diff(cls):
        return cls("sgn_diff")

    @classmethod
    def tabulated(cls, deltas, values):
        d = np.asarray(deltas, dtype=float)
        if d.ndim != 1 or np.any(np.diff(d) <= 0):
            raise ArgumentError("tabulated deltas must be strictly increasing")
        return cls("tabulated", table=(tuple(d), tuple(float(v) for v in values)))

    @classmethod
    def custom(cls, func, lipschitz=None):
        return cls("custom", func=func, lipschitz=lipschitz)

    @property
    def singular(self):
        return self.form == "sgn_diff"

    @property
    def is_difference_form(self):
        return self.form in ("linear_diff", "sine", "hk_bump", "sgn_diff", "tabulated")

    # evaluation -----------------------------------------------------------

    def __call__(self, x, y):
        """Vectorised ``phi(x, y)``; trailing axis of size d for vector states."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.form == "linear_diff":
            return self.p0 * (y - x)
        if self.form == "linear":
            return self.p0 * x + self.p1 * y
        if self.form == "sine":
            return self.p0 * np.sin(y - x)
        if self.form == "sgn_diff":
            return np.sign(y - x)
        if self.form == "hk_bump":
            diff = y - x
            dist = np.abs(diff) if diff.ndim == 0 else np.sqrt(np.sum(diff * diff, axis=-1, keepdims=True))
            return np.where(dist <= self.p0, diff, 0.0)
        if self.form == "tabulated":
            d, v = self.table
            return np.interp(y - x, d, v)
        return np.asarray(self.func(x, y), dtype=float)

    def pair_sum(self, weights, q, y, row_bcast=False):
        """``out[r] = sum_j weights[r, j] * phi(q[r], y[j])`` in ascending ``j``.

        With ``row_bcast`` the 1-D ``weights`` vector applies to every row.
        """
        q = _as_2d(q)
        y = _as_2d(y)
        W = np.asarray(weights, dtype=float)
        if row_bcast:
            W = W.reshape(1, -1)
        W = np.ascontiguousarray(W)
        if W.shape[1] != y.shape[0] or (not row_bcast and W.shape[0] != q.shape[0]):
            raise ArgumentError(f"weight shape {W.shape} does not match {q.shape[0]} targets "
                                f"and {y.shape[0]} sources")
        if q.shape[1] != y.shape[1]:
            raise ArgumentError("targets and sources differ in dimension")
        d = q.shape[1]
        if self.form in ("sine", "sgn_diff", "tabulated") and d != 1:
            raise CapabilityError(f"{self.form} interaction is defined for d = 1 only")
        out = np.empty((q.shape[0], d))
        if self.form in _FORMS:
            _accel.pair_sum(W, row_bcast, q, y, _FORMS[self.form], self.p0, self.p1, out)
            return out
        Wb = np.broadcast_to(W, (q.shape[0], y.shape[0]))
        terms = Wb[:, :, None] * self(q[:, None, :], y[None, :, :])
        _accel.row_sums(np.ascontiguousarray(terms), out)
        return out


@dataclass(frozen=True)
class OddFunction:
    """Odd bounded scalar function ``s``: ``sgn`` (singular) or ``tanh(kappa z)``."""

    form: str = "tanh"
    kappa: float = 1.0

    def __post_init__(self):
        if self.form not in ("sgn", "tanh"):
            raise ArgumentError(f"unknown odd function {self.form!r}")

    @property
    def code(self):
        return _accel.S_SGN if self.form == "sgn" else _accel.S_TANH

    @property
    def singular(self):
        return self.form == "sgn"

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.sign(z) if self.form == "sgn" else np.tanh(self.kappa * z)


@dataclass(frozen=True)
class WeightDynamics:
    """Dynamics of agent weights (``m``) or edge weights.

    ``none``; ``conserving_S`` with arity ``k`` in {1, 2} and either an odd
    function ``s`` (``S(x, y) = s(sum(y - x))``) or a callable ``S`` optionally
    antisymmetrised in its first two arguments; ``pairwise_competition`` with
    odd ``s``; ``relaxation_H`` with rate ``eps`` and edge target ``H``.
    """

    form: str = "none"
    k: int = 1
    s: OddFunction | None = None
    S: Callable | None = field(default=None, repr=False, compare=False)
    antisymmetrize: bool = True
    eps: float = 0.0
    H: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.form not in ("none", "conserving_S", "pairwise_competition", "relaxation_H",
                             "general_edge"):
            raise ArgumentError(f"unknown weight dynamics {self.form!r}")
        if self.form == "conserving_S":
            if self.k > 2:
                raise CapabilityError(f"conserving_S supports arity k <= 2, got {self.k}")
            if self.k < 1:
                raise ArgumentError("conserving_S arity must be >= 1")
            if self.s is None and self.S is None:
                raise ArgumentError("conserving_S needs s or S")
            if self.s is not None and self.k != 1:
                raise ArgumentError("odd-function form of S is only defined for k = 1")
        if self.form == "pairwise_competition" and self.s is None:
            raise ArgumentError("pairwise_competition needs an odd function s")
        if self.form == "relaxation_H" and not self.eps > 0:
            raise ArgumentError("relaxation_H needs eps > 0")

    @property
    def singular(self):
        return self.s is not None and self.s.singular

    def S_eval(self, *args):
        """Vectorised source kernel ``S(x, y_1, ..., y_k)`` (antisymmetrised if asked)."""
        if self.s is not None:
            x, y = args
            return self.s(np.sum(np.asarray(y) - np.asarray(x), axis=-1))
        if not self.antisymmetrize:
            return np.asarray(self.S(*args), dtype=float)
        x, y1, *rest = args
        return 0.5 * (np.asarray(self.S(x, y1, *rest)) - np.asarray(self.S(y1, x, *rest)))


# edge targets H(x, y) for adaptive networks
def H_neg_cos(x, y):
    return -np.cos(y - x)


def H_zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def H_neg_sin_shift(beta):
    return lambda x, y: -np.sin(y - x + beta)


H_PRESETS = {"neg_cos": lambda: H_neg_cos, "zero": lambda: H_zero,
             "neg_sin_shift": H_neg_sin_shift}
