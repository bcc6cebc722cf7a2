"""Scenario configuration: TOML parsing, validation and object construction."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .. import continuum, kernels, rng
from ..errors import ArgumentError, CapabilityError, ConfigError
from ..interactions import H_PRESETS, Interaction, OddFunction, WeightDynamics
from .presets import PRESETS

MODELS = ("static", "opinion_weights", "pairwise_competition", "adaptive_kuramoto")
DEFAULTS = {
    "scenario": {"name": "custom", "model": "static", "N": 50, "torus": False},
    "kernel": {"type": "constant", "params": [1.0], "discretization": "cell_average",
               "mode": "rd"},
    "interaction": {"phi": "linear_diff", "params": [1.0], "omega": 0.0, "H": "neg_cos",
                    "H_params": [], "eps": 0.1, "psi": "none", "s": "tanh", "kappa": 1.0,
                    "k": 1},
    "initial": {"x0": "linear", "scale": 1.0, "offset": 0.0, "values": [], "sampling": "midpoint",
                "seed": 0, "m0": "ones", "m0_scale": 0.5, "fiber_law": "uniform", "fiber_P": 4,
                "fiber_width": 0.1},
    "integrator": {"dt": 0.01, "T": 1.0, "scheme": "rk4"},
    "sweep": {"ns": [25, 50, 100, 200, 400], "seeds": 1, "seed0": 0, "reference": "continuum",
              "metric": "linf", "checkpoints": 11, "ref_factor": 4, "dt_ref_divisor": 4,
              "tail_c": 1.0, "quantiles": [0.1, 0.5, 0.9]},
    "metrics": {"list": ["linf", "l2"], "ground": "product"},
    "output": {"dir": "nexlim_out"},
}


def _merge(base, over, where=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key in out and isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"[{where}{key}] must be a table")
            out[key] = _merge(out[key], val, f"{where}{key}.")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ScenarioConfig:
    """Validated scenario description; ``raw`` keeps the merged tables."""

    raw: dict
    source: str = "<dict>"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # shortcuts -------------------------------------------------------------
    def section(self, name):
        return self.raw[name]

    @property
    def name(self):
        return self.raw["scenario"]["name"]

    @property
    def model(self):
        return self.raw["scenario"]["model"]

    @property
    def N(self):
        return int(self.raw["scenario"]["N"])

    @property
    def torus(self):
        return bool(self.raw["scenario"]["torus"])

    @property
    def dt(self):
        return float(self.raw["integrator"]["dt"])

    @property
    def T(self):
        return float(self.raw["integrator"]["T"])

    @property
    def scheme(self):
        return self.raw["integrator"]["scheme"]

    @property
    def ns(self):
        return [int(n) for n in self.raw["sweep"]["ns"]]

    @property
    def mode(self):
        return self.raw["kernel"]["mode"]

    @property
    def discretization(self):
        return self.raw["kernel"]["discretization"]

    @property
    def out_dir(self):
        return Path(self.raw["output"]["dir"])

    def with_overrides(self, **tables):
        return ScenarioConfig(_merge(self.raw, tables), self.source)

    # builders --------------------------------------------------------------
    def kernel(self) -> kernels.GraphonKernel:
        if "kernel" not in self._cache:
            self._cache["kernel"] = _wrap("kernel", lambda: build_kernel(self.raw["kernel"]))
        return self._cache["kernel"]

    def phi(self) -> Interaction:
        return _wrap("interaction.phi", lambda: build_phi(self.raw["interaction"]))

    def psi(self) -> WeightDynamics:
        return _wrap("interaction.psi", lambda: build_psi(self.raw["interaction"]))

    def H(self):
        ic = self.raw["interaction"]
        if ic["H"] not in H_PRESETS:
            raise ConfigError(f"{self.source}: [interaction] H: unknown preset {ic['H']!r}")
        return H_PRESETS[ic["H"]](*ic["H_params"])

    @property
    def eps(self):
        return float(self.raw["interaction"]["eps"])

    def omega(self, N):
        """Per-particle intrinsic frequencies: scalar, list of length N, or ``linspace:a:b``."""
        om = self.raw["interaction"]["omega"]
        if isinstance(om, str):
            parts = om.split(":")
            if parts[0] != "linspace" or len(parts) != 3:
                raise ConfigError(f"{self.source}: [interaction] omega: expected 'linspace:a:b'")
            a, b = float(parts[1]), float(parts[2])
            # cell midpoints so that omega is a label function sampled consistently in N
            return a + (b - a) * kernels.midpoints(N)
        if isinstance(om, list):
            if len(om) != N:
                raise ConfigError(f"{self.source}: [interaction] omega has {len(om)} entries, N={N}")
            return np.array(om, dtype=float)
        return float(om)

    def x0_function(self):
        return _wrap("initial", lambda: build_x0(self.raw["initial"]))

    def labels(self, N, seed=0):
        return kernels.sample_labels(N, self.mode if self.discretization == "random" else "rd", seed)

    def initial_x(self, N, seed=0):
        """Initial positions for ``N`` particles under the configured sampling."""
        init = self.raw["initial"]
        f = self.x0_function()
        if self.discretization == "random":
            return np.asarray(f(self.labels(N, seed)), dtype=float).reshape(N, -1)
        if init["sampling"] == "cell_average":
            return continuum.restrict_cell_average(f, N)
        if init["sampling"] != "midpoint":
            raise ConfigError(f"{self.source}: [initial] sampling must be midpoint|cell_average")
        return np.asarray(f(kernels.midpoints(N)), dtype=float).reshape(N, -1)

    def initial_m(self, N, seed=0):
        init = self.raw["initial"]
        m0 = init["m0"]
        xi = self.labels(N, seed)
        if m0 == "ones":
            return np.ones(N)
        if m0 == "linear":
            return 1.0 + float(init["m0_scale"]) * (xi - 0.5)
        if m0 == "cosine":
            return 1.0 + float(init["m0_scale"]) * np.cos(2.0 * math.pi * xi)
        raise ConfigError(f"{self.source}: [initial] m0 must be ones|linear|cosine")

    def weight_matrix(self, N, seed=0, discretization=None):
        disc = discretization or self.discretization
        k = self.kernel()
        if disc == "pointwise":
            return kernels.discretize_pointwise(k, kernels.midpoints(N))
        if disc == "cell_average":
            return kernels.discretize_cell_average(k, N)
        if disc == "random":
            return _wrap("kernel", lambda: kernels.sample_w_random(k, N, self.mode, seed))
        raise ConfigError(f"{self.source}: [kernel] discretization must be "
                          "pointwise|cell_average|random")


def _wrap(where, fn):
    try:
        return fn()
    except (ArgumentError, CapabilityError, TypeError, KeyError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


# object builders ------------------------------------------------------------

def build_kernel(kc) -> kernels.GraphonKernel:
    t = kc["type"]
    if t == "step":
        if "file" in kc:
            return kernels.load_step_csv(kc["file"])
        return kernels.GraphonKernel.step(kc["values"])
    if t == "ring":
        return kernels.step_from_matrix(kernels.ring_adjacency(int(kc["n"]), int(kc["k"])))
    if t == "torus_band":
        return kernels.GraphonKernel.torus_band(kc["r"])
    return kernels.GraphonKernel.preset(t, *kc.get("params", []))


def build_phi(ic) -> Interaction:
    name, p = ic["phi"], list(ic["params"])
    ctor = {"linear_diff": Interaction.linear_diff, "linear": Interaction.linear,
            "sine": Interaction.sine, "hk_bump": Interaction.hk_bump,
            "sgn_diff": Interaction.sgn_diff}
    if name not in ctor:
        raise ArgumentError(f"unknown interaction {name!r}; known: {sorted(ctor)}")
    return ctor[name](*p)


def build_psi(ic) -> WeightDynamics:
    form = ic["psi"]
    if form == "none":
        return WeightDynamics("none")
    s = OddFunction(ic["s"], float(ic["kappa"]))
    if form == "conserving_S":
        return WeightDynamics("conserving_S", k=int(ic["k"]), s=s)
    if form == "pairwise_competition":
        return WeightDynamics("pairwise_competition", s=s)
    raise ArgumentError(f"psi must be none|conserving_S|pairwise_competition, got {form!r}")


def build_x0(init):
    kind = init["x0"]
    a, c = float(init["scale"]), float(init["offset"])
    if kind == "linear":
        return lambda xi: c + a * np.asarray(xi)
    if kind == "sine":
        return lambda xi: c + a * np.sin(2.0 * math.pi * np.asarray(xi))
    if kind == "step":
        v = np.asarray(init["values"], dtype=float)
        if v.size == 0:
            raise ArgumentError("step x0 needs a non-empty values list")
        return lambda xi: v[np.minimum((np.asarray(xi) * v.size).astype(np.int64), v.size - 1)]
    if kind == "random":
        seed = int(init["seed"])

        def f(xi):
            # keyed by a fine label bin so the profile is a fixed function of xi
            b = np.minimum((np.asarray(xi) * 2**20).astype(np.int64), 2**20 - 1)
            return c + a * rng.uniform(seed, rng.INITIAL, b)
        return f
    raise ArgumentError(f"x0 must be linear|sine|step|random, got {kind!r}")


# parsing --------------------------------------------------------------------

def validate(raw, source="<dict>"):
    for key in raw:
        if key not in DEFAULTS:
            raise ConfigError(f"{source}: unknown table [{key}]")
    sc = raw["scenario"]
    if sc["model"] not in MODELS:
        raise ConfigError(f"{source}: [scenario] model must be one of {MODELS}, got {sc['model']!r}")
    if not isinstance(sc["N"], int) or sc["N"] < 1:
        raise ConfigError(f"{source}: [scenario] N must be a positive integer")
    it = raw["integrator"]
    try:
        dt, T = float(it["dt"]), float(it["T"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: [integrator] dt and T must be numbers") from exc
    if not dt > 0 or T < 0:
        raise ConfigError(f"{source}: [integrator] need dt > 0 and T >= 0")
    if abs(dt * round(T / dt) - T) > 1e-12:
        raise ConfigError(f"{source}: [integrator] T={T} is not a multiple of dt={dt}")
    if it["scheme"] not in ("rk4", "euler"):
        raise ConfigError(f"{source}: [integrator] scheme must be rk4|euler")
    ns = raw["sweep"]["ns"]
    if (not isinstance(ns, list) or not ns or not all(isinstance(n, int) and n > 0 for n in ns)):
        raise ConfigError(f"{source}: [sweep] ns must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError(f"{source}: [sweep] ns must be strictly increasing, got {ns}")
    sw = raw["sweep"]
    if sw["reference"] not in ("continuum", "closed_form"):
        raise ConfigError(f"{source}: [sweep] reference must be continuum|closed_form")
    if sw["metric"] not in ("linf", "l2"):
        raise ConfigError(f"{source}: [sweep] metric must be linf|l2")
    if int(sw["checkpoints"]) < 2:
        raise ConfigError(f"{source}: [sweep] checkpoints must be >= 2")
    if raw["kernel"]["mode"] not in ("rr", "rd"):
        raise ConfigError(f"{source}: [kernel] mode must be rr|rd")
    cfg = ScenarioConfig(raw, source)
    # build once to surface construction errors at parse time
    cfg.kernel()
    cfg.phi()
    cfg.psi()
    cfg.x0_function()
    return cfg


def from_dict(d, source="<dict>") -> ScenarioConfig:
    d = dict(d)
    preset = d.get("scenario", {}).get("preset")
    base = DEFAULTS
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"{source}: [scenario] preset: unknown {preset!r}; "
                              f"known: {sorted(PRESETS)}")
        base = _merge(DEFAULTS, PRESETS[preset])
    raw = _merge(base, d)
    raw["scenario"].pop("preset", None)
    return validate(raw, source)


def load_config(path) -> ScenarioConfig:
    """Parse a TOML scenario file; parse errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(data, str(path))


def preset_config(name, **overrides) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return from_dict(_merge({"scenario": {"preset": name}}, overrides), f"preset:{name}")
