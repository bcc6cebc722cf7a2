"""Scenario runs, convergence sweeps, Monte-Carlo studies and cross-limit checks."""

from __future__ import annotations

import dataclasses
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import continuum, dynamics, kernels, meanfield, measures
from ..errors import ArgumentError, ConfigError, NexlimError
from ..interactions import Interaction, OddFunction, WeightDynamics
from . import results as _emit
from .config import ScenarioConfig

CHECKPOINT_NOTE = ("sup over t approximated by the max over uniform checkpoints "
                   "including both endpoints")


def pool_size():
    n = os.environ.get("NEXLIM_THREADS")
    return max(1, int(n)) if n else (os.cpu_count() or 1)


# single runs ------------------------------------------------------------------

def _record_every(dt, T, checkpoints):
    n = dynamics.step_count(dt, T)
    segs = checkpoints - 1
    return n // segs if n and n % segs == 0 else 1


def simulate(cfg: ScenarioConfig, N, seed=0, dt=None, T=None, record_every=1,
             discretization=None, x0=None):
    """Microscopic run of the configured model with ``N`` particles."""
    dt = cfg.dt if dt is None else dt
    T = cfg.T if T is None else T
    phi = cfg.phi()
    x = cfg.initial_x(N, seed) if x0 is None else np.asarray(x0, dtype=float)
    if cfg.model == "static":
        W = cfg.weight_matrix(N, seed, discretization)
        guard = dynamics.separation_guard() if phi.singular else None
        return dynamics.integrate(dynamics.static_system(W, phi), (x,), dt, T, cfg.scheme,
                                  guard=guard, record_every=record_every)
    if cfg.model in ("opinion_weights", "pairwise_competition"):
        psi = cfg.psi()
        m = cfg.initial_m(N, seed)
        guard = dynamics.separation_guard() if dynamics.needs_guard(phi, psi) else None
        return dynamics.integrate(dynamics.opinion_system(phi, psi), (x, m), dt, T, cfg.scheme,
                                  guard=guard, record_every=record_every)
    W0 = cfg.weight_matrix(N, seed, discretization)
    system = dynamics.adaptive_system(cfg.omega(N), phi, cfg.H(), cfg.eps)
    return dynamics.integrate(system, (x, W0), dt, T, cfg.scheme, record_every=record_every)


def solve_reference_continuum(cfg: ScenarioConfig, M, dt=None, T=None, record_every=1, x0=None):
    """Continuum solve on ``M`` cells with cell-averaged kernel and initial data."""
    dt = cfg.dt if dt is None else dt
    T = cfg.T if T is None else T
    x = continuum.restrict_cell_average(cfg.x0_function(), M) if x0 is None else x0
    field_ = continuum.embed_step(x)
    phi = cfg.phi()
    if cfg.model == "static":
        return continuum.solve_continuum(cfg.kernel(), phi, field_, dt, T, cfg.scheme,
                                         record_every)
    if cfg.model in ("opinion_weights", "pairwise_competition"):
        m = cfg.initial_m(M)
        return continuum.solve_continuum_weights(phi, cfg.psi(), field_, dt, T, m0=m,
                                                 scheme=cfg.scheme, record_every=record_every)
    W0 = kernels.GraphonKernel.step(kernels.discretize_cell_average(cfg.kernel(), M))
    return continuum.solve_continuum_adaptive(cfg.omega(M), phi, cfg.H(), cfg.eps, field_, W0,
                                              dt, T, cfg.scheme, record_every)


def closed_form(cfg: ScenarioConfig):
    """``x(t, xi)`` for the linear consensus model on a constant kernel, else None."""
    k = cfg.kernel()
    phi = cfg.phi()
    if not (cfg.model == "static" and k.form == "preset" and k.name == "constant"
            and phi.form == "linear_diff"):
        return None
    rate = k.params[0] * phi.p0
    f = cfg.x0_function()
    mean = continuum.restrict_cell_average(f, 64).mean(axis=0)

    def x(t, xi):
        v = np.asarray(f(xi), dtype=float).reshape(len(xi), -1)
        return mean + (v - mean) * math.exp(-rate * t)
    return x


def _spread(x):
    x = np.asarray(x)
    return float(np.max(np.ptp(x, axis=0))) if x.size else 0.0


def run_scenario(cfg: ScenarioConfig, out_dir=None):
    """Run at ``N = cfg.N``, write trajectory/field/ensemble CSVs and a JSON summary."""
    out = cfg.out_dir if out_dir is None else out_dir
    out = os.fspath(out)
    os.makedirs(out, exist_ok=True)
    N = cfg.N
    every = _record_every(cfg.dt, cfg.T, int(cfg.section("sweep")["checkpoints"]))
    t0 = time.perf_counter()
    try:
        traj = simulate(cfg, N, record_every=every)
    except NexlimError as exc:
        if not isinstance(exc, ConfigError):
            exc.args = (f"scenario {cfg.name!r}: {exc}",)
        raise
    runtime = time.perf_counter() - t0
    xs = traj.states[0]
    has_m = cfg.model in ("opinion_weights", "pairwise_competition")
    ms = traj.states[1] if has_m else None
    _emit.write_trajectory_csv(os.path.join(out, "trajectory.csv"), traj.t, xs, ms, cfg.torus)
    if cfg.model == "adaptive_kuramoto":
        _emit.write_matrix_csv(os.path.join(out, "weights_final.csv"), traj.states[1][-1])

    summary = {"scenario": cfg.name, "model": cfg.model, "N": N, "dt": cfg.dt, "T": cfg.T,
               "scheme": cfg.scheme, "initial_spread": _spread(xs[0]),
               "terminal_spread": _spread(xs[-1]), "runtime_s": runtime,
               "checkpoint_note": CHECKPOINT_NOTE}
    if has_m:
        s0 = float(np.sum(ms[0]))
        summary["sum_m_initial"] = s0
        summary["sum_m_drift"] = float(np.max(np.abs(ms.sum(axis=1) - s0)))
        summary["min_m"] = float(np.min(ms))
    if cfg.discretization == "cell_average":
        # the continuum solve on N cells from the same data must coincide exactly
        ref = solve_reference_continuum(cfg, N, record_every=every, x0=xs[0])
        summary["correspondence_max_abs"] = float(np.max(np.abs(ref.states[0] - xs)))
        continuum.write_field_csv(os.path.join(out, "field.csv"), ref, cfg.torus)
    if cfg.model == "static":
        ens = meanfield.MFParticleEnsemble.single_atom(xs[0])
        W = cfg.weight_matrix(N)
        mf = meanfield.solve_mfl_nonexchangeable(W, cfg.phi(), ens, cfg.dt, cfg.T, cfg.scheme,
                                                 every)
        meanfield.write_ensemble_csv(os.path.join(out, "ensemble.csv"), mf, N, 1, ens.a)
    _emit.emit({"kind": "run", **summary}, "json", os.path.join(out, "summary.json"))
    return summary


# sweeps -----------------------------------------------------------------------

@dataclass
class SweepResult:
    metric: str
    rows: list = field(default_factory=list)       # dicts: N, seed, error, checkpoint errors
    wall_time: dict = field(default_factory=dict)  # (N, seed) -> seconds
    slope: float | None = None
    intercept: float | None = None
    residual: float | None = None
    note: str = CHECKPOINT_NOTE
    reference: str = ""

    def ns(self):
        return sorted({r["N"] for r in self.rows})

    def errors(self, N):
        return np.array([r["error"] for r in self.rows if r["N"] == N])

    def medians(self):
        return np.array([float(np.median(self.errors(N))) for N in self.ns()])


def fit_rate(Ns, errors):
    """Least-squares line through ``(log N, log error)``; returns (slope, intercept, residual)."""
    Ns = np.asarray(Ns, dtype=float)
    e = np.asarray(errors, dtype=float)
    if Ns.shape != e.shape:
        raise ArgumentError("Ns and errors differ in length")
    if np.any(e < 0) or np.any(~np.isfinite(e)):
        raise ArgumentError("errors must be finite and >= 0")
    keep = e > 0
    if not np.all(keep):
        warnings.warn(f"fit_rate: excluding {int(np.sum(~keep))} zero error(s)", stacklevel=2)
    if np.sum(keep) < 3:
        raise ArgumentError("fit_rate needs at least 3 positive errors")
    lx, ly = np.log(Ns[keep]), np.log(e[keep])
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - ly) ** 2)))
    return float(slope), float(intercept), resid


def _checkpoint_index(times, targets):
    idx = np.searchsorted(times, targets - 1e-9)
    if np.any(idx >= len(times)) or np.any(np.abs(times[np.minimum(idx, len(times) - 1)]
                                                   - targets) > 1e-9):
        raise ArgumentError("checkpoint times are not on the trajectory grid")
    return idx


def _err(diff, metric):
    n = np.sqrt(np.sum(np.atleast_2d(diff) ** 2, axis=-1))
    return float(np.sqrt(np.mean(n ** 2))) if metric == "l2" else float(np.max(n))


def convergence_sweep(cfg: ScenarioConfig, ns=None, seeds=None, workers=None) -> SweepResult:
    """Microscopic runs over ``ns`` (and seeds) compared with the configured reference."""
    sw = cfg.section("sweep")
    ns = cfg.ns if ns is None else list(ns)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError(f"[sweep] ns must be strictly increasing, got {ns}")
    random = cfg.discretization == "random"
    n_seeds = int(sw["seeds"] if seeds is None else seeds) if random else 1
    seed_list = [int(sw["seed0"]) + s for s in range(n_seeds)]
    metric = sw["metric"]
    C = int(sw["checkpoints"])
    targets = np.linspace(0.0, cfg.T, C)
    every = _record_every(cfg.dt, cfg.T, C)

    ref_kind = sw["reference"]
    exact = closed_form(cfg) if ref_kind == "closed_form" else None
    if ref_kind == "closed_form" and exact is None:
        raise ConfigError(f"{cfg.source}: [sweep] reference: no closed form for this scenario")
    ref_states = None
    if exact is None:
        M_ref = int(sw["ref_factor"]) * max(ns)
        dt_ref = cfg.dt / float(sw["dt_ref_divisor"])
        ref = solve_reference_continuum(cfg, M_ref, dt=dt_ref,
                                        record_every=_record_every(dt_ref, cfg.T, C))
        ref_states = ref.states[0][_checkpoint_index(ref.t, targets)]
        reference = f"continuum M_ref={M_ref} dt_ref={dt_ref:g}"
    else:
        reference = "closed form"

    def job(key):
        N, seed = key
        t0 = time.perf_counter()
        traj = simulate(cfg, N, seed, record_every=every)
        xs = traj.states[0][_checkpoint_index(traj.t, targets)]
        per = []
        if exact is not None:
            lab = cfg.labels(N, seed)
            for c, t in enumerate(targets):
                per.append(_err(xs[c] - exact(t, lab), metric))
        elif random:
            lab = cfg.labels(N, seed)
            for c in range(C):
                per.append(_err(xs[c] - continuum.ContinuumField(ref_states[c])(lab), metric))
        else:
            f = continuum.l2_error if metric == "l2" else continuum.linf_error
            per = [f(xs[c], ref_states[c]) for c in range(C)]
        return key, per, time.perf_counter() - t0

    keys = [(N, s) for N in ns for s in seed_list]
    nw = min(workers or pool_size(), len(keys)) or 1
    if nw > 1:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            done = list(ex.map(job, keys))
    else:
        done = [job(k) for k in keys]
    res = SweepResult(metric, reference=reference)
    for (N, s), per, wall in sorted(done, key=lambda r: r[0]):
        res.rows.append({"N": N, "seed": s, "error": max(per), "checkpoints": per})
        res.wall_time[(N, s)] = wall
    if len(ns) >= 3:
        try:
            res.slope, res.intercept, res.residual = fit_rate(res.ns(), res.medians())
        except ArgumentError:
            pass
    return res


def monte_carlo_random_graph(cfg: ScenarioConfig, trials=None, ns=None):
    """Per-N error quantiles over seeds and the tail fraction above ``c / sqrt(N)``."""
    if cfg.discretization != "random":
        raise ConfigError(f"{cfg.source}: monte_carlo_random_graph needs [kernel] "
                          "discretization = 'random'")
    sw = cfg.section("sweep")
    res = convergence_sweep(cfg, ns=ns, seeds=trials)
    qs = [float(q) for q in sw["quantiles"]]
    c = float(sw["tail_c"])
    stats = []
    for N in res.ns():
        e = res.errors(N)
        stats.append({"N": N, "trials": int(e.size), "median": float(np.median(e)),
                      "quantiles": {f"{q:g}": float(np.quantile(e, q)) for q in qs},
                      "std": float(np.std(e)),
                      "tail_fraction": float(np.mean(e >= c / math.sqrt(N)))})
    slope = None
    if len(stats) >= 3:
        slope = fit_rate([s["N"] for s in stats], [s["median"] for s in stats])[0]
    return {"stats": stats, "median_slope": slope, "tail_c": c, "sweep": res}


# cross-limit consistency ---------------------------------------------------------

@dataclass
class ArrowCheck:
    arrow: int
    status: str            # pass | fail | skipped
    deviation: float | None
    threshold: float
    reason: str = ""


THRESHOLDS = {1: 0.0, 2: 1e-12, 3: 1e-8, 4: 1e-12, 5: 1e-10}


def _scaled_phi(phi: Interaction, c):
    if c == 1.0:
        return phi
    if phi.form in ("linear_diff", "sine"):
        return dataclasses.replace(phi, p0=c * phi.p0)
    if phi.form == "linear":
        return dataclasses.replace(phi, p0=c * phi.p0, p1=c * phi.p1)
    return None


def _constant_value(k):
    if k.form == "preset" and k.name == "constant":
        return k.params[0]
    if k.form == "step" and np.all(k.values == k.values.flat[0]):
        return float(k.values.flat[0])
    return None


def _verdict(arrow, dev):
    thr = THRESHOLDS[arrow]
    return ArrowCheck(arrow, "pass" if dev <= thr else "fail", float(dev), thr)


def _skip(arrow, reason):
    return ArrowCheck(arrow, "skipped", None, THRESHOLDS[arrow], reason)


def consistency_suite(cfg: ScenarioConfig, K=None, arrows=(1, 2, 3, 4, 5)):
    """Check the links between microscopic, continuum and mean-field descriptions."""
    K = min(cfg.N, 64) if K is None else K
    init = cfg.section("initial")
    P = int(init["fiber_P"])
    width = float(init["fiber_width"])
    law = init["fiber_law"]
    phi = cfg.phi()
    kernel = cfg.kernel()
    dt, T, scheme = cfg.dt, cfg.T, cfg.scheme
    x0 = continuum.restrict_cell_average(cfg.x0_function(), K)
    static = cfg.model == "static"
    c = _constant_value(kernel) if static else None
    phi_c = _scaled_phi(phi, c) if c is not None else None
    report = []

    for arrow in arrows:
        if arrow == 1:
            if not static:
                report.append(_skip(1, "continuum/mean-field identity is checked on static models"))
                continue
            a = continuum.solve_continuum(kernel, phi, continuum.embed_step(x0), dt, T, scheme)
            b = meanfield.solve_mfl_nonexchangeable(
                kernel, phi, meanfield.MFParticleEnsemble.single_atom(x0), dt, T, scheme)
            report.append(_verdict(1, np.max(np.abs(a.states[0] - b.states[0]))))
        elif arrow in (2, 4):
            if c is None:
                report.append(_skip(arrow, "needs a static model on a constant kernel"))
                continue
            if phi_c is None:
                report.append(_skip(arrow, f"cannot absorb the kernel constant into {phi.form}"))
                continue
            if arrow == 2:
                a = continuum.solve_continuum(kernel, phi, continuum.embed_step(x0), dt, T, scheme)
                b = meanfield.solve_mfl_exchangeable(phi_c, x0, np.full(K, 1.0 / K), dt, T, scheme)
            else:
                ens = meanfield.MFParticleEnsemble.spread(x0, P, width, law)
                a = meanfield.solve_mfl_nonexchangeable(kernel, phi, ens, dt, T, scheme)
                b = meanfield.solve_mfl_exchangeable(phi_c, ens.x.reshape(K * P, -1),
                                                     (ens.a / K).reshape(-1), dt, T, scheme)
            # both runs keep atoms in the same order, so the collapsed measures match atom by atom
            report.append(_verdict(arrow, np.max(np.abs(a.states[0] - b.states[0]))))
        elif arrow == 3:
            if not static or phi.form not in ("linear", "linear_diff"):
                report.append(_skip(3, "first-moment closure needs a static model with linear phi"))
                continue
            T3 = 2.0
            ens = meanfield.MFParticleEnsemble.spread(x0, P, width, law)
            a = meanfield.solve_mfl_nonexchangeable(kernel, phi, ens, dt, T3, scheme)
            means = np.einsum("kp,nkpd->nkd", ens.a, a.states[0].reshape(len(a.t), K, P, -1))
            b = continuum.solve_continuum(kernel, phi, continuum.embed_step(ens.fiber_mean()),
                                          dt, T3, scheme)
            report.append(_verdict(3, np.max(np.abs(means - b.states[0]))))
        elif arrow == 5:
            if phi.singular:
                report.append(_skip(5, "weighted collapse check needs a Lipschitz phi"))
                continue
            psi = cfg.psi()
            if psi.form != "conserving_S":
                psi = WeightDynamics("conserving_S", k=1, s=OddFunction("tanh", 1.0))
            N = K
            m0 = cfg.initial_m(N)
            micro = dynamics.integrate(dynamics.opinion_system(phi, psi), (x0, m0), dt, T, scheme)
            mf = meanfield.solve_mfl_weighted(phi, psi, x0, np.full(N, 1.0 / N), m0, dt, T, scheme)
            dx = np.max(np.abs(micro.states[0] - mf.states[0]))
            # weighted collapse: mass m_i / N at x_i versus a_i m_i at the mean-field atom
            dm = np.max(np.abs(micro.states[1] / N - mf.states[1] / N))
            report.append(_verdict(5, max(dx, dm)))
        else:
            raise ArgumentError(f"unknown arrow {arrow}")
    return report


# metric self-checks -------------------------------------------------------------

def metric_checks(seed=0, instances=50):
    """W1 and BL sanity checks on random 1-D instances; returns name -> (deviation, tol)."""
    gen = np.random.default_rng(seed)
    D = measures.DiscreteMeasure
    w_dev = 0.0
    bl_dev = 0.0
    for _ in range(instances):
        n, m = gen.integers(1, 12, size=2)
        a = D(gen.normal(size=n), gen.dirichlet(np.ones(n)))
        b = D(gen.normal(size=m), gen.dirichlet(np.ones(m)))
        w_dev = max(w_dev, abs(measures.wasserstein1_lp(a, b) - measures.wasserstein1_1d(a, b)))
        p, q = gen.normal(scale=3.0, size=2)
        bl = measures.bounded_lipschitz(D.dirac(p), D.dirac(q))
        bl_dev = max(bl_dev, abs(bl - min(abs(p - q), 2.0)))
    return {"w1_lp_vs_1d": (w_dev, 1e-9), "bl_two_point": (bl_dev, 1e-9)}


def conservation_checks(cfg: ScenarioConfig):
    """Total agent weight drift for weighted models; returns name -> (deviation, tol)."""
    if cfg.model not in ("opinion_weights", "pairwise_competition"):
        raise ConfigError(f"{cfg.source}: conservation checks need a weighted opinion model")
    traj = simulate(cfg, cfg.N)
    s = traj.states[1].sum(axis=1)
    return {"sum_m_drift": (float(np.max(np.abs(s - s[0]))), 1e-10 * abs(s[0]))}
