import json
import math

import numpy as np
import pytest

from nexlim.errors import ArgumentError, ConfigError
from nexlim.lab import cli, results
from nexlim.lab.config import from_dict, load_config, preset_config
from nexlim.lab.presets import PRESETS
from nexlim.lab.runner import (SweepResult, consistency_suite, conservation_checks,
                               convergence_sweep, fit_rate, metric_checks,
                               monte_carlo_random_graph, run_scenario, simulate)

SMALL = {"integrator": {"dt": 0.01, "T": 0.5}}


# config -----------------------------------------------------------------------------

def test_presets_all_parse():
    for name in PRESETS:
        cfg = preset_config(name)
        assert cfg.name == name and cfg.dt > 0


def test_config_toml(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text('[scenario]\nname = "demo"\nN = 12\n[kernel]\ntype = "exp_abs_diff"\n'
                 'params = []\n[interaction]\nphi = "sine"\n[integrator]\ndt = 0.05\nT = 0.5\n')
    cfg = load_config(p)
    assert cfg.name == "demo" and cfg.N == 12 and cfg.kernel().name == "exp_abs_diff"
    assert cfg.phi().form == "sine"


@pytest.mark.parametrize("text,frag", [
    ("[sweep]\nns = [50, 25]\n", "strictly increasing"),
    ("[integrator]\ndt = 0.3\nT = 1.0\n", "multiple"),
    ("[scenario]\nmodel = 'chaos'\n", "model"),
    ("[bogus]\nx = 1\n", "unknown table"),
    ("[kernel]\ntype = 'nope'\n", "kernel"),
    ("[scenario\nN = 3\n", "line"),
])
def test_config_errors(tmp_path, text, frag):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert frag in str(info.value)


def test_config_missing_file_and_preset():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.toml")
    with pytest.raises(ConfigError):
        from_dict({"scenario": {"preset": "nope"}})
    cfg = from_dict({"scenario": {"preset": "holder_sine", "N": 8}})
    assert cfg.N == 8 and cfg.kernel().name == "exp_abs_diff"


def test_step_kernel_file(tmp_path):
    from nexlim import kernels as kn
    kn.save_step_csv(kn.GraphonKernel.step([[1.0, 0.0], [0.0, 1.0]]), tmp_path / "k.csv")
    cfg = from_dict({"kernel": {"type": "step", "file": str(tmp_path / "k.csv")}})
    assert cfg.kernel().n == 2


# fit_rate ----------------------------------------------------------------------------

def test_fit_rate_planted():
    Ns = np.array([25, 50, 100, 200, 400])
    assert fit_rate(Ns, 3.0 / Ns)[0] == pytest.approx(-1.0, abs=1e-12)
    assert fit_rate(Ns, 2.0 / np.sqrt(Ns))[0] == pytest.approx(-0.5, abs=1e-12)
    assert fit_rate(Ns, np.full(5, 0.1))[0] == pytest.approx(0.0, abs=1e-12)
    slope, intercept, resid = fit_rate(Ns, 7.0 * Ns ** -1.3)
    assert slope == pytest.approx(-1.3, abs=1e-12) and intercept == pytest.approx(math.log(7.0))
    assert resid < 1e-12


def test_fit_rate_errors():
    with pytest.raises(ArgumentError):
        fit_rate([1, 2], [0.1, 0.05])
    with pytest.warns(UserWarning):
        with pytest.raises(ArgumentError):
            fit_rate([1, 2, 4], [0.1, 0.0, 0.05])
    with pytest.warns(UserWarning):
        assert fit_rate([1, 2, 4, 8], [0.0, 0.5, 0.25, 0.125])[0] == pytest.approx(-1.0)


# results -------------------------------------------------------------------------------

def test_emit_empty_and_idempotent(tmp_path):
    empty = SweepResult("l2")
    results.emit(empty, "csv", tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "N,seed,metric,error\n"
    res = SweepResult("l2", rows=[{"N": 10, "seed": 0, "error": 0.1, "checkpoints": [0.0, 0.1]}],
                      wall_time={(10, 0): 0.5})
    results.emit(res, "csv", tmp_path / "a.csv")
    first = (tmp_path / "a.csv").read_bytes()
    results.emit(res, "csv", tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_bytes() == first
    with pytest.raises(ArgumentError):
        results.emit(res, "xml", tmp_path / "a.xml")


def test_json_roundtrip(tmp_path):
    res = SweepResult("linf", rows=[{"N": 10, "seed": 0, "error": 0.25, "checkpoints": [0.0, 0.25]}],
                      slope=-1.0)
    results.emit(res, "json", tmp_path / "r.json")
    doc = results.load_json(tmp_path / "r.json")
    assert doc["schema"] == results.SCHEMA and doc["slope"] == -1.0
    assert doc["rows"][0]["checkpoint_errors"] == [0.0, 0.25]
    results.emit({"a": np.float64(1.5), "b": np.arange(3)}, "json", tmp_path / "d.json")
    assert results.load_json(tmp_path / "d.json")["b"] == [0, 1, 2]
    (tmp_path / "bad.json").write_text(json.dumps({"schema": "other"}))
    with pytest.raises(Exception):
        results.load_json(tmp_path / "bad.json")


# runner ----------------------------------------------------------------------------------

def test_run_ring_kuramoto(tmp_path):
    cfg = preset_config("ring_kuramoto", integrator={"dt": 0.01, "T": 1.0})
    summary = run_scenario(cfg, tmp_path)
    for name in ("trajectory.csv", "summary.json", "field.csv"):
        assert (tmp_path / name).exists()
    assert summary["N"] == 10 and summary["correspondence_max_abs"] == 0.0
    doc = results.load_json(tmp_path / "summary.json")
    assert doc["N"] == 10


def test_consensus_contracts(tmp_path):
    s = run_scenario(preset_config("consensus_allones"), tmp_path)
    assert s["terminal_spread"] < s["initial_spread"]


def test_run_weighted_and_adaptive(tmp_path):
    s = run_scenario(preset_config("pairwise_competition", scenario={"N": 20}, **SMALL), tmp_path)
    assert abs(s["sum_m_drift"]) <= 1e-12 * 20
    run_scenario(preset_config("adaptive_kuramoto", **SMALL), tmp_path / "ak")
    assert (tmp_path / "ak" / "weights_final.csv").exists()


def test_sweep_monotone_and_correspondence():
    cfg = preset_config("holder_sine", integrator={"dt": 0.01, "T": 0.5},
                        kernel={"discretization": "cell_average"},
                        initial={"sampling": "cell_average"},
                        sweep={"ref_factor": 1, "dt_ref_divisor": 1})
    with pytest.warns(UserWarning, match="zero error"):
        res = convergence_sweep(cfg, ns=[10, 20, 40])
    e = res.medians()
    assert e[0] > e[1] > 0 and e[2] == 0.0


def test_sweep_lipschitz_strictly_decreasing():
    cfg = preset_config("halfplane_l2", integrator={"dt": 0.01, "T": 0.5})
    e = convergence_sweep(cfg, ns=[10, 20, 40, 80]).medians()
    assert np.all(np.diff(e) < 0)


def test_sweep_deterministic_across_workers(tmp_path):
    cfg = preset_config("random_half", sweep={"seeds": 4})
    a = convergence_sweep(cfg, ns=[20, 40, 80], workers=1)
    b = convergence_sweep(cfg, ns=[20, 40, 80], workers=3)
    results.emit(a, "csv", tmp_path / "a.csv")
    results.emit(b, "csv", tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_random_bernoulli_one_has_no_variance():
    cfg = preset_config("random_half", kernel={"params": [1.0]})
    # the sampled graph never depends on the seed; only rr labels do
    for N in (20, 40):
        Ws = [cfg.weight_matrix(N, seed) for seed in range(5)]
        assert all(np.array_equal(W, 1.0 - np.eye(N)) for W in Ws)
    rd = preset_config("random_half", kernel={"params": [1.0], "mode": "rd"}, sweep={"seeds": 5})
    res = convergence_sweep(rd, ns=[20, 40, 80])
    for N in res.ns():
        assert np.std(res.errors(N)) == 0.0


def test_monte_carlo():
    det = preset_config("random_half", kernel={"params": [1.0], "mode": "rd"})
    mc = monte_carlo_random_graph(det, trials=3, ns=[20, 40, 80])
    assert all(s["std"] == 0.0 for s in mc["stats"])
    one = monte_carlo_random_graph(preset_config("random_half"), trials=1, ns=[20, 40, 80])
    for s in one["stats"]:
        assert set(s["quantiles"].values()) == {s["median"]}
    half = monte_carlo_random_graph(preset_config("random_half"), trials=50, ns=[50, 100, 200])
    med = [s["median"] for s in half["stats"]]
    for r in np.array(med[1:]) / med[:-1]:
        assert abs(r - 1 / math.sqrt(2)) <= 0.15
    with pytest.raises(ConfigError):
        monte_carlo_random_graph(preset_config("holder_sine"))


def test_consistency_suite_reports():
    rep = {c.arrow: c for c in consistency_suite(preset_config("consensus_allones"))}
    assert rep[1].deviation == 0.0 and all(c.status == "pass" for c in rep.values())
    hk = preset_config("consensus_allones", interaction={"phi": "linear", "params": [-1.0, 1.0]},
                       kernel={"type": "exp_abs_diff", "params": []})
    rep = {c.arrow: c for c in consistency_suite(hk, arrows=(1, 3))}
    assert rep[1].status == "pass" and rep[3].status == "pass" and rep[3].deviation < 1e-8
    skipped = {c.arrow: c for c in consistency_suite(preset_config("holder_sine"), arrows=(2, 3))}
    assert all(c.status == "skipped" and c.reason for c in skipped.values())


def test_metric_and_conservation_checks():
    assert all(d <= t for d, t in metric_checks(instances=10).values())
    res = conservation_checks(preset_config("opinion_conserving", **SMALL))
    assert all(d <= t for d, t in res.values())
    with pytest.raises(ConfigError):
        conservation_checks(preset_config("holder_sine"))


def test_simulate_separation_error():
    cfg = preset_config("pairwise_competition", initial={"x0": "linear", "scale": 0.0})
    from nexlim.errors import SeparationError
    with pytest.raises(SeparationError):
        simulate(cfg, 10)


# CLI -------------------------------------------------------------------------------------

def test_cli_run_and_exit_codes(tmp_path, capsys):
    assert cli.main(["run", "--config", "consensus_allones", "--out", str(tmp_path)]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text("[sweep]\nns = [3, 2]\n")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["check", "--suite", "arrows"]) == 2
    collide = tmp_path / "c.toml"
    collide.write_text('[scenario]\npreset = "pairwise_competition"\nN = 10\n'
                       '[initial]\nscale = 0.0\n')
    assert cli.main(["run", "--config", str(collide), "--out", str(tmp_path / "c")]) == 3
    assert "SeparationError" in capsys.readouterr().err


def test_cli_sweep_rate_check(tmp_path, capsys):
    out = tmp_path / "sw"
    p = tmp_path / "s.toml"
    p.write_text('[scenario]\npreset = "holder_sine"\n[integrator]\ndt = 0.01\nT = 0.5\n')
    assert cli.main(["sweep", "--config", str(p), "--ns", "10,20,40", "--out", str(out)]) == 0
    first = (out / "sweep.csv").read_bytes()
    assert cli.main(["sweep", "--config", str(p), "--ns", "10,20,40", "--out", str(out)]) == 0
    assert (out / "sweep.csv").read_bytes() == first
    assert cli.main(["rate", "--in", str(out / "sweep.csv")]) == 0
    assert "slope" in capsys.readouterr().out
    assert cli.main(["sweep", "--config", str(p), "--ns", "10,x"]) == 2
    assert cli.main(["check", "--suite", "metrics"]) == 0
    assert cli.main(["check", "--suite", "arrows", "--config", "consensus_allones"]) == 0
    assert cli.main(["check", "--suite", "conservation", "--config", "opinion_conserving"]) == 0
