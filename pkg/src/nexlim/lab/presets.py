"""Shipped scenarios, stored as partial config tables merged over the defaults."""

import math

TWO_PI = 2.0 * math.pi

PRESETS = {
    # ring of 10 oscillators, each coupled to 2 neighbours per side
    "ring_kuramoto": {
        "scenario": {"name": "ring_kuramoto", "model": "static", "N": 10, "torus": True},
        "kernel": {"type": "ring", "n": 10, "k": 2, "discretization": "cell_average"},
        "interaction": {"phi": "sine", "params": [1.0]},
        "initial": {"x0": "sine", "scale": 2.0},
        "integrator": {"dt": 0.01, "T": 10.0},
        "sweep": {"ns": [10, 20, 40, 80], "metric": "l2"},
    },
    "consensus_allones": {
        "scenario": {"name": "consensus_allones", "model": "static", "N": 50},
        "kernel": {"type": "constant", "params": [1.0], "discretization": "cell_average"},
        "interaction": {"phi": "linear_diff", "params": [1.0]},
        "initial": {"x0": "sine", "scale": 1.0},
        "integrator": {"dt": 0.01, "T": 2.0},
        "sweep": {"ns": [25, 50, 100, 200], "reference": "closed_form", "metric": "linf"},
    },
    "holder_sine": {
        "scenario": {"name": "holder_sine", "model": "static", "N": 100},
        "kernel": {"type": "exp_abs_diff", "params": [], "discretization": "pointwise"},
        "interaction": {"phi": "sine", "params": [1.0]},
        "initial": {"x0": "linear", "scale": TWO_PI},
        "integrator": {"dt": 0.001, "T": 1.0},
        "sweep": {"ns": [25, 50, 100, 200, 400], "metric": "linf"},
    },
    "halfplane_l2": {
        "scenario": {"name": "halfplane_l2", "model": "static", "N": 100},
        "kernel": {"type": "half_plane", "params": [], "discretization": "cell_average"},
        "interaction": {"phi": "sine", "params": [1.0]},
        "initial": {"x0": "linear", "scale": TWO_PI},
        "integrator": {"dt": 0.001, "T": 1.0},
        "sweep": {"ns": [25, 50, 100, 200, 400], "metric": "l2"},
    },
    "random_half": {
        "scenario": {"name": "random_half", "model": "static", "N": 100},
        "kernel": {"type": "constant", "params": [0.5], "discretization": "random", "mode": "rr"},
        "interaction": {"phi": "linear_diff", "params": [1.0]},
        "initial": {"x0": "linear", "scale": 1.0},
        "integrator": {"dt": 0.01, "T": 1.0},
        "sweep": {"ns": [50, 100, 200, 400], "seeds": 50, "reference": "closed_form",
                  "metric": "l2", "tail_c": 1.0},
    },
    "opinion_conserving": {
        "scenario": {"name": "opinion_conserving", "model": "opinion_weights", "N": 50},
        "interaction": {"phi": "linear_diff", "params": [0.5], "psi": "conserving_S",
                        "s": "tanh", "kappa": 2.0, "k": 1},
        "initial": {"x0": "sine", "scale": 1.0, "m0": "linear", "m0_scale": 0.5},
        "integrator": {"dt": 0.001, "T": 5.0},
        "sweep": {"ns": [25, 50, 100, 200], "metric": "linf"},
    },
    "pairwise_competition": {
        "scenario": {"name": "pairwise_competition", "model": "pairwise_competition", "N": 50},
        "interaction": {"phi": "linear_diff", "params": [1.0], "psi": "pairwise_competition",
                        "s": "sgn"},
        "initial": {"x0": "linear", "scale": 1.0, "m0": "cosine", "m0_scale": 0.5},
        "integrator": {"dt": 0.001, "T": 5.0},
        "sweep": {"ns": [50, 100, 200, 400], "metric": "linf"},
    },
    "adaptive_kuramoto": {
        "scenario": {"name": "adaptive_kuramoto", "model": "adaptive_kuramoto", "N": 20,
                     "torus": True},
        "kernel": {"type": "constant", "params": [0.5], "discretization": "cell_average"},
        "interaction": {"phi": "sine", "params": [1.0], "H": "neg_cos", "eps": 0.1,
                        "omega": "linspace:-1:1"},
        "initial": {"x0": "sine", "scale": 1.0},
        "integrator": {"dt": 0.01, "T": 5.0},
        "sweep": {"ns": [20, 40, 80, 160], "metric": "linf"},
    },
}
