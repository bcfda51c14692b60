"""Closed-form expected costs after a sync taken at time 0.

Two readings of "the system is still in its sampled state after tau" are
available and they are not the same quantity:

``paper_diagonal``
    sum_k pi_k (e^{Q tau})_kk, the probability that the chain *occupies* its
    initial state at tau (paths that leave and come back are counted). This
    is exact for the non-latching Hamming mismatch.

``sojourn``
    sum_k pi_k exp(-r_k tau), the probability that the chain *never left*,
    i.e. P(first transition >= tau). This is exact for the latching costs
    C1 and C2.
"""

from __future__ import annotations

import numpy as np

from .ctmc import GeneratorMatrix, stationary_distribution, transition_matrix
from .errors import WeightLengthMismatch

FORMS = ("paper_diagonal", "sojourn")


def same_state_probability(g: GeneratorMatrix, pi=None, tau: float = 0.0) -> float:
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    pi = stationary_distribution(g) if pi is None else np.asarray(pi)
    return float(pi @ np.diag(transition_matrix(g, tau)))


def holding_probability(g: GeneratorMatrix, pi=None, tau: float = 0.0) -> float:
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    pi = stationary_distribution(g) if pi is None else np.asarray(pi)
    return float(pi @ np.exp(-g.exit_rates * tau))


def _stay_probabilities(scenario, tau: float, form: str) -> np.ndarray:
    if form == "paper_diagonal":
        fn = same_state_probability
    elif form == "sojourn":
        fn = holding_probability
    else:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    return np.array([fn(ps.generator, ps.pi, tau) for ps in scenario.systems])


def _elapsed(t: float, delta: float) -> float:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return t + delta


def expected_cost_c1(scenario, t: float, form: str = "paper_diagonal", delta=None) -> float:
    """E[C1(t)] = 1 - prod_i p_i(t + delta); ``delta`` defaults to the scenario's."""
    tau = _elapsed(t, scenario.delta if delta is None else delta)
    return float(1.0 - np.prod(_stay_probabilities(scenario, tau, form)))


def _weights(scenario, w):
    w = scenario.weights if w is None else np.asarray(w, dtype=float)
    if len(w) != scenario.K:
        raise WeightLengthMismatch(f"{len(w)} weights for {scenario.K} systems")
    return w


def expected_cost_c2(scenario, w=None, t: float = 0.0, form: str = "paper_diagonal",
                     delta=None) -> float:
    w = _weights(scenario, w)
    tau = _elapsed(t, scenario.delta if delta is None else delta)
    return float(w @ (1.0 - _stay_probabilities(scenario, tau, form)))


def expected_cost_c3_hamming(scenario, w=None, t: float = 0.0, delta=None) -> float:
    """Expected weighted Hamming mismatch; the occupancy form is exact here."""
    w = np.ones(scenario.K) if w is None else _weights(scenario, w)
    tau = _elapsed(t, scenario.delta if delta is None else delta)
    return float(w @ (1.0 - _stay_probabilities(scenario, tau, "paper_diagonal")))
