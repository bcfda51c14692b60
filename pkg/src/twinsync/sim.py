"""Event-driven simulation of a physical-system network and its digital twin.

Semantics of one replication on ``[0, horizon]``:

* The initial joint state is drawn from the stationary product law (or
  fixed by the scenario) and the twin starts synchronized to it, with
  sample time 0.
* A query issued at ``tq`` snapshots the joint state; the twin is
  overwritten with the snapshot at ``tq + delta``.
* ``overlap="preempt"``: a new query aborts any sync still in flight.
  ``overlap="parallel"``: every query completes, in issue order.
* Latch ``i`` is set while system ``i`` has made at least one transition
  after the sample time of the last completed sync.
* Costs are piecewise constant between events and integrated exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernel as K
from .costs import CostFunctionSpec
from .ctmc import sample_stationary
from .errors import DeltaNotZero, InvalidHorizon, PolicyError
from .policies import PolicySpec, pptp_probability
from .rng import RngStream, substream_index

EVENT_KINDS = ("ps_transition", "query_issued", "sync_completed")


class TraceEvent(NamedTuple):
    time: float
    kind: str
    details: tuple


def _fmt_state(s) -> str:
    return ",".join(str(int(x)) for x in s)


def _parse_state(text: str) -> tuple:
    return tuple(int(x) for x in text.split(","))


@dataclass
class EventTrace:
    """Timestamped record of one replication.

    ``details`` per kind: ``ps_transition`` -> ``(system, from, to)``,
    ``query_issued`` -> sampled joint state, ``sync_completed`` ->
    ``(installed joint state, query time)``.
    """

    initial: tuple
    events: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"{0.0:.9f}\tinitial\tstate={_fmt_state(self.initial)}"]
        for ev in self.events:
            if ev.kind == "ps_transition":
                i, a, b = ev.details
                detail = f"ps={i} from={a} to={b}"
            elif ev.kind == "query_issued":
                detail = f"snapshot={_fmt_state(ev.details)}"
            else:
                snap, qt = ev.details
                detail = f"snapshot={_fmt_state(snap)} query_time={qt:.9f}"
            lines.append(f"{ev.time:.9f}\t{ev.kind}\t{detail}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EventTrace":
        initial = None
        events = []
        for line in text.splitlines():
            if not line.strip():
                continue
            ts, kind, detail = line.split("\t")
            fields = dict(kv.split("=", 1) for kv in detail.split())
            t = float(ts)
            if kind == "initial":
                initial = _parse_state(fields["state"])
            elif kind == "ps_transition":
                events.append(TraceEvent(t, kind, (int(fields["ps"]), int(fields["from"]), int(fields["to"]))))
            elif kind == "query_issued":
                events.append(TraceEvent(t, kind, _parse_state(fields["snapshot"])))
            elif kind == "sync_completed":
                events.append(TraceEvent(t, kind, (_parse_state(fields["snapshot"]),
                                                   float(fields["query_time"]))))
            else:
                raise ValueError(f"unknown event kind {kind!r}")
        if initial is None:
            raise ValueError("trace text has no initial line")
        return cls(initial, events)

    def queries(self) -> list:
        return [ev.time for ev in self.events if ev.kind == "query_issued"]


@dataclass
class ReplicationSummary:
    costs: tuple
    cost_labels: tuple
    twin_rate: float
    n_queries: int
    n_completed: int
    horizon: float
    overlap: str
    trace: Optional[EventTrace] = None

    def cost(self, label: str) -> float:
        return self.costs[self.cost_labels.index(label)]


def empirical_twinning_rate(trace: EventTrace, t: float) -> float:
    """Queries issued in ``[0, t]`` divided by ``t``."""
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    return sum(1 for q in trace.queries() if q <= t) / t


# -- preparation of kernel inputs -------------------------------------------

class _Prepared(NamedTuple):
    exit_rate: np.ndarray
    jump_cdf: np.ndarray
    sizes: np.ndarray
    labels: np.ndarray
    pis: list
    fixed_init: Optional[np.ndarray]
    delta: float
    parallel: bool
    policy: int
    rate: float
    p_twin: float
    table: np.ndarray
    mode: int
    uniform_rate: float
    kinds: np.ndarray
    weights: np.ndarray
    dists: np.ndarray
    cost_labels: tuple


def lookup_table(solution, sizes) -> np.ndarray:
    """Twin probability per raw (S, S_hat, latch) code; -1 marks unreachable codes."""
    model = solution.model
    if tuple(model.sizes) != tuple(sizes):
        raise PolicyError(f"solution built for state sizes {model.sizes}, scenario has {tuple(sizes)}")
    sizes_arr = np.asarray(sizes, dtype=np.int64)
    raw = int(np.prod(sizes_arr) ** 2)
    if model.latch_mode == K.LATCH_ANY:
        raw *= 2
    elif model.latch_mode == K.LATCH_PER_PS:
        raw *= 2 ** len(sizes)
    table = np.full(raw, -1.0)
    for idx, (s, sh, _) in enumerate(model.states):
        code = K.lookup_code(np.asarray(s, dtype=np.int64), np.asarray(sh, dtype=np.int64),
                             model.latch_flags(idx), sizes_arr, model.latch_mode)
        table[code] = float(solution.policy[idx])
    return table


def prepare(scenario, policy: PolicySpec, costs: Sequence[CostFunctionSpec]) -> _Prepared:
    systems = scenario.systems
    k = len(systems)
    nmax = max(ps.n for ps in systems)
    exit_rate = np.zeros((k, nmax))
    jump_cdf = np.ones((k, nmax, nmax))
    labels = np.zeros((k, nmax))
    for i, ps in enumerate(systems):
        g = ps.generator
        exit_rate[i, :g.n] = g.exit_rates
        jump_cdf[i, :g.n, :g.n] = g.jump_cdf
        labels[i, :g.n] = ps.labels
    sizes = np.array([ps.n for ps in systems], dtype=np.int64)

    pol_code = {"never": K.POL_NEVER, "prtp": K.POL_PRTP, "pptp": K.POL_PPTP,
                "periodic": K.POL_PERIODIC, "lookup": K.POL_LOOKUP}[policy.kind]
    p_twin = pptp_probability(scenario, policy.rate) if policy.kind == "pptp" else 0.0
    table = np.zeros(1)
    mode = 0
    uniform_rate = 0.0
    if policy.kind == "lookup":
        if scenario.delta != 0:
            raise DeltaNotZero("lookup policies are only defined for delta = 0")
        table = lookup_table(policy.solution, sizes)
        mode = policy.solution.model.latch_mode
        uniform_rate = policy.solution.model.uniform_rate

    costs = list(costs)
    kinds = np.array([K.KIND_CODES[c.kind] for c in costs], dtype=np.int64)
    weights = np.array([c.resolved_weights(k, scenario.weights) for c in costs]).reshape(len(costs), k)
    dists = np.array([K.DIST_CODES.get(c.distance, 0) for c in costs], dtype=np.int64)

    fixed = None if scenario.initial == "stationary" else np.asarray(scenario.initial, dtype=np.int64)
    return _Prepared(exit_rate, jump_cdf, sizes, labels, [ps.pi for ps in systems], fixed,
                     float(scenario.delta), scenario.overlap == "parallel", pol_code,
                     float(policy.rate), p_twin, table, mode, uniform_rate,
                     kinds, weights, dists, tuple(c.label for c in costs))


def _decode_trace(init, rec) -> EventTrace:
    events = []
    for row in rec:
        t = float(row[0])
        kind = int(row[1])
        snap = tuple(int(x) for x in row[5:])
        if kind == K.EV_JUMP:
            events.append(TraceEvent(t, "ps_transition", (int(row[2]), int(row[3]), int(row[4]))))
        elif kind == K.EV_QUERY:
            events.append(TraceEvent(t, "query_issued", snap))
        else:
            events.append(TraceEvent(t, "sync_completed", (snap, float(row[4]))))
    return EventTrace(tuple(int(x) for x in init), events)


def _run_prepared(prep: _Prepared, horizon: float, rng: RngStream, keep_trace: bool, overlap: str):
    if prep.fixed_init is None:
        init = np.array([sample_stationary(pi, rng) for pi in prep.pis], dtype=np.int64)
    else:
        init = prep.fixed_init.copy()
    k = len(init)
    rec = np.empty((4096 if keep_trace else 0, 5 + k))
    cap = 64
    saved = rng.gen.bit_generator.state
    while True:
        status, integ, nq, ncomp, nrec = K.run_kernel(
            rng.gen, init, prep.exit_rate, prep.jump_cdf, prep.sizes, prep.delta, prep.parallel,
            prep.policy, prep.rate, prep.p_twin, prep.table, prep.mode, prep.uniform_rate,
            prep.kinds, prep.weights, prep.dists, prep.labels, float(horizon), keep_trace,
            rec, cap)
        if status == 0:
            break
        rng.gen.bit_generator.state = saved
        if status == 1:
            rec = np.empty((nrec + 16, 5 + k))
        else:
            cap *= 4
    rec = rec[:nrec]
    trace = _decode_trace(init, rec) if keep_trace else None
    return ReplicationSummary(tuple(float(x) for x in integ / horizon), prep.cost_labels,
                              nq / horizon, int(nq), int(ncomp), float(horizon), overlap, trace)


def run_replication(scenario, policy: PolicySpec, costs: Sequence[CostFunctionSpec],
                    horizon: float, rng: RngStream, keep_trace: bool = False) -> ReplicationSummary:
    if not (horizon > 0 and math.isfinite(horizon)):
        raise InvalidHorizon(f"horizon must be a positive finite time, got {horizon}")
    prep = prepare(scenario, policy, costs)
    return _run_prepared(prep, horizon, rng, keep_trace, scenario.overlap)


@dataclass
class CellResult:
    cost_labels: tuple
    cost_mean: np.ndarray
    cost_stderr: np.ndarray
    rate_mean: float
    rate_stderr: float
    replications: int
    per_rep_costs: np.ndarray
    per_rep_rates: np.ndarray

    def mean(self, label):
        return float(self.cost_mean[self.cost_labels.index(label)])

    def stderr(self, label):
        return float(self.cost_stderr[self.cost_labels.index(label)])


def _stderr(x: np.ndarray, axis=0):
    n = x.shape[axis]
    if n < 2:
        return np.full(np.delete(x.shape, axis), np.nan) if x.ndim > 1 else np.nan
    return x.std(axis=axis, ddof=1) / math.sqrt(n)


def simulate_cell(scenario, policy: PolicySpec, costs: Sequence[CostFunctionSpec], horizon: float,
                  replications: int, seed: int, cell: int = 0, workers: int = 1) -> CellResult:
    """Run ``replications`` independent replications and aggregate them.

    Replication ``r`` uses stream ``substream_index(cell, r)`` so results do
    not depend on ``workers``.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise InvalidHorizon(f"horizon must be a positive finite time, got {horizon}")
    prep = prepare(scenario, policy, costs)

    def one(r):
        s = _run_prepared(prep, horizon, RngStream(seed, substream_index(cell, r)), False,
                          scenario.overlap)
        return s.costs, s.twin_rate

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, range(replications)))
    else:
        results = [one(r) for r in range(replications)]
    c = np.array([r[0] for r in results], dtype=float).reshape(replications, len(prep.cost_labels))
    lam = np.array([r[1] for r in results], dtype=float)
    return CellResult(prep.cost_labels, c.mean(axis=0), _stderr(c), float(lam.mean()),
                      float(_stderr(lam)), replications, c, lam)


# -- point-cost estimation for checking the closed forms ---------------------

POINT_SEMANTICS = ("latched_any", "latched_per_ps", "state_mismatch_per_ps")


def _evolve(g, s0, tau, gen):
    """Run independent copies of a chain from ``s0`` to ``tau``; return (state at tau, first jump time)."""
    state = s0.copy()
    t = np.zeros(len(s0))
    first = np.full(len(s0), np.inf)
    active = np.arange(len(s0))
    rates = g.exit_rates
    cdf = g.jump_cdf
    while active.size:
        st = state[active]
        t[active] += gen.exponential(1.0, active.size) / rates[st]
        done = t[active] >= tau
        active = active[~done]
        if not active.size:
            break
        st = state[active]
        fresh = ~np.isfinite(first[active])
        first[active[fresh]] = t[active[fresh]]
        u = gen.random(active.size)
        nxt = (cdf[st] <= u[:, None]).sum(axis=1)
        state[active] = np.minimum(nxt, g.n - 1)
    return state, first


def estimate_point_cost(scenario, tau: float, semantics: str, reps: int, rng: RngStream):
    """Monte Carlo estimate of a cost indicator ``tau`` after a sync at time 0.

    Initial states are drawn from the stationary product law and no further
    twinning happens. Returns ``(estimate, stderr)``: scalars for
    ``latched_any``, length-K arrays for the per-system semantics.
    """
    if semantics not in POINT_SEMANTICS:
        raise ValueError(f"semantics must be one of {POINT_SEMANTICS}")
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    if reps < 100:
        raise ValueError(f"need at least 100 replications, got {reps}")
    gen = rng.gen
    latched = []
    mismatch = []
    for ps in scenario.systems:
        cdf = np.cumsum(ps.pi)
        s0 = np.minimum(np.searchsorted(cdf, gen.random(reps) * cdf[-1], side="right"), ps.n - 1)
        s_tau, first = _evolve(ps.generator, s0.astype(np.int64), tau, gen)
        latched.append(first < tau)
        mismatch.append(s_tau != s0)
    if semantics == "latched_any":
        x = np.any(latched, axis=0).astype(float)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(reps))
    x = np.array(latched if semantics == "latched_per_ps" else mismatch, dtype=float)
    return x.mean(axis=1), x.std(axis=1, ddof=1) / math.sqrt(reps)
