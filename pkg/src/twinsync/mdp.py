"""Optimal twinning at zero sync delay as a constrained average-cost MDP.

The joint process is uniformized at rate ``U = sum_i max_j r_ij``. At each
tick system ``i`` jumps ``j -> k`` with probability ``q_i[j][k] / U``
(otherwise nothing happens); a real jump sets the latch. After the tick the
controller sees ``(S, S_hat, latch)`` and either idles or twins; twinning
copies ``S`` into ``S_hat`` and clears the latches before the next cost
interval. The rate budget is handled with a Lagrange multiplier ``eta``
charged per query, and bisection on ``eta``.

The controller observes the physical state directly, so its cost is a lower
bound for what pull-side or randomized push-side policies can achieve.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix

from . import _kernel as K
from .costs import CostFunctionSpec, MismatchState, cost_c2, cost_c3
from .errors import DeltaNotZero, NoConvergence, StateSpaceTooLarge

DEFAULT_MAX_STATES = 10 ** 6
_LATCH_MODE = {"c1": K.LATCH_ANY, "c2": K.LATCH_PER_PS, "c3": K.LATCH_NONE}


@dataclass(eq=False)
class MdpModel:
    sizes: tuple
    latch_mode: int
    cost: CostFunctionSpec
    states: list
    index: dict
    reset: np.ndarray
    P: csr_matrix
    cost_rate: np.ndarray
    uniform_rate: float
    start: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.states)

    def canonical(self, state) -> tuple:
        """Normalize ``(S, S_hat, latch)``; ``latch`` may be per-system flags or a single bit."""
        s, sh, latch = state
        s = tuple(int(x) for x in s)
        sh = tuple(int(x) for x in sh)
        if np.ndim(latch) == 0:
            flags = (bool(latch),)
        else:
            flags = tuple(bool(x) for x in latch)
        if self.latch_mode == K.LATCH_ANY:
            b = (int(any(flags)),)
        elif self.latch_mode == K.LATCH_PER_PS:
            if len(flags) != len(s):
                raise ValueError("per-system latch flags expected")
            b = tuple(int(x) for x in flags)
        else:
            b = ()
        return (s, sh, b)

    def post_action(self, idx: int, twin: bool) -> int:
        return int(self.reset[idx]) if twin else idx

    def transition(self, idx: int, twin: bool) -> np.ndarray:
        """Next-tick distribution after taking the action in state ``idx``."""
        return self.P[self.post_action(idx, twin)].toarray().ravel()

    def latch_flags(self, idx: int) -> np.ndarray:
        s, _, b = self.states[idx]
        if self.latch_mode == K.LATCH_PER_PS:
            return np.array(b, dtype=np.bool_)
        if self.latch_mode == K.LATCH_ANY:
            return np.full(len(s), bool(b[0]))
        return np.zeros(len(s), dtype=np.bool_)

    def encode(self, idx: int) -> str:
        s, sh, b = self.states[idx]
        out = f"S={','.join(map(str, s))};Shat={','.join(map(str, sh))}"
        if b:
            out += f";L={','.join(map(str, b))}"
        return out


def _cost_of(cost: CostFunctionSpec, s, sh, b, weights, labels) -> float:
    if cost.kind == "c1":
        return float(b[0])
    if cost.kind == "c2":
        latch = tuple(bool(x) for x in b)
        return cost_c2(MismatchState(s, sh, latch), cost.resolved_weights(len(s), weights))
    m = MismatchState(s, sh, tuple(a != c for a, c in zip(s, sh)))
    return cost_c3(m, cost, labels)


def build_mdp(scenario, cost: CostFunctionSpec, max_states: int = DEFAULT_MAX_STATES) -> MdpModel:
    """Enumerate states reachable from synchronized starts and build the tick kernel."""
    if scenario.delta != 0:
        raise DeltaNotZero(f"MDP formulation needs delta = 0, scenario has {scenario.delta}")
    mode = _LATCH_MODE[cost.kind]
    gens = scenario.generators
    k = len(gens)
    sizes = tuple(g.n for g in gens)
    uniform = float(sum(g.exit_rates.max() for g in gens))
    labels = [ps.labels for ps in scenario.systems]
    clear = {K.LATCH_NONE: (), K.LATCH_ANY: (0,), K.LATCH_PER_PS: (0,) * k}[mode]

    states = []
    index = {}
    queue = deque()

    def add(st):
        if st not in index:
            if len(states) >= max_states:
                raise StateSpaceTooLarge(f"more than {max_states} reachable states")
            index[st] = len(states)
            states.append(st)
            queue.append(st)
        return index[st]

    for s in itertools.product(*(range(n) for n in sizes)):
        add((s, s, clear))

    rows, cols, vals = [], [], []
    while queue:
        st = queue.popleft()
        s, sh, b = st
        src = index[st]
        stay = 1.0
        for i, g in enumerate(gens):
            for kk in range(g.n):
                rate = g.q[s[i], kk]
                if kk == s[i] or rate <= 0:
                    continue
                s2 = s[:i] + (kk,) + s[i + 1:]
                if mode == K.LATCH_ANY:
                    b2 = (1,)
                elif mode == K.LATCH_PER_PS:
                    b2 = b[:i] + (1,) + b[i + 1:]
                else:
                    b2 = ()
                p = rate / uniform
                stay -= p
                rows.append(src)
                cols.append(add((s2, sh, b2)))
                vals.append(p)
        if stay > 1e-15:
            rows.append(src)
            cols.append(src)
            vals.append(stay)

    n = len(states)
    P = csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.sum_duplicates()
    reset = np.array([index[(s, s, clear)] for s, _, _ in states], dtype=np.int64)
    c = np.array([_cost_of(cost, s, sh, b, scenario.weights, labels) for s, sh, b in states])

    start = np.zeros(n)
    pis = [ps.pi for ps in scenario.systems]
    for s in itertools.product(*(range(m) for m in sizes)):
        start[index[(s, s, clear)]] = np.prod([pis[i][s[i]] for i in range(k)])
    return MdpModel(sizes, mode, cost, states, index, reset, P, c, uniform, start)


@dataclass(eq=False)
class MdpSolution:
    model: MdpModel
    eta: float
    gain: float
    bias: np.ndarray
    policy: np.ndarray
    achieved_rate: float
    cost_rate: float
    residual: float
    iterations: int
    budget: Optional[float] = None
    path: list = field(default_factory=list)
    randomized_state: Optional[int] = None

    @property
    def rate_gap(self) -> Optional[float]:
        return None if self.budget is None else self.budget - self.achieved_rate

    def action(self, state) -> str:
        from .policies import lookup_decide
        return lookup_decide(self, state)

    def to_text(self) -> str:
        lines = [f"# eta={self.eta:.12g}", f"# gain={self.gain:.12g}",
                 f"# achieved_rate={self.achieved_rate:.12g}",
                 f"# cost_rate={self.cost_rate:.12g}"]
        if self.budget is not None:
            lines.append(f"# budget={self.budget:.12g}")
        lines.append("state_encoding\taction\tbias")
        for idx in range(self.model.n_states):
            p = self.policy[idx]
            act = "twin" if p >= 1 else "idle" if p <= 0 else f"twin:{p:.12g}"
            lines.append(f"{self.model.encode(idx)}\t{act}\t{self.bias[idx]:.12g}")
        return "\n".join(lines) + "\n"


def _q_values(model: MdpModel, h: np.ndarray, eta: float):
    c = model.cost_rate / model.uniform_rate
    ph = model.P @ h
    r = model.reset
    return c + ph, c[r] + eta + ph[r]


def greedy_policy(model: MdpModel, h: np.ndarray, eta: float, tie_tol: float = 1e-9) -> np.ndarray:
    q_idle, q_twin = _q_values(model, h, eta)
    return q_twin < q_idle - tie_tol


def optimality_residual(model: MdpModel, bias: np.ndarray, eta: float, gain: float) -> float:
    """max_x |min_a Q(x, a) - h(x) - g| in per-tick units."""
    q_idle, q_twin = _q_values(model, bias, eta)
    return float(np.max(np.abs(np.minimum(q_idle, q_twin) - bias - gain / model.uniform_rate)))


def _stationary_from_start(M, start: np.ndarray, tol: float = 1e-12, max_iter: int = 10 ** 6) -> np.ndarray:
    """Limiting distribution of a (possibly multichain) kernel from ``start``; lazy to kill periodicity."""
    n = M.shape[0]
    if n <= 2000:
        A = 0.5 * (np.eye(n) + M.toarray())
        mu = start.copy()
        for _ in range(80):
            A = A @ A
            nxt = start @ A
            if np.abs(nxt - mu).sum() < tol:
                return nxt / nxt.sum()
            mu = nxt
        return mu / mu.sum()
    mu = start.copy()
    MT = M.T.tocsr()
    for _ in range(max_iter):
        nxt = 0.5 * mu + 0.5 * (MT @ mu)
        if np.abs(nxt - mu).sum() < tol:
            return nxt / nxt.sum()
        mu = nxt
    raise NoConvergence("power iteration for the induced chain did not converge")


def _induced_kernel(model: MdpModel, policy: np.ndarray):
    p = np.asarray(policy, dtype=float)
    idle = model.P.multiply((1.0 - p)[:, None])
    twin = model.P[model.reset].multiply(p[:, None])
    return csr_matrix(idle + twin)


def induced_occupancy(model: MdpModel, policy) -> np.ndarray:
    """Long-run distribution of decision-epoch states under a stationary policy.

    ``policy[x]`` is the probability of twinning in state ``x`` (0/1 for
    deterministic policies).
    """
    return _stationary_from_start(_induced_kernel(model, policy), model.start)


def induced_rate(model: MdpModel, policy) -> float:
    """Long-run queries per unit time of a stationary policy."""
    p = np.asarray(policy, dtype=float)
    mu = induced_occupancy(model, p)
    return float(model.uniform_rate * (mu @ p))


def induced_cost_rate(model: MdpModel, policy) -> float:
    p = np.asarray(policy, dtype=float)
    mu = induced_occupancy(model, p)
    return float(mu @ (p * model.cost_rate[model.reset] + (1.0 - p) * model.cost_rate))


def _rate_and_cost(model, policy):
    p = np.asarray(policy, dtype=float)
    mu = induced_occupancy(model, p)
    rate = float(model.uniform_rate * (mu @ p))
    cost = float(mu @ (p * model.cost_rate[model.reset] + (1.0 - p) * model.cost_rate))
    return rate, cost


def relative_value_iteration(model: MdpModel, eta: float, epsilon: float = 1e-9,
                             max_iter: int = 10 ** 6, ref: int = 0, damping: float = 0.5,
                             h0: Optional[np.ndarray] = None, tie_tol: float = 1e-9) -> MdpSolution:
    """Average-cost relative value iteration.

    Uses the aperiodicity transform ``h <- (1 - a) h + a (T h - (T h)(ref))``
    with ``a = damping``; stops once span(T h - h) < epsilon. ``gain`` is
    reported per unit time (cost rate plus ``eta`` times query rate).
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    h = np.zeros(model.n_states) if h0 is None else np.array(h0, dtype=float)
    h -= h[ref]
    for it in range(1, max_iter + 1):
        q_idle, q_twin = _q_values(model, h, eta)
        th = np.minimum(q_idle, q_twin)
        diff = th - h
        lo, hi = diff.min(), diff.max()
        if hi - lo < epsilon:
            break
        h = (1.0 - damping) * h + damping * (th - th[ref])
    else:
        raise NoConvergence(f"relative value iteration did not converge in {max_iter} iterations")
    g_tick = 0.5 * (lo + hi)
    bias = h - h[ref]
    policy = greedy_policy(model, bias, eta, tie_tol).astype(float)
    gain = g_tick * model.uniform_rate
    rate, cost = _rate_and_cost(model, policy)
    return MdpSolution(model, float(eta), float(gain), bias, policy, rate, cost,
                       optimality_residual(model, bias, eta, gain), it)


def solve_constrained(model: MdpModel, budget: float, epsilon: float = 1e-9,
                      eta_tol: float = 1e-9, max_doublings: int = 80,
                      randomize: bool = True) -> MdpSolution:
    """Rate-constrained optimum via bisection on the per-query multiplier.

    Bisection brackets the critical multiplier between a greedy policy that
    overshoots the budget and one that meets it. With ``randomize=False``
    the feasible deterministic policy is returned as is; its rate may sit
    well below the budget (``rate_gap``). With ``randomize=True`` the two
    bracketing policies are joined one state at a time and the single state
    where the rate crosses the budget twins with a fractional probability,
    so the budget is used up exactly.
    """
    if not budget > 0:
        raise ValueError(f"budget must be > 0, got {budget}")
    path = []

    def solve(eta, h0=None):
        sol = relative_value_iteration(model, eta, epsilon, h0=h0)
        path.append((eta, sol.achieved_rate))
        return sol

    best = solve(0.0)
    if best.achieved_rate <= budget:
        best.budget = budget
        best.path = path
        return best

    lo_sol = best
    eta_hi = 1.0
    hi_sol = solve(eta_hi, lo_sol.bias)
    for _ in range(max_doublings):
        if hi_sol.achieved_rate <= budget:
            break
        lo_sol = hi_sol
        eta_hi *= 2.0
        hi_sol = solve(eta_hi, hi_sol.bias)
    else:
        raise NoConvergence("could not find a multiplier that meets the budget")

    while hi_sol.eta - lo_sol.eta > eta_tol * max(1.0, hi_sol.eta):
        sol = solve(0.5 * (lo_sol.eta + hi_sol.eta), hi_sol.bias)
        if sol.achieved_rate <= budget:
            hi_sol = sol
        else:
            lo_sol = sol

    out = _mix(model, lo_sol, hi_sol, budget) if randomize else hi_sol
    out.budget = budget
    out.path = path
    return out


def _mix(model: MdpModel, lo_sol: MdpSolution, hi_sol: MdpSolution, budget: float) -> MdpSolution:
    differ = np.flatnonzero(lo_sol.policy != hi_sol.policy)
    current = hi_sol.policy.copy()
    prev = current.copy()
    for x in differ:
        prev = current.copy()
        current[x] = lo_sol.policy[x]
        if induced_rate(model, current) > budget:
            break
    else:
        return hi_sol

    # rate(p) is continuous in the twin probability of state x; keep the
    # feasible end of the bracket.
    lo_p, hi_p = float(prev[x]), float(current[x])
    trial = prev.copy()
    for _ in range(60):
        mid = 0.5 * (lo_p + hi_p)
        trial[x] = mid
        if induced_rate(model, trial) <= budget:
            lo_p = mid
        else:
            hi_p = mid
    trial[x] = lo_p
    rate, cost = _rate_and_cost(model, trial)
    return MdpSolution(model, hi_sol.eta, hi_sol.gain, hi_sol.bias, trial, rate, cost,
                       hi_sol.residual, hi_sol.iterations, randomized_state=int(x))
