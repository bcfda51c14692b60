"""Continuous-time Markov chain primitives."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import poisson

from .errors import NegativeOffDiagonal, Reducible, RowSumNonzero, SingularSystem
from .rng import RngStream

# Poisson tail mass neglected by the uniformization series.
UNIFORMIZATION_TAIL = 1e-13
# Above this value of (uniformization rate * tau) the series is evaluated
# at tau / 2**m and squared back up.
_MAX_POISSON_MEAN = 100.0


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Validated infinitesimal generator. Build with :func:`validate_generator`."""

    q: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @cached_property
    def exit_rates(self) -> np.ndarray:
        r = -np.diag(self.q).copy()
        r.setflags(write=False)
        return r

    @cached_property
    def jump_cdf(self) -> np.ndarray:
        """Row ``j`` is the CDF of the embedded-chain jump out of state ``j``."""
        off = self.q.copy()
        np.fill_diagonal(off, 0.0)
        cdf = np.cumsum(off / self.exit_rates[:, None], axis=1)
        cdf[:, -1] = 1.0
        cdf.setflags(write=False)
        return cdf

    def __repr__(self) -> str:
        return f"GeneratorMatrix({self.q.tolist()})"


def validate_generator(q) -> GeneratorMatrix:
    q = np.array(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"generator must be square, got shape {q.shape}")
    n = q.shape[0]
    if n < 2:
        raise ValueError("generator needs at least 2 states")
    if not np.all(np.isfinite(q)):
        raise ValueError("generator has non-finite entries")

    off = ~np.eye(n, dtype=bool)
    bad = np.argwhere((q < 0) & off)
    if bad.size:
        j, k = bad[0]
        raise NegativeOffDiagonal(f"q[{j}][{k}] = {q[j, k]} < 0")

    scale = np.max(np.abs(q))
    sums = q.sum(axis=1)
    for j in range(n):
        if abs(sums[j]) > 1e-12 * scale:
            raise RowSumNonzero(f"row {j} sums to {sums[j]!r}, expected 0")

    pattern = csr_matrix(((q > 0) & off).astype(np.int8))
    ncomp, labels = connected_components(pattern, directed=True, connection="strong")
    if ncomp != 1:
        stuck = [int(j) for j in range(n) if labels[j] != labels[0]]
        raise Reducible(f"generator has {ncomp} communicating classes; "
                        f"row {stuck[0] if stuck else 0} is not reachable from/to row 0")

    q = q.copy()
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    q.setflags(write=False)
    return GeneratorMatrix(q)


def stationary_distribution(g: GeneratorMatrix) -> np.ndarray:
    """Solve pi Q = 0, sum(pi) = 1 with the last balance equation swapped for normalization."""
    n = g.n
    a = g.q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    if np.linalg.cond(a) > 1e12:
        raise SingularSystem("stationary system is numerically rank deficient")
    pi = np.linalg.solve(a, b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    pi.setflags(write=False)
    return pi


def _poisson_truncation(mean: float) -> int:
    return int(poisson.isf(UNIFORMIZATION_TAIL, mean)) + 1


def transition_matrix(g: GeneratorMatrix, tau: float) -> np.ndarray:
    """e^{Q tau} by uniformization.

    P = I + Q/L with L the largest exit rate, and
    e^{Q tau} = sum_k Poisson(k; L tau) P^k, truncated once the tail mass is
    below ``UNIFORMIZATION_TAIL``.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    n = g.n
    lam = float(g.exit_rates.max())
    if tau == 0 or lam == 0:
        return np.eye(n)

    squarings = 0
    step = tau
    while lam * step > _MAX_POISSON_MEAN:
        step /= 2.0
        squarings += 1

    p = np.eye(n) + g.q / lam
    mean = lam * step
    kmax = _poisson_truncation(mean)
    weights = poisson.pmf(np.arange(kmax + 1), mean)

    out = weights[0] * np.eye(n)
    power = np.eye(n)
    for k in range(1, kmax + 1):
        power = power @ p
        out += weights[k] * power
    for _ in range(squarings):
        out = out @ out
    return np.clip(out, 0.0, 1.0)


def total_event_rate(scenario_or_generators) -> float:
    """Aggregate stationary transition rate sigma = sum_i sum_j pi_ij r_ij."""
    gens = _generators(scenario_or_generators)
    return float(sum(stationary_distribution(g) @ g.exit_rates for g in gens))


def _generators(obj):
    if isinstance(obj, GeneratorMatrix):
        return [obj]
    systems = getattr(obj, "systems", None)
    if systems is not None:
        return [s.generator for s in systems]
    return list(obj)


def sample_jump(g: GeneratorMatrix, state: int, rng: RngStream) -> tuple[float, int]:
    """Draw the sojourn in ``state`` and the state jumped to."""
    if not 0 <= state < g.n:
        raise IndexError(f"state {state} out of range for {g.n}-state chain")
    sojourn = rng.gen.exponential(1.0 / g.exit_rates[state])
    u = rng.gen.random()
    nxt = int(np.searchsorted(g.jump_cdf[state], u, side="right"))
    return sojourn, min(nxt, g.n - 1)


def sample_stationary(pi, rng: RngStream) -> int:
    cdf = np.cumsum(pi)
    u = rng.gen.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)
