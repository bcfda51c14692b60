"""Mismatch cost functions and their time averages over event traces.

C1 and C2 latch: once a system leaves the state captured by the last
completed sync, the penalty stays until the next sync completes, even if
the system wanders back. C3 compares the current physical and twin states
directly and does not latch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CosineZeroVector, EmptyTrace, WeightLengthMismatch

COST_KINDS = ("c1", "c2", "c3")
DISTANCES = ("hamming", "euclidean_paper", "manhattan", "chebyshev", "cosine", "euclidean_true")


@dataclass(frozen=True)
class CostFunctionSpec:
    kind: str
    weights: Optional[tuple] = None
    distance: Optional[str] = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(x < 0 or math.isnan(x) for x in w):
                raise ValueError(f"weights must be >= 0, got {w}")
            object.__setattr__(self, "weights", w)
        if kind == "c3":
            dist = self.distance or "euclidean_paper"
            if dist not in DISTANCES:
                raise ValueError(f"unknown distance {dist!r}; choose from {DISTANCES}")
            object.__setattr__(self, "distance", dist)
        elif self.distance is not None:
            raise ValueError(f"distance only applies to c3, not {kind}")
        if kind == "c1" and self.weights is not None:
            object.__setattr__(self, "weights", None)

    @property
    def label(self) -> str:
        return f"c3-{self.distance}" if self.kind == "c3" else self.kind

    def resolved_weights(self, k: int, default=None) -> np.ndarray:
        """Weights for a K-system network; C2 falls back to ``default`` (scenario weights)."""
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
        elif self.kind == "c2" and default is not None:
            w = np.asarray(default, dtype=float)
        else:
            w = np.ones(k)
        if len(w) != k:
            raise WeightLengthMismatch(f"{len(w)} weights for {k} systems")
        return w


C1 = CostFunctionSpec("c1")


@dataclass(frozen=True)
class MismatchState:
    s: tuple
    s_hat: tuple
    latch: tuple

    def __post_init__(self):
        if not len(self.s) == len(self.s_hat) == len(self.latch):
            raise ValueError("s, s_hat and latch must have the same length")
        for i, (a, b, l) in enumerate(zip(self.s, self.s_hat, self.latch)):
            if not l and a != b:
                raise ValueError(f"system {i} is unlatched but s={a} != s_hat={b}")


def cost_c1(m: MismatchState) -> int:
    return int(any(m.latch))


def cost_c2(m: MismatchState, w) -> float:
    w = tuple(w)
    if len(w) != len(m.latch):
        raise WeightLengthMismatch(f"{len(w)} weights for {len(m.latch)} systems")
    return float(sum(wi for wi, l in zip(w, m.latch) if l))


def _label_vectors(m: MismatchState, labels):
    if labels is None:
        return np.asarray(m.s, dtype=float), np.asarray(m.s_hat, dtype=float)
    x = np.array([labels[i][s] for i, s in enumerate(m.s)], dtype=float)
    y = np.array([labels[i][s] for i, s in enumerate(m.s_hat)], dtype=float)
    return x, y


def distance(name: str, x, y, w=None, strict_cosine: bool = False) -> float:
    """Distance between two label vectors; ``w`` scales each component."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(x)) if w is None else np.asarray(w, dtype=float)
    d = x - y
    if name == "hamming":
        return float(np.sum(w * (x != y)))
    if name == "euclidean_paper":
        # sum of per-component square roots of squares, taken literally
        return float(np.sum(w * np.sqrt(d * d)))
    if name == "manhattan":
        return float(np.sum(w * np.abs(d)))
    if name == "chebyshev":
        return float(np.max(w * np.abs(d)))
    if name == "euclidean_true":
        return float(np.sqrt(np.sum(w * d * d)))
    if name == "cosine":
        sw = np.sqrt(w)
        xs, ys = x * sw, y * sw
        nx, ny = np.linalg.norm(xs), np.linalg.norm(ys)
        if nx == 0 or ny == 0:
            if strict_cosine:
                raise CosineZeroVector("cosine distance undefined for a zero label vector")
            return 0.0 if nx == ny else 1.0
        return float(min(max(1.0 - xs @ ys / (nx * ny), 0.0), 2.0))
    raise ValueError(f"unknown distance {name!r}")


def cost_c3(m: MismatchState, spec: CostFunctionSpec, labels=None,
            strict_cosine: bool = False) -> float:
    """Instantaneous distance between physical and twin states (no latching).

    ``labels[i][j]`` is the numeric coordinate of state ``j`` of system ``i``;
    the state index itself is used when labels are omitted.
    """
    if spec.kind != "c3":
        raise ValueError(f"cost_c3 needs a c3 spec, got {spec.kind}")
    x, y = _label_vectors(m, labels)
    w = spec.resolved_weights(len(x))
    return distance(spec.distance, x, y, w, strict_cosine)


def evaluate_cost(m: MismatchState, spec: CostFunctionSpec, labels=None, default_weights=None) -> float:
    if spec.kind == "c1":
        return float(cost_c1(m))
    if spec.kind == "c2":
        return cost_c2(m, spec.resolved_weights(len(m.latch), default_weights))
    return cost_c3(m, spec, labels)


def time_average_cost(trace, spec: CostFunctionSpec, horizon: float, labels=None,
                      weights=None) -> float:
    """Exact time average of a piecewise-constant cost over ``[0, horizon]``.

    The trace is replayed event by event: transitions move the physical
    state, sync completions install their snapshot and reset the latches to
    "transitions since the snapshot was taken".
    """
    if trace is None or not trace.initial:
        raise EmptyTrace("trace has no initial state")
    if horizon <= 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    k = len(trace.initial)
    s = list(trace.initial)
    s_hat = list(trace.initial)
    last_jump = [-math.inf] * k
    sample_time = 0.0

    def current():
        latch = tuple(last_jump[i] > sample_time for i in range(k))
        return evaluate_cost(MismatchState(tuple(s), tuple(s_hat), latch), spec, labels, weights)

    total = 0.0
    t = 0.0
    c = current()
    for ev in trace.events:
        if ev.time > horizon:
            break
        total += c * (ev.time - t)
        t = ev.time
        if ev.kind == "ps_transition":
            i, _, to = ev.details
            s[i] = to
            last_jump[i] = ev.time
        elif ev.kind == "sync_completed":
            snapshot, qtime = ev.details
            s_hat[:] = snapshot
            sample_time = qtime
        c = current()
    total += c * (horizon - t)
    return total / horizon
