"""Physical-system network descriptions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .ctmc import GeneratorMatrix, stationary_distribution, validate_generator
from .errors import ScenarioError

OVERLAP_MODES = ("preempt", "parallel")

Initial = Union[str, tuple]


@dataclass(frozen=True, eq=False)
class PhysicalSystem:
    generator: GeneratorMatrix
    weight: float = 1.0
    labels: tuple = None
    name: str = ""

    def __post_init__(self):
        if self.weight < 0:
            raise ScenarioError(f"system {self.name!r}: weight {self.weight} < 0")
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(float(j) for j in range(self.generator.n)))
        elif len(self.labels) != self.generator.n:
            raise ScenarioError(f"system {self.name!r}: {len(self.labels)} labels "
                                f"for {self.generator.n} states")
        else:
            object.__setattr__(self, "labels", tuple(float(x) for x in self.labels))

    @property
    def n(self) -> int:
        return self.generator.n

    @property
    def pi(self) -> np.ndarray:
        return stationary_distribution(self.generator)


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    systems: tuple
    delta: float = 0.0
    overlap: str = "preempt"
    initial: Initial = "stationary"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        if not self.systems:
            raise ScenarioError("scenario needs at least one physical system")
        if not self.delta >= 0:
            raise ScenarioError(f"delta must be >= 0, got {self.delta}")
        if self.overlap not in OVERLAP_MODES:
            raise ScenarioError(f"overlap must be one of {OVERLAP_MODES}, got {self.overlap!r}")
        if self.initial != "stationary":
            init = tuple(int(s) for s in self.initial)
            if len(init) != self.K:
                raise ScenarioError(f"fixed initial state has {len(init)} entries, expected {self.K}")
            for i, (s, ps) in enumerate(zip(init, self.systems)):
                if not 0 <= s < ps.n:
                    raise ScenarioError(f"fixed initial state of system {i} out of range: {s}")
            object.__setattr__(self, "initial", init)

    @property
    def K(self) -> int:
        return len(self.systems)

    @property
    def generators(self) -> list:
        return [s.generator for s in self.systems]

    @property
    def weights(self) -> np.ndarray:
        return np.array([s.weight for s in self.systems], dtype=float)

    @property
    def sizes(self) -> tuple:
        return tuple(s.n for s in self.systems)

    def with_(self, **changes) -> "ScenarioSpec":
        kw = dict(systems=self.systems, delta=self.delta, overlap=self.overlap,
                  initial=self.initial, meta=self.meta)
        kw.update(changes)
        return ScenarioSpec(**kw)


def make_scenario(generators: Sequence, weights=None, labels=None, names=None,
                  delta: float = 0.0, overlap: str = "preempt",
                  initial: Initial = "stationary") -> ScenarioSpec:
    """Build a scenario from raw rate matrices."""
    k = len(generators)
    weights = [1.0] * k if weights is None else list(weights)
    if len(weights) != k:
        raise ScenarioError(f"{len(weights)} weights for {k} systems")
    labels = [None] * k if labels is None else list(labels)
    names = [f"ps{i + 1}" for i in range(k)] if names is None else list(names)
    systems = []
    for q, w, lab, name in zip(generators, weights, labels, names):
        g = q if isinstance(q, GeneratorMatrix) else validate_generator(q)
        systems.append(PhysicalSystem(g, float(w), lab, name))
    return ScenarioSpec(tuple(systems), float(delta), overlap, initial)


Q1 = ((-1.0, 1.0), (2.0, -2.0))
Q2 = ((-3.0, 3.0), (6.0, -6.0))


def two_system_example(delta: float = 0.0, overlap: str = "preempt") -> ScenarioSpec:
    """The two binary-state systems used throughout the numerical study, weights (5, 1)."""
    return make_scenario([Q1, Q2], weights=[5.0, 1.0], delta=delta, overlap=overlap)
