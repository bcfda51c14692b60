"""Twinning policies.

PRTP (pull) issues queries from the monitor side as a Poisson process.
PPTP (push) lets every physical transition trigger a query with a fixed
probability chosen so the long-run query rate matches the target. The
periodic baseline spaces queries evenly, and ``lookup`` replays a solved
MDP policy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from .ctmc import total_event_rate
from .errors import PolicyError, UnknownState
from .rng import RngStream

POLICY_KINDS = ("prtp", "pptp", "periodic", "lookup", "never")


@dataclass(frozen=True, eq=False)
class PolicySpec:
    kind: str
    rate: float = 0.0
    solution: Optional[Any] = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in POLICY_KINDS:
            raise PolicyError(f"unknown policy kind {self.kind!r}; choose from {POLICY_KINDS}")
        if kind in ("prtp", "pptp", "periodic"):
            if not self.rate > 0:
                raise PolicyError(f"{kind} needs a positive rate, got {self.rate}")
            object.__setattr__(self, "rate", float(self.rate))
        if kind == "lookup" and self.solution is None:
            raise PolicyError("lookup policy needs a solved MDP")

    @property
    def label(self) -> str:
        return self.kind

    @classmethod
    def prtp(cls, rate):
        return cls("prtp", rate)

    @classmethod
    def pptp(cls, rate):
        return cls("pptp", rate)

    @classmethod
    def periodic(cls, rate):
        return cls("periodic", rate)

    @classmethod
    def lookup(cls, solution):
        return cls("lookup", solution=solution)

    @classmethod
    def never(cls):
        return cls("never")


def prtp_next_query(rng: RngStream, rate: float) -> float:
    if not rate > 0:
        raise PolicyError(f"rate must be > 0, got {rate}")
    return rng.gen.exponential(1.0 / rate)


def pptp_probability(scenario, lambda_avg: float) -> float:
    """Per-transition twinning probability min(1, lambda_avg / sigma)."""
    if not lambda_avg > 0:
        raise PolicyError(f"lambda_avg must be > 0, got {lambda_avg}")
    return min(1.0, lambda_avg / total_event_rate(scenario))


def pptp_on_transition(rng: RngStream, p_t: float) -> bool:
    if not 0.0 <= p_t <= 1.0:
        raise PolicyError(f"p_t must lie in [0, 1], got {p_t}")
    return bool(rng.gen.random() < p_t)


def periodic_next_query(rate: float) -> float:
    if not rate > 0:
        raise PolicyError(f"rate must be > 0, got {rate}")
    return 1.0 / rate


def lookup_decide(solution, state, rng: Optional[RngStream] = None) -> str:
    """Tabulated action (``"twin"`` or ``"idle"``) for an MDP state ``(S, S_hat, latch)``.

    A state with a fractional twin probability needs ``rng`` to draw the action.
    """
    try:
        idx = solution.model.index[solution.model.canonical(state)]
    except (KeyError, ValueError, TypeError) as exc:
        raise UnknownState(f"state {state!r} is not in the solved model") from exc
    p = float(solution.policy[idx])
    if p >= 1.0:
        return "twin"
    if p <= 0.0:
        return "idle"
    if rng is None:
        raise PolicyError(f"state {state!r} is randomized (p={p:.6g}); pass an rng")
    return "twin" if rng.gen.random() < p else "idle"
