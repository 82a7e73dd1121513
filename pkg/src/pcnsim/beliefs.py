"""Failure memories and the success-probability estimates derived from them.

Every party remembers, per directed hop, when it last saw a relevant failure;
only the most recent failure matters.  Three observation kinds exist:

* an intermediary's record of a payment that failed downstream after it had
  forwarded it,
* a sender's record of a payment of its own that failed after the hop's
  owner had locked, and
* a sender's record of the hop's owner refusing to lock.

Estimates recover from a failure with exponential half-life decay toward the
apriori probability.  Senders observe only their own payments, so their
estimates use a longer half-life (a factor tau > 1) than intermediaries'.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

from .pathfinding import channel_success_probability

__all__ = [
    "ObservationKind",
    "ObservationKey",
    "BeliefStore",
    "ClockRegressionError",
]


class ClockRegressionError(ValueError):
    """A failure was recorded at a time earlier than an existing record."""


class ObservationKind(Enum):
    INTERMEDIARY_DOWNSTREAM_FAILURE = "intermediary_downstream_failure"
    SENDER_POST_LOCK_FAILURE = "sender_post_lock_failure"
    SENDER_REFUSAL_TO_LOCK = "sender_refusal_to_lock"


class ObservationKey(NamedTuple):
    observer: str
    from_node: str
    to_node: str
    kind: ObservationKind


@dataclass
class BeliefStore:
    """Per-observer last-failure timestamps plus the decay parameters.

    ``tau`` scales the intermediary half-life up for sender-kind
    observations and must exceed 1.
    """

    apriori: float = 0.6
    half_life_intermediary: float = 30.0
    tau: float = 2.0
    _last_failure: dict[ObservationKey, float] = field(default_factory=dict)
    _latest_time: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.apriori <= 1.0:
            raise ValueError("apriori must be in [0, 1]")
        if self.half_life_intermediary <= 0:
            raise ValueError("half_life_intermediary must be > 0")
        if self.tau <= 1.0:
            raise ValueError("tau must be > 1")

    @property
    def half_life_sender(self) -> float:
        return self.tau * self.half_life_intermediary

    def half_life_for(self, kind: ObservationKind) -> float:
        if kind is ObservationKind.INTERMEDIARY_DOWNSTREAM_FAILURE:
            return self.half_life_intermediary
        return self.half_life_sender

    def record_failure(self, key: ObservationKey, time: float) -> None:
        """Overwrite the last-failure time for ``key``; clock must not go back."""
        if time < self._latest_time:
            raise ClockRegressionError(
                f"failure at t={time} precedes latest recorded t={self._latest_time}"
            )
        self._latest_time = time
        self._last_failure[key] = time

    def last_failure_time(self, key: ObservationKey) -> Optional[float]:
        return self._last_failure.get(key)

    def success_estimate(self, key: ObservationKey, now: float) -> float:
        """Success probability for ``key`` at simulated time ``now``."""
        last = self._last_failure.get(key)
        if last is None:
            elapsed = None
        else:
            if now < last:
                raise ValueError(f"now={now} precedes recorded failure at {last}")
            elapsed = now - last
        return channel_success_probability(
            elapsed, self.apriori, self.half_life_for(key.kind)
        )

    def sender_buffer(
        self, sender: str, from_node: str, to_node: str, now: float
    ) -> float:
        """Additive safety margin for a hop: 0.1 * (1 - lock-willingness estimate).

        Grows toward 0.1 right after the hop's owner refused to lock and
        shrinks toward 0.1 * (1 - apriori) as refusals age.
        """
        willingness = self.success_estimate(
            ObservationKey(
                sender, from_node, to_node, ObservationKind.SENDER_REFUSAL_TO_LOCK
            ),
            now,
        )
        return 0.1 * (1.0 - willingness)

    def path_success_probability(
        self, observer: str, from_node: str, to_node: str, now: float
    ) -> float:
        """Route-planning probability for a hop, from the observer's history.

        A payment fails at the hop whose owner refuses to lock, so the
        sender's view of "this channel failed" is its refusal record.
        """
        return self.success_estimate(
            ObservationKey(
                observer, from_node, to_node, ObservationKind.SENDER_REFUSAL_TO_LOCK
            ),
            now,
        )

    def dump(self) -> dict[str, float]:
        """Debug map of observation keys to last-failure times."""
        return {
            f"{k.observer}|{k.from_node}->{k.to_node}|{k.kind.value}": t
            for k, t in sorted(self._last_failure.items(), key=lambda kv: str(kv[0]))
        }

    def dump_json(self) -> str:
        return json.dumps(self.dump(), indent=2, sort_keys=True)
