"""Simulated transmission fabric: quantum channels with taps, loss and
noise, a broadcast classical channel, and the session transcript.

A quantum channel hands each photon to its taps in registration order,
then rolls loss, then noise. Taps receive the state and must return a
replacement; the original is never delivered alongside the copy, which is
how the no-cloning rule is enforced structurally.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol, Union

from .errors import ConfigError
from .quantum import (
    Basis,
    PhotonState,
    RandomSource,
    StateLabel,
    random_label,
    state_from_label,
)


class NoiseKind(Enum):
    NONE = "none"
    BIT_FLIP = "bit_flip"
    DEPOLARIZING = "depolarizing"


@dataclass(frozen=True)
class NoiseModel:
    """Per-transmission noise. ``bit_flip`` applies the Pauli-X matrix
    [[0,1],[1,0]] with probability p; ``depolarizing`` replaces the state
    with a uniformly random canonical state with probability p."""

    kind: NoiseKind = NoiseKind.NONE
    p: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"noise probability must be in [0,1], got {self.p}")
        if self.kind is NoiseKind.NONE and self.p != 0.0:
            raise ConfigError("noise kind 'none' requires p = 0")

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls(NoiseKind.NONE, 0.0)

    @classmethod
    def bit_flip(cls, p: float) -> "NoiseModel":
        return cls(NoiseKind.BIT_FLIP, p)

    @classmethod
    def depolarizing(cls, p: float) -> "NoiseModel":
        return cls(NoiseKind.DEPOLARIZING, p)


class Lost:
    """Marker delivered in place of a photon absorbed in transit."""

    _instance: "Lost | None" = None

    def __new__(cls) -> "Lost":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "LOST"


LOST = Lost()

Delivered = Union[PhotonState, Lost]


class Tap(Protocol):
    """An adversary hook sitting on a quantum channel.

    ``relay`` takes ownership of the photon and returns the state that
    continues down the line. There is no copy operation: whatever the tap
    keeps, the line does not carry.
    """

    def relay(self, photon: PhotonState, rng: RandomSource) -> PhotonState: ...


@dataclass
class QuantumChannel:
    """One directed quantum leg between two parties."""

    name: str = ""
    noise: NoiseModel = field(default_factory=NoiseModel.none)
    loss: float = 0.0
    taps: list[Tap] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss <= 1.0:
            raise ConfigError(f"loss must be in [0,1], got {self.loss}")


def transmit(channel: QuantumChannel, photon: PhotonState, rng: RandomSource) -> Delivered:
    """Send one photon down a channel: taps, then loss, then noise.

    Loss yields the explicit ``LOST`` marker, never a silent drop. Draws
    from ``rng`` only for effects that are actually configured, so an
    identity channel consumes no randomness.
    """
    for tap in channel.taps:
        photon = tap.relay(photon, rng)
    if channel.loss > 0.0 and rng.random() < channel.loss:
        return LOST
    noise = channel.noise
    if noise.kind is NoiseKind.BIT_FLIP and noise.p > 0.0:
        if rng.random() < noise.p:
            photon = PhotonState(photon.beta, photon.alpha)
    elif noise.kind is NoiseKind.DEPOLARIZING and noise.p > 0.0:
        if rng.random() < noise.p:
            photon = state_from_label(random_label(rng))
    return photon


@dataclass(frozen=True)
class Announcement:
    """One classical broadcast: sender, a label naming what is being
    announced, and a JSON-serializable payload."""

    seq: int
    sender: str
    label: str
    payload: Any


class Transcript:
    """Append-only event log of a session.

    Events are plain dicts with a ``kind`` key (quantum_send,
    quantum_deliver, announcement, measurement, decision, plus scheduling
    events) and a ``stage`` key naming the protocol step. Serialization is
    canonical JSON Lines, so two identically seeded sessions produce
    byte-identical transcripts.
    """

    def __init__(self) -> None:
        self.events: list[dict[str, Any]] = []

    def record(self, kind: str, stage: str, **fields: Any) -> None:
        event: dict[str, Any] = {"kind": kind, "stage": stage}
        event.update(fields)
        self.events.append(event)

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps(ev, sort_keys=True, separators=(",", ":")) for ev in self.events
        )


class ClassicalChannel:
    """Authenticated broadcast channel: append-only, identical order for
    every observer, readable by the adversary."""

    def __init__(self, transcript: Transcript | None = None) -> None:
        self.log: list[Announcement] = []
        self._transcript = transcript

    def announce(self, sender: str, label: str, payload: Any, stage: str = "") -> Announcement:
        entry = Announcement(seq=len(self.log), sender=sender, label=label, payload=payload)
        self.log.append(entry)
        if self._transcript is not None:
            self._transcript.record(
                "announcement", stage, seq=entry.seq, sender=sender, label=label, payload=payload
            )
        return entry


def measurement_event(
    transcript: Transcript | None,
    stage: str,
    party: str,
    position: int,
    basis: Basis,
    outcome: int,
) -> None:
    """Log one measurement if a transcript is attached."""
    if transcript is not None:
        transcript.record(
            "measurement", stage, party=party, position=position, basis=basis.value, outcome=outcome
        )


def label_payload(label: StateLabel) -> dict[str, Any]:
    """JSON form of a state label, used in public initial-state disclosures."""
    return {"basis": label.basis.value, "bit": label.bit}
