"""Attack strategies and their measurable consequences.

Strategies come in two shapes: passive taps installed on a quantum leg
(the line hands each photon over and carries whatever the tap returns),
and corrupt-party behaviors that reroute the photon flow of a controlled
session. Every strategy can turn a finished session into an
``AttackReport`` with the detection flag, the check error rate, and the
adversary's message-guess accuracy where one exists.

Security statements here are empirical: the simulator demonstrates
resistance against exactly these strategies, nothing stronger.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import ConfigError
from .fabric import ClassicalChannel, QuantumChannel
from .protocol import SessionOutcome
from .quantum import (
    Basis,
    OpLabel,
    PhotonState,
    RandomSource,
    StateLabel,
    measure,
    state_from_label,
)


@dataclass(frozen=True)
class AttackReport:
    """Outcome of one attacked session from the adversary's perspective.
    ``message_guess_accuracy`` is None for strategies that never output a
    message guess."""

    attack: str
    detected: bool
    check_error_rate: float
    message_guess_accuracy: float | None
    metadata: dict[str, Any] = field(default_factory=dict)


def measure_and_resend(
    photon: PhotonState, basis: Basis, rng: RandomSource
) -> tuple[int, PhotonState]:
    """The intercept-resend primitive: measure in the chosen basis and
    forward the matching eigenstate. Nondisturbing exactly when the basis
    matches the photon's preparation basis."""
    outcome = measure(photon, basis, rng)
    return outcome, state_from_label(StateLabel(basis, outcome))


class MeasureResendTap:
    """Channel tap measuring every photon in a freshly drawn uniform basis
    and forwarding the eigenstate. Keeps classical records only; the
    original state is surrendered to the measurement."""

    def __init__(self) -> None:
        self.records: list[tuple[Basis, int]] = []

    def relay(self, photon: PhotonState, rng: RandomSource) -> PhotonState:
        basis = Basis.Z if rng.integers(0, 2) == 0 else Basis.X
        outcome, resent = measure_and_resend(photon, basis, rng)
        self.records.append((basis, outcome))
        return resent


class PassiveNone:
    """No adversary. Exists so experiment configs always name a strategy
    and reports stay uniform."""

    name = "none"
    kind = "passive"

    def install(
        self,
        forward: QuantumChannel,
        back: QuantumChannel,
        public: ClassicalChannel,
        rng: RandomSource,
    ) -> None:
        pass

    def report(self, outcome: SessionOutcome) -> AttackReport:
        return AttackReport(
            attack=self.name,
            detected=outcome.aborted,
            check_error_rate=outcome.measured_error_rate,
            message_guess_accuracy=None,
            metadata={"n_check": outcome.n_check},
        )


class InterceptResend:
    """Eve intercepts the prepared sequence on its way to the encoder,
    measures each photon in a uniformly random basis, and resends the
    eigenstate. Mismatched bases randomize the state, so each check photon
    errs with probability 1/4."""

    name = "intercept_resend"
    kind = "passive"

    def __init__(self) -> None:
        self.tap = MeasureResendTap()

    def install(
        self,
        forward: QuantumChannel,
        back: QuantumChannel,
        public: ClassicalChannel,
        rng: RandomSource,
    ) -> None:
        forward.taps.append(self.tap)

    def report(self, outcome: SessionOutcome) -> AttackReport:
        return AttackReport(
            attack=self.name,
            detected=outcome.aborted,
            check_error_rate=outcome.measured_error_rate,
            message_guess_accuracy=None,
            metadata={"n_check": outcome.n_check, "n_tapped": len(self.tap.records)},
        )


class ReturnLegTap:
    """Eve measures every photon of the returned (rearranged, encoded)
    sequence in a random basis and guesses the message bits.

    Without the secret order and the preparation record her data is
    uncorrelated with the message; the disclosure flags hand her either
    secret "magically" so experiments can isolate what each one protects.
    Her measurements disturb the check photons, so the session normally
    aborts; the guess is evaluated regardless.
    """

    name = "return_leg_tap"
    kind = "passive"

    def __init__(
        self, disclose_permutation: bool = False, disclose_initial_states: bool = False
    ) -> None:
        if disclose_initial_states and not disclose_permutation:
            raise ConfigError(
                "disclosing initial states is only meaningful together with the permutation"
            )
        self.disclose_permutation = disclose_permutation
        self.disclose_initial_states = disclose_initial_states
        self.tap = MeasureResendTap()
        self._public: ClassicalChannel | None = None
        self._true_positions: list[int] | None = None
        self._true_origins: list[int] | None = None
        self._labels: Sequence[StateLabel] | None = None

    def install(
        self,
        forward: QuantumChannel,
        back: QuantumChannel,
        public: ClassicalChannel,
        rng: RandomSource,
    ) -> None:
        back.taps.append(self.tap)
        self._public = public

    def receive_secrets(
        self,
        message_positions: Sequence[int],
        message_origins: Sequence[int],
        labels: Sequence[StateLabel],
    ) -> None:
        """Experiment instrumentation: hand Eve the true position of each
        message bit and/or the preparation record, per the flags."""
        if self.disclose_permutation:
            self._true_positions = list(message_positions)
            self._true_origins = list(message_origins)
        if self.disclose_initial_states:
            self._labels = list(labels)

    def message_guess(self, n_message: int) -> list[int]:
        """Best guess of the message bits from whatever Eve holds."""
        if self._true_positions is not None:
            positions = self._true_positions
        else:
            # Without the permutation she assumes the returned order is the
            # message order: k-th non-check position carries bit k.
            check_positions: set[int] = set()
            if self._public is not None:
                for entry in self._public.log:
                    if entry.label == "check_open":
                        check_positions = set(entry.payload["positions"])
                        break
            positions = [
                p for p in range(len(self.tap.records)) if p not in check_positions
            ][:n_message]
        guesses = []
        for k, pos in enumerate(positions):
            _basis, outcome = self.tap.records[pos]
            guess = outcome
            if self._labels is not None and self._true_origins is not None:
                guess ^= self._labels[self._true_origins[k]].bit
            guesses.append(guess)
        return guesses

    def report(self, outcome: SessionOutcome) -> AttackReport:
        sent = outcome.message_sent
        guesses = self.message_guess(len(sent))
        hits = sum(1 for g, s in zip(guesses, sent) if g == s)
        compared = min(len(guesses), len(sent))
        accuracy = hits / compared if compared else 0.0
        return AttackReport(
            attack=self.name,
            detected=outcome.aborted,
            check_error_rate=outcome.measured_error_rate,
            message_guess_accuracy=accuracy,
            metadata={
                "n_check": outcome.n_check,
                "n_guessed": compared,
                "disclose_permutation": self.disclose_permutation,
                "disclose_initial_states": self.disclose_initial_states,
            },
        )


class BypassReporter:
    """Check behavior of the corrupt sender in the bypass attack.

    She holds photons the controllers never touched, so measuring in the
    preparation basis reveals the encoder's flip exactly. What she cannot
    know before the flip round is the controllers' net flip parity over
    the decoys, so she adds a coin-flip guess of it to her report.
    """

    def __init__(
        self,
        labels: Sequence[StateLabel],
        photons_by_position: Mapping[int, PhotonState],
        rng: RandomSource,
    ) -> None:
        self._labels = labels
        self._photons = photons_by_position
        self._rng = rng

    def report(self, position: int, origin: int, h_parity: int) -> int:
        outcome = measure(self._photons[position], self._labels[origin].basis, self._rng)
        parity_guess = int(self._rng.integers(0, 2))
        return outcome ^ parity_guess


class FakeSequenceBypass:
    """The corrupt sender routes the true photons straight to the encoder
    and feeds decoys to the controller chain, hoping to decode without any
    release. Each check photon survives her parity guess with probability
    1/2, so even short checks catch her. With no controllers there is
    nothing to bypass and the behavior degenerates to honest."""

    name = "fake_sequence_bypass"
    kind = "bypass"

    def make_reporter(
        self,
        labels: Sequence[StateLabel],
        photons_by_position: Mapping[int, PhotonState],
        rng: RandomSource,
    ) -> BypassReporter:
        return BypassReporter(labels, photons_by_position, rng)

    def report(self, outcome: SessionOutcome) -> AttackReport:
        accuracy = None
        if not outcome.aborted and outcome.decoded_bits is not None:
            sent = outcome.message_sent
            hits = sum(
                1
                for bit, k in zip(outcome.decoded_bits, outcome.decoded_positions or [])
                if bit == sent[k]
            )
            accuracy = hits / len(outcome.decoded_bits) if outcome.decoded_bits else 0.0
        return AttackReport(
            attack=self.name,
            detected=outcome.aborted,
            check_error_rate=outcome.measured_error_rate,
            message_guess_accuracy=accuracy,
            metadata={"n_check": outcome.n_check},
        )


class CollusionReporter:
    """Check behavior of the corrupt sender when the final controller
    colludes: she reports the plain preparation-basis outcome and leaves
    the parity bookkeeping to her partner's announcements."""

    def __init__(
        self,
        labels: Sequence[StateLabel],
        photons_by_position: Mapping[int, PhotonState],
        rng: RandomSource,
    ) -> None:
        self._labels = labels
        self._photons = photons_by_position
        self._rng = rng

    def report(self, position: int, origin: int, h_parity: int) -> int:
        return measure(self._photons[position], self._labels[origin].basis, self._rng)


class ColluderAgent:
    """The final controller's fabricated announcements.

    It never touched the photons it forwarded, so it invents operations:
    no H in the first round, and in the flip round it tries to cancel the
    honest controllers' total flip parity. Speaking last it cancels
    exactly; speaking earlier it must guess the parity of the voices still
    to come.
    """

    def __init__(self, rng: RandomSource) -> None:
        self._rng = rng
        self.announced_flips: dict[int, int] = {}

    def announce_h(self, origin: int, heard: Sequence[int]) -> bool:
        return False

    def announce_flip(self, origin: int, heard: Sequence[int], remaining: int) -> int:
        heard_parity = sum(heard) % 2
        if remaining == 0:
            flip = heard_parity
        else:
            flip = heard_parity ^ int(self._rng.integers(0, 2))
        self.announced_flips[origin] = flip
        return flip


class CollusionAttack:
    """Corrupt sender plus the final controller.

    Under the flawed fixed announcement order (the colluder always speaks
    last) the pair is never detected and recovers the whole message; under
    the per-photon random order the colluder speaks last only with
    probability 1/m and must guess otherwise, giving per-photon detection
    (1 - 1/m)/2.
    """

    name = "collusion"
    kind = "collusion"

    def __init__(self, schedule_variant: str = "random_order") -> None:
        if schedule_variant not in ("random_order", "fixed_order"):
            raise ConfigError(f"unknown schedule variant {schedule_variant!r}")
        self.schedule_variant = schedule_variant
        self._colluder: ColluderAgent | None = None

    def make_reporter(
        self,
        labels: Sequence[StateLabel],
        photons_by_position: Mapping[int, PhotonState],
        rng: RandomSource,
    ) -> CollusionReporter:
        return CollusionReporter(labels, photons_by_position, rng)

    def make_colluder(self, rng: RandomSource) -> ColluderAgent:
        self._colluder = ColluderAgent(rng)
        return self._colluder

    def release_record(self, origins: Sequence[int]) -> dict[int, OpLabel]:
        """A release consistent with whatever the colluder announced
        during the check; unannounced positions claim identity."""
        flips = self._colluder.announced_flips if self._colluder is not None else {}
        return {
            orig: (OpLabel.U if flips.get(orig, 0) else OpLabel.I) for orig in origins
        }

    def report(self, outcome: SessionOutcome) -> AttackReport:
        accuracy = None
        if not outcome.aborted and outcome.decoded_bits is not None:
            sent = outcome.message_sent
            hits = sum(
                1
                for bit, k in zip(outcome.decoded_bits, outcome.decoded_positions or [])
                if bit == sent[k]
            )
            accuracy = hits / len(outcome.decoded_bits) if outcome.decoded_bits else 0.0
        return AttackReport(
            attack=self.name,
            detected=outcome.aborted,
            check_error_rate=outcome.measured_error_rate,
            message_guess_accuracy=accuracy,
            metadata={"n_check": outcome.n_check, "schedule_variant": self.schedule_variant},
        )


def intercept_resend_detection(n_check: int) -> float:
    """Probability that at least one of n_check check photons errs under
    intercept-resend (per-photon error rate 1/4)."""
    return 1.0 - 0.75**n_check


def collusion_photon_detection(m: int) -> float:
    """Per-check-photon detection probability of the random-order
    collusion with m controllers: the colluder speaks last with
    probability 1/m, otherwise his parity guess fails half the time."""
    return (1.0 - 1.0 / m) / 2.0


def bypass_photon_pass_probability() -> float:
    """Per-check-photon pass probability of the bypass attack: the
    controllers' net flip parity is a coin toss to the corrupt sender."""
    return 0.5


ATTACK_REGISTRY: dict[str, type] = {
    PassiveNone.name: PassiveNone,
    InterceptResend.name: InterceptResend,
    ReturnLegTap.name: ReturnLegTap,
    FakeSequenceBypass.name: FakeSequenceBypass,
    CollusionAttack.name: CollusionAttack,
}


def build_attack(name: str, params: Mapping[str, Any] | None = None) -> Any:
    """Instantiate a strategy by config name."""
    if name not in ATTACK_REGISTRY:
        raise ConfigError(
            f"unknown attack {name!r}; known: {sorted(ATTACK_REGISTRY)}"
        )
    return ATTACK_REGISTRY[name](**dict(params or {}))
