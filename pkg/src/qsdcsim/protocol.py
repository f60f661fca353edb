"""Two-party direct-communication protocol over rearranged single photons.

Roles: Alice prepares the photons and finally reads the message; Bob is
the sender, encoding his bits as identity / bit-flip operations before
returning the photons in a secret order.

One session walks the stages in order:

  prepare   Alice draws N states uniformly from the four-state alphabet
            and sends the sequence to Bob.
  encode    Bob picks a random check subset, applies random I/U to it,
            and writes his message on the rest (0 -> I, 1 -> U).
  shuffle   Bob applies a secret uniformly random permutation and sends
            the reordered sequence back.
  receipt   Alice confirms which positions arrived.
  check     Bob discloses the check positions, their origin within the
            original order, and his check operations; Alice measures each
            check photon in its preparation basis and evaluates the error
            rate against the configured threshold.
  reveal    Only after a passing check does Bob publish the order of the
            message positions, letting Alice measure and decode.

Lost photons are announced by the receiver after every transmission and
dropped from both parties' bookkeeping, so indices stay aligned under a
lossy channel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol as TypingProtocol, Sequence

import numpy as np

from .errors import ConfigError, ProtocolError
from .fabric import (
    ClassicalChannel,
    Lost,
    NoiseModel,
    QuantumChannel,
    Transcript,
    measurement_event,
    transmit,
)
from .quantum import (
    OpLabel,
    PhotonState,
    RandomSource,
    StateLabel,
    apply_op,
    measure,
    random_labels,
    state_from_label,
)

#: Message-bit encoding: operation applied for bit 0 and bit 1.
OP_FOR_BIT = (OpLabel.I, OpLabel.U)


@dataclass
class PSequence:
    """Alice's prepared sequence: her private preparation record plus the
    positionally aligned photons."""

    labels: list[StateLabel]
    photons: list[PhotonState]

    def __post_init__(self) -> None:
        if len(self.labels) == 0:
            raise ConfigError("photon sequence must be nonempty")
        if len(self.labels) != len(self.photons):
            raise ProtocolError("labels and photons must align positionally")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class CheckSet:
    """Positions sacrificed to the eavesdropping check, within the
    sequence being encoded."""

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.positions) == 0:
            raise ConfigError("check set must be nonempty")
        if len(set(self.positions)) != len(self.positions):
            raise ProtocolError("check positions must be distinct")
        object.__setattr__(self, "positions", tuple(sorted(self.positions)))

    def __contains__(self, position: int) -> bool:
        return position in set(self.positions)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class Permutation:
    """Bijection on sequence positions. ``mapping[j]`` is the source index
    of the element placed at position j."""

    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ProtocolError(f"not a permutation of [0,{len(self.mapping)}): {self.mapping}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def random(cls, n: int, rng: RandomSource) -> "Permutation":
        return cls(tuple(int(i) for i in rng.permutation(n)))

    def apply(self, items: Sequence[Any]) -> list[Any]:
        if len(items) != len(self.mapping):
            raise ProtocolError("sequence length does not match permutation size")
        return [items[src] for src in self.mapping]

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.mapping)
        for new_pos, src in enumerate(self.mapping):
            inv[src] = new_pos
        return Permutation(tuple(inv))

    def __len__(self) -> int:
        return len(self.mapping)


@dataclass(frozen=True)
class CheckAnnouncement:
    """Public disclosure opening the check: for every check photon its
    position in the returned sequence, its origin in the prepared order,
    and the encoder's operation on it."""

    positions: tuple[int, ...]
    origins: tuple[int, ...]
    ops: tuple[OpLabel, ...]

    def __post_init__(self) -> None:
        if not len(self.positions) == len(self.origins) == len(self.ops):
            raise ProtocolError("check announcement fields must align")
        if len(set(self.positions)) != len(self.positions):
            raise ProtocolError("check announcement repeats a position")


@dataclass(frozen=True)
class SessionConfig:
    """Everything that determines a session, together with the seed.

    ``check_count`` pins the check-set size exactly; when absent the size
    is ``round(check_fraction * n)`` for the sequence length n at selection
    time. The error threshold is a strict bound: the session aborts when
    the measured rate exceeds it.
    """

    n_photons: int
    check_fraction: float = 0.25
    check_count: int | None = None
    error_threshold: float = 0.05
    noise: NoiseModel = field(default_factory=NoiseModel.none)
    loss: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_photons < 1:
            raise ConfigError(f"n_photons must be >= 1, got {self.n_photons}")
        if not 0.0 < self.check_fraction < 1.0:
            raise ConfigError(f"check_fraction must be in (0,1), got {self.check_fraction}")
        if not 0.0 <= self.error_threshold <= 1.0:
            raise ConfigError(f"error_threshold must be in [0,1], got {self.error_threshold}")
        if not 0.0 <= self.loss <= 1.0:
            raise ConfigError(f"loss must be in [0,1], got {self.loss}")
        size = self.check_size(self.n_photons)
        if size < 1:
            raise ConfigError("configuration yields an empty check set")
        if self.n_photons - size < 1:
            raise ConfigError("configuration leaves no message positions")

    def check_size(self, n: int) -> int:
        if self.check_count is not None:
            if not 1 <= self.check_count <= self.n_photons - 1:
                raise ConfigError(f"check_count must be in [1, n_photons-1], got {self.check_count}")
            return self.check_count
        return int(round(self.check_fraction * n))


@dataclass
class SessionOutcome:
    """Result of one session. ``decoded_bits`` is present exactly when the
    session was not aborted; under loss it is the sent message restricted
    to surviving positions, with ``decoded_positions`` giving the indices
    into the sent message that each decoded bit corresponds to."""

    aborted: bool
    measured_error_rate: float
    message_sent: list[int]
    decoded_bits: list[int] | None
    decoded_positions: list[int] | None
    n_check: int
    transcript: Transcript | None


class SessionAttack(TypingProtocol):
    """Duck interface a two-party attack strategy implements.

    ``install`` lets the strategy register channel taps and keep a handle
    on the public broadcast log before the session starts.
    """

    name: str

    def install(
        self,
        forward: QuantumChannel,
        back: QuantumChannel,
        public: ClassicalChannel,
        rng: RandomSource,
    ) -> None: ...


def prepare_p_sequence(n: int, rng: RandomSource) -> PSequence:
    """Draw n preparation labels independently and uniformly from the
    four-state alphabet and materialize the photons."""
    if n < 1:
        raise ConfigError(f"sequence length must be >= 1, got {n}")
    labels = random_labels(n, rng)
    photons = [state_from_label(lbl) for lbl in labels]
    return PSequence(labels=labels, photons=photons)


def select_check_set(n: int, fraction: float, rng: RandomSource) -> CheckSet:
    """Uniformly random check subset of size round(fraction * n)."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"check fraction must be in (0,1), got {fraction}")
    size = int(round(fraction * n))
    return select_check_positions(n, size, rng)


def select_check_positions(n: int, size: int, rng: RandomSource) -> CheckSet:
    """Uniformly random check subset of an explicit size."""
    if size < 1:
        raise ConfigError("check set would be empty")
    if size > n:
        raise ConfigError(f"check set size {size} exceeds sequence length {n}")
    positions = rng.choice(n, size=size, replace=False)
    return CheckSet(tuple(int(p) for p in positions))


def encode(
    photons: Sequence[PhotonState],
    check: CheckSet | None,
    message: Sequence[int],
    rng: RandomSource,
) -> tuple[list[PhotonState], list[OpLabel], dict[int, OpLabel]]:
    """Apply the encoder's operations position by position.

    Check positions receive an independently uniform draw from {I, U},
    recorded privately. The remaining positions carry the message bits in
    ascending position order (0 -> I, 1 -> U). Returns the transformed
    photons, the full operation list, and the private check-op record.
    """
    n = len(photons)
    check_positions = set(check.positions) if check is not None else set()
    if any(p >= n for p in check_positions):
        raise ProtocolError("check set references a position beyond the sequence")
    if len(message) != n - len(check_positions):
        raise ProtocolError(
            f"message length {len(message)} != {n} - {len(check_positions)} free positions"
        )
    ops: list[OpLabel] = []
    check_record: dict[int, OpLabel] = {}
    out: list[PhotonState] = []
    next_bit = iter(message)
    for pos in range(n):
        if pos in check_positions:
            op = OP_FOR_BIT[int(rng.integers(0, 2))]
            check_record[pos] = op
        else:
            bit = next(next_bit)
            if bit not in (0, 1):
                raise ProtocolError(f"message bits must be 0/1, got {bit!r}")
            op = OP_FOR_BIT[bit]
        ops.append(op)
        out.append(apply_op(op, photons[pos]))
    return out, ops, check_record


def rearrange(
    photons: Sequence[PhotonState], rng: RandomSource
) -> tuple[list[PhotonState], Permutation]:
    """Reorder the sequence by a uniformly random secret permutation."""
    perm = Permutation.random(len(photons), rng)
    return perm.apply(photons), perm


def run_check(
    alice_labels: Sequence[StateLabel],
    announced: CheckAnnouncement,
    alice_measurements: Mapping[int, int],
) -> float:
    """Evaluate the eavesdropping check from public data plus Alice's
    preparation record and measurement outcomes.

    For each check photon the expected outcome is the initial bit XOR'd
    with the encoder's announced bit-flip. Returns the mismatch fraction.
    """
    if len(announced.positions) == 0:
        raise ProtocolError("check announcement is empty")
    if set(alice_measurements) != set(announced.positions):
        raise ProtocolError("measurements must cover exactly the announced check positions")
    errors = 0
    for pos, orig, op in zip(announced.positions, announced.origins, announced.ops):
        if not 0 <= orig < len(alice_labels):
            raise ProtocolError(f"check announcement references unknown origin {orig}")
        expected = alice_labels[orig].bit ^ (1 if op is OpLabel.U else 0)
        if alice_measurements[pos] != expected:
            errors += 1
    return errors / len(announced.positions)


def reveal_order_and_decode(
    alice_labels: Sequence[StateLabel],
    message_order: Sequence[tuple[int, int]],
    alice_measurements: Mapping[int, int],
    check_passed: bool,
) -> list[int]:
    """Decode the message once the secret order of the message positions
    is published.

    ``message_order`` pairs each returned-sequence position with its
    origin in the prepared order; measurements are keyed by the former.
    Bits come out in ascending origin order: 0 when the outcome equals the
    initial bit, 1 when it is flipped.
    """
    if not check_passed:
        raise ProtocolError("message order must not be consumed before the check decision")
    by_origin = sorted(message_order, key=lambda pair: pair[1])
    bits: list[int] = []
    for pos, orig in by_origin:
        if not 0 <= orig < len(alice_labels):
            raise ProtocolError(f"message order references unknown origin {orig}")
        if pos not in alice_measurements:
            raise ProtocolError(f"no measurement recorded for position {pos}")
        bits.append(alice_measurements[pos] ^ alice_labels[orig].bit)
    return bits


def transmit_sequence(
    channel: QuantumChannel,
    photons: Sequence[PhotonState],
    rng: RandomSource,
    transcript: Transcript | None,
    stage: str,
) -> list[PhotonState | Lost]:
    """Send a whole sequence down a channel, logging the send and the set
    of arrived positions."""
    if transcript is not None:
        transcript.record("quantum_send", stage, leg=channel.name, count=len(photons))
    delivered = [transmit(channel, ph, rng) for ph in photons]
    if transcript is not None:
        arrived = [i for i, ph in enumerate(delivered) if not isinstance(ph, Lost)]
        transcript.record("quantum_deliver", stage, leg=channel.name, arrived=arrived)
    return delivered


def run_session(
    config: SessionConfig,
    attack: SessionAttack | None = None,
    message: Sequence[int] | None = None,
    transcript: Transcript | None = None,
) -> SessionOutcome:
    """Run one full two-party session.

    ``message`` fixes the sender's bits (its length must match the free
    positions after the check set is carved out); by default random bits
    are drawn. An ``attack`` may install taps on either quantum leg before
    any photon flies.
    """
    rng = np.random.default_rng(config.seed)
    public = ClassicalChannel(transcript)
    forward = QuantumChannel(name="alice->bob", noise=config.noise, loss=config.loss)
    back = QuantumChannel(name="bob->alice", noise=config.noise, loss=config.loss)
    if attack is not None:
        attack.install(forward, back, public, rng)

    # Preparation: Alice's labels stay private; only the photons travel.
    sequence = prepare_p_sequence(config.n_photons, rng)
    delivered = transmit_sequence(forward, sequence.photons, rng, transcript, "prepare")

    # Receiver announces arrivals; both sides drop lost positions.
    surviving_origins = [i for i, ph in enumerate(delivered) if not isinstance(ph, Lost)]
    public.announce("bob", "arrived_forward", surviving_origins, stage="prepare")
    bob_photons: list[PhotonState] = [delivered[i] for i in surviving_origins]  # type: ignore[misc]
    n_alive = len(bob_photons)
    if n_alive < 2:
        raise ProtocolError("too few photons survived to form a check set and a message")

    # Encoding: random ops on the check subset, message bits on the rest.
    size = config.check_size(n_alive)
    if size >= n_alive:
        raise ProtocolError("check set would leave no message positions after loss")
    check = select_check_positions(n_alive, size, rng)
    n_message = n_alive - len(check)
    if message is None:
        message_bits = [int(b) for b in rng.integers(0, 2, size=n_message)]
    else:
        if len(message) != n_message:
            raise ConfigError(f"message length {len(message)} != {n_message} free positions")
        message_bits = [int(b) for b in message]
    encoded, _ops, check_record = encode(bob_photons, check, message_bits, rng)

    # Shuffle: the permutation exists only in Bob's head at this point.
    shuffled, perm = rearrange(encoded, rng)
    if transcript is not None:
        transcript.record("event", "shuffle", party="bob", count=len(shuffled))

    # Experiment instrumentation: a strategy may ask for secrets that the
    # protocol itself never discloses, to isolate what each one protects.
    if attack is not None and hasattr(attack, "receive_secrets"):
        check_srcs = set(check.positions)
        origins_by_index = sorted(
            surviving_origins[i] for i in range(n_alive) if i not in check_srcs
        )
        inverse = perm.inverse()
        position_of_origin = {
            surviving_origins[src]: inverse.mapping[src]
            for src in range(n_alive)
            if src not in check_srcs
        }
        attack.receive_secrets(
            [position_of_origin[orig] for orig in origins_by_index],
            origins_by_index,
            sequence.labels,
        )

    returned = transmit_sequence(back, shuffled, rng, transcript, "return")

    # Receipt: Alice confirms which returned positions arrived.
    arrived_back = [j for j, ph in enumerate(returned) if not isinstance(ph, Lost)]
    public.announce("alice", "receipt", arrived_back, stage="receipt")
    arrived_set = set(arrived_back)

    # Check disclosure: positions, their origins, and Bob's check ops --
    # but only for check photons, the message order stays secret.
    check_set = set(check.positions)
    check_triples = []
    for j in sorted(arrived_set):
        src = perm.mapping[j]
        if src in check_set:
            check_triples.append((j, surviving_origins[src], check_record[src]))
    if not check_triples:
        raise ProtocolError("no check photons survived the return transmission")
    announced = CheckAnnouncement(
        positions=tuple(t[0] for t in check_triples),
        origins=tuple(t[1] for t in check_triples),
        ops=tuple(t[2] for t in check_triples),
    )
    public.announce(
        "bob",
        "check_open",
        {
            "positions": list(announced.positions),
            "origins": list(announced.origins),
            "ops": [op.value for op in announced.ops],
        },
        stage="check",
    )

    # Alice measures every check photon in its preparation basis.
    check_measurements: dict[int, int] = {}
    for pos, orig, _op in check_triples:
        basis = sequence.labels[orig].basis
        outcome = measure(returned[pos], basis, rng)
        measurement_event(transcript, "check", "alice", pos, basis, outcome)
        check_measurements[pos] = outcome
    error_rate = run_check(sequence.labels, announced, check_measurements)
    aborted = error_rate > config.error_threshold
    public.announce(
        "alice", "check_decision", {"error_rate": error_rate, "aborted": aborted}, stage="check"
    )
    if transcript is not None:
        transcript.record(
            "decision",
            "check",
            error_rate=error_rate,
            threshold=config.error_threshold,
            aborted=aborted,
        )

    n_check_alive = len(check_triples)
    if aborted:
        return SessionOutcome(
            aborted=True,
            measured_error_rate=error_rate,
            message_sent=message_bits,
            decoded_bits=None,
            decoded_positions=None,
            n_check=n_check_alive,
            transcript=transcript,
        )

    # Reveal: Bob publishes the secret order of the message positions.
    message_order = []
    for j in sorted(arrived_set):
        src = perm.mapping[j]
        if src not in check_set:
            message_order.append((j, surviving_origins[src]))
    public.announce(
        "bob",
        "message_order",
        [[pos, orig] for pos, orig in message_order],
        stage="reveal",
    )

    # Alice measures the message photons in their preparation bases.
    message_measurements: dict[int, int] = {}
    for pos, orig in message_order:
        basis = sequence.labels[orig].basis
        outcome = measure(returned[pos], basis, rng)
        measurement_event(transcript, "reveal", "alice", pos, basis, outcome)
        message_measurements[pos] = outcome
    decoded = reveal_order_and_decode(
        sequence.labels, message_order, message_measurements, check_passed=True
    )

    # Which sent-message indices did the decoded bits land on? Ranks of the
    # surviving message origins within all message origins, ascending.
    all_message_origins = sorted(
        surviving_origins[i] for i in range(n_alive) if i not in check_set
    )
    rank = {orig: k for k, orig in enumerate(all_message_origins)}
    decoded_positions = sorted(rank[orig] for _pos, orig in message_order)

    return SessionOutcome(
        aborted=False,
        measured_error_rate=error_rate,
        message_sent=message_bits,
        decoded_bits=decoded,
        decoded_positions=decoded_positions,
        n_check=n_check_alive,
        transcript=transcript,
    )

