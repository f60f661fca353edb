"""Multiparty-controlled variant: a chain of controllers between the
preparer and the encoder.

Each controller applies an independently uniform operation from {I, U, H}
to every photon and keeps the choices private. The eavesdropping check
runs a two-round announcement dance per check photon:

  1. In a per-photon random controller order, each controller announces
     one bit only: whether it applied H at that position.
  2. Alice, now knowing the measurement basis (initial basis XOR the
     announced H parity), measures and reports her outcome.
  3. In an independent per-photon random order, each controller announces
     its remaining bit: flip (U) or no flip (I or H).
  4. Bob compares the report with the symbolically expected outcome.

Decoding requires every controller's full operation record; withholding
any single record provably reduces the receiver to coin-flip accuracy,
which is the control property the harness measures.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ProtocolError
from .fabric import (
    ClassicalChannel,
    Lost,
    QuantumChannel,
    Transcript,
    label_payload,
    measurement_event,
)
from .protocol import (
    OP_FOR_BIT,
    CheckAnnouncement,
    SessionConfig,
    SessionOutcome,
    encode,
    prepare_p_sequence,
    rearrange,
    run_check,
    select_check_positions,
    transmit_sequence,
)
from .quantum import (
    Basis,
    FrameEffect,
    OpLabel,
    PhotonState,
    RandomSource,
    StateLabel,
    apply_op,
    apply_op_symbolic,
    compose_effects,
    measure,
)

CONTROLLER_OPS = (OpLabel.I, OpLabel.U, OpLabel.H)


@dataclass(frozen=True)
class McSessionConfig(SessionConfig):
    """Session configuration with a controller chain of length
    ``controllers`` between the preparer and the encoder."""

    controllers: int = 1

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.controllers < 0:
            raise ConfigError(f"controllers must be >= 0, got {self.controllers}")


@dataclass(frozen=True)
class ControllerRecord:
    """One controller's private operations, aligned with the sequence as
    it passed through that controller's hands."""

    ops: tuple[OpLabel, ...]


@dataclass(frozen=True)
class AnnouncementSchedule:
    """Per check photon: one controller ordering for the H round and an
    independent ordering for the flip round."""

    h_orders: tuple[tuple[int, ...], ...]
    iu_orders: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.h_orders) != len(self.iu_orders):
            raise ProtocolError("schedule rounds must cover the same photons")

    @classmethod
    def draw(cls, n_check: int, m: int, rng: RandomSource) -> "AnnouncementSchedule":
        """Fresh uniform orderings, independent across photons and rounds."""
        h_orders = tuple(tuple(int(i) for i in rng.permutation(m)) for _ in range(n_check))
        iu_orders = tuple(tuple(int(i) for i in rng.permutation(m)) for _ in range(n_check))
        return cls(h_orders, iu_orders)

    @classmethod
    def chain_order(cls, n_check: int, m: int) -> "AnnouncementSchedule":
        """Degenerate schedule announcing in fixed chain order for every
        photon (the flawed variant: the last controller always speaks
        last). Kept as a negative control."""
        order = tuple(range(m))
        return cls((order,) * n_check, (order,) * n_check)


@dataclass(frozen=True)
class ControlRelease:
    """Every controller's full per-origin operation record, delivered to
    the receiver after a passing check."""

    records: Mapping[int, Mapping[int, OpLabel]]


def controller_pass(
    photons: Sequence[PhotonState], rng: RandomSource
) -> tuple[list[PhotonState], ControllerRecord]:
    """Apply an independently uniform draw from {I, U, H} to each photon,
    retaining the choices privately."""
    picks = rng.integers(0, 3, size=len(photons))
    ops = tuple(CONTROLLER_OPS[int(i)] for i in picks)
    transformed = [apply_op(op, ph) for op, ph in zip(ops, photons)]
    return transformed, ControllerRecord(ops=ops)


def expected_check_outcome(
    initial: StateLabel, controller_ops: Sequence[OpLabel], bob_op: OpLabel
) -> StateLabel:
    """Fold the chain's operations and the encoder's over the initial
    label: the measurement the encoder expects the receiver to report."""
    label = initial
    for op in controller_ops:
        label = apply_op_symbolic(op, label)
    return apply_op_symbolic(bob_op, label)


class CheckPhotonRound:
    """Turn-enforced announcement state for a single check photon.

    Out-of-schedule announcements and premature outcome reports raise
    ``ProtocolError``; the staging is the security mechanism, so the data
    model refuses to shortcut it.
    """

    def __init__(self, position: int, origin: int, h_order: Sequence[int], iu_order: Sequence[int]):
        self.position = position
        self.origin = origin
        self._h_order = tuple(h_order)
        self._iu_order = tuple(iu_order)
        self.h_bits: list[int] = []
        self.outcome_report: int | None = None
        self.flip_bits: list[int] = []

    @property
    def h_complete(self) -> bool:
        return len(self.h_bits) == len(self._h_order)

    @property
    def flips_complete(self) -> bool:
        return len(self.flip_bits) == len(self._iu_order)

    @property
    def h_parity(self) -> int:
        if not self.h_complete:
            raise ProtocolError("H parity read before the H round completed")
        return sum(self.h_bits) % 2

    @property
    def flip_parity(self) -> int:
        if not self.flips_complete:
            raise ProtocolError("flip parity read before the flip round completed")
        return sum(self.flip_bits) % 2

    def announce_h(self, controller: int, applied_h: bool) -> None:
        if self.h_complete:
            raise ProtocolError("H round already complete")
        expected = self._h_order[len(self.h_bits)]
        if controller != expected:
            raise ProtocolError(
                f"controller {controller} announced out of turn (expected {expected})"
            )
        self.h_bits.append(1 if applied_h else 0)

    def report_outcome(self, bit: int) -> None:
        if not self.h_complete:
            raise ProtocolError("outcome reported before the H round completed")
        if self.outcome_report is not None:
            raise ProtocolError("outcome already reported")
        self.outcome_report = bit

    def announce_flip(self, controller: int, flip: int) -> None:
        if self.outcome_report is None:
            raise ProtocolError("flip round started before the outcome report")
        if self.flips_complete:
            raise ProtocolError("flip round already complete")
        expected = self._iu_order[len(self.flip_bits)]
        if controller != expected:
            raise ProtocolError(
                f"controller {controller} announced out of turn (expected {expected})"
            )
        self.flip_bits.append(flip & 1)


class HonestController:
    """Answers announcement rounds truthfully from a private record keyed
    by original position."""

    def __init__(self, index: int, ops_by_origin: Mapping[int, OpLabel]):
        self.index = index
        self._ops = ops_by_origin

    def announce_h(self, origin: int, heard: Sequence[int]) -> bool:
        return self._ops[origin] is OpLabel.H

    def announce_flip(self, origin: int, heard: Sequence[int], remaining: int) -> int:
        return 1 if self._ops[origin] is OpLabel.U else 0


class HonestReporter:
    """The receiver's honest check behavior: measure in the basis implied
    by the announced H parity and report the outcome."""

    def __init__(
        self,
        labels: Sequence[StateLabel],
        photons_by_position: Mapping[int, PhotonState],
        rng: RandomSource,
        transcript: Transcript | None = None,
    ):
        self._labels = labels
        self._photons = photons_by_position
        self._rng = rng
        self._transcript = transcript

    def report(self, position: int, origin: int, h_parity: int) -> int:
        initial = self._labels[origin]
        basis = initial.basis.conjugate() if h_parity else initial.basis
        outcome = measure(self._photons[position], basis, self._rng)
        measurement_event(self._transcript, "check", "alice", position, basis, outcome)
        return outcome


def mc_check_round(
    check_items: Sequence[tuple[int, int]],
    initial_labels: Mapping[int, StateLabel],
    bob_ops: Mapping[int, OpLabel],
    schedule: AnnouncementSchedule,
    reporter: Any,
    controllers: Sequence[Any],
    public: ClassicalChannel,
    transcript: Transcript | None,
) -> tuple[float, list[bool]]:
    """Run the two-round announcement dance for every check photon and
    return the encoder's measured error rate plus per-photon mismatches.

    ``check_items`` pairs each returned-sequence position with its origin;
    ``initial_labels`` is the receiver's published preparation record for
    those origins; ``bob_ops`` the encoder's private check operations
    keyed by position.
    """
    if len(schedule.h_orders) != len(check_items):
        raise ProtocolError("schedule does not cover the check photons")
    mismatches: list[bool] = []
    for k, (pos, orig) in enumerate(check_items):
        h_order = schedule.h_orders[k]
        iu_order = schedule.iu_orders[k]
        if transcript is not None:
            transcript.record(
                "schedule", "check", position=pos, h_order=list(h_order), iu_order=list(iu_order)
            )
        round_state = CheckPhotonRound(pos, orig, h_order, iu_order)
        for c in h_order:
            bit = controllers[c].announce_h(orig, tuple(round_state.h_bits))
            round_state.announce_h(c, bit)
            public.announce(
                f"controller_{c}", "h_announce", {"position": pos, "h": int(bit)}, stage="check"
            )
        report = reporter.report(pos, orig, round_state.h_parity)
        round_state.report_outcome(report)
        public.announce("alice", "check_report", {"position": pos, "outcome": report}, stage="check")
        for c in iu_order:
            remaining = len(iu_order) - len(round_state.flip_bits) - 1
            flip = controllers[c].announce_flip(orig, tuple(round_state.flip_bits), remaining)
            round_state.announce_flip(c, flip)
            public.announce(
                f"controller_{c}", "flip_announce", {"position": pos, "flip": int(flip)}, stage="check"
            )
        announced_effect = FrameEffect(round_state.flip_parity, round_state.h_parity)
        expected = apply_op_symbolic(bob_ops[pos], announced_effect.apply(initial_labels[orig]))
        mismatches.append(report != expected.bit)
    error_rate = sum(mismatches) / len(check_items) if check_items else 0.0
    return error_rate, mismatches


def release_and_reconstruct(
    alice_labels: Sequence[StateLabel],
    message_order: Sequence[tuple[int, int]],
    photons_by_position: Mapping[int, PhotonState],
    release: ControlRelease,
    n_controllers: int,
    rng: RandomSource,
    transcript: Transcript | None = None,
) -> list[int]:
    """Decode the message from the controllers' released records.

    Refuses outright when any controller's release is missing: the whole
    point of the control structure. For each message photon the receiver
    composes the chain's frame effect, measures in the swap-adjusted
    basis, and strips both the initial bit and the chain's flip parity.
    """
    missing = set(range(n_controllers)) - set(release.records)
    if missing:
        raise ProtocolError(f"reconstruction refused: missing release from controllers {sorted(missing)}")
    bits: list[int] = []
    for pos, orig in sorted(message_order, key=lambda pair: pair[1]):
        ops = [release.records[c][orig] for c in range(n_controllers)]
        effect = compose_effects(ops)
        initial = alice_labels[orig]
        basis = initial.basis.conjugate() if effect.swap else initial.basis
        outcome = measure(photons_by_position[pos], basis, rng)
        measurement_event(transcript, "reveal", "alice", pos, basis, outcome)
        bits.append(outcome ^ initial.bit ^ effect.flip)
    return bits


def reconstruct_with_missing(
    alice_labels: Sequence[StateLabel],
    message_order: Sequence[tuple[int, int]],
    photons_by_position: Mapping[int, PhotonState],
    release: ControlRelease,
    n_controllers: int,
    withheld: int,
    rng: RandomSource,
) -> list[int]:
    """Best-effort decode with one controller's record withheld, treating
    the unknown operation as identity (any fixed guess scores the same:
    the withheld op is uniform over {I, U, H}).

    This is the measurement side of the control property; the production
    path is ``release_and_reconstruct``, which refuses instead.
    """
    bits: list[int] = []
    for pos, orig in sorted(message_order, key=lambda pair: pair[1]):
        ops = [
            release.records[c][orig] for c in range(n_controllers) if c != withheld
        ]
        effect = compose_effects(ops)
        initial = alice_labels[orig]
        basis = initial.basis.conjugate() if effect.swap else initial.basis
        outcome = measure(photons_by_position[pos], basis, rng)
        bits.append(outcome ^ initial.bit ^ effect.flip)
    return bits


def _chain_hop_names(m: int) -> list[str]:
    if m == 0:
        return ["alice->bob"]
    names = ["alice->controller_0"]
    names += [f"controller_{i}->controller_{i + 1}" for i in range(m - 1)]
    names.append(f"controller_{m - 1}->bob")
    return names


def run_mc_session(
    config: McSessionConfig,
    attack: Any = None,
    message: Sequence[int] | None = None,
    transcript: Transcript | None = None,
    withheld_controller: int | None = None,
) -> SessionOutcome:
    """Run one controlled session end to end.

    ``attack`` may be a passive tap strategy (installed on the first and
    return legs) or one of the corrupt-party strategies, which reroute the
    photon flow; see the adversary module. ``withheld_controller`` runs an
    honest session but decodes with that controller's release withheld,
    measuring the control property.
    """
    m = config.controllers
    rng = np.random.default_rng(config.seed)
    public = ClassicalChannel(transcript)
    kind = getattr(attack, "kind", "passive") if attack is not None else "passive"
    if kind in ("bypass", "collusion") and config.loss > 0.0:
        raise ConfigError(f"{kind} attack does not support lossy channels")
    if kind == "collusion" and m < 2:
        raise ConfigError("collusion needs at least two controllers")
    if withheld_controller is not None and not 0 <= withheld_controller < m:
        raise ConfigError(f"withheld controller {withheld_controller} out of range for m={m}")

    hop_channels = [
        QuantumChannel(name=name, noise=config.noise, loss=config.loss)
        for name in _chain_hop_names(m)
    ]
    back = QuantumChannel(name="bob->alice", noise=config.noise, loss=config.loss)
    if attack is not None and kind == "passive":
        attack.install(hop_channels[0], back, public, rng)

    sequence = prepare_p_sequence(config.n_photons, rng)

    if kind == "bypass" and m >= 1:
        bob_photons, origins, records_by_origin, reporter_factory = _bypass_transport(
            config, sequence, hop_channels, attack, rng, public, transcript
        )
    elif kind == "collusion":
        bob_photons, origins, records_by_origin, reporter_factory = _collusion_transport(
            config, sequence, hop_channels, attack, rng, public, transcript
        )
    else:
        bob_photons, origins, records_by_origin = _honest_transport(
            sequence, hop_channels, m, rng, public, transcript
        )
        reporter_factory = None

    n_alive = len(bob_photons)
    if n_alive < 2:
        raise ProtocolError("too few photons survived to form a check set and a message")

    # Encoder stage: identical to the two-party flow.
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
    shuffled, perm = rearrange(encoded, rng)
    if transcript is not None:
        transcript.record("event", "shuffle", party="bob", count=len(shuffled))
    returned = transmit_sequence(back, shuffled, rng, transcript, "return")

    arrived_back = [j for j, ph in enumerate(returned) if not isinstance(ph, Lost)]
    public.announce("alice", "receipt", arrived_back, stage="receipt")
    arrived_set = set(arrived_back)
    photons_by_position: dict[int, PhotonState] = {
        j: returned[j] for j in arrived_back  # type: ignore[misc]
    }

    check_set = set(check.positions)
    check_items: list[tuple[int, int]] = []
    bob_ops_by_position: dict[int, OpLabel] = {}
    for j in sorted(arrived_set):
        src = perm.mapping[j]
        if src in check_set:
            check_items.append((j, origins[src]))
            bob_ops_by_position[j] = check_record[src]
    if not check_items:
        raise ProtocolError("no check photons survived the return transmission")
    public.announce(
        "bob",
        "check_open",
        {"positions": [p for p, _ in check_items], "origins": [o for _, o in check_items]},
        stage="check",
    )

    # The receiver publishes the initial states of the check photons so the
    # encoder can evaluate; the disclosure is logged like any announcement.
    public.announce(
        "alice",
        "check_initial_states",
        {str(orig): label_payload(sequence.labels[orig]) for _pos, orig in check_items},
        stage="check",
    )

    if kind == "collusion" and getattr(attack, "schedule_variant", "") == "fixed_order":
        schedule = AnnouncementSchedule.chain_order(len(check_items), m)
    else:
        schedule = AnnouncementSchedule.draw(len(check_items), m, rng)

    controller_agents: list[Any] = [
        HonestController(c, records_by_origin[c]) for c in range(m)
    ]
    if kind == "collusion":
        controller_agents[m - 1] = attack.make_colluder(rng)
    if reporter_factory is not None:
        reporter = reporter_factory(photons_by_position)
    else:
        reporter = HonestReporter(sequence.labels, photons_by_position, rng, transcript)

    initial_by_origin = {orig: sequence.labels[orig] for _pos, orig in check_items}
    error_rate, _mismatches = mc_check_round(
        check_items,
        initial_by_origin,
        bob_ops_by_position,
        schedule,
        reporter,
        controller_agents,
        public,
        transcript,
    )
    aborted = error_rate > config.error_threshold
    public.announce(
        "bob",
        "check_decision",
        {
            "error_rate": error_rate,
            "aborted": aborted,
            "ops": {str(pos): op.value for pos, op in sorted(bob_ops_by_position.items())},
        },
        stage="check",
    )
    if transcript is not None:
        transcript.record(
            "decision",
            "check",
            error_rate=error_rate,
            threshold=config.error_threshold,
            aborted=aborted,
        )

    if aborted:
        return SessionOutcome(
            aborted=True,
            measured_error_rate=error_rate,
            message_sent=message_bits,
            decoded_bits=None,
            decoded_positions=None,
            n_check=len(check_items),
            transcript=transcript,
        )

    message_order = []
    for j in sorted(arrived_set):
        src = perm.mapping[j]
        if src not in check_set:
            message_order.append((j, origins[src]))
    public.announce(
        "bob", "message_order", [[pos, orig] for pos, orig in message_order], stage="reveal"
    )

    # Controllers release their full records (fabricated ones included:
    # a colluder announces whatever it committed to during the check).
    release_records: dict[int, dict[int, OpLabel]] = {}
    for c in range(m):
        if kind == "collusion" and c == m - 1:
            record = attack.release_record(origins)
        else:
            record = dict(records_by_origin[c])
        release_records[c] = record
        public.announce(
            f"controller_{c}",
            "release",
            {str(orig): op.value for orig, op in sorted(record.items())},
            stage="reveal",
        )
    release = ControlRelease(records=release_records)

    if kind in ("bypass", "collusion"):
        # The corrupt receiver ignores the releases: the photons she holds
        # never met the controllers, so the preparation basis decodes them.
        decoded = _illicit_decode(sequence.labels, message_order, photons_by_position, rng)
    elif withheld_controller is not None:
        decoded = reconstruct_with_missing(
            sequence.labels,
            message_order,
            photons_by_position,
            release,
            m,
            withheld_controller,
            rng,
        )
    else:
        decoded = release_and_reconstruct(
            sequence.labels, message_order, photons_by_position, release, m, rng, transcript
        )

    all_message_origins = sorted(
        origins[i] for i in range(n_alive) if i not in check_set
    )
    rank = {orig: k for k, orig in enumerate(all_message_origins)}
    decoded_positions = sorted(rank[orig] for _pos, orig in message_order)

    return SessionOutcome(
        aborted=False,
        measured_error_rate=error_rate,
        message_sent=message_bits,
        decoded_bits=decoded,
        decoded_positions=decoded_positions,
        n_check=len(check_items),
        transcript=transcript,
    )


def _honest_transport(
    sequence,
    hop_channels: list[QuantumChannel],
    m: int,
    rng: RandomSource,
    public: ClassicalChannel,
    transcript: Transcript | None,
) -> tuple[list[PhotonState], list[int], list[dict[int, OpLabel]]]:
    """Walk the photons through the controller chain, hop by hop, with
    per-hop arrival announcements and private op records."""
    photons: list[PhotonState] = list(sequence.photons)
    origins = list(range(len(photons)))
    records_by_origin: list[dict[int, OpLabel]] = []
    for c in range(m):
        delivered = transmit_sequence(hop_channels[c], photons, rng, transcript, "chain")
        alive = [i for i, ph in enumerate(delivered) if not isinstance(ph, Lost)]
        origins = [origins[i] for i in alive]
        photons = [delivered[i] for i in alive]  # type: ignore[misc]
        public.announce(f"controller_{c}", "arrived", origins, stage="chain")
        photons, record = controller_pass(photons, rng)
        records_by_origin.append(
            {orig: op for orig, op in zip(origins, record.ops)}
        )
    delivered = transmit_sequence(hop_channels[m] if m else hop_channels[0], photons, rng, transcript, "chain")
    alive = [i for i, ph in enumerate(delivered) if not isinstance(ph, Lost)]
    origins = [origins[i] for i in alive]
    photons = [delivered[i] for i in alive]  # type: ignore[misc]
    public.announce("bob", "arrived_forward", origins, stage="chain")
    return photons, origins, records_by_origin


def _fake_chain_records(
    n: int,
    m: int,
    rng: RandomSource,
) -> list[dict[int, OpLabel]]:
    """Run a decoy sequence through honest controllers and return their
    records. The decoys never reach Bob; the corrupt sender intercepts the
    chain output and discards it."""
    fakes = prepare_p_sequence(n, rng).photons
    records: list[dict[int, OpLabel]] = []
    for _c in range(m):
        fakes, record = controller_pass(fakes, rng)
        records.append({orig: op for orig, op in zip(range(n), record.ops)})
    return records


def _bypass_transport(
    config: McSessionConfig,
    sequence,
    hop_channels: list[QuantumChannel],
    attack: Any,
    rng: RandomSource,
    public: ClassicalChannel,
    transcript: Transcript | None,
):
    """Corrupt sender routing: true photons take one direct hop to Bob
    while decoys feed the controller chain."""
    m = config.controllers
    records_by_origin = _fake_chain_records(len(sequence.photons), m, rng)
    direct = QuantumChannel(name="alice=>bob", noise=config.noise, loss=0.0)
    delivered = transmit_sequence(direct, sequence.photons, rng, transcript, "chain")
    origins = list(range(len(sequence.photons)))
    photons: list[PhotonState] = [ph for ph in delivered if not isinstance(ph, Lost)]  # type: ignore[misc]
    public.announce("bob", "arrived_forward", origins, stage="chain")

    def reporter_factory(photons_by_position: Mapping[int, PhotonState]):
        return attack.make_reporter(sequence.labels, photons_by_position, rng)

    return photons, origins, records_by_origin, reporter_factory


def _collusion_transport(
    config: McSessionConfig,
    sequence,
    hop_channels: list[QuantumChannel],
    attack: Any,
    rng: RandomSource,
    public: ClassicalChannel,
    transcript: Transcript | None,
):
    """Corrupt sender + final controller: true photons go straight to the
    colluder, who forwards them to Bob untouched; decoys feed the honest
    prefix of the chain."""
    m = config.controllers
    records_by_origin = _fake_chain_records(len(sequence.photons), m - 1, rng)
    records_by_origin.append({})  # the colluder applies nothing
    direct = QuantumChannel(name="alice=>colluder", noise=config.noise, loss=0.0)
    delivered = transmit_sequence(direct, sequence.photons, rng, transcript, "chain")
    photons: list[PhotonState] = [ph for ph in delivered if not isinstance(ph, Lost)]  # type: ignore[misc]
    final_hop = hop_channels[m]
    delivered = transmit_sequence(final_hop, photons, rng, transcript, "chain")
    photons = [ph for ph in delivered if not isinstance(ph, Lost)]  # type: ignore[misc]
    origins = list(range(len(sequence.photons)))
    public.announce("bob", "arrived_forward", origins, stage="chain")

    def reporter_factory(photons_by_position: Mapping[int, PhotonState]):
        return attack.make_reporter(sequence.labels, photons_by_position, rng)

    return photons, origins, records_by_origin, reporter_factory


def _illicit_decode(
    labels: Sequence[StateLabel],
    message_order: Sequence[tuple[int, int]],
    photons_by_position: Mapping[int, PhotonState],
    rng: RandomSource,
) -> list[int]:
    """Decode photons that never met the controllers: preparation basis,
    no parity corrections."""
    bits: list[int] = []
    for pos, orig in sorted(message_order, key=lambda pair: pair[1]):
        outcome = measure(photons_by_position[pos], labels[orig].basis, rng)
        bits.append(outcome ^ labels[orig].bit)
    return bits
