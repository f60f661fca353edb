"""Single-qubit physics kernel.

Exact two-amplitude state vectors for polarized photons, the three protocol
unitaries (identity, the bit-flip ``i*sigma_y``, and the Hadamard), Born-rule
measurement in the two conjugate bases, and a symbolic Pauli-frame model
that predicts the same measurement statistics without touching amplitudes.

The amplitude model and the symbolic model are deliberately independent:
one is the implementation, the other its oracle. They must agree up to a
global phase for every operation sequence, which the self-test sweeps
exhaustively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

import numpy as np

RandomSource = np.random.Generator

SQRT_HALF = 1.0 / math.sqrt(2.0)

#: Absolute tolerance for amplitude comparisons. All protocol-relevant
#: amplitudes are 0, +-1, +-1/sqrt(2), so error stays many orders below this.
ATOL = 1e-12


class Basis(Enum):
    """The two conjugate measurement bases."""

    Z = "Z"  # eigenstates |0>, |1>  (horizontal / vertical polarization)
    X = "X"  # eigenstates |+>, |->  (diagonal / anti-diagonal)

    def conjugate(self) -> "Basis":
        return Basis.X if self is Basis.Z else Basis.Z


class OpLabel(Enum):
    """The three unitaries parties may apply to a photon."""

    I = "I"  # identity
    U = "U"  # i*sigma_y: flips the bit value in both bases
    H = "H"  # Hadamard: swaps the Z and X bases, preserving the bit value


class PhotonState(NamedTuple):
    """Amplitudes (alpha, beta) over the computational basis |0>, |1>.

    Normalized: |alpha|^2 + |beta|^2 = 1 within ``ATOL``. Instances are
    immutable values; operations return fresh states.
    """

    alpha: complex
    beta: complex


@dataclass(frozen=True)
class StateLabel:
    """Symbolic name of one of the four canonical states: a basis and a bit.

    (Z,0) <-> |0>, (Z,1) <-> |1>, (X,0) <-> |+>, (X,1) <-> |->.
    """

    basis: Basis
    bit: int

    def __post_init__(self) -> None:
        if self.bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.bit!r}")


@dataclass(frozen=True)
class FrameEffect:
    """Net symbolic action of a unitary sequence: two parity bits.

    ``flip`` is the accumulated bit-flip parity, ``swap`` the accumulated
    basis-swap parity. Composition is component-wise XOR, so the composed
    effect of a sequence is order-independent even though the amplitude
    product is not (it may differ by a global phase).
    """

    flip: int
    swap: int

    def combine(self, other: "FrameEffect") -> "FrameEffect":
        return FrameEffect(self.flip ^ other.flip, self.swap ^ other.swap)

    def apply(self, label: StateLabel) -> StateLabel:
        basis = label.basis.conjugate() if self.swap else label.basis
        return StateLabel(basis, label.bit ^ self.flip)


IDENTITY_EFFECT = FrameEffect(0, 0)

OP_EFFECT: dict[OpLabel, FrameEffect] = {
    OpLabel.I: FrameEffect(0, 0),
    OpLabel.U: FrameEffect(1, 0),
    OpLabel.H: FrameEffect(0, 1),
}

#: All four canonical labels, in a fixed order used by uniform samplers.
CANONICAL_LABELS: tuple[StateLabel, ...] = (
    StateLabel(Basis.Z, 0),
    StateLabel(Basis.Z, 1),
    StateLabel(Basis.X, 0),
    StateLabel(Basis.X, 1),
)


def state_from_label(label: StateLabel) -> PhotonState:
    """Canonical amplitude vector for a state label.

    The global phase is fixed by making the first nonzero amplitude real
    and positive.
    """
    if label.basis is Basis.Z:
        return PhotonState(1.0 + 0j, 0j) if label.bit == 0 else PhotonState(0j, 1.0 + 0j)
    sign = 1.0 if label.bit == 0 else -1.0
    return PhotonState(complex(SQRT_HALF), complex(sign * SQRT_HALF))


def unitary_matrix(op: OpLabel) -> np.ndarray:
    """2x2 complex matrix of an operation (reference form, used by the
    self-test's independent matrix-multiplication path)."""
    if op is OpLabel.I:
        return np.eye(2, dtype=complex)
    if op is OpLabel.U:
        return np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    return np.array([[SQRT_HALF, SQRT_HALF], [SQRT_HALF, -SQRT_HALF]], dtype=complex)


def apply_op(op: OpLabel, state: PhotonState) -> PhotonState:
    """Apply one unitary to a state, exactly."""
    a, b = state
    if op is OpLabel.I:
        return state
    if op is OpLabel.U:
        return PhotonState(b, -a)
    return PhotonState(SQRT_HALF * (a + b), SQRT_HALF * (a - b))


def apply_op_symbolic(op: OpLabel, label: StateLabel) -> StateLabel:
    """Apply one unitary in the symbolic model: U flips the bit, H swaps
    the basis, I does nothing. Global phases are not represented."""
    if op is OpLabel.I:
        return label
    if op is OpLabel.U:
        return StateLabel(label.basis, label.bit ^ 1)
    return StateLabel(label.basis.conjugate(), label.bit)


def compose_effects(ops: Iterable[OpLabel]) -> FrameEffect:
    """XOR-fold the per-op frame effects. The empty sequence composes to
    the identity effect (0, 0)."""
    flip = 0
    swap = 0
    for op in ops:
        eff = OP_EFFECT[op]
        flip ^= eff.flip
        swap ^= eff.swap
    return FrameEffect(flip, swap)


def measure(state: PhotonState, basis: Basis, rng: RandomSource) -> int:
    """Projective measurement in the requested basis, Born rule.

    Returns the outcome bit (index of the basis eigenstate). Consumes
    exactly one uniform draw from ``rng``, so a seeded generator yields a
    reproducible outcome stream.
    """
    a, b = state
    if basis is Basis.Z:
        p0 = abs(a) ** 2
    else:
        amp0 = SQRT_HALF * (a + b)
        p0 = abs(amp0) ** 2
    return 0 if rng.random() < p0 else 1


def norm_sq(state: PhotonState) -> float:
    return abs(state.alpha) ** 2 + abs(state.beta) ** 2


def overlap(lhs: PhotonState, rhs: PhotonState) -> float:
    """|<lhs|rhs>|: 1 when the states are equal up to a global phase."""
    return abs(lhs.alpha.conjugate() * rhs.alpha + lhs.beta.conjugate() * rhs.beta)


def is_canonical(state: PhotonState, atol: float = ATOL) -> bool:
    """True when the state matches one of the four canonical states up to
    a global phase (the state alphabet is closed under I, U, H)."""
    return any(
        abs(overlap(state, state_from_label(lbl)) - 1.0) < atol for lbl in CANONICAL_LABELS
    )


def random_label(rng: RandomSource) -> StateLabel:
    """One label drawn uniformly from the four canonical states."""
    return CANONICAL_LABELS[int(rng.integers(0, 4))]


def random_labels(n: int, rng: RandomSource) -> list[StateLabel]:
    """n labels drawn independently and uniformly, one vectorized draw."""
    idx = rng.integers(0, 4, size=n)
    return [CANONICAL_LABELS[int(i)] for i in idx]
