"""Kernel tests: canonical states, the three unitaries, Born-rule
measurement, and the exhaustive amplitude-vs-symbolic equivalence."""
import itertools
import math

import numpy as np
import pytest

from qsdcsim.quantum import (
    ATOL,
    CANONICAL_LABELS,
    Basis,
    FrameEffect,
    OpLabel,
    PhotonState,
    StateLabel,
    apply_op,
    apply_op_symbolic,
    compose_effects,
    is_canonical,
    measure,
    norm_sq,
    overlap,
    random_labels,
    state_from_label,
    unitary_matrix,
)

SQRT_HALF = 1.0 / math.sqrt(2.0)

Z0 = StateLabel(Basis.Z, 0)
Z1 = StateLabel(Basis.Z, 1)
X0 = StateLabel(Basis.X, 0)
X1 = StateLabel(Basis.X, 1)


class TestCanonicalStates:
    def test_z0_amplitudes(self):
        assert state_from_label(Z0) == PhotonState(1.0 + 0j, 0j)

    def test_z1_amplitudes(self):
        assert state_from_label(Z1) == PhotonState(0j, 1.0 + 0j)

    def test_x0_amplitudes(self):
        st = state_from_label(X0)
        assert st.alpha == pytest.approx(SQRT_HALF, abs=ATOL)
        assert st.beta == pytest.approx(SQRT_HALF, abs=ATOL)

    def test_x1_amplitudes(self):
        st = state_from_label(X1)
        assert st.alpha == pytest.approx(SQRT_HALF, abs=ATOL)
        assert st.beta == pytest.approx(-SQRT_HALF, abs=ATOL)

    def test_all_normalized(self):
        for label in CANONICAL_LABELS:
            assert abs(norm_sq(state_from_label(label)) - 1.0) < ATOL

    def test_global_phase_convention(self):
        """First nonzero amplitude is real and positive."""
        for label in CANONICAL_LABELS:
            st = state_from_label(label)
            first = st.alpha if abs(st.alpha) > ATOL else st.beta
            assert first.imag == 0 and first.real > 0

    def test_bad_bit_rejected(self):
        with pytest.raises(ValueError):
            StateLabel(Basis.Z, 2)


class TestApplyOp:
    """The unitaries act exactly as defined, phases included."""

    def test_bitflip_action_with_phases(self):
        # U|0> = -|1>, U|1> = |0>, U|+> = |->, U|-> = -|+>
        cases = {
            Z0: (0j, -1.0 + 0j),
            Z1: (1.0 + 0j, 0j),
            X0: (SQRT_HALF, -SQRT_HALF),
            X1: (-SQRT_HALF, -SQRT_HALF),
        }
        for label, (ea, eb) in cases.items():
            out = apply_op(OpLabel.U, state_from_label(label))
            assert out.alpha == pytest.approx(ea, abs=ATOL)
            assert out.beta == pytest.approx(eb, abs=ATOL)

    def test_hadamard_action(self):
        # H|0> = |+>, H|1> = |->, H|+> = |0>, H|-> = |1>
        expected = {Z0: X0, Z1: X1, X0: Z0, X1: Z1}
        for label, target in expected.items():
            out = apply_op(OpLabel.H, state_from_label(label))
            assert abs(overlap(out, state_from_label(target)) - 1.0) < ATOL

    def test_identity_on_arbitrary_state(self):
        psi = PhotonState(complex(0.6), complex(0.0, 0.8))
        assert apply_op(OpLabel.I, psi) == psi

    def test_matches_reference_matrices(self):
        for op in OpLabel:
            mat = unitary_matrix(op)
            for label in CANONICAL_LABELS:
                st = state_from_label(label)
                ref = mat @ np.array([st.alpha, st.beta])
                out = apply_op(op, st)
                assert abs(out.alpha - ref[0]) < ATOL
                assert abs(out.beta - ref[1]) < ATOL

    def test_matrices_are_unitary(self):
        for op in OpLabel:
            mat = unitary_matrix(op)
            assert np.allclose(mat @ mat.conj().T, np.eye(2), atol=ATOL)


class TestSymbolicModel:
    def test_bitflip_flips_bit_preserves_basis(self):
        assert apply_op_symbolic(OpLabel.U, Z0) == Z1
        assert apply_op_symbolic(OpLabel.U, X1) == X0

    def test_hadamard_swaps_basis_preserves_bit(self):
        assert apply_op_symbolic(OpLabel.H, Z1) == X1
        assert apply_op_symbolic(OpLabel.H, X0) == Z0

    def test_identity(self):
        assert apply_op_symbolic(OpLabel.I, X0) == X0

    def test_compose_cancelling_flips(self):
        assert compose_effects([OpLabel.U, OpLabel.H, OpLabel.U]) == FrameEffect(0, 1)

    def test_compose_empty(self):
        assert compose_effects([]) == FrameEffect(0, 0)

    def test_compose_three_h_one_u(self):
        # Oracle: fold single-op applications over every starting label and
        # require the composed effect to predict the same endpoint.
        seq = [OpLabel.H, OpLabel.H, OpLabel.H, OpLabel.U]
        effect = compose_effects(seq)
        for start in CANONICAL_LABELS:
            folded = start
            for op in seq:
                folded = apply_op_symbolic(op, folded)
            assert effect.apply(start) == folded
        assert effect == FrameEffect(1, 1)

    def test_effect_combine_is_xor(self):
        assert FrameEffect(1, 0).combine(FrameEffect(1, 1)) == FrameEffect(0, 1)


class TestExhaustiveEquivalence:
    """Amplitude and symbolic models agree for every operation sequence of
    length <= 6 from every starting state, up to a global phase."""

    def test_all_sequences(self):
        ops = list(OpLabel)
        checked = 0
        for start in CANONICAL_LABELS:
            for seq in itertools.product(ops, repeat=6):
                state = state_from_label(start)
                label = start
                for op in seq:
                    state = apply_op(op, state)
                    label = apply_op_symbolic(op, label)
                    assert abs(overlap(state, state_from_label(label)) - 1.0) < ATOL
                    assert abs(norm_sq(state) - 1.0) < ATOL
                assert compose_effects(seq).apply(start) == label
                checked += 1
        assert checked == 4 * 3**6

    def test_double_hadamard_is_identity(self):
        for label in CANONICAL_LABELS:
            st = state_from_label(label)
            out = apply_op(OpLabel.H, apply_op(OpLabel.H, st))
            assert abs(out.alpha - st.alpha) < ATOL
            assert abs(out.beta - st.beta) < ATOL

    def test_double_bitflip_is_minus_identity(self):
        for label in CANONICAL_LABELS:
            st = state_from_label(label)
            out = apply_op(OpLabel.U, apply_op(OpLabel.U, st))
            assert abs(out.alpha + st.alpha) < ATOL
            assert abs(out.beta + st.beta) < ATOL
            assert apply_op_symbolic(OpLabel.U, apply_op_symbolic(OpLabel.U, label)) == label

    def test_alphabet_closed_under_ops(self):
        for label in CANONICAL_LABELS:
            for op in OpLabel:
                assert is_canonical(apply_op(op, state_from_label(label)))


class TestMeasurement:
    def test_eigenstates_deterministic(self):
        rng = np.random.default_rng(123)
        for label in CANONICAL_LABELS:
            st = state_from_label(label)
            outcomes = {measure(st, label.basis, rng) for _ in range(64)}
            assert outcomes == {label.bit}

    def test_conjugate_basis_balanced(self):
        rng = np.random.default_rng(20240)
        n = 100_000
        plus = state_from_label(X0)
        zeros = sum(1 for _ in range(n) if measure(plus, Basis.Z, rng) == 0)
        assert abs(zeros / n - 0.5) < 0.01

    def test_flipped_plus_measures_minus(self):
        # U|+> = |->, so an X-basis measurement gives 1 with certainty.
        rng = np.random.default_rng(9)
        st = apply_op(OpLabel.U, state_from_label(X0))
        for _ in range(64):
            assert measure(st, Basis.X, rng) == 1

    def test_each_basis_conjugate_of_other(self):
        assert Basis.Z.conjugate() is Basis.X
        assert Basis.X.conjugate() is Basis.Z


class TestUniformSampler:
    def test_labels_uniform(self):
        rng = np.random.default_rng(77)
        n = 100_000
        labels = random_labels(n, rng)
        for target in CANONICAL_LABELS:
            freq = sum(1 for lbl in labels if lbl == target) / n
            assert abs(freq - 0.25) < 0.01

    def test_reproducible(self):
        a = random_labels(32, np.random.default_rng(5))
        b = random_labels(32, np.random.default_rng(5))
        assert a == b
