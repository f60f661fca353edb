"""Deterministic simulator for direct quantum communication over
rearranged single photons, its multiparty-controlled variant, and a
pluggable eavesdropping layer with detection and leak metrics."""

from .attacks import (
    AttackReport,
    CollusionAttack,
    FakeSequenceBypass,
    InterceptResend,
    PassiveNone,
    ReturnLegTap,
    build_attack,
)
from .errors import ConfigError, ProtocolError
from .fabric import (
    LOST,
    Announcement,
    ClassicalChannel,
    Lost,
    NoiseKind,
    NoiseModel,
    QuantumChannel,
    Transcript,
    transmit,
)
from .harness import (
    AggregateStats,
    ExperimentConfig,
    load_config,
    run_report,
    run_selftest,
    sweep_csv,
)
from .multiparty import (
    AnnouncementSchedule,
    ControlRelease,
    ControllerRecord,
    McSessionConfig,
    controller_pass,
    expected_check_outcome,
    mc_check_round,
    release_and_reconstruct,
    run_mc_session,
)
from .protocol import (
    CheckAnnouncement,
    CheckSet,
    Permutation,
    PSequence,
    SessionConfig,
    SessionOutcome,
    encode,
    prepare_p_sequence,
    rearrange,
    reveal_order_and_decode,
    run_check,
    run_session,
    select_check_set,
)
from .quantum import (
    Basis,
    FrameEffect,
    OpLabel,
    PhotonState,
    StateLabel,
    apply_op,
    apply_op_symbolic,
    compose_effects,
    measure,
    state_from_label,
)

__version__ = "0.1.0"
