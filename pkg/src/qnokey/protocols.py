"""Runners for the no-key protocol family on the exact simulator.

Every runner executes one full session between Alice and Bob as a
single composite pure state, taking a channel snapshot (reduced density
matrix of the in-transit registers) at each transmission and logging
every measurement into a transcript.

The family:

* three-pass scrambling (run_protocol1): no pre-shared secret, the
  message register crosses the channel three times between two
  self-inverting permutation oracles.
* tagged three-pass (run_protocol2): adds pre-shared tag functions and
  one-time pads so each party can recognise the other's touch.
* echoed tagged three-pass (run_protocol3): three tagged exchanges,
  message out, echo back, message again, with accept verdicts.
* inverted two-pass (run_protocol4): the receiver initiates with a
  blank superposition; the sender imprints the message as phases.
* echoed two-pass (run_protocol5): three inverted exchanges with the
  same verdict structure as run_protocol3.
* authenticated two-pass (run_protocol6): one inverted exchange carries
  message plus one-time tag, a second returns the tag for cross-check.
* one-shot broadcast (run_noninteractive): a single transmission of the
  phase-encoded message with a tag register; exploratory only.

Channel views: per-run snapshots are what an eavesdropper sees in one
session; eve_average_view computes the exact mixture over enumerated
one-time values (and optionally over the tag-function family), which is
the object the indistinguishability claims are about. The two are kept
strictly separate because per-run snapshots of the tagged protocols are
not maximally mixed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .auth import MacKey, mac_keygen, mac_tag, mac_verify
from .oracles import (
    DEFAULT_ENUM_LIMIT,
    BooleanFunction,
    BooleanPermutation,
    EnumerationLimitError,
    count_functions,
    enumerate_functions,
    make_rng,
    party_streams,
    sample_function,
    sample_pad,
    sample_permutation,
)
from .qstate import (
    DEFAULT_QUBIT_CAP,
    CompositeState,
    DensityMatrix,
    Holder,
    Register,
    init_basis_state,
)

PROTOCOL_IDS = ("p1", "p2", "p3", "p4", "p5", "p6", "nonint", "two-round")

ROUND_COUNTS = {
    "p1": 3,
    "p2": 3,
    "p3": 9,
    "p4": 2,
    "p5": 6,
    "p6": 4,
    "nonint": 1,
    "two-round": 2,
}

ALICE = Holder.ALICE.value
BOB = Holder.BOB.value
EVE = Holder.EVE.value


class ProtocolError(ValueError):
    """Bad protocol parameters: widths, caps, key shapes."""


def peak_live_width(protocol: str, n: int, l: int = 0, t: int = 0) -> tuple[int, str]:
    """Worst-case simultaneous qubit count of a session, with the formula.

    Derived from the register lifecycles: registers are discarded the
    moment they provably factor out, so the peak is reached just before
    the first uncompute of each session.
    """
    if protocol == "p1":
        return 3 * n, f"3*{n}={3 * n}"
    if protocol in ("p2", "p3"):
        return 3 * n + l, f"3*{n}+{l}={3 * n + l}"
    if protocol in ("p4", "p5", "two-round"):
        return 2 * n + l, f"2*{n}+{l}={2 * n + l}"
    if protocol == "p6":
        return 2 * (n + t) + l, f"2*({n}+{t})+{l}={2 * (n + t) + l}"
    if protocol == "nonint":
        return n + l, f"{n}+{l}={n + l}"
    raise ProtocolError(f"unknown protocol {protocol!r}")


def _check_cap(protocol: str, n: int, l: int, t: int, qubit_cap: int) -> None:
    peak, formula = peak_live_width(protocol, n, l, t)
    if peak > qubit_cap:
        raise ProtocolError(
            f"{protocol} needs peak live width {formula} qubits, cap is {qubit_cap}"
        )


def _check_message(x: int, width: int) -> None:
    if width < 1:
        raise ProtocolError(f"message width must be >= 1, got {width}")
    if not 0 <= x < (1 << width):
        raise ProtocolError(f"message {x} does not fit in {width} bits")


# ---------------------------------------------------------------------------
# Parameters, keys, transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolParams:
    """Validated run parameters for one protocol session."""

    protocol: str
    n: int
    l: int = 0
    t: int = 0
    qubit_cap: int = DEFAULT_QUBIT_CAP
    enum_limit: int = DEFAULT_ENUM_LIMIT

    def __post_init__(self):
        if self.protocol not in PROTOCOL_IDS:
            raise ProtocolError(f"unknown protocol {self.protocol!r}, "
                                f"expected one of {PROTOCOL_IDS}")
        if self.n < 1:
            raise ProtocolError(f"message width must be >= 1, got {self.n}")
        if self.protocol != "p1" and self.l < 1:
            raise ProtocolError(f"{self.protocol} needs a tag register width l >= 1")
        if self.protocol == "p6" and self.t < 1:
            raise ProtocolError("p6 needs an authentication tag width t >= 1")
        _check_cap(self.protocol, self.n, self.l, self.t, self.qubit_cap)

    @property
    def rounds(self) -> int:
        return ROUND_COUNTS[self.protocol]


@dataclass(frozen=True)
class SharedKeys:
    """Everything the parties agreed on before the session.

    alice_tag / bob_tag are the tag functions on the session's message
    width. The echo pair covers the second stage of the authenticated
    protocol, whose message register is the tag width instead. The MAC
    key is one-time and independent of the tag functions.
    """

    alice_tag: BooleanFunction
    bob_tag: BooleanFunction
    mac_key: MacKey | None = None
    alice_tag_echo: BooleanFunction | None = None
    bob_tag_echo: BooleanFunction | None = None


def sample_shared_keys(protocol: str, n: int, l: int, t: int,
                       rng) -> SharedKeys:
    """Draw a full key bundle of the right shape for one protocol."""
    gen = make_rng(rng)
    if protocol == "p6":
        return SharedKeys(
            alice_tag=sample_function(n + t, l, gen),
            bob_tag=sample_function(n + t, l, gen),
            mac_key=mac_keygen(t, gen),
            alice_tag_echo=sample_function(t, l, gen),
            bob_tag_echo=sample_function(t, l, gen),
        )
    return SharedKeys(
        alice_tag=sample_function(n, l, gen),
        bob_tag=sample_function(n, l, gen),
    )


@dataclass
class Transmission:
    round_index: int
    sender: str
    receiver: str
    registers: tuple[tuple[str, int], ...]
    snapshot: DensityMatrix | None = None


@dataclass
class MeasurementRecord:
    owner: str
    register: str
    width: int
    outcome: int


@dataclass
class Transcript:
    """Everything observable about one protocol session."""

    protocol: str
    n: int
    l: int
    t: int
    message: int
    transmissions: list[Transmission] = field(default_factory=list)
    measurements: list[MeasurementRecord] = field(default_factory=list)
    attack_events: list[dict] = field(default_factory=list)
    recovered: int | None = None
    alice_accepts: bool | None = None
    bob_accepts: bool | None = None
    mac_accepts: bool | None = None
    draws: object = None

    @property
    def rounds(self) -> int:
        return len(self.transmissions)

    def snapshot(self, round_index: int) -> DensityMatrix:
        for tx in self.transmissions:
            if tx.round_index == round_index:
                if tx.snapshot is None:
                    raise ValueError(f"round {round_index} was run without snapshots")
                return tx.snapshot
        raise ValueError(f"no transmission with round index {round_index}")


# Draw records hold every random choice a session consumes, so a run
# can be replayed exactly with any subset overridden.


@dataclass(frozen=True)
class P1Draws:
    alice_perm: BooleanPermutation
    bob_perm: BooleanPermutation


@dataclass(frozen=True)
class P2Draws:
    sender_perm: BooleanPermutation
    receiver_perm: BooleanPermutation
    first_pad: int    # sender's pad on the outbound tag
    reply_pad: int    # receiver's pad on the return tag
    final_pad: int    # sender's pad on the last tag


@dataclass(frozen=True)
class P4Draws:
    receiver_perm: BooleanPermutation
    receiver_pad: int  # pad on the initiating tag
    sender_pad: int    # pad on the replying tag


@dataclass(frozen=True)
class StagedDraws:
    stages: tuple


def sample_draws(protocol: str, n: int, l: int, t: int, rng):
    """Materialise a session's random choices without running it.

    Mirrors the stream discipline of the runners exactly (same party
    substreams, same draw order), so passing the result back in via
    `draws=` reproduces the session the same seed would have produced.
    """
    alice_rng, bob_rng, _ = party_streams(rng if rng is not None else 0, 3)
    if protocol == "p1":
        return P1Draws(sample_permutation(n, alice_rng), sample_permutation(n, bob_rng))
    if protocol == "p2":
        return _p2_draws(n, l, alice_rng, bob_rng)
    if protocol == "p3":
        return StagedDraws((
            _p2_draws(n, l, alice_rng, bob_rng),
            _p2_draws(n, l, bob_rng, alice_rng),
            _p2_draws(n, l, alice_rng, bob_rng),
        ))
    if protocol in ("p4", "two-round"):
        return _p4_draws(n, l, bob_rng, alice_rng)
    if protocol == "p5":
        return StagedDraws((
            _p4_draws(n, l, bob_rng, alice_rng),
            _p4_draws(n, l, alice_rng, bob_rng),
            _p4_draws(n, l, bob_rng, alice_rng),
        ))
    if protocol == "p6":
        return StagedDraws((
            _p4_draws(n + t, l, bob_rng, alice_rng),
            _p4_draws(t, l, alice_rng, bob_rng),
        ))
    if protocol == "nonint":
        return NonintDraws(sample_pad(l, alice_rng).value)
    raise ProtocolError(f"unknown protocol {protocol!r}")


# ---------------------------------------------------------------------------
# Transmission plumbing
# ---------------------------------------------------------------------------


def _transmit(
    state: CompositeState,
    transcript: Transcript,
    round_index: int,
    names: Sequence[str],
    sender: str,
    receiver: str,
    attack,
    eve_rng: np.random.Generator,
    snapshots: bool,
) -> CompositeState:
    """Move registers across the channel, applying any interposition.

    The snapshot records the state actually travelling toward the
    receiver, i.e. after the adversary touched it.
    """
    state = state.with_holder(names, Holder.CHANNEL)
    if attack is not None:
        state = attack.on_transmission(state, round_index, tuple(names), eve_rng,
                                       transcript.attack_events)
    snap = None
    if snapshots:
        snap = state.reduced_density_matrix(names)
    regs = tuple((name, state.register(name).width) for name in names)
    transcript.transmissions.append(
        Transmission(round_index, sender, receiver, regs, snap)
    )
    return state.with_holder(names, Holder(receiver))


def _measure(state, transcript, owner, name, rng):
    outcome, state = state.measure(name, rng)
    transcript.measurements.append(
        MeasurementRecord(owner, name, state.register(name).width, outcome)
    )
    return outcome, state


# ---------------------------------------------------------------------------
# Three-pass scrambling, no pre-shared secret
# ---------------------------------------------------------------------------


def run_protocol1(
    x: int,
    n: int,
    *,
    rng=None,
    draws: P1Draws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """Message out, scramble, scramble back, unscramble: three passes.

    Alice phase-encodes x into a full superposition, binds it to her
    secret permutation, and the register crosses the channel three
    times while first her and then Bob's permutation are attached and
    later uncomputed. Bob's final Hadamard-and-measure recovers x with
    certainty in an honest run.
    """
    _check_message(x, n)
    _check_cap("p1", n, 0, 0, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = P1Draws(sample_permutation(n, alice_rng), sample_permutation(n, bob_rng))
    if draws.alice_perm.n != n or draws.bob_perm.n != n:
        raise ProtocolError("permutation width does not match the message width")
    tr = Transcript("p1", n, 0, 0, x, draws=draws)

    state = init_basis_state([Register("R1", n, Holder.ALICE)], {"R1": x},
                             qubit_cap=qubit_cap)
    state = state.apply_hadamard("R1")
    state = state.extend("R2", n, Holder.ALICE)
    state = state.apply_xor_oracle("R1", "R2", draws.alice_perm.table)
    state = _transmit(state, tr, 1, ["R1"], ALICE, BOB, attack, eve_rng, snapshots)

    state = state.extend("R3", n, Holder.BOB)
    state = state.apply_xor_oracle("R1", "R3", draws.bob_perm.table)
    state = _transmit(state, tr, 2, ["R1"], BOB, ALICE, attack, eve_rng, snapshots)

    state = state.apply_xor_oracle("R1", "R2", draws.alice_perm.table)  # uncompute
    state = state.discard("R2")
    state = _transmit(state, tr, 3, ["R1"], ALICE, BOB, attack, eve_rng, snapshots)

    state = state.apply_xor_oracle("R1", "R3", draws.bob_perm.table)  # uncompute
    state = state.discard("R3")
    state = state.apply_hadamard("R1")
    tr.recovered, state = _measure(state, tr, BOB, "R1", bob_rng)
    return tr


# ---------------------------------------------------------------------------
# Tagged three-pass exchange (shared by the keyed three-pass protocols)
# ---------------------------------------------------------------------------


def _p2_draws(n: int, l: int, sender_rng, receiver_rng) -> P2Draws:
    return P2Draws(
        sender_perm=sample_permutation(n, sender_rng),
        receiver_perm=sample_permutation(n, receiver_rng),
        first_pad=sample_pad(l, sender_rng).value,
        reply_pad=sample_pad(l, receiver_rng).value,
        final_pad=sample_pad(l, sender_rng).value,
    )


def _check_tag_fn(fn: BooleanFunction, n: int, l: int, who: str) -> None:
    if fn.n != n or fn.l != l:
        raise ProtocolError(
            f"{who} tag function has shape {fn.n}->{fn.l}, session needs {n}->{l}"
        )


def _run_tagged_three_pass(
    tr: Transcript,
    x: int,
    n: int,
    l: int,
    sender: str,
    receiver: str,
    sender_tag: BooleanFunction,
    receiver_tag: BooleanFunction,
    draws: P2Draws,
    sender_rng,
    receiver_rng,
    eve_rng,
    attack,
    round_offset: int,
    snapshots: bool,
    qubit_cap: int,
) -> int:
    """One tagged three-pass exchange; returns the receiver's value.

    Pass 1 carries the scrambled message plus the sender's padded tag;
    pass 2 returns it with the receiver's tag; pass 3 goes out again
    with a freshly padded sender tag. Tags are stripped by the party
    that knows them, leaving the bare pad, which is measured and logged.
    """
    _check_tag_fn(sender_tag, n, l, sender)
    _check_tag_fn(receiver_tag, n, l, receiver)
    sh, rh = Holder(sender), Holder(receiver)

    state = init_basis_state([Register("R1", n, sh)], {"R1": x}, qubit_cap=qubit_cap)
    state = state.apply_hadamard("R1")
    state = state.extend("R2", n, sh)
    state = state.apply_xor_oracle("R1", "R2", draws.sender_perm.table)
    state = state.extend("R3", l, sh)
    state = state.apply_xor_oracle("R1", "R3", sender_tag.table, pad=draws.first_pad)
    state = _transmit(state, tr, round_offset + 1, ["R1", "R3"], sender, receiver,
                      attack, eve_rng, snapshots)

    # Receiver: expose and log the sender's pad, then bind own secrets.
    state = state.apply_xor_oracle("R1", "R3", sender_tag.table)
    _, state = _measure(state, tr, receiver, "R3", receiver_rng)
    state = state.discard("R3")
    state = state.extend("R4", n, rh)
    state = state.apply_xor_oracle("R1", "R4", draws.receiver_perm.table)
    state = state.extend("R5", l, rh)
    state = state.apply_xor_oracle("R1", "R5", receiver_tag.table, pad=draws.reply_pad)
    state = _transmit(state, tr, round_offset + 2, ["R1", "R5"], receiver, sender,
                      attack, eve_rng, snapshots)

    # Sender: detach own permutation, expose the receiver's pad, re-tag.
    state = state.apply_xor_oracle("R1", "R2", draws.sender_perm.table)
    state = state.discard("R2")
    state = state.apply_xor_oracle("R1", "R5", receiver_tag.table)
    _, state = _measure(state, tr, sender, "R5", sender_rng)
    state = state.discard("R5")
    state = state.extend("R6", l, sh)
    state = state.apply_xor_oracle("R1", "R6", sender_tag.table, pad=draws.final_pad)
    state = _transmit(state, tr, round_offset + 3, ["R1", "R6"], sender, receiver,
                      attack, eve_rng, snapshots)

    # Receiver: detach own permutation, expose the final pad, decode.
    state = state.apply_xor_oracle("R1", "R4", draws.receiver_perm.table)
    state = state.discard("R4")
    state = state.apply_xor_oracle("R1", "R6", sender_tag.table)
    _, state = _measure(state, tr, receiver, "R6", receiver_rng)
    state = state.discard("R6")
    state = state.apply_hadamard("R1")
    outcome, state = _measure(state, tr, receiver, "R1", receiver_rng)
    return outcome


def run_protocol2(
    x: int,
    n: int,
    l: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: P2Draws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """Single tagged three-pass exchange from Alice to Bob."""
    _check_message(x, n)
    _check_cap("p2", n, l, 0, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = _p2_draws(n, l, alice_rng, bob_rng)
    tr = Transcript("p2", n, l, 0, x, draws=draws)
    tr.recovered = _run_tagged_three_pass(
        tr, x, n, l, ALICE, BOB, keys.alice_tag, keys.bob_tag, draws,
        alice_rng, bob_rng, eve_rng, attack, 0, snapshots, qubit_cap,
    )
    return tr


def run_protocol3(
    x: int,
    n: int,
    l: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: StagedDraws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """Message, echo, message: three tagged exchanges with verdicts.

    Stage 2 swaps the roles; each party keeps using its own tag
    function in whichever role it plays. Permutations and pads are
    fresh every stage; the tag functions persist. Alice accepts when
    the echo matches what she sent; Bob accepts when both of his
    receptions agree.
    """
    _check_message(x, n)
    _check_cap("p3", n, l, 0, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = StagedDraws((
            _p2_draws(n, l, alice_rng, bob_rng),
            _p2_draws(n, l, bob_rng, alice_rng),
            _p2_draws(n, l, alice_rng, bob_rng),
        ))
    tr = Transcript("p3", n, l, 0, x, draws=draws)

    first = _run_tagged_three_pass(
        tr, x, n, l, ALICE, BOB, keys.alice_tag, keys.bob_tag, draws.stages[0],
        alice_rng, bob_rng, eve_rng, attack, 0, snapshots, qubit_cap,
    )
    echo = _run_tagged_three_pass(
        tr, first, n, l, BOB, ALICE, keys.bob_tag, keys.alice_tag, draws.stages[1],
        bob_rng, alice_rng, eve_rng, attack, 3, snapshots, qubit_cap,
    )
    second = _run_tagged_three_pass(
        tr, x, n, l, ALICE, BOB, keys.alice_tag, keys.bob_tag, draws.stages[2],
        alice_rng, bob_rng, eve_rng, attack, 6, snapshots, qubit_cap,
    )
    tr.recovered = first
    tr.alice_accepts = echo == x
    tr.bob_accepts = first == second
    return tr


# ---------------------------------------------------------------------------
# Inverted two-pass exchange (shared by the receiver-initiated protocols)
# ---------------------------------------------------------------------------


def _p4_draws(n: int, l: int, receiver_rng, sender_rng) -> P4Draws:
    return P4Draws(
        receiver_perm=sample_permutation(n, receiver_rng),
        receiver_pad=sample_pad(l, receiver_rng).value,
        sender_pad=sample_pad(l, sender_rng).value,
    )


def _run_inverted_two_pass(
    tr: Transcript,
    x: int,
    n: int,
    l: int,
    sender: str,
    receiver: str,
    sender_tag: BooleanFunction,
    receiver_tag: BooleanFunction,
    draws: P4Draws,
    sender_rng,
    receiver_rng,
    eve_rng,
    attack,
    round_offset: int,
    snapshots: bool,
    qubit_cap: int,
) -> int:
    """One receiver-initiated exchange; returns the receiver's value.

    The receiver sends a blank scrambled superposition with its tag;
    the sender imprints the message purely as phase flips and re-tags.
    Only two passes total, and the message never appears in any
    computational-basis population.
    """
    _check_tag_fn(sender_tag, n, l, sender)
    _check_tag_fn(receiver_tag, n, l, receiver)
    sh, rh = Holder(sender), Holder(receiver)

    state = init_basis_state([Register("R1", n, rh)], None, qubit_cap=qubit_cap)
    state = state.apply_hadamard("R1")
    state = state.extend("R2", n, rh)
    state = state.apply_xor_oracle("R1", "R2", draws.receiver_perm.table)
    state = state.extend("R3", l, rh)
    state = state.apply_xor_oracle("R1", "R3", receiver_tag.table, pad=draws.receiver_pad)
    state = _transmit(state, tr, round_offset + 1, ["R1", "R3"], receiver, sender,
                      attack, eve_rng, snapshots)

    # Sender: expose the receiver's pad, write the message into phases.
    state = state.apply_xor_oracle("R1", "R3", receiver_tag.table)
    _, state = _measure(state, tr, sender, "R3", sender_rng)
    state = state.discard("R3")
    state = state.apply_phase_flip("R1", x)
    state = state.extend("R4", l, sh)
    state = state.apply_xor_oracle("R1", "R4", sender_tag.table, pad=draws.sender_pad)
    state = _transmit(state, tr, round_offset + 2, ["R1", "R4"], sender, receiver,
                      attack, eve_rng, snapshots)

    # Receiver: expose the sender's pad, unscramble, decode the phases.
    state = state.apply_xor_oracle("R1", "R4", sender_tag.table)
    _, state = _measure(state, tr, receiver, "R4", receiver_rng)
    state = state.discard("R4")
    state = state.apply_xor_oracle("R1", "R2", draws.receiver_perm.table)
    state = state.discard("R2")
    state = state.apply_hadamard("R1")
    outcome, state = _measure(state, tr, receiver, "R1", receiver_rng)
    return outcome


def run_protocol4(
    x: int,
    n: int,
    l: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: P4Draws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
    _label: str = "p4",
) -> Transcript:
    """Single receiver-initiated exchange from Alice to Bob."""
    _check_message(x, n)
    _check_cap("p4", n, l, 0, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = _p4_draws(n, l, bob_rng, alice_rng)
    tr = Transcript(_label, n, l, 0, x, draws=draws)
    tr.recovered = _run_inverted_two_pass(
        tr, x, n, l, ALICE, BOB, keys.alice_tag, keys.bob_tag, draws,
        alice_rng, bob_rng, eve_rng, attack, 0, snapshots, qubit_cap,
    )
    return tr


def run_two_round(
    x: int,
    n: int,
    l: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: P4Draws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """The two-pass exchange standing alone as a complete protocol.

    Identical machinery to run_protocol4; kept as its own protocol id
    because on its own it permits permanent key reuse, which the
    experiments certify separately.
    """
    return run_protocol4(x, n, l, keys, rng=rng, draws=draws, attack=attack,
                         snapshots=snapshots, qubit_cap=qubit_cap, _label="two-round")


def run_protocol5(
    x: int,
    n: int,
    l: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: StagedDraws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """Message, echo, message over the receiver-initiated exchange."""
    _check_message(x, n)
    _check_cap("p5", n, l, 0, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = StagedDraws((
            _p4_draws(n, l, bob_rng, alice_rng),
            _p4_draws(n, l, alice_rng, bob_rng),
            _p4_draws(n, l, bob_rng, alice_rng),
        ))
    tr = Transcript("p5", n, l, 0, x, draws=draws)

    first = _run_inverted_two_pass(
        tr, x, n, l, ALICE, BOB, keys.alice_tag, keys.bob_tag, draws.stages[0],
        alice_rng, bob_rng, eve_rng, attack, 0, snapshots, qubit_cap,
    )
    echo = _run_inverted_two_pass(
        tr, first, n, l, BOB, ALICE, keys.bob_tag, keys.alice_tag, draws.stages[1],
        bob_rng, alice_rng, eve_rng, attack, 2, snapshots, qubit_cap,
    )
    second = _run_inverted_two_pass(
        tr, x, n, l, ALICE, BOB, keys.alice_tag, keys.bob_tag, draws.stages[2],
        alice_rng, bob_rng, eve_rng, attack, 4, snapshots, qubit_cap,
    )
    tr.recovered = first
    tr.alice_accepts = echo == x
    tr.bob_accepts = first == second
    return tr


def run_protocol6(
    x: int,
    n: int,
    l: int,
    t: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: StagedDraws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """Authenticated two-stage run: message plus tag out, tag echoed back.

    Stage one sends the concatenation of the message (high bits) and
    its one-time authentication tag (low bits) through a single
    receiver-initiated exchange. Bob checks the tag against his copy of
    the one-time key. Stage two returns the tag he received through a
    second exchange; Alice accepts when it equals the tag she computed.
    """
    _check_message(x, n)
    if keys.mac_key is None:
        raise ProtocolError("p6 needs a one-time authentication key")
    if keys.mac_key.t != t:
        raise ProtocolError(f"authentication key width {keys.mac_key.t} != t={t}")
    if keys.alice_tag_echo is None or keys.bob_tag_echo is None:
        raise ProtocolError("p6 needs tag functions for the echo stage")
    _check_cap("p6", n, l, t, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = StagedDraws((
            _p4_draws(n + t, l, bob_rng, alice_rng),
            _p4_draws(t, l, alice_rng, bob_rng),
        ))
    tr = Transcript("p6", n, l, t, x, draws=draws)

    auth_tag = mac_tag(keys.mac_key, x, n)
    packed = (x << t) | auth_tag
    received = _run_inverted_two_pass(
        tr, packed, n + t, l, ALICE, BOB, keys.alice_tag, keys.bob_tag,
        draws.stages[0], alice_rng, bob_rng, eve_rng, attack, 0, snapshots, qubit_cap,
    )
    got_message = received >> t
    got_tag = received & ((1 << t) - 1)
    tr.mac_accepts = mac_verify(keys.mac_key, got_message, n, got_tag)

    echoed = _run_inverted_two_pass(
        tr, got_tag, t, l, BOB, ALICE, keys.bob_tag_echo, keys.alice_tag_echo,
        draws.stages[1], bob_rng, alice_rng, eve_rng, attack, 2, snapshots, qubit_cap,
    )
    tr.recovered = got_message
    tr.alice_accepts = echoed == auth_tag
    tr.bob_accepts = tr.mac_accepts
    return tr


# ---------------------------------------------------------------------------
# One-shot broadcast (exploratory)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonintDraws:
    pad: int


def run_noninteractive(
    x: int,
    n: int,
    l: int,
    keys: SharedKeys,
    *,
    rng=None,
    draws: NonintDraws | None = None,
    attack=None,
    snapshots: bool = True,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> Transcript:
    """Single transmission of the phase-encoded message plus a tag.

    Exploratory: decoding works for the key holder, but nothing here
    certifies security of this variant, and the experiments treat its
    channel views purely as regression data.
    """
    _check_message(x, n)
    _check_cap("nonint", n, l, 0, qubit_cap)
    alice_rng, bob_rng, eve_rng = party_streams(rng if rng is not None else 0, 3)
    if draws is None:
        draws = NonintDraws(sample_pad(l, alice_rng).value)
    tr = Transcript("nonint", n, l, 0, x, draws=draws)

    state = init_basis_state([Register("R1", n, Holder.ALICE)], {"R1": x},
                             qubit_cap=qubit_cap)
    state = state.apply_hadamard("R1")
    state = state.extend("R2", l, Holder.ALICE)
    state = state.apply_xor_oracle("R1", "R2", keys.alice_tag.table, pad=draws.pad)
    state = _transmit(state, tr, 1, ["R1", "R2"], ALICE, BOB, attack, eve_rng, snapshots)

    state = state.apply_xor_oracle("R1", "R2", keys.alice_tag.table)
    _, state = _measure(state, tr, BOB, "R2", bob_rng)
    state = state.discard("R2")
    state = state.apply_hadamard("R1")
    tr.recovered, state = _measure(state, tr, BOB, "R1", bob_rng)
    return tr


def noninteractive_view(
    x: int,
    n: int,
    l: int,
    enum_limit: int = DEFAULT_ENUM_LIMIT,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> DensityMatrix:
    """Exact channel state of the one-shot broadcast, all keys averaged.

    Enumerates every tag function and pad, so the result is the true
    mixture an eavesdropper faces when the key is unknown. The family
    has 2**(l * 2**n) * 2**l members; anything past the enumeration
    limit is rejected with the offending count.
    """
    _check_message(x, n)
    _check_cap("nonint", n, l, 0, qubit_cap)
    total = count_functions(n, l) << l
    if total > enum_limit:
        raise EnumerationLimitError(total, enum_limit,
                                    f"{n}-to-{l}-bit tag functions with pads")
    dim = 1 << (n + l)
    rho = np.zeros((dim, dim), dtype=np.complex128)
    runs = 0
    for fn in enumerate_functions(n, l, enum_limit):
        for pad in range(1 << l):
            vec = np.zeros(dim, dtype=np.complex128)
            for m in range(1 << n):
                sign = -1.0 if bin(x & m).count("1") % 2 else 1.0
                vec[(m << l) | (fn.table[m] ^ pad)] = sign
            vec /= np.sqrt(1 << n)
            rho += np.outer(vec, vec.conj())
            runs += 1
    rho /= runs
    return DensityMatrix(rho)


# ---------------------------------------------------------------------------
# Averaged channel views
# ---------------------------------------------------------------------------


@dataclass
class EveView:
    """Channel state at one round, averaged over enumerated secrets."""

    rho: DensityMatrix
    round_index: int
    averaged_over: tuple[str, ...]
    runs: int


_RUNNERS: dict[str, Callable] = {}


def _runner(protocol: str) -> Callable:
    if not _RUNNERS:
        _RUNNERS.update({
            "p1": lambda x, n, l, t, keys, **kw: run_protocol1(x, n, **kw),
            "p2": lambda x, n, l, t, keys, **kw: run_protocol2(x, n, l, keys, **kw),
            "p3": lambda x, n, l, t, keys, **kw: run_protocol3(x, n, l, keys, **kw),
            "p4": lambda x, n, l, t, keys, **kw: run_protocol4(x, n, l, keys, **kw),
            "p5": lambda x, n, l, t, keys, **kw: run_protocol5(x, n, l, keys, **kw),
            "p6": lambda x, n, l, t, keys, **kw: run_protocol6(x, n, l, t, keys, **kw),
            "nonint": lambda x, n, l, t, keys, **kw: run_noninteractive(x, n, l, keys, **kw),
            "two-round": lambda x, n, l, t, keys, **kw: run_two_round(x, n, l, keys, **kw),
        })
    return _RUNNERS[protocol]


def _round_secrets(protocol: str, round_index: int):
    """Which pad field and which party's tag function a round carries.

    Returns (stage_index, pad_field_name, tag_owner, tag_attr) where
    tag_attr is the SharedKeys attribute name for the carried tag.
    """
    rounds = ROUND_COUNTS[protocol]
    if not 1 <= round_index <= rounds:
        raise ValueError(f"{protocol} has rounds 1..{rounds}, got {round_index}")
    if protocol == "p1":
        raise ValueError("the untagged protocol has no secrets to average over")
    if protocol == "nonint":
        return 0, "pad", ALICE, "alice_tag"
    if protocol in ("p2", "p3"):
        stage = (round_index - 1) // 3
        sub = (round_index - 1) % 3 + 1
        sender = ALICE if stage != 1 else BOB
        receiver = BOB if stage != 1 else ALICE
        field_name = {1: "first_pad", 2: "reply_pad", 3: "final_pad"}[sub]
        owner = sender if sub in (1, 3) else receiver
        return stage, field_name, owner, f"{owner}_tag"
    # Receiver-initiated family.
    stage = (round_index - 1) // 2
    sub = (round_index - 1) % 2 + 1
    sender = ALICE if stage != 1 else BOB
    receiver = BOB if stage != 1 else ALICE
    field_name = "receiver_pad" if sub == 1 else "sender_pad"
    owner = receiver if sub == 1 else sender
    attr = f"{owner}_tag"
    if protocol == "p6" and stage == 1:
        attr += "_echo"
    return stage, field_name, owner, attr


def eve_average_view(
    transcript: Transcript,
    round_index: int,
    *,
    keys: SharedKeys | None = None,
    average_over: Iterable[str] = ("pads",),
    enum_limit: int = DEFAULT_ENUM_LIMIT,
    qubit_cap: int = DEFAULT_QUBIT_CAP,
) -> EveView:
    """Exact mixture of one round's channel state over one-time secrets.

    Re-runs the session of `transcript` once per enumerated value of
    the round's pad ("pads") and, when requested, of the round's tag
    function ("keys"), holding every other draw fixed, and averages the
    channel snapshots. This is the channel state relative to an
    adversary who knows everything except the enumerated secrets, and
    it is a different object from the single-run snapshot stored in the
    transcript.
    """
    kinds = set(average_over)
    unknown = kinds - {"pads", "keys"}
    if unknown:
        raise ValueError(f"unknown averaging kinds {sorted(unknown)}")
    if not kinds:
        # Identity average: nothing enumerated, the per-run snapshot is it.
        return EveView(transcript.snapshot(round_index), round_index, (), 1)
    protocol = transcript.protocol
    if protocol != "p1" and keys is None:
        raise ValueError("keyed protocols need the session keys to average")
    stage, pad_field, owner, tag_attr = _round_secrets(protocol, round_index)
    l = transcript.l

    pad_values: Sequence[int]
    if "pads" in kinds:
        if (1 << l) > enum_limit:
            raise EnumerationLimitError(1 << l, enum_limit, f"{l}-bit pads")
        pad_values = range(1 << l)
    else:
        pad_values = [_get_pad(transcript.draws, protocol, stage, pad_field)]

    if "keys" in kinds:
        base_fn: BooleanFunction = getattr(keys, tag_attr)
        fn_count = count_functions(base_fn.n, base_fn.l)
        if fn_count > enum_limit:
            raise EnumerationLimitError(fn_count, enum_limit,
                                        f"{base_fn.n}-to-{base_fn.l}-bit tag functions")
        fn_values = list(enumerate_functions(base_fn.n, base_fn.l, enum_limit))
    else:
        fn_values = [getattr(keys, tag_attr)] if keys is not None else [None]

    run = _runner(protocol)
    rho_sum = None
    runs = 0
    for pad_value, fn in itertools.product(pad_values, fn_values):
        new_draws = _set_pad(transcript.draws, protocol, stage, pad_field, pad_value)
        new_keys = keys
        if keys is not None and fn is not None:
            new_keys = replace(keys, **{tag_attr: fn})
        redo = run(
            transcript.message, transcript.n, l, transcript.t, new_keys,
            rng=0, draws=new_draws, attack=None, snapshots=True,
            qubit_cap=qubit_cap,
        )
        snap = redo.snapshot(round_index).matrix
        rho_sum = snap if rho_sum is None else rho_sum + snap
        runs += 1

    averaged = []
    if "pads" in kinds:
        averaged.append(f"{pad_field}[stage {stage}]")
    if "keys" in kinds:
        averaged.append(tag_attr)
    return EveView(DensityMatrix(rho_sum / runs), round_index, tuple(averaged), runs)


def _get_pad(draws, protocol: str, stage: int, field_name: str) -> int:
    if protocol in ("p3", "p5", "p6"):
        return getattr(draws.stages[stage], field_name)
    return getattr(draws, field_name)


def _set_pad(draws, protocol: str, stage: int, field_name: str, value: int):
    if protocol in ("p3", "p5", "p6"):
        stages = list(draws.stages)
        stages[stage] = replace(stages[stage], **{field_name: value})
        return StagedDraws(tuple(stages))
    return replace(draws, **{field_name: value})
