"""Adversary strategies and detection experiments.

Attacks come in two shapes. In-transit strategies implement a single
hook, `on_transmission`, that the runners invoke while the registers
sit on the channel; they receive an explicit random stream and an event
log and return the (possibly modified) state. Whole-session strategies,
like the full impersonation procedures, drive their own protocol runs.

Every result produced here certifies exactly the strategies implemented
in this module, nothing stronger.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import protocols as proto
from .oracles import make_rng, party_streams, sample_function, sample_permutation, sample_pad
from .qstate import CompositeState, DensityMatrix, Holder, Register, init_basis_state, trace_distance


class AttackSpecError(ValueError):
    """Malformed attack description string."""


class Attack:
    """Base in-transit strategy: touch nothing, log nothing."""

    kind = "none"

    def on_transmission(
        self,
        state: CompositeState,
        round_index: int,
        names: tuple[str, ...],
        rng: np.random.Generator,
        events: list[dict],
    ) -> CompositeState:
        return state

    def describe(self) -> str:
        return self.kind


@dataclass
class PhaseAttack(Attack):
    """Flip message phases in transit: Z**mask on the message register.

    Applied on every pass in `passes` (all passes when None). An odd
    number of touched passes shifts the decoded message by `mask`; an
    even number cancels out exactly. The channel snapshot is unchanged
    because the flip commutes with the scrambled mixture.
    """

    mask: int
    passes: frozenset[int] | None = None
    target: str = "R1"

    kind = "phase"

    def on_transmission(self, state, round_index, names, rng, events):
        if self.passes is not None and round_index not in self.passes:
            return state
        if self.target not in names:
            return state
        events.append({"attack": "phase", "round": round_index,
                       "register": self.target, "mask": self.mask})
        return state.apply_phase_flip(self.target, self.mask)

    def describe(self) -> str:
        passes = "all" if self.passes is None else ",".join(map(str, sorted(self.passes)))
        return f"phase:x={self.mask:#x},passes={passes}"


@dataclass
class MeasureResendAttack(Attack):
    """Measure every in-transit register, then pass the collapse on."""

    passes: frozenset[int] | None = None

    kind = "measure"

    def on_transmission(self, state, round_index, names, rng, events):
        if self.passes is not None and round_index not in self.passes:
            return state
        for name in names:
            outcome, state = state.measure(name, rng)
            events.append({"attack": "measure", "round": round_index,
                           "register": name, "outcome": outcome})
        return state

    def describe(self) -> str:
        passes = "all" if self.passes is None else ",".join(map(str, sorted(self.passes)))
        return f"measure:passes={passes}"


@dataclass
class PassiveAttack(Attack):
    """Record what crosses the channel; never perturb it.

    The runner's own snapshots already capture the channel states, so
    the hook only notes that the round was observed.
    """

    kind = "passive"

    def on_transmission(self, state, round_index, names, rng, events):
        events.append({"attack": "passive", "round": round_index,
                       "registers": list(names)})
        return state

    def describe(self) -> str:
        return "passive"


def parse_attack(spec: str | None) -> Attack | None:
    """Parse the CLI mini-language for attack strategies.

    Grammar: "none", "passive", "mim", "phase:x=<int>[,passes=a,b,..]",
    "measure[:passes=a,b,...]".  Integers accept 0x prefixes.  "mim" is
    handled by the experiment drivers, not as an in-transit hook, and
    parses to the marker returned here.
    """
    if spec is None or spec == "" or spec == "none":
        return None
    head, _, rest = spec.partition(":")
    options: dict[str, str] = {}
    if rest:
        for token in rest.split(","):
            key, eq, value = token.partition("=")
            if not eq:
                # bare continuation of a passes list: "passes=1,2,3"
                if "passes" in options:
                    options["passes"] += "," + key
                    continue
                raise AttackSpecError(f"malformed attack option {token!r} in {spec!r}")
            options[key] = value
    def parse_passes() -> frozenset[int] | None:
        raw = options.pop("passes", None)
        if raw is None or raw == "all":
            return None
        try:
            return frozenset(int(v, 0) for v in raw.split(",") if v)
        except ValueError as exc:
            raise AttackSpecError(f"bad passes list {raw!r} in {spec!r}") from exc

    if head == "passive":
        return PassiveAttack()
    if head == "phase":
        raw_mask = options.pop("x", None)
        if raw_mask is None:
            raise AttackSpecError(f"phase attack needs x=<mask> in {spec!r}")
        try:
            mask = int(raw_mask, 0)
        except ValueError as exc:
            raise AttackSpecError(f"bad mask {raw_mask!r} in {spec!r}") from exc
        passes = parse_passes()
        if options:
            raise AttackSpecError(f"unknown options {sorted(options)} in {spec!r}")
        return PhaseAttack(mask, passes)
    if head == "measure":
        passes = parse_passes()
        if options:
            raise AttackSpecError(f"unknown options {sorted(options)} in {spec!r}")
        return MeasureResendAttack(passes)
    if head == "mim":
        return MimMarker()
    raise AttackSpecError(f"unknown attack kind {head!r} in {spec!r}")


@dataclass
class MimMarker(Attack):
    """Placeholder for the whole-session impersonation strategies."""

    kind = "mim"

    def on_transmission(self, state, round_index, names, rng, events):
        raise AttackSpecError(
            "mim is a whole-session strategy; use the impersonation drivers"
        )

    def describe(self) -> str:
        return "mim"


# ---------------------------------------------------------------------------
# Whole-session strategies
# ---------------------------------------------------------------------------


@dataclass
class MimOutcome:
    """Result of splitting the untagged protocol into two sessions."""

    eve_recovered: int
    bob_recovered: int
    alice_session: proto.Transcript
    bob_session: proto.Transcript


def mim_full_impersonation(
    x: int,
    x_eve: int,
    n: int,
    *,
    rng=None,
    snapshots: bool = False,
    qubit_cap: int = 22,
) -> MimOutcome:
    """Cut the untagged three-pass protocol into two full sessions.

    Nothing in that protocol authenticates the counterparty, so Eve
    simply runs the receiver role against Alice (learning x every
    time) and separately the sender role against Bob with a message of
    her choice. Both halves are deterministic honest runs; only the
    pairing is dishonest.
    """
    eve_rng, session_rng = party_streams(rng if rng is not None else 0, 2)
    toward_eve = proto.run_protocol1(x, n, rng=session_rng, snapshots=snapshots,
                                     qubit_cap=qubit_cap)
    toward_bob = proto.run_protocol1(x_eve, n, rng=eve_rng, snapshots=snapshots,
                                     qubit_cap=qubit_cap)
    return MimOutcome(
        eve_recovered=toward_eve.recovered,
        bob_recovered=toward_bob.recovered,
        alice_session=toward_eve,
        bob_session=toward_bob,
    )


@dataclass
class ImpersonationTrial:
    """One stage-two hijack attempt against an echoed protocol."""

    protocol: str
    message: int
    eve_guess: int
    echo_measured: int
    alice_accepts: bool


def _eve_fake_keys(n: int, l: int, rng) -> tuple:
    """Plausible-looking substitutes for the tag functions Eve lacks."""
    return sample_function(n, l, rng), sample_function(n, l, rng)


def impersonate_echo_stage(
    protocol: str,
    x: int,
    n: int,
    l: int,
    keys: proto.SharedKeys,
    *,
    rng=None,
    qubit_cap: int = 22,
) -> ImpersonationTrial:
    """Eve hijacks the echo stage without the shared tag functions.

    Stage one runs honestly except that Eve measures everything in
    transit (gaining only scrambled values). She then plays the echo
    stage's sending role toward Alice, echoing her best guess with
    self-made substitute tag functions. Alice runs her honest side and
    applies her usual echo verdict. The guess can only be uniform: every
    stage-one snapshot Eve measured is independent of x.
    """
    if protocol not in ("p3", "p5"):
        raise ValueError(f"echo impersonation targets p3 or p5, not {protocol!r}")
    root = make_rng(rng if rng is not None else 0)
    stage1_rng, eve_rng, alice_rng = root.spawn(3)

    # Stage one, honest parties, Eve measuring on the line.
    tap = MeasureResendAttack()
    if protocol == "p3":
        stage1 = proto.run_protocol2(x, n, l, keys, rng=stage1_rng, attack=tap,
                                     snapshots=False, qubit_cap=qubit_cap)
    else:
        stage1 = proto.run_protocol4(x, n, l, keys, rng=stage1_rng, attack=tap,
                                     snapshots=False, qubit_cap=qubit_cap)

    # Eve's guess: the message-register value she measured first. It is
    # uniform, so her success floor is 2**-n regardless of the tap.
    guess = next(ev["outcome"] for ev in stage1.attack_events
                 if ev.get("register") == "R1")

    fake_sender_tag, fake_receiver_strip = _eve_fake_keys(n, l, eve_rng)
    if protocol == "p3":
        trial = _hijack_tagged_echo(x, guess, n, l, keys, fake_sender_tag,
                                    fake_receiver_strip, eve_rng, alice_rng, qubit_cap)
    else:
        trial = _hijack_inverted_echo(x, guess, n, l, keys, fake_sender_tag,
                                      fake_receiver_strip, eve_rng, alice_rng, qubit_cap)
    echo, = trial
    return ImpersonationTrial(protocol, x, guess, echo, alice_accepts=(echo == x))


def _hijack_tagged_echo(x, guess, n, l, keys, fake_tag, fake_strip,
                        eve_rng, alice_rng, qubit_cap):
    """Echo stage of the tagged three-pass family with Eve as sender.

    Alice performs her genuine receiver role (stripping with the real
    shared functions); Eve substitutes her own tables wherever the real
    Bob would have used a shared secret.
    """
    eve_perm = sample_permutation(n, eve_rng)
    alice_perm = sample_permutation(n, alice_rng)
    pad1 = sample_pad(l, eve_rng).value
    pad_reply = sample_pad(l, alice_rng).value
    pad3 = sample_pad(l, eve_rng).value

    state = init_basis_state([Register("R1", n, Holder.EVE)], {"R1": guess},
                             qubit_cap=qubit_cap)
    state = state.apply_hadamard("R1")
    state = state.extend("R2", n, Holder.EVE)
    state = state.apply_xor_oracle("R1", "R2", eve_perm.table)
    state = state.extend("R3", l, Holder.EVE)
    state = state.apply_xor_oracle("R1", "R3", fake_tag.table, pad=pad1)

    # Alice strips with the real counterparty function; on Eve's fake
    # tag that leaves a residue entangled with the message register,
    # and her measurement collapses part of the superposition.
    state = state.apply_xor_oracle("R1", "R3", keys.bob_tag.table)
    _, state = state.measure("R3", alice_rng)
    state = state.discard("R3")
    state = state.extend("R4", n, Holder.ALICE)
    state = state.apply_xor_oracle("R1", "R4", alice_perm.table)
    state = state.extend("R5", l, Holder.ALICE)
    state = state.apply_xor_oracle("R1", "R5", keys.alice_tag.table, pad=pad_reply)

    # Eve: undo her permutation; fake-strip the tag she cannot read.
    state = state.apply_xor_oracle("R1", "R2", eve_perm.table)
    state = state.discard("R2")
    state = state.apply_xor_oracle("R1", "R5", fake_strip.table)
    _, state = state.measure("R5", eve_rng)
    state = state.discard("R5")
    state = state.extend("R6", l, Holder.EVE)
    state = state.apply_xor_oracle("R1", "R6", fake_tag.table, pad=pad3)

    # Alice: undo her permutation, strip with the real function, decode.
    state = state.apply_xor_oracle("R1", "R4", alice_perm.table)
    state = state.discard("R4")
    state = state.apply_xor_oracle("R1", "R6", keys.bob_tag.table)
    _, state = state.measure("R6", alice_rng)
    state = state.discard("R6")
    state = state.apply_hadamard("R1")
    echo, state = state.measure("R1", alice_rng)
    return (echo,)


def _hijack_inverted_echo(x, guess, n, l, keys, fake_tag, fake_strip,
                          eve_rng, alice_rng, qubit_cap):
    """Echo stage of the receiver-initiated family with Eve as sender.

    Alice initiates honestly; Eve fake-strips Alice's tag, imprints her
    guess as phases, and tags with her own substitute function.
    """
    alice_perm = sample_permutation(n, alice_rng)
    pad_alice = sample_pad(l, alice_rng).value
    pad_eve = sample_pad(l, eve_rng).value

    state = init_basis_state([Register("R1", n, Holder.ALICE)], None,
                             qubit_cap=qubit_cap)
    state = state.apply_hadamard("R1")
    state = state.extend("R2", n, Holder.ALICE)
    state = state.apply_xor_oracle("R1", "R2", alice_perm.table)
    state = state.extend("R3", l, Holder.ALICE)
    state = state.apply_xor_oracle("R1", "R3", keys.alice_tag.table, pad=pad_alice)

    # Eve: fake-strip, measure the residue, write her guess as phases.
    state = state.apply_xor_oracle("R1", "R3", fake_strip.table)
    _, state = state.measure("R3", eve_rng)
    state = state.discard("R3")
    state = state.apply_phase_flip("R1", guess)
    state = state.extend("R4", l, Holder.EVE)
    state = state.apply_xor_oracle("R1", "R4", fake_tag.table, pad=pad_eve)

    # Alice: strip with the real counterparty function, decode.
    state = state.apply_xor_oracle("R1", "R4", keys.bob_tag.table)
    _, state = state.measure("R4", alice_rng)
    state = state.discard("R4")
    state = state.apply_xor_oracle("R1", "R2", alice_perm.table)
    state = state.discard("R2")
    state = state.apply_hadamard("R1")
    echo, state = state.measure("R1", alice_rng)
    return (echo,)


@dataclass
class DetectionStats:
    """Rejection statistics for repeated impersonation trials."""

    protocol: str
    n: int
    l: int
    trials: int
    rejections: int

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.trials


def echo_detection_experiment(
    protocol: str,
    n: int,
    l: int,
    trials: int,
    *,
    rng=None,
    qubit_cap: int = 22,
) -> DetectionStats:
    """Repeat the stage-two hijack and count Alice's rejections.

    Messages and keys are redrawn every trial so the statistic covers
    the whole ensemble, not one lucky key.
    """
    root = make_rng(rng if rng is not None else 0)
    rejections = 0
    for _ in range(trials):
        key_rng, msg_rng, trial_rng = root.spawn(3)
        keys = proto.sample_shared_keys(protocol, n, l, 0, key_rng)
        x = int(msg_rng.integers(0, 1 << n))
        trial = impersonate_echo_stage(protocol, x, n, l, keys, rng=trial_rng,
                                       qubit_cap=qubit_cap)
        if not trial.alice_accepts:
            rejections += 1
    return DetectionStats(protocol, n, l, trials, rejections)


# ---------------------------------------------------------------------------
# Passive observation
# ---------------------------------------------------------------------------


@dataclass
class PassiveComparison:
    """Per-round channel snapshots across a message set, with distances."""

    protocol: str
    messages: tuple[int, ...]
    views: dict  # message -> list[DensityMatrix], one per round
    distances: dict  # (x, y, round_index) -> float


def passive_snapshot(
    protocol: str,
    messages: Sequence[int],
    n: int,
    l: int = 0,
    keys: proto.SharedKeys | None = None,
    *,
    rng=None,
    averaged: bool = False,
    qubit_cap: int = 22,
) -> PassiveComparison:
    """Observe sessions for several messages and compare the rounds.

    With `averaged` the comparison uses the exact pad-averaged views
    (the indistinguishability object); otherwise the per-run snapshots.
    Draws are held identical across messages so the comparison isolates
    the message dependence.
    """
    run = proto._runner(protocol)
    t = keys.mac_key.t if (keys is not None and keys.mac_key is not None) else 0
    base = run(messages[0], n, l, t, keys, rng=rng if rng is not None else 0,
               attack=PassiveAttack(), snapshots=True, qubit_cap=qubit_cap)
    rounds = proto.ROUND_COUNTS[protocol]
    views: dict[int, list[DensityMatrix]] = {}
    for x in messages:
        redo = run(x, n, l, t, keys, rng=0, draws=base.draws,
                   attack=PassiveAttack(), snapshots=True, qubit_cap=qubit_cap)
        if averaged:
            views[x] = [
                proto.eve_average_view(redo, r, keys=keys).rho
                for r in range(1, rounds + 1)
            ]
        else:
            views[x] = [redo.snapshot(r) for r in range(1, rounds + 1)]
    distances = {}
    msgs = list(messages)
    for i, x in enumerate(msgs):
        for y in msgs[i + 1:]:
            for r in range(1, rounds + 1):
                distances[(x, y, r)] = trace_distance(views[x][r - 1], views[y][r - 1])
    return PassiveComparison(protocol, tuple(messages), views, distances)
