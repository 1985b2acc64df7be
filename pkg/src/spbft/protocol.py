"""PBFT / S-PBFT structure: fault bound, stage message schedules and quorum rules.

Node 0 is the primary, nodes 1..n-1 are replicas and ``CLIENT`` (-1) is the
client. Replicas form a ring (``ring_next`` / ``ring_prev``) that fixes who
backscatters to whom.

S-PBFT band plan (band ids 1..n):

* pre-prepare: band i carries primary -> ring_prev(i), replica i acts as STx
  and lends multipath gain to that PRx, ring_next(i) is the nominal SRx.
* prepare: replica c broadcasts on band c, one recipient per epoch with the
  primary first. In epoch 0 of band c, ring_next(c) backscatters its own
  prepare to ring_next(ring_next(c)) on c's carrier.
* commit: replicas broadcast as in prepare; the primary broadcasts on band n.
  Backscatter s -> ring_next(s) rides on band ring_prev(s), backscatter
  s -> ring_prev(s) rides on band n while the primary serves ring_next(s).
* reply: every node backscatters its reply to the client (band k for
  replica k, band n for the primary) on the client's carrier.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

PRIMARY = 0
CLIENT = -1


class Stage(enum.Enum):
    REQUEST = "request"
    PRE_PREPARE = "pre-prepare"
    PREPARE = "prepare"
    COMMIT = "commit"
    REPLY = "reply"


CONSENSUS_STAGES = (Stage.PRE_PREPARE, Stage.PREPARE, Stage.COMMIT, Stage.REPLY)


class Protocol(enum.Enum):
    PBFT = "pbft"
    SPBFT = "spbft"


class Role(enum.Enum):
    PTX = "PTx"
    PRX = "PRx"
    STX = "STx"
    SRX = "SRx"
    IDLE = "Idle"


class Kind(enum.Enum):
    ACTIVE = "active"
    BACKSCATTER = "backscatter"


def max_faulty(n: int) -> int:
    """Largest number of faulty nodes an n-node PBFT network tolerates."""
    if n < 4:
        raise ValueError(f"PBFT needs at least 4 nodes to tolerate a fault, got n={n}")
    return (n - 1) // 3


@dataclass(frozen=True)
class ProtocolConfig:
    """Network size, link success probabilities, per-message delays and transmit power.

    ``p_s`` is the plain (and backscatter) success probability, ``p_e`` the
    success probability of a multipath-enhanced active link. Delays are in
    seconds, powers in watts.
    """

    n: int
    p_s: float
    p_e: float
    t1: float = 1.0
    t2: float = 1.0
    p_t: float = 1.0
    backscatter_power: float = 0.0
    allow_degraded: bool = False

    def __post_init__(self) -> None:
        f = max_faulty(self.n)
        if self.n != 3 * f + 1:
            raise ValueError(f"n must be of the form 3f+1, got n={self.n}")
        for name in ("p_s", "p_e"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
        if self.p_s > self.p_e:
            if not self.allow_degraded:
                raise ValueError(f"p_s={self.p_s} exceeds p_e={self.p_e}; pass allow_degraded=True to explore this")
            warnings.warn(f"p_s={self.p_s} > p_e={self.p_e}: enhancement degrades the link", stacklevel=2)
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("t1 and t2 must be positive")
        if not (self.p_t >= 0 and self.backscatter_power >= 0):
            raise ValueError("powers must be nonnegative")
        if not all(math.isfinite(v) for v in (self.t1, self.t2, self.p_t, self.backscatter_power)):
            raise ValueError("timing and power values must be finite")

    @property
    def f(self) -> int:
        return max_faulty(self.n)


class Message(NamedTuple):
    """One scheduled transmission; a tuple so that large schedules build quickly."""

    stage: Stage
    epoch: int
    band: int
    sender: int
    receiver: int
    kind: Kind


@dataclass(frozen=True)
class StageSchedule:
    """Who transmits to whom, on which band and in which epoch, during one stage."""

    stage: Stage
    n: int
    roles: Mapping[tuple[int, int], Mapping[int, Role]]
    active_messages: tuple[Message, ...]
    backscatter_messages: tuple[Message, ...]
    gain_edges: tuple[tuple[int, int], ...]

    @property
    def messages(self) -> tuple[Message, ...]:
        return self.active_messages + self.backscatter_messages

    @property
    def bands(self) -> tuple[int, ...]:
        return tuple(sorted({band for band, _ in self.roles}))

    @property
    def epochs(self) -> tuple[int, ...]:
        return tuple(sorted({epoch for _, epoch in self.roles}))

    def band_roles(self, band: int, epoch: int = 0) -> dict[int, Role]:
        """Role of every node (and the client, if involved) on one band in one epoch."""
        assigned = self.roles.get((band, epoch), {})
        out = {node: Role.IDLE for node in range(self.n)}
        out.update(assigned)
        return out

    def problems(self) -> list[str]:
        """Violations of the frequency-division rules; empty for a well-formed schedule."""
        found = []
        per_slot = Counter((m.band, m.epoch, m.kind) for m in self.messages)
        for (band, epoch, kind), count in per_slot.items():
            if count > 1:
                found.append(f"band/epoch {(band, epoch)} hosts {count} {kind.value} messages")
        found.extend(f"{m} uses band outside 1..{self.n}" for m in self.messages if not 1 <= m.band <= self.n)
        if self.stage in (Stage.PREPARE, Stage.COMMIT):
            carriers = {(m.band, m.epoch) for m in self.active_messages}
            for msg in self.backscatter_messages:
                if (msg.band, msg.epoch) not in carriers:
                    found.append(f"{msg} has no active carrier")
        unique = (Role.PTX, Role.STX, Role.SRX)
        for slot, assigned in self.roles.items():
            held = [role for role in assigned.values() if role in unique]
            if len(held) != len(set(held)):
                found.append(f"band/epoch {slot} repeats a unique role: {sorted(r.value for r in held)}")
        return found


def ring_next(replica: int, n: int) -> int:
    return replica % (n - 1) + 1


def ring_prev(replica: int, n: int) -> int:
    return (replica - 2) % (n - 1) + 1


def _replicas(n: int) -> range:
    return range(1, n)


class _Builder:
    def __init__(self, stage: Stage, n: int) -> None:
        self.stage = stage
        self.n = n
        self.roles: dict[tuple[int, int], dict[int, Role]] = defaultdict(dict)
        self.active: list[Message] = []
        self.backscatter: list[Message] = []
        self.gain: list[tuple[int, int]] = []

    def assign(self, band: int, epoch: int, node: int, role: Role) -> None:
        slot = self.roles[(band, epoch)]
        held = slot.setdefault(node, role)
        if held is not role:
            raise AssertionError(f"node {node} already holds {held} on band {band} epoch {epoch}")

    def send(self, kind: Kind, band: int, epoch: int, sender: int, receiver: int) -> None:
        msg = Message(self.stage, epoch, band, sender, receiver, kind)
        if kind is Kind.ACTIVE:
            self.active.append(msg)
            tx, rx = Role.PTX, Role.PRX
        else:
            self.backscatter.append(msg)
            tx, rx = Role.STX, Role.SRX
        slot = self.roles[(band, epoch)]
        if slot.setdefault(sender, tx) is not tx or slot.setdefault(receiver, rx) is not rx:
            raise AssertionError(f"role clash for {msg}")

    def build(self) -> StageSchedule:
        roles = MappingProxyType({k: MappingProxyType(dict(v)) for k, v in sorted(self.roles.items())})
        return StageSchedule(
            stage=self.stage,
            n=self.n,
            roles=roles,
            active_messages=tuple(self.active),
            backscatter_messages=tuple(self.backscatter),
            gain_edges=tuple(self.gain),
        )


def _broadcast_order(sender: int, n: int, skip: Iterable[int]) -> list[int]:
    # primary first, then replicas walking the ring from the sender
    skipped = set(skip) | {sender}
    order = [PRIMARY]
    node = sender
    for _ in range(n - 2):
        node = ring_next(node, n)
        if node not in skipped:
            order.append(node)
    return order


def _pre_prepare(n: int) -> StageSchedule:
    b = _Builder(Stage.PRE_PREPARE, n)
    for band in _replicas(n):
        target = ring_prev(band, n)
        b.send(Kind.ACTIVE, band, 0, PRIMARY, target)
        b.assign(band, 0, band, Role.STX)
        b.assign(band, 0, ring_next(band, n), Role.SRX)
        b.gain.append((band, target))
    return b.build()


def _replica_broadcasts(b: _Builder, n: int, skip_of) -> None:
    for sender in _replicas(n):
        for epoch, receiver in enumerate(_broadcast_order(sender, n, skip_of(sender))):
            b.send(Kind.ACTIVE, sender, epoch, sender, receiver)
        rider = ring_next(sender, n)
        b.send(Kind.BACKSCATTER, sender, 0, rider, ring_next(rider, n))
        b.gain.append((rider, PRIMARY))


def _prepare(n: int) -> StageSchedule:
    b = _Builder(Stage.PREPARE, n)
    _replica_broadcasts(b, n, lambda c: (ring_next(c, n),))
    return b.build()


def _commit(n: int) -> StageSchedule:
    b = _Builder(Stage.COMMIT, n)
    _replica_broadcasts(b, n, lambda c: (ring_next(c, n), ring_prev(c, n)))
    extra_band = n
    for epoch, receiver in enumerate(_replicas(n)):
        b.send(Kind.ACTIVE, extra_band, epoch, PRIMARY, receiver)
        rider = ring_prev(receiver, n)
        b.send(Kind.BACKSCATTER, extra_band, epoch, rider, ring_prev(rider, n))
        b.gain.append((rider, receiver))
    return b.build()


def _reply(n: int) -> StageSchedule:
    b = _Builder(Stage.REPLY, n)
    for node in _replicas(n):
        b.send(Kind.BACKSCATTER, node, 0, node, CLIENT)
    b.send(Kind.BACKSCATTER, n, 0, PRIMARY, CLIENT)
    return b.build()


_BUILDERS = {
    Stage.PRE_PREPARE: _pre_prepare,
    Stage.PREPARE: _prepare,
    Stage.COMMIT: _commit,
    Stage.REPLY: _reply,
}


@lru_cache(maxsize=256)
def role_schedule(n: int, stage: Stage) -> StageSchedule:
    """S-PBFT band/role assignment and message list for one consensus stage (cached; the result is immutable)."""
    max_faulty(n)
    try:
        builder = _BUILDERS[stage]
    except KeyError:
        raise ValueError(f"no S-PBFT schedule for stage {stage!r}") from None
    return builder(n)


def message_counts(n: int, stage: Stage) -> tuple[int, int]:
    """(active, backscatter) message counts of one S-PBFT stage."""
    max_faulty(n)
    if stage is Stage.PRE_PREPARE:
        return n - 1, 0
    if stage is Stage.PREPARE:
        return n * n - 3 * n + 2, n - 1
    if stage is Stage.COMMIT:
        return n * n - 3 * n + 2, 2 * n - 2
    if stage is Stage.REPLY:
        return 0, n
    raise ValueError(f"no message accounting for stage {stage!r}")


def pbft_messages(n: int, stage: Stage) -> tuple[Message, ...]:
    """Plain wireless PBFT: every message active, on one shared channel (band 0)."""
    max_faulty(n)
    nodes = range(n)
    if stage is Stage.PRE_PREPARE:
        pairs = [(PRIMARY, r) for r in _replicas(n)]
    elif stage is Stage.PREPARE:
        pairs = [(s, r) for s in _replicas(n) for r in nodes if r != s]
    elif stage is Stage.COMMIT:
        pairs = [(s, r) for s in nodes for r in nodes if r != s]
    elif stage is Stage.REPLY:
        pairs = [(s, CLIENT) for s in nodes]
    else:
        raise ValueError(f"no PBFT message list for stage {stage!r}")
    return tuple(Message(stage, 0, 0, s, r, Kind.ACTIVE) for s, r in pairs)


def quorum_check(stage: Stage, received: int, n: int) -> bool:
    """Whether ``received`` matching messages let a node (or the client) move on."""
    f = max_faulty(n)
    if received < 0:
        raise ValueError("received must be nonnegative")
    if stage in (Stage.PREPARE, Stage.COMMIT):
        return received >= 2 * f
    if stage is Stage.REPLY:
        return received >= f + 1
    return received >= 1


def full_schedule(n: int) -> tuple[StageSchedule, ...]:
    return tuple(role_schedule(n, stage) for stage in CONSENSUS_STAGES)


def band_usage(n: int) -> int:
    """Number of distinct frequency bands one full S-PBFT round occupies."""
    return len({band for sched in full_schedule(n) for band in sched.bands})


def dump_schedule(schedules: Iterable[StageSchedule]) -> str:
    """One line per message: stage, epoch, band, sender, receiver, kind."""
    lines = []
    for sched in schedules:
        for msg in sorted(sched.messages, key=lambda m: (m.epoch, m.band, m.kind.value, m.sender, m.receiver)):
            lines.append(f"{msg.stage.value} {msg.epoch} {msg.band} {msg.sender} {msg.receiver} {msg.kind.value}")
    return "\n".join(lines) + "\n"
