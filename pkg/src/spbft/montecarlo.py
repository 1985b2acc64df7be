"""Per-message Monte Carlo simulation of PBFT and S-PBFT consensus rounds.

Randomness is counter based: every trial owns a fixed window of a Philox
stream keyed by the seed, and message slot ``c`` of trial ``t`` always reads
the same uniform ``u[t, c]``. A message is delivered iff ``u < p`` for its
link probability, so any batching or worker split reproduces the same
trials, and sweeping ``p`` with a fixed seed couples the runs.

Two stage semantics are available:

``"analytic"``
    The rules the closed-form security model is built on. Prepare succeeds
    when the primary collects 2f prepares from replicas that saw the
    pre-prepare; commit starts from a fresh fault budget (each replica checks
    its own incoming commits, the primary can stand in for the (f+1)-th
    failed replica); the client accepts when commit failures plus lost
    replica replies stay within f.
``"quorum"``
    Node-level PBFT gating: a node speaks in a stage only if it passed the
    previous one, and every node applies the 2f / f+1 quorum rules to the
    messages it actually received.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .protocol import (
    CLIENT,
    CONSENSUS_STAGES,
    PRIMARY,
    Kind,
    Protocol,
    ProtocolConfig,
    Stage,
    pbft_messages,
    role_schedule,
)
from .security import AT_LEAST_ONE, EXACTLY_ONE, RESCUE_READINGS

SEMANTICS = ("analytic", "quorum")
REPLY_LINKS = ("enhanced", "backscatter")
BLOCK_TRIALS = 1 << 14

_PP, _PREP, _COMMIT, _REPLY = range(4)


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    stage_reached: Stage
    deliveries: dict[Stage, tuple[int, int]]
    energy_spent: float


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    std_err: float
    trials: int
    seed: int

    @classmethod
    def from_counts(cls, successes: int, trials: int, seed: int) -> EstimateWithCI:
        if trials < 1:
            raise ValueError("trials must be >= 1")
        point = successes / trials
        return cls(point, math.sqrt(point * (1.0 - point) / trials), trials, seed)

    @property
    def successes(self) -> int:
        return round(self.point * self.trials)

    @classmethod
    def pool(cls, parts: list[EstimateWithCI]) -> EstimateWithCI:
        seeds = {p.seed for p in parts}
        if len(seeds) != 1:
            raise ValueError("can only pool estimates drawn from one seed")
        return cls.from_counts(sum(p.successes for p in parts), sum(p.trials for p in parts), seeds.pop())


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregate counts over a contiguous range of trials."""

    trials: int
    successes: int
    failed_at: dict[Stage, int]
    energy_sum: float
    seed: int
    first_trial: int = 0

    def estimate(self) -> EstimateWithCI:
        return EstimateWithCI.from_counts(self.successes, self.trials, self.seed)

    @property
    def mean_energy(self) -> float:
        return self.energy_sum / self.trials


class _Layout:
    """Column layout of one round's messages and the index tables the evaluator needs."""

    def __init__(self, n: int, protocol: Protocol) -> None:
        self.n = n
        self.f = (n - 1) // 3
        self.protocol = protocol
        msgs = []
        for stage in CONSENSUS_STAGES:
            if protocol is Protocol.SPBFT:
                msgs.extend(role_schedule(n, stage).messages)
            else:
                msgs.extend(pbft_messages(n, stage))
        self.messages = tuple(msgs)
        self.width = len(msgs)
        self.stride = 4 * math.ceil(self.width / 4)

        stage_id = np.array([CONSENSUS_STAGES.index(m.stage) for m in msgs])
        self.active = np.array([m.kind is Kind.ACTIVE for m in msgs])
        self.reply_col = stage_id == _REPLY
        self.stage_cols = [np.flatnonzero(stage_id == s) for s in range(4)]
        self.senders = np.array([m.sender for m in msgs])
        self.receivers = np.array([m.receiver for m in msgs])

        index = {(m.stage, m.sender, m.receiver, m.kind): c for c, m in enumerate(msgs)}
        replicas = range(1, n)
        self.pp_cols = np.array([index[(Stage.PRE_PREPARE, PRIMARY, r, Kind.ACTIVE)] for r in replicas])
        self.prep_to_primary = np.array([index[(Stage.PREPARE, r, PRIMARY, Kind.ACTIVE)] for r in replicas])
        reply_by_sender = {m.sender: c for c, m in enumerate(msgs) if m.stage is Stage.REPLY}
        self.reply_replica_cols = np.array([reply_by_sender[r] for r in replicas])

        self.incidence = {}
        for s in (_PREP, _COMMIT):
            cols = self.stage_cols[s]
            for kind in (True, False):
                sel = cols[self.active[cols] == kind]
                inc = np.zeros((len(sel), n), dtype=np.float32)
                inc[np.arange(len(sel)), self.receivers[sel]] = 1.0
                self.incidence[(s, kind)] = (sel, inc)

    def link_probabilities(self, config: ProtocolConfig, reply_links: str = "enhanced") -> np.ndarray:
        if self.protocol is Protocol.PBFT:
            return np.full(self.width, config.p_s)
        p = np.where(self.active, config.p_e, config.p_s)
        if reply_links == "enhanced":
            p[self.reply_col] = config.p_e
        return p

    def message_energy(self, config: ProtocolConfig) -> np.ndarray:
        duration = np.where(self.reply_col, config.t2, config.t1)
        power = np.where(self.active, config.p_t, config.backscatter_power)
        return duration * power


@lru_cache(maxsize=64)
def _layout(n: int, protocol: Protocol) -> _Layout:
    return _Layout(n, protocol)


def _philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(2, np.uint64)


def _stream(seed: int, stride: int, first_trial: int) -> np.random.Generator:
    bitgen = np.random.Philox(key=_philox_key(seed))
    # Philox advances in blocks of four 64-bit outputs; stride is a multiple of 4
    bitgen.advance(first_trial * (stride // 4))
    return np.random.Generator(bitgen)


def trial_generator(config: ProtocolConfig, protocol: Protocol | str, seed: int, trial: int) -> np.random.Generator:
    """Generator positioned at the uniforms of one trial of the seed's stream."""
    layout = _layout(config.n, Protocol(protocol))
    return _stream(seed, layout.stride, trial)


def _uniforms(layout: _Layout, seed: int, first_trial: int, count: int) -> np.ndarray:
    u = _stream(seed, layout.stride, first_trial).random((count, layout.stride))
    return u[:, : layout.width]


def _recv(mask: np.ndarray, inc: np.ndarray) -> np.ndarray:
    return (mask.astype(np.float32) @ inc).astype(np.int64)


def _evaluate(layout, config, u, semantics, rescue, keep_transmitting, reply_links):
    """Vectorised trial evaluation. Returns (success, failed_stage, attempted, delivered).

    ``failed_stage`` is 4 for a successful round.
    """
    n, f = layout.n, layout.f
    delivered = u < layout.link_probabilities(config, reply_links)
    trials = u.shape[0]
    attempted = np.zeros_like(delivered)
    ok = np.ones(trials, dtype=bool)
    failed_stage = np.full(trials, 4, dtype=np.int64)

    def fail(stage_ok: np.ndarray, stage: int) -> None:
        newly = ok & ~stage_ok
        failed_stage[newly] = stage
        ok[:] = ok & stage_ok

    def attempt(stage: int, sender_alive: np.ndarray | None) -> None:
        cols = layout.stage_cols[stage]
        if keep_transmitting:
            attempted[:, cols] = True
            return
        go = ok[:, None]
        if sender_alive is not None:
            go = go & sender_alive[:, layout.senders[cols]]
        attempted[:, cols] = go

    attempt(_PP, None)
    got_pp = delivered[:, layout.pp_cols]
    alive = np.concatenate([np.ones((trials, 1), dtype=bool), got_pp], axis=1)

    if semantics == "analytic":
        fail((~got_pp).sum(axis=1) <= f, _PP)

        attempt(_PREP, alive)
        heard = got_pp & delivered[:, layout.prep_to_primary]
        fail((n - 1) - heard.sum(axis=1) <= f, _PREP)

        attempt(_COMMIT, None)
        act_cols, act_inc = layout.incidence[(_COMMIT, True)]
        bs_cols, bs_inc = layout.incidence[(_COMMIT, False)]
        lost = _recv(~delivered[:, act_cols], act_inc)
        saved = _recv(delivered[:, bs_cols], bs_inc)
        if rescue == EXACTLY_ONE:
            node_ok = (lost <= f) | ((lost == f + 1) & (saved == 1)) | ((lost == f + 2) & (saved == 2))
        else:
            node_ok = lost <= f + saved
        failed_replicas = (~node_ok[:, 1:]).sum(axis=1)
        fail((failed_replicas <= f) | ((failed_replicas == f + 1) & node_ok[:, 0]), _COMMIT)

        attempt(_REPLY, None)
        lost_replies = (~delivered[:, layout.reply_replica_cols]).sum(axis=1)
        fail(np.minimum(failed_replicas, f) + lost_replies <= f, _REPLY)
    else:
        fail(alive.sum(axis=1) >= 2 * f + 1, _PP)

        for stage in (_PREP, _COMMIT):
            attempt(stage, alive)
            count = np.zeros((trials, n), dtype=np.int64)
            for kind in (True, False):
                cols, inc = layout.incidence[(stage, kind)]
                if len(cols):
                    count += _recv(delivered[:, cols] & alive[:, layout.senders[cols]], inc)
            alive = alive & (count >= 2 * f)
            need = 2 * f + 1 if stage == _PREP else f + 1
            fail(alive.sum(axis=1) >= need, stage)

        attempt(_REPLY, alive)
        cols = layout.stage_cols[_REPLY]
        replies = (delivered[:, cols] & alive[:, layout.senders[cols]]).sum(axis=1)
        fail(replies >= f + 1, _REPLY)

    return ok, failed_stage, attempted, delivered


def _check_options(semantics: str, rescue: str, reply_links: str) -> None:
    if reply_links not in REPLY_LINKS:
        raise ValueError(f"unknown reply link model {reply_links!r}; choose from {REPLY_LINKS}")
    if semantics not in SEMANTICS:
        raise ValueError(f"unknown semantics {semantics!r}; choose from {SEMANTICS}")
    if rescue not in RESCUE_READINGS:
        raise ValueError(f"unknown rescue reading {rescue!r}")


def run_trial(
    config: ProtocolConfig,
    protocol: Protocol | str,
    rng: np.random.Generator,
    *,
    semantics: str = "analytic",
    rescue: str = EXACTLY_ONE,
    keep_transmitting: bool = False,
    reply_links: str = "enhanced",
) -> TrialOutcome:
    """Simulate one consensus round, drawing one uniform per scheduled message from ``rng``."""
    _check_options(semantics, rescue, reply_links)
    layout = _layout(config.n, Protocol(protocol))
    u = rng.random((1, layout.stride))[:, : layout.width]
    ok, failed_stage, attempted, delivered = _evaluate(
        layout, config, u, semantics, rescue, keep_transmitting, reply_links
    )
    deliveries = {}
    for s, stage in enumerate(CONSENSUS_STAGES):
        cols = layout.stage_cols[s]
        got = attempted[0, cols] & delivered[0, cols]
        act = layout.active[cols]
        deliveries[stage] = (int(got[act].sum()), int(got[~act].sum()))
    energy = float(layout.message_energy(config)[attempted[0]].sum())
    return TrialOutcome(
        success=bool(ok[0]),
        stage_reached=CONSENSUS_STAGES[min(int(failed_stage[0]), 3)],
        deliveries=deliveries,
        energy_spent=energy,
    )


def _simulate_range(config, protocol, seed, first_trial, count, semantics, rescue, keep_transmitting, reply_links):
    layout = _layout(config.n, protocol)
    successes = 0
    failed = np.zeros(5, dtype=np.int64)
    attempts = np.zeros(layout.width, dtype=np.int64)
    start, stop = first_trial, first_trial + count
    while start < stop:
        size = min(BLOCK_TRIALS, stop - start)
        u = _uniforms(layout, seed, start, size)
        ok, failed_stage, attempted, _ = _evaluate(
            layout, config, u, semantics, rescue, keep_transmitting, reply_links
        )
        successes += int(ok.sum())
        failed += np.bincount(failed_stage, minlength=5)
        attempts += attempted.sum(axis=0)
        start += size
    return successes, failed, attempts


def _split(first_trial: int, trials: int, parts: int) -> list[tuple[int, int]]:
    # chunk edges fall on block boundaries so the per-block work is identical
    blocks = math.ceil(trials / BLOCK_TRIALS)
    parts = max(1, min(parts, blocks))
    edges = [first_trial + min(trials, (blocks * k // parts) * BLOCK_TRIALS) for k in range(parts + 1)]
    return [(a, b - a) for a, b in zip(edges, edges[1:]) if b > a]


def simulate(
    config: ProtocolConfig,
    protocol: Protocol | str,
    trials: int,
    seed: int,
    *,
    first_trial: int = 0,
    semantics: str = "analytic",
    rescue: str = EXACTLY_ONE,
    keep_transmitting: bool = False,
    reply_links: str = "enhanced",
    workers: int = 1,
) -> SimulationSummary:
    """Run trials ``first_trial .. first_trial+trials-1`` of the seed's stream and aggregate them."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    _check_options(semantics, rescue, reply_links)
    protocol = Protocol(protocol)
    args = (config, protocol, seed)
    opts = (semantics, rescue, keep_transmitting, reply_links)
    chunks = _split(first_trial, trials, workers)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_chunk, [(*args, a, c, *opts) for a, c in chunks]))
    else:
        results = [_simulate_range(*args, a, c, *opts) for a, c in chunks]
    successes = sum(r[0] for r in results)
    failed = sum((r[1] for r in results), np.zeros(5, dtype=np.int64))
    attempts = sum((r[2] for r in results), np.zeros(_layout(config.n, protocol).width, dtype=np.int64))
    energy = float(attempts @ _layout(config.n, protocol).message_energy(config))
    return SimulationSummary(
        trials=trials,
        successes=successes,
        failed_at={stage: int(failed[s]) for s, stage in enumerate(CONSENSUS_STAGES)},
        energy_sum=energy,
        seed=seed,
        first_trial=first_trial,
    )


def _simulate_chunk(args):
    return _simulate_range(*args)


def estimate_security(
    config: ProtocolConfig,
    protocol: Protocol | str,
    trials: int,
    seed: int,
    **options,
) -> EstimateWithCI:
    """Fraction of successful rounds with its binomial standard error."""
    return simulate(config, protocol, trials, seed, **options).estimate()


def reliability_gain(estimate: EstimateWithCI | float) -> float:
    """log10 of the success probability; ``-inf`` (with a warning) when it is zero."""
    point = estimate.point if isinstance(estimate, EstimateWithCI) else float(estimate)
    if not 0.0 <= point <= 1.0:
        raise ValueError(f"success probability must lie in [0, 1], got {point!r}")
    if point == 0.0:
        warnings.warn("reliability gain of a zero success probability is -inf", RuntimeWarning, stacklevel=2)
        return -math.inf
    return math.log10(point)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


__all__ = [
    "AT_LEAST_ONE",
    "CLIENT",
    "EXACTLY_ONE",
    "EstimateWithCI",
    "SEMANTICS",
    "SimulationSummary",
    "TrialOutcome",
    "estimate_security",
    "reliability_gain",
    "run_trial",
    "simulate",
    "trial_generator",
]
