"""Transmit-side energy of one consensus round for PBFT and S-PBFT."""

from __future__ import annotations

from dataclasses import dataclass

from .protocol import Protocol, ProtocolConfig, Stage, message_counts


@dataclass(frozen=True)
class EnergyBreakdown:
    """Joules spent per stage; ``e_total`` is their sum."""

    e_preprepare: float
    e_prepare: float
    e_commit: float
    e_reply: float
    e_total: float

    @classmethod
    def from_stages(cls, preprepare: float, prepare: float, commit: float, reply: float) -> EnergyBreakdown:
        return cls(preprepare, prepare, commit, reply, preprepare + prepare + commit + reply)


def pbft_energy(config: ProtocolConfig) -> EnergyBreakdown:
    """Every PBFT message is an active transmission of t1 (t2 for replies) at P_T."""
    n, t1, t2, pt = config.n, config.t1, config.t2, config.p_t
    return EnergyBreakdown.from_stages(
        (n - 1) * t1 * pt,
        (n - 1) ** 2 * t1 * pt,
        n * (n - 1) * t1 * pt,
        n * t2 * pt,
    )


def spbft_energy(config: ProtocolConfig) -> EnergyBreakdown:
    """Active S-PBFT messages cost as in PBFT; backscattered ones cost ``backscatter_power`` (default 0)."""
    n, t1, t2, pt, pb = config.n, config.t1, config.t2, config.p_t, config.backscatter_power
    stages = []
    for stage in (Stage.PRE_PREPARE, Stage.PREPARE, Stage.COMMIT, Stage.REPLY):
        active, passive = message_counts(n, stage)
        t = t2 if stage is Stage.REPLY else t1
        stages.append(active * t * pt + (passive * t * pb if pb else 0.0))
    return EnergyBreakdown.from_stages(*stages)


def energy(config: ProtocolConfig, protocol: Protocol | str) -> EnergyBreakdown:
    if Protocol(protocol) is Protocol.SPBFT:
        return spbft_energy(config)
    return pbft_energy(config)


def savings_ratio(config: ProtocolConfig) -> float:
    """Fraction of the PBFT round energy that S-PBFT saves."""
    base = pbft_energy(config).e_total
    if base == 0.0:
        return 0.0
    return (base - spbft_energy(config).e_total) / base


def stage_delays(message_bits: int, tx_rate_bps: float) -> tuple[float, float]:
    """Per-message serialization delay, used for both t1 and t2."""
    if not message_bits > 0:
        raise ValueError(f"message_bits must be positive, got {message_bits!r}")
    if not tx_rate_bps > 0:
        raise ValueError(f"tx_rate_bps must be positive, got {tx_rate_bps!r}")
    t = message_bits / tx_rate_bps
    return t, t
