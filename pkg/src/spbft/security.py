"""Closed-form consensus security (round success probability) of S-PBFT and plain PBFT.

The composed probability is read as

    [sum_i B(n-1, i; P) * sum_{j <= f-i} B(n-1-i, j; P)]          pre-prepare + prepare
  * [sum_{l <= f} B(n-1, l; P_Re) * R(l)
     + B(n-1, f+1; P_Re) * P_PN * R(f)]                           commit + reply

with ``B(N, k; p) = C(N, k) (1-p)^k p^(N-k)`` and the reply factor
``R(l) = sum_{m <= f-l} B(n-1, m; P)``. A commit round that loses f+1
replicas but is rescued by the primary is charged R(f): no reply may be lost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .protocol import Protocol, ProtocolConfig, max_faulty

EXACTLY_ONE = "exactly-one"
AT_LEAST_ONE = "at-least-one"
RESCUE_READINGS = (EXACTLY_ONE, AT_LEAST_ONE)

LOG_SPACE_ABOVE = 50


def _log_pow(k: int, x: float) -> float:
    if k == 0:
        return 0.0
    if x == 0.0:
        return -math.inf
    return k * math.log(x)


def binom_term(n_links: int, k: int, p_ok: float, log_space: bool | None = None) -> float:
    """P(exactly k of n_links independent links fail), each succeeding with p_ok.

    Terms with a zero binomial coefficient (k < 0 or k > n_links) are exactly
    0.0, whatever the sign of the paired exponent.
    """
    if k < 0 or k > n_links:
        return 0.0
    if log_space is None:
        log_space = n_links > LOG_SPACE_ABOVE
    if not log_space:
        return math.comb(n_links, k) * (1.0 - p_ok) ** k * p_ok ** (n_links - k)
    log_c = math.lgamma(n_links + 1) - math.lgamma(k + 1) - math.lgamma(n_links - k + 1)
    return math.exp(log_c + _log_pow(k, 1.0 - p_ok) + _log_pow(n_links - k, p_ok))


def binom_cdf(n_links: int, max_fail: int, p_ok: float, log_space: bool | None = None) -> float:
    """P(at most max_fail of n_links links fail), never rounded above 1."""
    return min(1.0, sum(binom_term(n_links, k, p_ok, log_space) for k in range(max_fail + 1)))


@dataclass(frozen=True)
class SecurityInputs:
    n: int
    f: int
    p_e: float
    p_s: float

    def __post_init__(self) -> None:
        if self.f != max_faulty(self.n) or self.n != 3 * self.f + 1:
            raise ValueError(f"need n = 3f+1 with f = floor((n-1)/3), got n={self.n}, f={self.f}")
        for name in ("p_e", "p_s"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @classmethod
    def for_n(cls, n: int, p_e: float, p_s: float) -> SecurityInputs:
        return cls(n, max_faulty(n), p_e, p_s)

    @classmethod
    def from_config(cls, config: ProtocolConfig) -> SecurityInputs:
        return cls(config.n, config.f, config.p_e, config.p_s)


@dataclass(frozen=True)
class SecurityBreakdown:
    """Per-stage probabilities; p2 is reported at i = 0 and p4 at l = 0."""

    p1: float
    p2: float
    p_pn: float
    p_re: float
    p3: float
    p4: float
    p_total: float

    def as_dict(self) -> dict[str, float]:
        return dict(vars(self))


def _check_index(value: int, f: int, name: str) -> None:
    if not 0 <= value <= f:
        raise ValueError(f"{name} must lie in 0..{f}, got {value}")


def preprepare_success(inputs: SecurityInputs, failures_i: int | None = None) -> float:
    """P_1, or with ``failures_i`` its single summand for exactly i lost pre-prepares."""
    n, f = inputs.n, inputs.f
    if failures_i is None:
        return binom_cdf(n - 1, f, inputs.p_e)
    _check_index(failures_i, f, "failures_i")
    return binom_term(n - 1, failures_i, inputs.p_e)


def _prepare(n: int, f: int, i: int, p: float) -> float:
    return binom_cdf(n - 1 - i, f - i, p)


def prepare_success(inputs: SecurityInputs, i: int) -> float:
    """Prepare-stage success at the primary given i lost pre-prepares."""
    _check_index(i, inputs.f, "i")
    return _prepare(inputs.n, inputs.f, i, inputs.p_e)


def primary_commit_success(inputs: SecurityInputs) -> float:
    """P_PN: the primary's commit reception, evaluated like the prepare stage at i = 0."""
    return prepare_success(inputs, 0)


def commit_replica_success(inputs: SecurityInputs, rescue: str = EXACTLY_ONE) -> float:
    """P_Re: a replica hears n-3 enhanced active commits and 2 backscattered ones.

    ``rescue`` selects how f+1 active losses are saved: ``"exactly-one"``
    takes the published single-success term C(2,1) P_s (1-P_s);
    ``"at-least-one"`` also counts both passive paths succeeding.
    """
    if rescue not in RESCUE_READINGS:
        raise ValueError(f"unknown rescue reading {rescue!r}")
    n, f, pe, ps = inputs.n, inputs.f, inputs.p_e, inputs.p_s
    one_saves = 2 * ps * (1 - ps) if rescue == EXACTLY_ONE else 1 - (1 - ps) ** 2
    # summed as 1 - failure mass so the result never rounds above 1
    fail = (
        binom_term(n - 3, f + 1, pe) * (1 - one_saves)
        + binom_term(n - 3, f + 2, pe) * (1 - ps * ps)
        + sum(binom_term(n - 3, k, pe) for k in range(f + 3, n - 2))
    )
    return min(1.0, max(0.0, 1.0 - fail))


def _commit(n: int, f: int, p_re: float, p_pn: float) -> float:
    return binom_cdf(n - 1, f, p_re) + binom_term(n - 1, f + 1, p_re) * p_pn


def commit_success(inputs: SecurityInputs, rescue: str = EXACTLY_ONE) -> float:
    """P_3: at most f replicas miss the commit quorum, or f+1 miss and the primary commits."""
    return _commit(inputs.n, inputs.f, commit_replica_success(inputs, rescue), primary_commit_success(inputs))


def _reply(n: int, f: int, l: int, p: float) -> float:
    return binom_cdf(n - 1, f - l, p)


def reply_success(inputs: SecurityInputs, l: int) -> float:
    """Reply-stage success when l replicas already failed the commit stage."""
    _check_index(l, inputs.f, "l")
    return _reply(inputs.n, inputs.f, l, inputs.p_e)


def _compose(n: int, f: int, p: float, p_re: float, p_pn: float) -> SecurityBreakdown:
    agree = sum(binom_term(n - 1, i, p) * _prepare(n, f, i, p) for i in range(f + 1))
    finish = sum(binom_term(n - 1, l, p_re) * _reply(n, f, l, p) for l in range(f + 1))
    finish += binom_term(n - 1, f + 1, p_re) * p_pn * _reply(n, f, f, p)
    return SecurityBreakdown(
        p1=binom_cdf(n - 1, f, p),
        p2=_prepare(n, f, 0, p),
        p_pn=p_pn,
        p_re=p_re,
        p3=_commit(n, f, p_re, p_pn),
        p4=_reply(n, f, 0, p),
        p_total=min(1.0, agree * finish),
    )


def spbft_security(inputs: SecurityInputs, rescue: str = EXACTLY_ONE) -> SecurityBreakdown:
    """Round success probability of S-PBFT with its per-stage ingredients."""
    n, f = inputs.n, inputs.f
    return _compose(n, f, inputs.p_e, commit_replica_success(inputs, rescue), primary_commit_success(inputs))


def pbft_security_baseline(inputs: SecurityInputs) -> SecurityBreakdown:
    """Plain wireless PBFT: every link at p_s, replicas commit from n-1 active messages."""
    n, f, p = inputs.n, inputs.f, inputs.p_s
    p_re = binom_cdf(n - 1, f, p)
    return _compose(n, f, p, p_re, _prepare(n, f, 0, p))


def security(inputs: SecurityInputs, protocol: Protocol | str, rescue: str = EXACTLY_ONE) -> SecurityBreakdown:
    if Protocol(protocol) is Protocol.SPBFT:
        return spbft_security(inputs, rescue)
    return pbft_security_baseline(inputs)
