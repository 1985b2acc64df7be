"""Symbiotic-radio link mathematics.

Everything here works on linear-scale SNRs. The minimum spreading factor is
evaluated with log-domain Gaussian tails so that links with large
``antennas * gamma_d`` (where the tail probabilities underflow a double)
still produce a finite bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq
from scipy.special import log_ndtr

__all__ = [
    "DomainError",
    "SrLinkParams",
    "SnrComposition",
    "q_function",
    "log_q_function",
    "q_inverse",
    "omega",
    "min_spreading_factor",
    "is_feasible",
    "compose_primary_snr",
    "secondary_snr",
    "compose",
]

_ROOT_XTOL = 1e-13


class DomainError(ValueError):
    """An input lies outside the region where a symbiotic-radio law is defined."""


@dataclass(frozen=True)
class SrLinkParams:
    """Average direct-link SNR, relative backscatter SNR and antenna count."""

    gamma_d: float
    delta_gamma: float
    antennas: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma_d) and self.gamma_d > 0):
            raise DomainError(f"gamma_d must be finite and > 0, got {self.gamma_d!r}")
        if not (math.isfinite(self.delta_gamma) and self.delta_gamma > 0):
            raise DomainError(f"delta_gamma must be finite and > 0, got {self.delta_gamma!r}")
        if isinstance(self.antennas, bool) or int(self.antennas) != self.antennas or self.antennas < 1:
            raise DomainError(f"antennas must be a positive integer, got {self.antennas!r}")
        if not math.isfinite(self.gamma_d * self.delta_gamma):
            raise DomainError("backscatter SNR gamma_d * delta_gamma overflows")

    @classmethod
    def from_snrs(cls, gamma_d: float, gamma_b: float, antennas: int = 1) -> SrLinkParams:
        if not gamma_d > 0:
            raise DomainError(f"gamma_d must be > 0, got {gamma_d!r}")
        return cls(gamma_d, gamma_b / gamma_d, antennas)

    @property
    def gamma_b(self) -> float:
        return self.gamma_d * self.delta_gamma


@dataclass(frozen=True)
class SnrComposition:
    gamma_p: float
    gamma_s: float
    spreading_factor: float


def q_function(x: float) -> float:
    """Gaussian tail probability P(Z > x) for a standard normal Z."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"q_function needs a finite argument, got {x!r}")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def log_q_function(x: float) -> float:
    """Natural log of :func:`q_function`, accurate far into the upper tail."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"log_q_function needs a finite argument, got {x!r}")
    return float(log_ndtr(-x))


def _q_inverse_log(log_p: float) -> float:
    # solves log Q(x) = log_p; the upper half (p > 1/2) goes through Q(-x) = 1 - Q(x)
    if not log_p < 0.0:
        raise DomainError("Q-function inverse needs p in (0, 1)")
    if log_p > -math.log(2.0):
        p_upper = -math.expm1(log_p)
        if p_upper <= 0.0:
            raise DomainError("Q-function inverse needs p in (0, 1)")
        return -_q_inverse_log(math.log(p_upper))
    if log_p == -math.log(2.0):
        return 0.0
    hi = 1.0
    while log_q_function(hi) > log_p:
        hi *= 2.0
        if hi > 1e154:
            raise DomainError("Q-function inverse argument underflows")
    return brentq(lambda x: log_q_function(x) - log_p, 0.0, hi, xtol=_ROOT_XTOL)


def q_inverse(p: float) -> float:
    """Inverse of the Gaussian tail: the x with Q(x) = p, for 0 < p < 1."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"Q-function inverse needs p in (0, 1), got {p!r}")
    if p > 0.5:
        return -_q_inverse_log(math.log1p(-p))
    return _q_inverse_log(math.log(p))


def omega(params: SrLinkParams) -> float:
    """Scale term of the spreading-factor bound (a function of gamma_d, delta_gamma, M)."""
    m, gd, dg = params.antennas, params.gamma_d, params.delta_gamma
    q = q_function(math.sqrt(m * gd))
    num = math.sqrt(2.0 * m * dg) * (1.0 - 2.0 * q)
    den = math.sqrt(1.0 / gd + 4.0 * m * dg * q * (1.0 - q))
    value = num / den
    if not (math.isfinite(value) and value > 0.0):
        raise DomainError(f"omega is degenerate for {params}")
    return value


def _log_q_difference(x_lo: float, x_hi: float) -> float:
    """log(Q(x_lo) - Q(x_hi)) for x_lo < x_hi."""
    lo, hi = log_q_function(x_lo), log_q_function(x_hi)
    gap = hi - lo
    if not gap < 0.0:
        return -math.inf
    return lo + math.log(-math.expm1(gap))


def min_spreading_factor(params: SrLinkParams) -> float:
    """Smallest spreading factor K for which the primary and secondary links are mutualistic.

    Raises DomainError when delta_gamma >= 1 or when the ratio of Q-function
    differences cannot be inverted.
    """
    m, gd, dg = params.antennas, params.gamma_d, params.delta_gamma
    if dg >= 1.0:
        raise DomainError(f"delta_gamma must be < 1 for the spreading-factor bound, got {dg!r}")
    radicands = (m * gd, m * gd * (1.0 + dg), m * gd / (1.0 + dg))
    if any(not (r >= 0.0 and math.isfinite(r)) for r in radicands):
        raise DomainError(f"negative or non-finite radicand in spreading-factor bound for {params}")
    direct = math.sqrt(radicands[0])
    boosted = math.sqrt(radicands[1])
    shrunk = math.sqrt(radicands[2]) * (1.0 - dg)

    log_ratio = _log_q_difference(direct, boosted) - _log_q_difference(shrunk, boosted)
    if not (math.isfinite(log_ratio) and log_ratio < 0.0):
        raise DomainError(f"Q-ratio leaves (0, 1) for {params}")
    x = _q_inverse_log(log_ratio)
    bound = x * x / omega(params) ** 2
    if not math.isfinite(bound):
        raise DomainError(f"spreading-factor bound is not finite for {params}")
    return bound


def is_feasible(params: SrLinkParams, spreading_factor: float) -> bool:
    return spreading_factor >= min_spreading_factor(params)


def compose_primary_snr(gamma_d: float, gamma_b: float) -> float:
    """Primary-system SNR: direct plus backscatter path, linear scale."""
    if gamma_d < 0 or gamma_b < 0:
        raise ValueError("SNRs must be nonnegative (linear scale)")
    return gamma_d + gamma_b


def secondary_snr(spreading_factor: float, gamma_b: float) -> float:
    """Secondary-system SNR after despreading over K primary symbols."""
    if spreading_factor < 1:
        raise ValueError(f"spreading factor must be >= 1, got {spreading_factor!r}")
    if gamma_b < 0:
        raise ValueError("gamma_b must be nonnegative")
    return spreading_factor * gamma_b


def compose(params: SrLinkParams, spreading_factor: float) -> SnrComposition:
    gamma_b = params.gamma_b
    return SnrComposition(
        gamma_p=compose_primary_snr(params.gamma_d, gamma_b),
        gamma_s=secondary_snr(spreading_factor, gamma_b),
        spreading_factor=spreading_factor,
    )
