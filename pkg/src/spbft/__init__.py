"""Wireless PBFT and symbiotic PBFT: link math, schedules, closed-form security, energy and simulation."""

from __future__ import annotations

from .energy import EnergyBreakdown, energy, pbft_energy, savings_ratio, spbft_energy
from .montecarlo import EstimateWithCI, SimulationSummary, TrialOutcome, estimate_security, reliability_gain, run_trial, simulate
from .protocol import Protocol, ProtocolConfig, Role, Stage, max_faulty, message_counts, role_schedule
from .scenario import ScenarioError, ScenarioFile, load_scenario, parse_scenario
from .security import SecurityBreakdown, SecurityInputs, pbft_security_baseline, security, spbft_security
from .sr_link import DomainError, SrLinkParams, min_spreading_factor, q_function, q_inverse
from .sweep import SweepResult, run_sweep

__all__ = [
    "DomainError", "EnergyBreakdown", "EstimateWithCI", "Protocol", "ProtocolConfig", "Role", "ScenarioError",
    "ScenarioFile", "SecurityBreakdown", "SecurityInputs", "SimulationSummary", "SrLinkParams", "Stage",
    "SweepResult", "TrialOutcome", "energy", "estimate_security", "load_scenario", "max_faulty",
    "message_counts", "min_spreading_factor", "parse_scenario", "pbft_energy", "pbft_security_baseline",
    "q_function", "q_inverse", "reliability_gain", "role_schedule", "run_sweep", "run_trial", "savings_ratio",
    "security", "simulate", "spbft_energy", "spbft_security",
]
