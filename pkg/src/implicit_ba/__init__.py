"""Sublinear-message authenticated implicit Byzantine agreement: protocol engine and simulator."""

from __future__ import annotations

from ._kernels import BACKEND
from .adversary import STRATEGIES, Strategy, choose_corrupt_set, register_strategy
from .engine import (
    TrialConfig,
    TrialReport,
    check_properties,
    run_explicit,
    run_implicit,
    run_kt1,
    run_leader_election,
    run_trial,
)
from .errors import CapacityError, ConfigError, ForgeryError, PhaseOrderError, SimulationFault

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "STRATEGIES",
    "CapacityError",
    "ConfigError",
    "ForgeryError",
    "PhaseOrderError",
    "SimulationFault",
    "Strategy",
    "TrialConfig",
    "TrialReport",
    "check_properties",
    "choose_corrupt_set",
    "register_strategy",
    "run_explicit",
    "run_implicit",
    "run_kt1",
    "run_leader_election",
    "run_trial",
]
