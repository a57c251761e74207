"""Exception types and the phase-ordering clock shared by the simulator modules."""

from __future__ import annotations


class ConfigError(ValueError):
    """Rejected configuration (raised before any trial work starts)."""


class ConfigWarning(UserWarning):
    """A configuration value was clamped to something usable."""


class SimulationFault(RuntimeError):
    """The simulated model was violated; the trial is meaningless past this point."""


class ForgeryError(SimulationFault):
    """Adversary code asked for a signature under a key it does not hold."""


class PhaseOrderError(SimulationFault):
    pass


class CapacityError(SimulationFault):
    """Honest logic exceeded the per-edge CONGEST schedule."""


class PhaseClock:
    """Records the setup phases of a trial and refuses out-of-order steps.

    The static adversary must commit its corrupt set before the PKI is
    published and before the global coin is drawn.
    """

    ORDER = ("adversary_committed", "pki_published", "coin_drawn")

    def __init__(self) -> None:
        self.done: list[str] = []

    def mark(self, phase: str) -> None:
        if phase not in self.ORDER:
            raise PhaseOrderError(f"unknown phase {phase!r}")
        if phase in self.done:
            raise PhaseOrderError(f"phase {phase!r} happened twice")
        self.done.append(phase)

    def require(self, phase: str) -> None:
        if phase not in self.done:
            raise PhaseOrderError(f"{phase!r} must happen first (so far: {self.done})")

    def __contains__(self, phase: str) -> bool:
        return phase in self.done
