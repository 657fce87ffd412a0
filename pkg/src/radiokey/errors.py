"""Shared exception and warning types."""


class ProtocolError(ValueError):
    """Inconsistent protocol state, e.g. mismatched pair counts between phases."""


class ReconciliationError(RuntimeError):
    """Raised when the raw keys are too noisy for parity reconciliation."""


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field path."""


class SimulationWarning(UserWarning):
    """Base class for non-fatal simulator warnings."""


class AssumptionWarning(SimulationWarning):
    """A parameter leaves the regime the protocol's statistics assume."""


class TruncationWarning(SimulationWarning):
    """A requested quantity was silently reduced to what is available."""
