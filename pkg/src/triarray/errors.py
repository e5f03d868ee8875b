"""Shared exception types."""


class TriarrayError(Exception):
    """Base class for all package errors."""


class GeometryError(TriarrayError):
    """Layer or array geometry is impossible (kernel larger than padded input,
    inexact stride division, mismatched tensor shapes)."""


class ConfigError(TriarrayError):
    """Invalid or unsupported configuration value."""


class UnsupportedFeatureError(TriarrayError):
    """Representable in the data model but not supported by the simulator
    (e.g. stride > 1)."""


class SimulationStateError(TriarrayError):
    """Operation invoked in a state that does not allow it."""


class AccumulatorOverflowError(TriarrayError):
    """A simulated value exceeded its declared datapath width.  This is a
    bit-width contract bug and is surfaced, never wrapped."""


class VerificationError(TriarrayError):
    """Simulator output failed verification against the functional reference."""
