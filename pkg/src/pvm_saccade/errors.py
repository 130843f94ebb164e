"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ConfigurationError -> 2,
InputDataError -> 3, NumericFault -> 4.
"""


class PVMError(Exception):
    pass


class ConfigurationError(PVMError):
    """Invalid configuration: bad dimensions, unknown model kind, bad flags."""


class InputDataError(PVMError):
    """Unreadable or inconsistent input data (frames, checkpoints)."""


class NumericFault(PVMError):
    """Non-finite value produced inside unit math."""


class CheckpointError(InputDataError):
    """Corrupt, truncated or version-mismatched checkpoint file."""
