"""Exception types shared across the package."""


class RimError(Exception):
    """Base class for all package errors."""


class ShapeError(RimError, ValueError):
    """Operands have incompatible or invalid shapes."""


class ContractError(RimError, ValueError):
    """A caller violated an operation's precondition."""


class InfeasibleMaskError(RimError, ValueError):
    """The sampling budget cannot accommodate the calibration region."""


class ParseError(RimError, ValueError):
    """A binary file failed to parse.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ConfigError(RimError, ValueError):
    """Invalid or inconsistent configuration."""


class NumericalFailure(RimError, RuntimeError):
    """An iterative procedure diverged or produced non-finite values."""
