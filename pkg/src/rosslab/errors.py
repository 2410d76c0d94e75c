"""Exception hierarchy shared by every module."""


class RossLabError(Exception):
    """Base class for all errors raised by rosslab."""


class NotAGenerator(RossLabError, ValueError):
    """Matrix violates the sign or row-sum rules of a CTMC generator."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NotIrreducible(RossLabError, ValueError):
    """The rate graph has more than one communicating class."""


class InvalidModulation(RossLabError, ValueError):
    pass


class EtaTooSmall(RossLabError, ValueError):
    pass


class InvalidDampening(RossLabError, ValueError):
    pass


class DimensionCapExceeded(RossLabError, ValueError):
    pass


class LatticeCapExceeded(RossLabError, ValueError):
    pass


class LpFailure(RossLabError, RuntimeError):
    pass


class Unstable(RossLabError, ValueError):
    """Traffic intensity is at least one."""


class UnstableWithoutOverride(Unstable):
    pass


class NotExponentialService(RossLabError, ValueError):
    pass


class NoConvergence(RossLabError, RuntimeError):
    pass


class ChainSpecError(RossLabError, ValueError):
    """Malformed chain specification file.

    ``where`` names the offending field, e.g. ``"Q[2]"`` or ``"states[0].lambda"``.
    """

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
