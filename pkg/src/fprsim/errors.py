"""Exception types raised by the simulator."""


class FprError(Exception):
    """Base class for all simulator errors."""


class InvalidArgument(FprError, ValueError):
    pass


class UnsupportedReuseFactor(InvalidArgument):
    pass


class SingularityError(FprError, ZeroDivisionError):
    """A user coordinate coincides with a base station."""


class InvalidPartition(InvalidArgument):
    """beta_f * K does not count a whole number of users."""


class InfeasibleParameters(InvalidArgument):
    """Pilot book does not fit the coherence block (B > T)."""


class InsufficientAntennas(InfeasibleParameters):
    """P-ZFC needs strictly more antennas than pilots (N > B)."""


class DegenerateUnbounded(FprError):
    """Large-antenna limit diverges because an interference sum is empty."""


class NoFeasiblePoint(FprError):
    pass


class ChecksumMismatch(FprError):
    """A cached record failed its integrity check."""
