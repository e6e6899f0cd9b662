"""Exception types raised by the library."""


class FeigError(Exception):
    """Base class for all library errors."""


class NonConvergence(FeigError):
    pass


class BadCriticality(FeigError, ValueError):
    pass


class OutOfDomain(FeigError, ValueError):
    pass


class BranchLoss(FeigError):
    """Newton continuation of an inverse branch jumped to another sheet."""


class NotCovered(FeigError):
    pass


class Ambiguous(FeigError):
    pass


class InsufficientData(FeigError, ValueError):
    pass


class InsufficientResolution(FeigError, ValueError):
    pass


class InsufficientDepth(FeigError, ValueError):
    pass


class NoBracket(FeigError):
    pass
