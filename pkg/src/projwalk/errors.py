"""Exception types raised across projwalk."""


class ProjwalkError(Exception):
    """Base class for all projwalk errors."""


class ZeroVector(ProjwalkError, ValueError):
    pass


class IllConditioned(ProjwalkError, ValueError):
    """Matrix fails the invertibility (condition number) guard."""


class DegeneratePair(ProjwalkError, ValueError):
    """Exactly one side of the cohomological identity has a vanishing bracket."""


class BadSignature(ProjwalkError, ValueError):
    pass


class BadEnsemble(ProjwalkError, ValueError):
    pass


class InsufficientCounts(ProjwalkError):
    pass


class DegenerateSigma(ProjwalkError, ValueError):
    pass


class NoGap(ProjwalkError):
    """Power iteration stalls: subdominant modulus ratio above threshold."""


class SingularBracket(ProjwalkError):
    pass


class UnresolvedPhase(ProjwalkError):
    pass


class NoValidOffset(ProjwalkError):
    pass


class ConfigError(ProjwalkError):
    pass


class FormatError(ProjwalkError):
    def __init__(self, msg, line=None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line
