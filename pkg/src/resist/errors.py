"""Exception hierarchy shared by all subpackages."""


class ResistError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInput(ResistError):
    """Point set has no 3-D interior (all points near a common plane)."""


class Unbounded(ResistError):
    pass


class Empty(ResistError):
    pass


class NotOnBoundary(ResistError):
    pass


class NotRegular(ResistError):
    """A boundary point required to be regular is numerically singular."""


class NoValidPoint(ResistError):
    pass


class ApexInside(ResistError):
    """The apex of a nose construction lies in the body (within tolerance)."""


class ObstacleHit(ResistError):
    """The dilated near boundary meets the obstacle set for the requested s."""


class FamilyInvariantViolated(ResistError):
    pass


class InvalidProfile(ResistError):
    pass


class InvalidField(ResistError):
    pass


class CreaseDetected(ResistError):
    pass


class TooCloseToBound(ResistError):
    pass


class ConfigError(ResistError):
    pass


class VerificationFailure(ResistError):
    pass
