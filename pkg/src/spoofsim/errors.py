class SpoofSimError(Exception):
    pass


class ConfigurationError(SpoofSimError):
    """Inconsistent wiring: wrong payload type, duplicate node, bad rate."""


class UnknownTopicError(SpoofSimError, KeyError):
    pass


class ModeViolation(SpoofSimError):
    """A flight-mode transition the mode machine does not allow."""


class GuidanceError(SpoofSimError):
    pass


class InitializationError(GuidanceError):
    pass
