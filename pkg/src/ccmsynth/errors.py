"""Exception hierarchy shared by the synthesis pipeline."""


class CCMError(Exception):
    """Base class for all engine errors."""


class ConfigError(CCMError):
    pass


class DecodeError(CCMError):
    pass


class GeometryError(CCMError):
    pass


class MeshError(CCMError):
    """Raised when a candidate cannot be fleshed out into a valid quad mesh."""

    def __init__(self, message, member=None):
        super().__init__(message)
        self.member = member


class LoopError(CCMError):
    pass


class ObjectiveError(CCMError):
    pass


class WearError(CCMError):
    pass


class DeckError(CCMError):
    pass


class StepRejected(CCMError):
    """Signal from assembly/contact that the current trial increment must be cut."""


class AnalysisFailed(CCMError):
    """The incremental solver gave up after the maximum number of cutbacks."""


class ExportError(CCMError):
    """Writing a result artifact failed."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
