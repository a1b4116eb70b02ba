"""Exception hierarchy shared by all pipeline stages.

``DataError`` subclasses map to CLI exit code 2 and ``EndpointError``
subclasses to exit code 3.
"""


class PatspecError(Exception):
    pass


class DataError(PatspecError):
    pass


class MalformedDocument(DataError):
    pass


class MissingDrawingFile(DataError):
    pass


class SchemaError(DataError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        super().__init__(message)
        self.line = line
        self.field = field


class EmptyResult(DataError):
    pass


class UnbalancedTags(DataError):
    pass


class MissingParent(DataError):
    pass


class DuplicateSampleError(DataError):
    pass


class TooFewSamples(DataError):
    pass


class UndecodableImage(DataError):
    pass


class ZeroDimension(DataError):
    pass


class EmptyReference(DataError):
    pass


class EmptyCandidates(DataError):
    pass


class EndpointError(PatspecError):
    pass


class EndpointUnreachable(EndpointError):
    pass


class BadResponse(EndpointError):
    pass


class Timeout(EndpointError):
    pass
