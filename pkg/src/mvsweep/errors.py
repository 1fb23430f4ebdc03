"""Exception types raised across the package."""


class MvsError(Exception):
    """Base class for all mvsweep errors."""


class PointBehindCamera(MvsError):
    pass


class NonPositiveDepth(MvsError):
    pass


class SingularIntrinsics(MvsError):
    pass


class ImageTooSmall(MvsError):
    pass


class ResolutionMismatch(MvsError):
    pass


class NoSourceViews(MvsError):
    pass


class NonPositiveTemperature(MvsError):
    pass


class ShapeMismatch(MvsError):
    pass


class EmptyDepthMap(MvsError):
    pass


class DegenerateRange(MvsError):
    pass


class InsufficientData(MvsError):
    pass


class InvalidCount(MvsError):
    pass


class MissingPreviousStage(MvsError):
    pass


class InsufficientViews(MvsError):
    pass


class NoValidPixels(MvsError):
    pass


class EmptyCloud(MvsError):
    pass


class ParseError(MvsError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedVariant(MvsError):
    pass


class IoError(MvsError):
    pass


class InvalidSpec(MvsError):
    pass
