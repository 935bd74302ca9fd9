"""Exception hierarchy shared by every module."""


class HeatquantError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(HeatquantError, ValueError):
    pass


class EncodeOutOfBoundsError(HeatquantError, ValueError):
    """An activation cell required by an encoder falls outside the grid."""


class InvalidHeatmapError(HeatquantError, ValueError):
    pass


class DegenerateSetError(HeatquantError, ValueError):
    """Activation weights sum to zero, so no weighted mean exists."""


class InvalidNormalizationError(HeatquantError, ValueError):
    pass


class EmptyEvaluationError(HeatquantError, ValueError):
    pass


class ShapeError(HeatquantError, ValueError):
    pass


class ConfigError(HeatquantError, ValueError):
    """Experiment configuration is invalid; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class LandmarkFileError(HeatquantError, ValueError):
    pass


class ParseError(LandmarkFileError):
    pass


class SchemaError(LandmarkFileError):
    pass


class EmptyInputError(LandmarkFileError):
    pass


class InconsistentCountError(LandmarkFileError):
    """Records in one file carry different numbers of landmarks."""


class CountMismatchError(HeatquantError, ValueError):
    pass
