"""Error types raised by the toolkit.

Each error names the constraint it guards; the CLI prints that name verbatim.
"""


class RadonToolkitError(Exception):
    constraint = "RadonToolkitError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.constraint)
        self.message = message or self.constraint

    def __str__(self):
        return f"{self.constraint}: {self.message}"


class GridError(RadonToolkitError):
    constraint = "GridError"


class EmptySet(RadonToolkitError):
    constraint = "EmptySet"


class ResolutionTooCoarse(RadonToolkitError):
    constraint = "ResolutionTooCoarse"


class FlatnessViolated(RadonToolkitError):
    constraint = "FlatnessViolated"


class DualityViolated(RadonToolkitError):
    constraint = "DualityViolated"


class OffManifold(RadonToolkitError):
    constraint = "OffManifold"


class BasisNotOrthonormal(RadonToolkitError):
    constraint = "BasisNotOrthonormal"


class NotInShrunkSet(RadonToolkitError):
    constraint = "NotInShrunkSet"


class DeltaOutOfRange(RadonToolkitError):
    constraint = "DeltaOutOfRange"


class NonInvertible(RadonToolkitError):
    constraint = "NonInvertible"


class MisalignedLinearAction(RadonToolkitError):
    constraint = "MisalignedLinearAction"


class NoIncidences(RadonToolkitError):
    constraint = "NoIncidences"


class TowerFailed(RadonToolkitError):
    constraint = "TowerFailed"


class RasterOverflow(RadonToolkitError):
    constraint = "RasterOverflow"


class HypothesisViolated(RadonToolkitError):
    constraint = "HypothesisViolated"


class DimensionUnsupported(RadonToolkitError):
    constraint = "DimensionUnsupported"


UnsupportedDimension = DimensionUnsupported


class ExtractionFailed(RadonToolkitError):
    constraint = "ExtractionFailed"


class SeparationFailed(RadonToolkitError):
    constraint = "SeparationFailed"


class UnknownSuite(RadonToolkitError):
    constraint = "UnknownSuite"


class ConfigInvalid(RadonToolkitError):
    constraint = "ConfigInvalid"
