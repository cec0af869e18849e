"""Value objects for the load disaggregation domain."""

from enum import Enum, IntEnum


class LandUseClass(IntEnum):
    """Land-use classes, in the column order of every land-use vector."""

    RESIDENTIAL = 0
    COMMERCIAL = 1
    INDUSTRIAL = 2
    AGRICULTURAL = 3
    OTHER = 4


LANDUSE_CLASSES: tuple[LandUseClass, ...] = tuple(LandUseClass)
N_LANDUSE: int = len(LANDUSE_CLASSES)
RCI_CLASSES: frozenset[LandUseClass] = frozenset(
    {LandUseClass.RESIDENTIAL, LandUseClass.COMMERCIAL, LandUseClass.INDUSTRIAL}
)
LANDUSE_SUFFIXES: tuple[str, ...] = ("res", "com", "ind", "agr", "oth")


class FactorKind(str, Enum):
    """Provenance of a correction factor field."""

    NTL = "ntl"
    PROXIMITY = "proximity"
    COMBINED = "combined"
    NOISE = "noise"


class CorrectionMode(str, Enum):
    """Post-correction mechanisms applied to a base allocation."""

    MULTIPLICATIVE_RENORM = "multiplicative_renorm"
    MULTIPLICATIVE_RAW = "multiplicative_raw"
    ADDITIVE_RENORM = "additive_renorm"
    NOISE_RENORM = "noise_renorm"


class BaseMethod(str, Enum):
    """Demand-weighting base of a method configuration."""

    UNIFORM = "uniform"
    GPM = "gpm"
    LEARNED = "learned"


class Integration(str, Enum):
    """Route by which auxiliary information enters the allocation."""

    NONE = "none"
    POST_MULTIPLICATIVE = "post_multiplicative"
    POST_MULTIPLICATIVE_RAW = "post_multiplicative_raw"
    POST_ADDITIVE = "post_additive"
    POST_NOISE = "post_noise"
    PRIOR_LOSS = "prior_loss"

    @property
    def renormalizes(self) -> bool:
        """Whether the route conserves regional demand."""
        return self is not Integration.POST_MULTIPLICATIVE_RAW


class AuxSource(str, Enum):
    """Auxiliary spatial signals."""

    NTL = "ntl"
    PROX = "prox"


class SweepAxis(str, Enum):
    """Intensity parameters that can be swept."""

    ALPHA = "alpha"
    GAMMA = "gamma"
    BETA = "beta"
    LAMBDA = "lambda"


class Alternative(str, Enum):
    """Alternative hypothesis of a paired test."""

    TWO_SIDED = "two-sided"
    GREATER = "greater"
    LESS = "less"
