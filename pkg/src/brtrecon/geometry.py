"""Directions, source-detector pairs, sampling grids and fast-operator padding.

Conventions: angles are radians measured counterclockwise from the +x
(horizontal) axis; a direction points from the scatter location toward the
source or detector.  Images are sampled on a uniform orthogonal lattice of
``L2`` rows by ``L1`` columns; pixel ``(i2, i1)`` is centered at
``((i1 + 0.5) * delta1, (i2 + 0.5) * delta2)`` with row index increasing
with the vertical coordinate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DegenerateAngleError, NegativeImage

UNIT_TOL = 1e-12
ANTIPODAL_TOL = 1e-12
ALIGN_TOL = 1e-9
DEGENERATE_TOL = 1e-9


@dataclass(frozen=True)
class Direction:
    """Unit vector in the sampling plane."""

    ux: float
    uy: float

    def __post_init__(self):
        norm = self.ux * self.ux + self.uy * self.uy
        if not math.isfinite(norm) or abs(norm - 1.0) > UNIT_TOL:
            raise ValueError(f"direction ({self.ux}, {self.uy}) is not unit length")

    @classmethod
    def from_angle(cls, angle: float) -> "Direction":
        if not math.isfinite(angle):
            raise ValueError("angle must be finite")
        return cls(math.cos(angle), math.sin(angle))

    def dot(self, other: "Direction") -> float:
        return self.ux * other.ux + self.uy * other.uy

    def cross(self, other: "Direction") -> float:
        """Magnitude of the 2D cross product."""
        return abs(self.ux * other.uy - self.uy * other.ux)

    def is_antipodal(self, other: "Direction", tol: float = ANTIPODAL_TOL) -> bool:
        return abs(self.ux + other.ux) <= tol and abs(self.uy + other.uy) <= tol


@dataclass(frozen=True)
class SourceDetectorPair:
    """Ordered pair of source and detector directions defining one broken-ray family."""

    theta_s: Direction
    theta_d: Direction
    is_transmission: bool = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        antipodal = self.theta_s.is_antipodal(self.theta_d)
        if self.is_transmission is None:
            object.__setattr__(self, "is_transmission", antipodal)
        elif self.is_transmission != antipodal:
            raise ValueError("is_transmission inconsistent with directions")


def make_pair(source_angle: float, detector_angle: float) -> SourceDetectorPair:
    """Build a pair from the two direction angles; transmission is detected
    from antipodal directions."""
    return SourceDetectorPair(
        Direction.from_angle(source_angle), Direction.from_angle(detector_angle)
    )


@dataclass(frozen=True)
class ImageGrid:
    """Uniform orthogonal sampling lattice: L2 rows by L1 columns."""

    L1: int
    L2: int
    delta1: float = 1.0
    delta2: float = 1.0

    def __post_init__(self):
        if self.L1 < 2 or self.L2 < 2:
            raise ValueError("grid needs at least 2 samples per axis")
        if not (self.delta1 > 0 and self.delta2 > 0):
            raise ValueError("sample spacings must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.L2, self.L1)

    @property
    def npix(self) -> int:
        return self.L1 * self.L2

    @property
    def width(self) -> float:
        return self.L1 * self.delta1

    @property
    def height(self) -> float:
        return self.L2 * self.delta2

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-center coordinates as broadcastable (x1, x2) arrays."""
        x1 = (np.arange(self.L1) + 0.5) * self.delta1
        x2 = (np.arange(self.L2) + 0.5) * self.delta2
        return x1[None, :], x2[:, None]


class ImageKind(enum.Enum):
    ATTENUATION = "attenuation"
    SCATTER = "scatter"


@dataclass
class Image:
    """Sampled image on a grid; attenuation is >= 0, scatter lies in [0, 1]."""

    grid: ImageGrid
    values: np.ndarray
    kind: ImageKind

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            if self.values.size == self.grid.npix:
                self.values = self.values.reshape(self.grid.shape)
            else:
                raise ValueError("image payload does not match grid shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image values must be finite")
        if self.kind is ImageKind.ATTENUATION:
            if np.any(self.values < 0):
                raise NegativeImage("attenuation image has negative values")
        elif np.any(self.values < 0) or np.any(self.values > 1):
            raise NegativeImage("scatter image values must lie in [0, 1]")


def spreading_factors(pair: SourceDetectorPair, grid: ImageGrid) -> tuple[float, float]:
    """Spreading lengths (a_s, a_d) of the fast filtered operator.

    Requires theta_s aligned with the horizontal axis and a nonvanishing
    dot product between the two directions.
    """
    if abs(pair.theta_s.uy) > ALIGN_TOL:
        raise AlignmentError("theta_s must be aligned with the horizontal sampling axis")
    dot = abs(pair.theta_s.dot(pair.theta_d))
    if dot <= DEGENERATE_TOL:
        raise DegenerateAngleError("theta_s and theta_d are orthogonal")
    a_s = grid.L1 * grid.delta1
    return a_s, a_s / dot


def padded_dims(
    pair: SourceDetectorPair, grid: ImageGrid, extra_pad: int = 0
) -> tuple[int, int]:
    """Padded DFT dimensions (N1, N2) for the fast operator.

    ``extra_pad`` adds safety rows on top of the anti-aliasing vertical pad.
    """
    _, a_d = spreading_factors(pair, grid)
    cross = pair.theta_s.cross(pair.theta_d)
    n1 = 3 * grid.L1
    n2 = grid.L2 + math.ceil(a_d * cross / grid.delta2) + int(extra_pad)
    return n1, n2
