"""Analytic phantom descriptions, rasterization, and scatter-map transforms.

Shape coordinates are physical lengths relative to the grid center, so a
description renders consistently at any resolution covering the same extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeInput, OutOfBounds, UnsupportedShape
from .geometry import Image, ImageGrid, ImageKind

ELLIPSE = "ellipse"
RECTANGLE = "rectangle"


@dataclass(frozen=True)
class Shape:
    """One additive phantom component.

    ``half_axes`` are the ellipse semi-axes or the rectangle half-widths
    along the rotated (horizontal, vertical) axes; ``rotation`` is CCW.
    """

    kind: str
    center: tuple[float, float]
    half_axes: tuple[float, float]
    rotation: float = 0.0
    density: float = 1.0

    def __post_init__(self):
        if self.kind not in (ELLIPSE, RECTANGLE):
            raise UnsupportedShape(f"unknown shape kind {self.kind!r}")


@dataclass(frozen=True)
class PhantomDescription:
    """Finite union of weighted shapes with an overall scale factor."""

    shapes: tuple[Shape, ...]
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))


def _relative_centers(grid: ImageGrid) -> tuple[np.ndarray, np.ndarray]:
    x1, x2 = grid.centers()
    return x1 - grid.width / 2.0, x2 - grid.height / 2.0


def render(desc: PhantomDescription, grid: ImageGrid) -> Image:
    """Rasterize a description at pixel centers; result is clipped to >= 0."""
    h, v = _relative_centers(grid)
    out = np.zeros(grid.shape)
    for s in desc.shapes:
        dh = h - s.center[0]
        dv = v - s.center[1]
        c, sn = math.cos(s.rotation), math.sin(s.rotation)
        u = dh * c + dv * sn
        w = -dh * sn + dv * c
        if s.kind == ELLIPSE:
            inside = (u / s.half_axes[0]) ** 2 + (w / s.half_axes[1]) ** 2 <= 1.0
        else:
            inside = (np.abs(u) <= s.half_axes[0]) & (np.abs(w) <= s.half_axes[1])
        out += s.density * inside
    np.clip(out * desc.scale, 0.0, None, out=out)
    return Image(grid, out, ImageKind.ATTENUATION)


# Modified Shepp-Logan ellipse table, rotated so the long axis of the skull
# lies along the horizontal sampling axis (the beam direction).  Columns:
# center (h, v), semi-axes (horizontal, vertical), rotation, density.
_SHEPP_LOGAN = (
    ((0.0, 0.0), (0.92, 0.69), 0.0, 1.0),
    ((-0.0184, 0.0), (0.874, 0.6624), 0.0, -0.8),
    ((0.0, 0.22), (0.31, 0.11), math.radians(18.0), -0.2),
    ((0.0, -0.22), (0.41, 0.16), math.radians(-18.0), -0.2),
    ((0.35, 0.0), (0.25, 0.21), 0.0, 0.1),
    ((0.1, 0.0), (0.046, 0.046), 0.0, 0.1),
    ((-0.1, 0.0), (0.046, 0.046), 0.0, 0.1),
    ((-0.605, -0.08), (0.023, 0.046), 0.0, 0.1),
    ((-0.605, 0.0), (0.023, 0.023), 0.0, 0.1),
    ((-0.605, 0.06), (0.046, 0.023), 0.0, 0.1),
)


def shepp_logan_description(max_mu: float = 1.0) -> PhantomDescription:
    """Modified Shepp-Logan head phantom; values span [0, max_mu] and the
    support fits a 1.5 (tall) by 2 (wide) centered rectangle."""
    if max_mu <= 0:
        raise ValueError("max_mu must be positive")
    shapes = tuple(Shape(ELLIPSE, c, ax, rot, den) for c, ax, rot, den in _SHEPP_LOGAN)
    return PhantomDescription(shapes, scale=max_mu)


def shepp_logan(grid: ImageGrid, max_mu: float = 1.0) -> Image:
    return render(shepp_logan_description(max_mu), grid)


def rectangle_description(
    width: float = 1.0, height: float = 1.5, value: float = 1.0, scale: float = 1.0
) -> PhantomDescription:
    shape = Shape(RECTANGLE, (0.0, 0.0), (width / 2.0, height / 2.0), 0.0, value)
    return PhantomDescription((shape,), scale=scale)


def rectangle_phantom(
    grid: ImageGrid,
    width: float = 1.0,
    height: float = 1.5,
    value: float = 1.0,
    scale: float = 1.0,
) -> Image:
    """Centered binary rectangle of the given physical size, times value*scale."""
    if width / 2.0 > grid.width / 2.0 + 1e-12 or height / 2.0 > grid.height / 2.0 + 1e-12:
        raise OutOfBounds("rectangle exceeds the grid extent")
    return render(rectangle_description(width, height, value, scale), grid)


def scatter_map(mu_unscaled: Image | np.ndarray, variant: str = "positive") -> Image:
    """Scatter density derived from the unscaled attenuation image.

    ``positive`` keeps scatter bounded away from zero; ``nonneg`` preserves
    the attenuation support so zero-attenuation regions carry no scatter.
    """
    if isinstance(mu_unscaled, Image):
        grid, mu = mu_unscaled.grid, mu_unscaled.values
    else:
        raise TypeError("scatter_map expects an Image")
    if np.any(mu < 0):
        raise NegativeInput("scatter map input must be nonnegative")
    if np.any(mu > 1):
        raise ValueError("scatter map input must be the unscaled image in [0, 1]")
    if variant == "positive":
        alpha = np.sqrt(0.1 + 0.2 * mu)
    elif variant == "nonneg":
        alpha = np.sqrt(0.15 * mu)
    else:
        raise ValueError(f"unknown scatter map variant {variant!r}")
    return Image(grid, alpha, ImageKind.SCATTER)
