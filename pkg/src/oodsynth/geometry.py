"""Axis-aligned boxes and run-length masks.

Boxes are (x, y, w, h) in pixels, origin at the top-left corner, x grows
right and y grows down. Masks use uncompressed column-major run-length
encoding: alternating counts of background and foreground pixels, starting
with background, scanning columns top-to-bottom then left-to-right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, EmptyMaskError


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ArgumentError(f"box must have positive extent, got w={self.w} h={self.h}")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise ArgumentError("box coordinates must be finite")

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def fits_in(self, image_w: float, image_h: float) -> bool:
        return self.x >= 0 and self.y >= 0 and self.right <= image_w and self.bottom <= image_h

    def to_list(self) -> list:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, values) -> "Box":
        if len(values) != 4:
            raise ArgumentError(f"box needs 4 values, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]), float(values[3]))

    def pixel_bounds(self, image_w: int, image_h: int) -> tuple:
        """Integer (x0, y0, x1, y1) covering the box, clipped to the image."""
        x0 = max(0, int(math.floor(self.x)))
        y0 = max(0, int(math.floor(self.y)))
        x1 = min(int(image_w), int(math.ceil(self.right)))
        y1 = min(int(image_h), int(math.ceil(self.bottom)))
        return x0, y0, x1, y1


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0.0 when disjoint."""
    ix = min(a.right, b.right) - max(a.x, b.x)
    iy = min(a.bottom, b.bottom) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def pad_box(box: Box, padding: float, image_w: float, image_h: float) -> Box:
    """Expand a box by `padding` * w per horizontal side and `padding` * h per
    vertical side, then clip to the image. The result always contains the input.
    """
    if padding < 0:
        raise ArgumentError(f"padding must be >= 0, got {padding}")
    x0 = max(0.0, box.x - padding * box.w)
    y0 = max(0.0, box.y - padding * box.h)
    x1 = min(float(image_w), box.right + padding * box.w)
    y1 = min(float(image_h), box.bottom + padding * box.h)
    return Box(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class Mask:
    """Uncompressed column-major RLE mask."""

    width: int
    height: int
    runs: tuple

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))
        if any(r < 0 for r in self.runs):
            raise ArgumentError("RLE runs must be non-negative")
        if sum(self.runs) != self.width * self.height:
            raise ArgumentError(
                f"RLE runs sum to {sum(self.runs)}, expected {self.width * self.height}"
            )

    def to_array(self) -> np.ndarray:
        """Decode to a (height, width) boolean array."""
        values = np.zeros(len(self.runs), dtype=bool)
        values[1::2] = True
        flat = np.repeat(values, self.runs)
        return flat.reshape(self.width, self.height).T

    @classmethod
    def from_array(cls, array: np.ndarray) -> "Mask":
        arr = np.asarray(array, dtype=bool)
        h, w = arr.shape
        flat = arr.T.reshape(-1)
        if flat.size == 0:
            raise ArgumentError("mask array must be non-empty")
        # Boundaries between runs of equal values.
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        edges = np.concatenate(([0], change, [flat.size]))
        runs = np.diff(edges).tolist()
        if flat[0]:
            runs = [0] + runs
        return cls(w, h, tuple(runs))

    def foreground_count(self) -> int:
        return sum(self.runs[1::2])


def mask_to_box(mask: Mask) -> Box:
    """Tightest box containing all foreground pixels, pixel-inclusive extents."""
    arr = mask.to_array()
    rows, cols = np.nonzero(arr)
    if rows.size == 0:
        raise EmptyMaskError("mask has no foreground pixels")
    x0, x1 = int(cols.min()), int(cols.max())
    y0, y1 = int(rows.min()), int(rows.max())
    return Box(float(x0), float(y0), float(x1 - x0 + 1), float(y1 - y0 + 1))


def box_to_mask(box: Box, width: int, height: int) -> Mask:
    """Full-rectangle mask of a box's pixel bounds; handy for mocks and tests."""
    x0, y0, x1, y1 = box.pixel_bounds(width, height)
    arr = np.zeros((height, width), dtype=bool)
    arr[y0:y1, x0:x1] = True
    return Mask.from_array(arr)
