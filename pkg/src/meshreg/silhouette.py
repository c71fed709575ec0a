"""Silhouette masks, boundary tracing, and 1D span projections.

A binary mask is reduced to the ordered boundary of its largest
4-connected component by Moore-neighbor tracing (exact and parameter-free
on binary input). Point sets are then summarized per axis by the (min, max)
of their dot products - the 1D spans matched by the span-alignment solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    DegenerateContour,
    EmptyMask,
    EmptyPointSet,
    InvalidAxisCount,
)

# clockwise Moore ring in (row, col) offsets, starting west
_RING = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_RING_INDEX = {off: i for i, off in enumerate(_RING)}
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class SilhouetteMask:
    """Binary H x W foreground grid."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2:
            raise ValueError(f"mask must be 2D, got shape {p.shape}")
        p = np.ascontiguousarray(p != 0)
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @classmethod
    def load(cls, path) -> "SilhouetteMask":
        """Read a PGM/PNG image; any nonzero pixel is foreground."""
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
        return cls(arr > 0)

    def save(self, path) -> None:
        img = Image.fromarray(self.pixels.astype(np.uint8) * 255, mode="L")
        fmt = "PPM" if str(path).lower().endswith(".pgm") else None
        img.save(path, format=fmt)


@dataclass(frozen=True)
class Contour:
    """Ordered boundary points as (x, y) pixel coordinates, >= 3 of them."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValueError(f"contour points must be (K, 2), got {p.shape}")
        if len(p) < 3:
            raise DegenerateContour(f"contour has {len(p)} points, need >= 3")
        if not np.all(np.isfinite(p)):
            raise ValueError("contour points must be finite")
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return len(self.points)

    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"points": self.points.tolist()}, fh)

    @classmethod
    def load_json(cls, path) -> "Contour":
        with open(path) as fh:
            return cls(np.array(json.load(fh)["points"], float))


@dataclass(frozen=True)
class AxisSet:
    """A unit direction vectors at angles j*pi/A, j = 0..A-1."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise InvalidAxisCount(f"need (A>=2, 2) unit vectors, got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("axes must have unit norm")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "vectors", v)

    @property
    def count(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class SpanSet:
    """Per-axis (min, max) of projected values."""

    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=np.float64)
        maxs = np.asarray(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ValueError("mins/maxs must be matching 1D arrays")
        if np.any(mins > maxs):
            raise ValueError("span min exceeds span max")
        for a in (mins, maxs):
            a.flags.writeable = False
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)


def make_axes(count: int) -> AxisSet:
    """Uniformly spread unit axes; neighboring axes differ by pi/count."""
    if count < 2:
        raise InvalidAxisCount(f"need at least 2 axes, got {count}")
    angles = np.arange(count) * np.pi / count
    return AxisSet(np.stack([np.cos(angles), np.sin(angles)], axis=1))


def project_spans(points: np.ndarray, axes: AxisSet) -> SpanSet:
    """Min and max dot product of the point set with each axis."""
    p = np.asarray(points, dtype=np.float64)
    if p.size == 0:
        raise EmptyPointSet("no points to project")
    dots = p @ axes.vectors.T
    return SpanSet(dots.min(axis=0), dots.max(axis=0))


def mask_from_heatmap(heatmap: np.ndarray, threshold: float = 0.5) -> SilhouetteMask:
    """Threshold a silhouette probability map into a binary mask."""
    return SilhouetteMask(np.asarray(heatmap) >= threshold)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest 4-connected foreground component as a boolean grid."""
    labels, n = ndimage.label(mask, structure=_CROSS)
    if n == 0:
        raise EmptyMask("mask has no foreground pixels")
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == sizes.argmax()


def extract_contour(mask) -> Contour:
    """Ordered boundary of the largest 4-connected foreground component.

    Moore-neighbor tracing with Jacob's stopping criterion, oriented so the
    shoelace signed area over (x, y) = (col, row) is positive. Raises
    EmptyMask on all-background input and DegenerateContour when the
    component boundary has fewer than 3 pixels.
    """
    pixels = mask.pixels if isinstance(mask, SilhouetteMask) else np.asarray(mask) != 0
    comp = largest_component(pixels)
    h, w = comp.shape

    def fg(r, c):
        return 0 <= r < h and 0 <= c < w and comp[r, c]

    first = np.argwhere(comp)[0]  # topmost then leftmost: west/north are background
    start = (int(first[0]), int(first[1]))

    # each (pixel, backtrack) state has a unique successor, so the trace is
    # periodic; stop on the first repeated state
    boundary = []
    cur, back = start, (start[0], start[1] - 1)
    seen = set()
    while (cur, back) not in seen:
        seen.add((cur, back))
        boundary.append(cur)
        i = _RING_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        nxt = None
        for step in range(1, 9):
            dr, dc = _RING[(i + step) % 8]
            cand = (cur[0] + dr, cur[1] + dc)
            if fg(*cand):
                nxt = cand
                break
            back = cand
        if nxt is None:
            break  # isolated pixel
        cur = nxt

    if len(boundary) < 3:
        raise DegenerateContour(f"boundary has {len(boundary)} pixels, need >= 3")
    pts = np.array([[c, r] for r, c in boundary], dtype=np.float64)
    contour = Contour(pts)
    if contour.signed_area() < 0:
        contour = Contour(pts[::-1])
    return contour
