"""Meshes, pinhole cameras, joint regression and similarity alignment.

Conventions: 3D coordinates are meters in an OpenCV-style camera frame
(z axis pointing away from the camera), 2D coordinates are pixels.
All types are immutable after construction; all operations are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DimensionMismatch,
    NonPositiveDepth,
    ShapeMismatch,
)

MIN_DEPTH = 1e-6


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TriangleMesh:
    """Vertex/face soup with validated connectivity.

    vertices: (M, 3) float array, meters.
    faces: (F, 3) int array with consistent winding.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ShapeMismatch(f"vertices must be (M, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ShapeMismatch(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ShapeMismatch("face index out of range")
        if f.size:
            a, b, c = f[:, 0], f[:, 1], f[:, 2]
            if np.any((a == b) | (b == c) | (a == c)):
                raise ShapeMismatch("degenerate face (repeated vertex index)")
            edges = self._undirected_edges(f)
            uniq, counts = np.unique(edges, axis=0, return_counts=True)
            if counts.max(initial=0) > 2:
                raise ShapeMismatch("edge shared by more than 2 faces")
        object.__setattr__(self, "vertices", _freeze(v))
        object.__setattr__(self, "faces", _freeze(f))

    @staticmethod
    def _undirected_edges(faces: np.ndarray) -> np.ndarray:
        e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
        return np.sort(e, axis=1)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, (E, 2) with e[0] < e[1]."""
        return np.unique(self._undirected_edges(self.faces), axis=0)

    def translated(self, offset) -> "TriangleMesh":
        return TriangleMesh(self.vertices + np.asarray(offset, float), self.faces)

    @classmethod
    def load_obj(cls, path) -> "TriangleMesh":
        """Read a Wavefront OBJ, v/f records only (1-based indices)."""
        verts, faces = [], []
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) - 1 for p in parts[1:4]]
                    faces.append(idx)
        return cls(np.array(verts, float), np.array(faces, int).reshape(-1, 3))

    def save_obj(self, path) -> None:
        with open(path, "w") as fh:
            for x, y, z in self.vertices:
                fh.write(f"v {x!r} {y!r} {z!r}\n")
            for a, b, c in self.faces + 1:
                fh.write(f"f {a} {b} {c}\n")


@dataclass(frozen=True)
class CameraIntrinsics:
    """Ideal pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @classmethod
    def load_json(cls, path) -> "CameraIntrinsics":
        with open(path) as fh:
            d = json.load(fh)
        return cls(fx=d["fx"], fy=d["fy"], cx=d["cx"], cy=d["cy"])

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}


@dataclass(frozen=True)
class JointRegressor:
    """Row-stochastic joint regressor, N joints x M vertices.

    Rows must sum to 1 within 1e-6 and all weights must be non-negative,
    so each joint is a convex combination of vertices.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ShapeMismatch("regressor must be a 2D matrix")
        if np.any(w < 0):
            raise ValueError("regressor weights must be non-negative")
        sums = w.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValueError("regressor rows must sum to 1 within 1e-6")
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def num_joints(self) -> int:
        return self.weights.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def load_json(cls, path) -> "JointRegressor":
        """Read {"rows": N, "cols": M, "entries": [[row, col, weight], ...]}."""
        with open(path) as fh:
            d = json.load(fh)
        w = np.zeros((d["rows"], d["cols"]))
        for r, c, val in d["entries"]:
            w[int(r), int(c)] += val
        return cls(w)

    def to_json_dict(self) -> dict:
        rows, cols = np.nonzero(self.weights)
        entries = [[int(r), int(c), float(self.weights[r, c])] for r, c in zip(rows, cols)]
        return {"rows": self.num_joints, "cols": self.num_vertices, "entries": entries}


@dataclass(frozen=True)
class Landmarks2D:
    """2D pixel landmarks with optional per-point confidence in [0, 1]."""

    points: np.ndarray
    confidence: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ShapeMismatch(f"landmarks must be (N, 2), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("landmark coordinates must be finite")
        object.__setattr__(self, "points", _freeze(p))
        if self.confidence is not None:
            c = np.asarray(self.confidence, dtype=np.float64)
            if c.shape != (len(p),):
                raise ShapeMismatch("confidence length must match point count")
            if np.any((c < 0) | (c > 1)):
                raise ValueError("confidence must lie in [0, 1]")
            object.__setattr__(self, "confidence", _freeze(c))

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def load_json(cls, path) -> "Landmarks2D":
        with open(path) as fh:
            d = json.load(fh)
        return cls(np.array(d["points"], float), d.get("confidence"))

    def to_json_dict(self) -> dict:
        d = {"points": self.points.tolist()}
        if self.confidence is not None:
            d["confidence"] = self.confidence.tolist()
        return d


@dataclass(frozen=True)
class RootTranslation:
    """Camera-space root position (meters); must sit in front of the camera."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError("root depth must be positive")

    @classmethod
    def from_array(cls, t) -> "RootTranslation":
        t = np.asarray(t, float).reshape(3)
        return cls(float(t[0]), float(t[1]), float(t[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class SimilarityTransform:
    """aligned = scale * points @ rotation.T + translation"""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * points @ self.rotation.T + self.translation


def project_points(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of camera-space points; (N, 3) meters -> (N, 2) pixels.

    Raises NonPositiveDepth if any point has z <= 1e-6.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ShapeMismatch(f"points must be (N, 3), got {p.shape}")
    z = p[:, 2]
    if np.any(z <= MIN_DEPTH):
        raise NonPositiveDepth(f"point depth {z.min():.3g} <= {MIN_DEPTH}")
    out = np.empty((len(p), 2))
    out[:, 0] = intrinsics.fx * p[:, 0] / z + intrinsics.cx
    out[:, 1] = intrinsics.fy * p[:, 1] / z + intrinsics.cy
    return out


def regress_joints(mesh, regressor: JointRegressor) -> np.ndarray:
    """Joint positions as regressor-weighted vertex averages, (N, 3).

    Accepts a TriangleMesh or a raw (M, 3) vertex array.
    """
    verts = mesh.vertices if isinstance(mesh, TriangleMesh) else np.asarray(mesh, float)
    if regressor.num_vertices != len(verts):
        raise DimensionMismatch(
            f"regressor has {regressor.num_vertices} columns, mesh has {len(verts)} vertices"
        )
    return regressor.weights @ verts


def procrustes_align(pred: np.ndarray, gt: np.ndarray):
    """Best similarity transform (proper rotation, uniform scale, translation)
    mapping pred onto gt in the least-squares sense.

    Returns (aligned_pred, SimilarityTransform). The rotation always has
    determinant +1; reflections are not allowed.
    """
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatch(f"shapes differ: {p.shape} vs {g.shape}")
    n, dim = p.shape
    if n < 3:
        raise DegenerateConfiguration("need at least 3 points")
    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    pc = p - mu_p
    gc = g - mu_g
    if np.linalg.matrix_rank(gc, tol=1e-12) < 2:
        raise DegenerateConfiguration("gt covariance rank < 2")
    cov = gc.T @ pc / n
    u, d, vt = np.linalg.svd(cov)
    # sign fix on the smallest singular vector keeps det(R) = +1
    s = np.ones(dim)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[-1] = -1.0
    rot = u @ np.diag(s) @ vt
    var_p = (pc ** 2).sum() / n
    scale = float((d * s).sum() / var_p)
    trans = mu_g - scale * rot @ mu_p
    aligned = scale * p @ rot.T + trans
    return aligned, SimilarityTransform(scale, _freeze(rot), _freeze(trans))
