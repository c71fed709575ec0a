"""Forward evaluation of spiral-gather affine operators on vertex features.

Two operators are provided: a plain spiral convolution (gather the full
spiral sequence, flatten, apply one affine map) and a multi-branch variant
that runs four affine maps over nested disk prefixes of the spiral and
combines them as residual-plus-concatenation. Both are pure affine; any
nonlinearity is the caller's concern.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BranchChannelMismatch, ShapeMismatch
from .spiral_topology import SpiralIndex


def _check_features(features: np.ndarray, index: SpiralIndex) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise ShapeMismatch(f"features must be (M, C), got {f.shape}")
    if f.shape[0] != index.num_vertices:
        raise ShapeMismatch(
            f"feature rows {f.shape[0]} != index vertices {index.num_vertices}"
        )
    if not np.all(np.isfinite(f)):
        raise ShapeMismatch("features contain NaN/Inf")
    return f


@dataclass(frozen=True)
class SpiralConvWeights:
    """Affine map over a flattened spiral gather: weight (C_out, L*C_in), bias (C_out,)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ShapeMismatch("weight must be (C_out, L*C_in) with matching bias")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @classmethod
    def load(cls, manifest_path) -> "SpiralConvWeights":
        t = load_weight_blob(manifest_path)
        return cls(t["weight"], t["bias"])

    def save(self, manifest_path) -> None:
        save_weight_blob(manifest_path, {"weight": self.weight, "bias": self.bias})


@dataclass(frozen=True)
class IsmWeights:
    """Four affine branches over nested disk prefixes.

    Branch i maps the flattened i-disk prefix of the spiral; branch 0 is the
    residual path, so its output width must equal the summed widths of
    branches 1..3.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        if len(ws) != 4 or len(bs) != 4:
            raise ShapeMismatch("need exactly 4 weight/bias pairs")
        for w, b in zip(ws, bs):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeMismatch("each branch needs (C_i, L_i*C_in) weight and (C_i,) bias")
        if ws[0].shape[0] != ws[1].shape[0] + ws[2].shape[0] + ws[3].shape[0]:
            raise BranchChannelMismatch(
                f"residual width {ws[0].shape[0]} != concat width "
                f"{ws[1].shape[0] + ws[2].shape[0] + ws[3].shape[0]}"
            )
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def out_channels(self) -> int:
        return self.weights[0].shape[0]

    @classmethod
    def load(cls, manifest_path) -> "IsmWeights":
        t = load_weight_blob(manifest_path)
        return cls(
            tuple(t[f"weight{i}"] for i in range(4)),
            tuple(t[f"bias{i}"] for i in range(4)),
        )

    def save(self, manifest_path) -> None:
        tensors = {}
        for i in range(4):
            tensors[f"weight{i}"] = self.weights[i]
            tensors[f"bias{i}"] = self.biases[i]
        save_weight_blob(manifest_path, tensors)


def spiralconv_forward(
    features: np.ndarray, index: SpiralIndex, weights: SpiralConvWeights
) -> np.ndarray:
    """Gather the full spiral sequence per vertex, flatten, apply the affine map.

    features (M, C_in) -> (M, C_out).
    """
    f = _check_features(features, index)
    m, c_in = f.shape
    flat = f[index.sequences].reshape(m, index.length * c_in)
    if weights.weight.shape[1] != flat.shape[1]:
        raise ShapeMismatch(
            f"weight expects {weights.weight.shape[1]} inputs, gather gives {flat.shape[1]}"
        )
    return flat @ weights.weight.T + weights.bias


def ism_forward(features: np.ndarray, index: SpiralIndex, weights: IsmWeights) -> np.ndarray:
    """Residual-plus-concat combination of affine maps over disk prefixes.

    Branch i sees the spiral prefix up to the ring-i boundary; the output is
    branch 0 plus the channel-concatenation of branches 1..3. Requires an
    index covering rings 0..3.
    """
    f = _check_features(features, index)
    if index.max_ring < 3:
        raise ShapeMismatch(f"index covers rings 0..{index.max_ring}, need 0..3")
    m, c_in = f.shape
    gathered = f[index.sequences]  # (M, L, C_in)
    outs = []
    for i in range(4):
        prefix = index.boundaries[i]
        flat = gathered[:, :prefix, :].reshape(m, prefix * c_in)
        w = weights.weights[i]
        if w.shape[1] != flat.shape[1]:
            raise ShapeMismatch(
                f"branch {i} expects {w.shape[1]} inputs, prefix gather gives {flat.shape[1]}"
            )
        outs.append(flat @ w.T + weights.biases[i])
    return outs[0] + np.concatenate(outs[1:], axis=1)


def save_weight_blob(manifest_path, tensors: dict) -> None:
    """Write a JSON manifest naming tensor shapes plus a row-major float32 blob."""
    manifest_path = Path(manifest_path)
    blob_path = manifest_path.with_suffix(".bin")
    order = list(tensors)
    with open(blob_path, "wb") as fh:
        for name in order:
            fh.write(np.ascontiguousarray(tensors[name], dtype=np.float32).tobytes())
    manifest = {
        "dtype": "float32",
        "blob": blob_path.name,
        "tensors": [{"name": n, "shape": list(np.shape(tensors[n]))} for n in order],
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_weight_blob(manifest_path) -> dict:
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    raw = np.fromfile(manifest_path.parent / manifest["blob"], dtype=manifest["dtype"])
    tensors = {}
    offset = 0
    for entry in manifest["tensors"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        tensors[entry["name"]] = (
            raw[offset : offset + size].reshape(entry["shape"]).astype(np.float64)
        )
        offset += size
    if offset != raw.size:
        raise ShapeMismatch("blob size does not match manifest shapes")
    return tensors
