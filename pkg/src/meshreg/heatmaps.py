"""2D cue construction and aggregation: joint heatmaps, silhouette channel,
and the sum/cat/group combination schemes.

Grouped channels are "sub-poses": pixel-wise sums of the member joint
heatmaps, clamped to [0, 1] to keep probability-map semantics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidGroupIndex, ResolutionMismatch
from .geometry import Landmarks2D

DEFAULT_RESOLUTION = (64, 64)
DEFAULT_SIGMA = 2.5


@dataclass(frozen=True)
class HeatmapStack:
    """Labelled channel stack, (N, H, W) with values in [0, 1]."""

    channels: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        c = np.asarray(self.channels, dtype=np.float64)
        if c.ndim != 3:
            raise ValueError(f"channels must be (N, H, W), got {c.shape}")
        if np.any(c < 0) or np.any(c > 1) or not np.all(np.isfinite(c)):
            raise ValueError("heatmap values must lie in [0, 1]")
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != c.shape[0]:
            raise ValueError("label count must match channel count")
        c = np.ascontiguousarray(c)
        c.flags.writeable = False
        object.__setattr__(self, "channels", c)
        object.__setattr__(self, "labels", labels)

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.channels.shape[1], self.channels.shape[2]

    def export_pgm(self, directory) -> list[Path]:
        """One 8-bit PGM per channel, named after its label."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for label, chan in zip(self.labels, self.channels):
            name = re.sub(r"[^A-Za-z0-9_.-]+", "_", label) or "channel"
            path = directory / f"{name}.pgm"
            Image.fromarray(np.round(chan * 255).astype(np.uint8), mode="L").save(
                path, format="PPM"
            )
            paths.append(path)
        return paths


@dataclass(frozen=True)
class GroupingScheme:
    """Named joint groups of one kind: part, level or tip."""

    kind: str
    groups: dict[str, tuple[int, ...]]

    def __post_init__(self):
        if self.kind not in ("part", "level", "tip"):
            raise ValueError(f"unknown grouping kind {self.kind!r}")
        clean = {}
        for name, idx in self.groups.items():
            members = tuple(int(i) for i in idx)
            if not members:
                raise ValueError(f"group {name!r} is empty")
            if any(i < 0 for i in members):
                raise InvalidGroupIndex(f"group {name!r} has a negative index")
            if self.kind == "tip" and len(members) != 2:
                raise ValueError(f"tip group {name!r} must pair exactly 2 joints")
            clean[str(name)] = members
        object.__setattr__(self, "groups", clean)

    @classmethod
    def load_json(cls, path) -> "GroupingScheme":
        with open(path) as fh:
            d = json.load(fh)
        return cls(kind=d["kind"], groups={k: tuple(v) for k, v in d["groups"].items()})

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "groups": {k: list(v) for k, v in self.groups.items()}}


def render_gaussian_heatmaps(
    landmarks: Landmarks2D,
    resolution: tuple[int, int] = DEFAULT_RESOLUTION,
    sigma: float = DEFAULT_SIGMA,
    labels=None,
) -> HeatmapStack:
    """One unnormalized Gaussian blob per landmark, peak value 1.

    Channel i holds exp(-((x-px)^2 + (y-py)^2) / (2 sigma^2)) sampled at
    integer pixel coordinates. Off-image landmarks simply truncate.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w = resolution
    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    pts = landmarks.points
    dx2 = (xs[None, :] - pts[:, 0:1]) ** 2  # (N, W)
    dy2 = (ys[None, :] - pts[:, 1:2]) ** 2  # (N, H)
    chans = np.exp(-(dy2[:, :, None] + dx2[:, None, :]) / (2.0 * sigma * sigma))
    if labels is None:
        labels = tuple(f"joint_{i}" for i in range(len(pts)))
    return HeatmapStack(chans, tuple(labels))


def _clamped_sum(channels: np.ndarray) -> np.ndarray:
    return np.clip(channels.sum(axis=0), 0.0, 1.0)


def aggregate_sum(stack: HeatmapStack) -> HeatmapStack:
    """All channels combined into one by pixel-wise sum, clamped to [0, 1]."""
    if stack.num_channels < 1:
        raise ValueError("need at least one channel")
    return HeatmapStack(_clamped_sum(stack.channels)[None], ("sum",))


def aggregate_cat(pose: HeatmapStack, sil: HeatmapStack) -> HeatmapStack:
    """Channel-wise concatenation of two stacks with equal resolution."""
    if pose.resolution != sil.resolution:
        raise ResolutionMismatch(f"{pose.resolution} vs {sil.resolution}")
    return HeatmapStack(
        np.concatenate([pose.channels, sil.channels], axis=0),
        pose.labels + sil.labels,
    )


def aggregate_group(stack: HeatmapStack, schemes) -> HeatmapStack:
    """Original channels followed by one clamped group-sum channel per group.

    Groups are appended in scheme order then group order; an empty scheme
    list returns the stack unchanged.
    """
    schemes = list(schemes)
    if not schemes:
        return stack
    chans = [stack.channels]
    labels = list(stack.labels)
    n = stack.num_channels
    for scheme in schemes:
        for name, members in scheme.groups.items():
            if any(i >= n for i in members):
                raise InvalidGroupIndex(
                    f"group {name!r} references joint >= {n}"
                )
            chans.append(_clamped_sum(stack.channels[list(members)])[None])
            labels.append(f"{scheme.kind}:{name}")
    return HeatmapStack(np.concatenate(chans, axis=0), tuple(labels))


def default_hand_schemes() -> dict[str, GroupingScheme]:
    """Grouping tables for 21 hand joints (wrist = 0, then per finger
    MCP/PIP/DIP/TIP in thumb..pinky order).

    part: each finger's chain plus the wrist. level: wrist, then each
    articulation level across fingers. tip: every unordered fingertip pair.
    """
    fingers = {
        "thumb": (1, 2, 3, 4),
        "index": (5, 6, 7, 8),
        "middle": (9, 10, 11, 12),
        "ring": (13, 14, 15, 16),
        "pinky": (17, 18, 19, 20),
    }
    part = GroupingScheme("part", {name: (0,) + chain for name, chain in fingers.items()})
    level = GroupingScheme(
        "level",
        {
            "wrist": (0,),
            "mcp": (1, 5, 9, 13, 17),
            "pip": (2, 6, 10, 14, 18),
            "dip": (3, 7, 11, 15, 19),
            "tip": (4, 8, 12, 16, 20),
        },
    )
    names = list(fingers)
    tips = {name: chain[-1] for name, chain in fingers.items()}
    tip_groups = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            tip_groups[f"{a}-{b}"] = (tips[a], tips[b])
    tip = GroupingScheme("tip", tip_groups)
    return {"part": part, "level": level, "tip": tip}


def default_body_schemes() -> dict[str, GroupingScheme]:
    """Grouping tables for a 24-joint body skeleton (pelvis = 0), grouped
    over legs/arms/torso, kinematic depth levels, and end-effector pairs."""
    parts = {
        "left_leg": (0, 1, 4, 7, 10),
        "right_leg": (0, 2, 5, 8, 11),
        "torso": (0, 3, 6, 9, 12, 15),
        "left_arm": (13, 16, 18, 20, 22),
        "right_arm": (14, 17, 19, 21, 23),
    }
    part = GroupingScheme("part", parts)
    level = GroupingScheme(
        "level",
        {
            "root": (0,),
            "hips_spine": (1, 2, 3),
            "knees_chest": (4, 5, 6),
            "ankles_thorax": (7, 8, 9),
            "feet_collars_neck": (10, 11, 12, 13, 14),
            "head_shoulders": (15, 16, 17),
            "elbows": (18, 19),
            "wrists": (20, 21),
            "hands": (22, 23),
        },
    )
    ends = {"left_foot": 10, "right_foot": 11, "head": 15, "left_hand": 22, "right_hand": 23}
    names = list(ends)
    tip_groups = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            tip_groups[f"{a}-{b}"] = (ends[a], ends[b])
    tip = GroupingScheme("tip", tip_groups)
    return {"part": part, "level": level, "tip": tip}
