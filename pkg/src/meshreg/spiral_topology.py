"""Ring/disk neighborhoods and fixed-length spiral orderings on triangle meshes.

A vertex's k-ring is the set of vertices at graph distance exactly k, its
k-disk the union of rings 0..k. The spiral sequence of a vertex walks the
0-ring (the vertex itself), then the 1-ring in face-fan order, then each
further ring in first-touch order, truncated or padded to fixed per-ring
lengths so sequences can be stacked into one (M, L) index array.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonManifoldVertex
from .geometry import TriangleMesh

DEFAULT_RING_LENGTHS = (8, 16, 24)


@dataclass(frozen=True)
class SpiralIndex:
    """Per-vertex spiral sequences with shared ring-boundary offsets.

    sequences: (M, L) int array; sequences[v, 0] == v.
    boundaries: cumulative end offset of each ring segment, so
        sequences[v, boundaries[i-1]:boundaries[i]] is the (possibly
        truncated/padded) i-ring and boundaries[-1] == L.
    """

    sequences: np.ndarray
    boundaries: tuple[int, ...]

    def __post_init__(self):
        seq = np.asarray(self.sequences, dtype=np.int64)
        if seq.ndim != 2:
            raise ValueError("sequences must be 2D")
        bounds = tuple(int(b) for b in self.boundaries)
        if bounds[0] != 1 or bounds[-1] != seq.shape[1]:
            raise ValueError("boundaries must start at 1 and end at sequence length")
        if any(b > c for b, c in zip(bounds, bounds[1:])):
            raise ValueError("boundaries must be non-decreasing")
        seq = np.ascontiguousarray(seq)
        seq.flags.writeable = False
        object.__setattr__(self, "sequences", seq)
        object.__setattr__(self, "boundaries", bounds)

    @property
    def num_vertices(self) -> int:
        return self.sequences.shape[0]

    @property
    def length(self) -> int:
        return self.sequences.shape[1]

    @property
    def max_ring(self) -> int:
        return len(self.boundaries) - 1

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "length": self.length,
                    "boundaries": list(self.boundaries),
                    "sequences": self.sequences.tolist(),
                },
                fh,
            )

    @classmethod
    def load_json(cls, path) -> "SpiralIndex":
        with open(path) as fh:
            d = json.load(fh)
        seq = np.array(d["sequences"], dtype=np.int64)
        if seq.shape[1] != d["length"]:
            raise ValueError("sequence length does not match manifest")
        return cls(seq, tuple(d["boundaries"]))


def vertex_adjacency(mesh: TriangleMesh) -> list[np.ndarray]:
    """adj[v] = sorted unique neighbors sharing an edge with v."""
    neighbors = [set() for _ in range(mesh.num_vertices)]
    for a, b, c in mesh.faces:
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))
    return [np.array(sorted(s), dtype=np.int64) for s in neighbors]


def k_ring(mesh: TriangleMesh, v: int, k: int, adjacency=None) -> set[int]:
    """Vertices at graph distance exactly k from v.

    0-ring(v) = {v}; (k+1)-ring(v) = N(k-ring(v)) \\ k-disk(v).
    """
    adj = vertex_adjacency(mesh) if adjacency is None else adjacency
    ring = {int(v)}
    disk = {int(v)}
    for _ in range(k):
        frontier = set()
        for u in ring:
            frontier.update(int(w) for w in adj[u])
        ring = frontier - disk
        disk |= ring
    return ring


def k_disk(mesh: TriangleMesh, v: int, k: int, adjacency=None) -> set[int]:
    """Union of rings 0..k: all vertices within graph distance k of v."""
    adj = vertex_adjacency(mesh) if adjacency is None else adjacency
    ring = {int(v)}
    disk = {int(v)}
    for _ in range(k):
        frontier = set()
        for u in ring:
            frontier.update(int(w) for w in adj[u])
        ring = frontier - disk
        disk |= ring
    return disk


def _fan_order(mesh: TriangleMesh, v: int, adj_v: np.ndarray) -> list[int]:
    """1-ring of v ordered by walking the incident face fan.

    Faces incident to v induce directed edges between its neighbors
    (consistent with face winding). An interior manifold vertex yields a
    single cycle, a boundary vertex a single open chain; anything else
    raises NonManifoldVertex. Interior walks start at the smallest
    neighbor index, boundary walks at the chain head.
    """
    succ: dict[int, int] = {}
    for face in mesh.faces:
        a, b, c = (int(x) for x in face)
        if v == a:
            x, y = b, c
        elif v == b:
            x, y = c, a
        elif v == c:
            x, y = a, b
        else:
            continue
        if x in succ:
            raise NonManifoldVertex(f"vertex {v}: neighbor {x} has two fan successors")
        succ[x] = y

    neighbors = [int(u) for u in adj_v]
    if not neighbors:
        return []
    heads = [u for u in neighbors if u not in set(succ.values())]
    if len(heads) == 0:
        start = min(neighbors)  # closed fan: deterministic start
    elif len(heads) == 1:
        start = heads[0]  # open fan: walk endpoint to endpoint
    else:
        raise NonManifoldVertex(f"vertex {v}: {len(heads)} fan endpoints")

    order = [start]
    seen = {start}
    cur = start
    while cur in succ:
        cur = succ[cur]
        if cur in seen:
            break
        order.append(cur)
        seen.add(cur)
    if len(order) != len(neighbors):
        raise NonManifoldVertex(f"vertex {v}: fan does not cover all neighbors")
    return order


def _ring_orders(mesh, v, adj, max_ring) -> list[list[int]]:
    """Untruncated spiral ordering of rings 0..max_ring around v."""
    orders = [[int(v)]]
    disk = {int(v)}
    for k in range(1, max_ring + 1):
        if k == 1:
            ring_order = _fan_order(mesh, int(v), adj[v])
        else:
            ring_set = set()
            for u in orders[k - 1]:
                ring_set.update(int(w) for w in adj[u])
            ring_set -= disk
            ring_order = []
            emitted = set()
            for u in orders[k - 1]:
                for w in adj[u]:
                    w = int(w)
                    if w in ring_set and w not in emitted:
                        ring_order.append(w)
                        emitted.add(w)
        orders.append(ring_order)
        disk.update(ring_order)
    return orders


def build_spiral_index(
    mesh: TriangleMesh,
    max_ring: int = 3,
    lengths: tuple[int, ...] | None = None,
) -> SpiralIndex:
    """Fixed-length spiral sequences for every vertex.

    lengths gives the truncation length of each ring segment 1..max_ring
    (default (8, 16, 24) for max_ring <= 3). Short segments are padded by
    repeating their last valid index; an empty segment repeats the last
    index of the sequence built so far.
    """
    if lengths is None:
        if max_ring > len(DEFAULT_RING_LENGTHS):
            raise ValueError(f"no default lengths for max_ring={max_ring}")
        lengths = DEFAULT_RING_LENGTHS[:max_ring]
    lengths = tuple(int(x) for x in lengths)
    if len(lengths) != max_ring:
        raise ValueError(f"need {max_ring} ring lengths, got {len(lengths)}")
    if any(x < 1 for x in lengths):
        raise ValueError("ring lengths must be >= 1")

    adj = vertex_adjacency(mesh)
    total = 1 + sum(lengths)
    sequences = np.empty((mesh.num_vertices, total), dtype=np.int64)
    for v in range(mesh.num_vertices):
        orders = _ring_orders(mesh, v, adj, max_ring)
        seq = [v]
        for k in range(1, max_ring + 1):
            segment = orders[k][: lengths[k - 1]]
            pad = segment[-1] if segment else seq[-1]
            segment = segment + [pad] * (lengths[k - 1] - len(segment))
            seq.extend(segment)
        sequences[v] = seq

    boundaries = [1]
    for x in lengths:
        boundaries.append(boundaries[-1] + x)
    return SpiralIndex(sequences, tuple(boundaries))
