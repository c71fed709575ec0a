"""Exception types raised across the package.

Every error carries a short machine-readable ``code`` used by the CLI to
emit stable error identifiers.
"""


class MeshRegError(Exception):
    """Base class for all package errors."""

    code = "error"


class NonPositiveDepth(MeshRegError):
    """A 3D point sits at or behind the camera plane (z <= 1e-6)."""

    code = "geometry.non_positive_depth"


class DimensionMismatch(MeshRegError):
    """Regressor column count does not match the mesh vertex count."""

    code = "geometry.dimension_mismatch"


class DegenerateConfiguration(MeshRegError):
    """Point set too degenerate (rank < 2) for similarity alignment."""

    code = "geometry.degenerate_configuration"


class NonManifoldVertex(MeshRegError):
    """A vertex whose incident faces do not form a single fan or cycle."""

    code = "topology.non_manifold_vertex"


class ShapeMismatch(MeshRegError):
    """Array shapes inconsistent with the operator or loss definition."""

    code = "ops.shape_mismatch"


class BranchChannelMismatch(MeshRegError):
    """Residual branch width differs from the concatenated branch widths."""

    code = "ops.branch_channel_mismatch"


class ResolutionMismatch(MeshRegError):
    """Heatmap stacks with different spatial resolutions."""

    code = "cues.resolution_mismatch"


class InvalidGroupIndex(MeshRegError):
    """A grouping scheme references a joint index outside the stack."""

    code = "cues.invalid_group_index"


class EmptyMask(MeshRegError):
    """Silhouette mask contains no foreground pixels."""

    code = "silhouette.empty_mask"


class DegenerateContour(MeshRegError):
    """Traced boundary has fewer than 3 points."""

    code = "silhouette.degenerate_contour"


class InvalidAxisCount(MeshRegError):
    """Axis set needs at least 2 directions."""

    code = "silhouette.invalid_axis_count"


class EmptyPointSet(MeshRegError):
    """Span projection called with no points."""

    code = "silhouette.empty_point_set"


class DivergedBehindCamera(MeshRegError):
    """Solver state places the mesh at or behind the camera plane."""

    code = "solver.diverged_behind_camera"


class ZeroLengthEdge(MeshRegError):
    """Predicted mesh contains an edge of zero length."""

    code = "loss.zero_length_edge"


class EmptyInput(MeshRegError):
    """Metric computation received an empty error set."""

    code = "metrics.empty_input"
