"""Camera-space root recovery by joint reprojection and span alignment.

Two energies are minimized over the root translation t of a root-relative
mesh: a 2D term (squared pixel error between predicted landmarks and the
reprojected regressed joints) and a 1D term (squared mismatch of per-axis
span endpoints between the silhouette contour and the projected mesh).
Both use damped Gauss-Newton steps; the 1D term alternates extremal-vertex
selection with steps on the resulting smooth residuals. The two solutions
are fused by their mutual distance against two thresholds: far apart the
1D solution wins (landmarks are the more fragile cue), close together the
2D solution wins (correspondence is explicit), in between they blend
linearly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergedBehindCamera, NonPositiveDepth
from .geometry import (
    MIN_DEPTH,
    CameraIntrinsics,
    JointRegressor,
    Landmarks2D,
    RootTranslation,
    TriangleMesh,
    project_points,
    regress_joints,
)
from .silhouette import AxisSet, Contour, extract_contour, make_axes, project_spans

REGIME_1D = "use_1d"
REGIME_BLEND = "blend"
REGIME_2D = "use_2d"


@dataclass(frozen=True)
class RegistrationConfig:
    """Solver and fusion settings.

    delta1/delta2 are the fusion thresholds in meters (delta1 > delta2 > 0);
    defaults are the hand values, body uses 1.0/0.5. The damping schedule
    multiplies up on rejected steps and down on accepted ones.
    """

    delta1: float = 0.06
    delta2: float = 0.02
    axis_count: int = 12
    max_iterations: int = 100
    step_tolerance: float = 1e-8
    max_reselections: int = 30
    damping_init: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    damping_max: float = 1e12
    init_policy: str = "weak_perspective"
    init_translation: tuple[float, float, float] | None = None
    fallback_depth: float = 0.6

    def __post_init__(self):
        if not (self.delta1 > self.delta2 > 0):
            raise ValueError("need delta1 > delta2 > 0")
        if self.axis_count < 2:
            raise ValueError("need at least 2 axes")
        if self.init_policy not in ("weak_perspective", "fixed"):
            raise ValueError(f"unknown init policy {self.init_policy!r}")
        if self.init_policy == "fixed" and self.init_translation is None:
            raise ValueError("fixed init policy needs init_translation")

    @classmethod
    def for_hand(cls, **kw) -> "RegistrationConfig":
        return cls(**kw)

    @classmethod
    def for_body(cls, **kw) -> "RegistrationConfig":
        kw.setdefault("delta1", 1.0)
        kw.setdefault("delta2", 0.5)
        return cls(**kw)


@dataclass(frozen=True)
class SolverRun:
    """Outcome of one damped Gauss-Newton solve."""

    t: np.ndarray
    residual: float
    iterations: int
    status: str  # "converged" | "max_iterations"

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass(frozen=True)
class RegistrationResult:
    """Both solver roots, their fusion, and solve diagnostics."""

    t2d: RootTranslation
    t1d: RootTranslation | None
    t_star: RootTranslation
    distance: float
    regime: str
    e2d: SolverRun
    e1d: SolverRun | None
    e1d_failed: bool = False
    diagnostics: dict | None = None

    def to_json_dict(self) -> dict:
        d = {
            "t2d": list(self.t2d.as_array()),
            "t1d": None if self.t1d is None else list(self.t1d.as_array()),
            "t_star": list(self.t_star.as_array()),
            "distance": self.distance,
            "regime": self.regime,
            "e2d": {
                "residual": self.e2d.residual,
                "iterations": self.e2d.iterations,
                "status": self.e2d.status,
            },
            "e1d": None
            if self.e1d is None
            else {
                "residual": self.e1d.residual,
                "iterations": self.e1d.iterations,
                "status": self.e1d.status,
            },
            "e1d_failed": self.e1d_failed,
        }
        if self.diagnostics is not None:
            d["diagnostics"] = self.diagnostics
        return d


def _as_vec(t) -> np.ndarray:
    if isinstance(t, RootTranslation):
        return t.as_array()
    return np.asarray(t, dtype=np.float64).reshape(3)


def _well_posed(hessian: np.ndarray) -> bool:
    eigs = np.linalg.eigvalsh(hessian)
    return eigs[0] > max(eigs[-1], 1e-300) * 1e-10


def _damped_gauss_newton(residual_jacobian, t0: np.ndarray, config: RegistrationConfig) -> SolverRun:
    """Levenberg-damped Gauss-Newton over t in R^3.

    residual_jacobian(t) returns (r, J) and raises NonPositiveDepth for
    infeasible t; infeasible or cost-increasing candidates are rejected and
    the damping raised. Returns the best iterate; status "converged" needs
    a sub-tolerance step on a well-conditioned system.
    """
    t = np.array(t0, dtype=np.float64)
    r, jac = residual_jacobian(t)
    cost = float(r @ r)
    lam = config.damping_init
    best_t, best_cost = t.copy(), cost
    status = "max_iterations"
    iterations = 0
    eye = np.eye(3)
    for iterations in range(1, config.max_iterations + 1):
        hess = jac.T @ jac
        grad = jac.T @ r
        step = -np.linalg.solve(hess + lam * eye, grad)
        try:
            r_new, jac_new = residual_jacobian(t + step)
            cost_new = float(r_new @ r_new)
            accept = cost_new <= cost
        except NonPositiveDepth:
            accept = False
        if accept:
            t = t + step
            r, jac, cost = r_new, jac_new, cost_new
            lam = max(lam * config.damping_decrease, 1e-12)
            if cost < best_cost:
                best_t, best_cost = t.copy(), cost
            if float(np.linalg.norm(step)) < config.step_tolerance:
                if _well_posed(hess):
                    status = "converged"
                break  # rank-deficient systems exit flagged with the best iterate
        else:
            lam *= config.damping_increase
            if lam > config.damping_max:
                break
    return SolverRun(t=best_t, residual=best_cost, iterations=iterations, status=status)


def _projection_jacobian(points_cam: np.ndarray, k: CameraIntrinsics):
    """du/dt and dv/dt rows of the pinhole projection, each (N, 3)."""
    x, y, z = points_cam[:, 0], points_cam[:, 1], points_cam[:, 2]
    du = np.stack([k.fx / z, np.zeros_like(z), -k.fx * x / z**2], axis=1)
    dv = np.stack([np.zeros_like(z), k.fy / z, -k.fy * y / z**2], axis=1)
    return du, dv


def e2d_residual_jacobian(joints_rel: np.ndarray, k: CameraIntrinsics, target_px: np.ndarray):
    """Residual/Jacobian closure for the joint-reprojection energy.

    Residuals interleave (u - px, v - py) per joint; exposed for the
    finite-difference Jacobian checks.
    """
    joints_rel = np.asarray(joints_rel, dtype=np.float64)
    target = np.asarray(target_px, dtype=np.float64)

    def f(t):
        cam = joints_rel + t
        proj = project_points(cam, k)
        r = (proj - target).reshape(-1)
        du, dv = _projection_jacobian(cam, k)
        jac = np.empty((2 * len(cam), 3))
        jac[0::2] = du
        jac[1::2] = dv
        return r, jac

    return f


def _weak_perspective_init(
    joints_rel: np.ndarray, k: CameraIntrinsics, target_px: np.ndarray, config: RegistrationConfig
) -> np.ndarray:
    """One-shot scale-aware initial root: depth from the 3D/2D RMS spread
    ratio, lateral position by back-projecting the landmark centroid."""
    c3 = joints_rel.mean(axis=0)
    c2 = target_px.mean(axis=0)
    s3 = float(np.sqrt(np.mean(np.sum((joints_rel - c3) ** 2, axis=1))))
    s2 = float(np.sqrt(np.mean(np.sum((target_px - c2) ** 2, axis=1))))
    if s2 > 1e-9 and s3 > 1e-12:
        z0 = k.fx * s3 / s2
    else:
        z0 = config.fallback_depth
    if not np.isfinite(z0) or z0 <= 0:
        z0 = config.fallback_depth
    t0 = np.array(
        [
            (c2[0] - k.cx) * z0 / k.fx - c3[0],
            (c2[1] - k.cy) * z0 / k.fy - c3[1],
            z0 - c3[2],
        ]
    )
    return t0


def _initial_guess(joints_rel, k, target_px, config) -> np.ndarray:
    if config.init_policy == "fixed":
        return np.asarray(config.init_translation, dtype=np.float64).reshape(3)
    return _weak_perspective_init(joints_rel, k, target_px, config)


def solve_e2d(
    mesh_rel,
    regressor: JointRegressor,
    k: CameraIntrinsics,
    landmarks: Landmarks2D,
    config: RegistrationConfig | None = None,
    t_init=None,
) -> SolverRun:
    """Minimize the squared pixel error between landmarks and reprojected joints.

    mesh_rel is root-relative; accepts a TriangleMesh or an (M, 3) vertex
    array. Raises DivergedBehindCamera when the starting point already puts
    a joint at or behind the camera plane.
    """
    config = config or RegistrationConfig()
    joints = regress_joints(mesh_rel, regressor)
    target = landmarks.points if isinstance(landmarks, Landmarks2D) else np.asarray(landmarks)
    t0 = _as_vec(t_init) if t_init is not None else _initial_guess(joints, k, target, config)
    if np.any(joints[:, 2] + t0[2] <= MIN_DEPTH):
        raise DivergedBehindCamera("initial guess places joints behind the camera")
    return _damped_gauss_newton(e2d_residual_jacobian(joints, k, target), t0, config)


def e1d_energy(verts_rel: np.ndarray, k: CameraIntrinsics, t, contour_spans, axes: AxisSet) -> float:
    """Span-mismatch energy at t: summed squared max and min differences."""
    p2d = project_points(verts_rel + _as_vec(t), k)
    spans = project_spans(p2d, axes)
    return float(
        np.sum((spans.maxs - contour_spans.maxs) ** 2)
        + np.sum((spans.mins - contour_spans.mins) ** 2)
    )


def solve_e1d(
    mesh_rel,
    k: CameraIntrinsics,
    contour: Contour,
    axes: AxisSet,
    t_init,
    config: RegistrationConfig | None = None,
) -> SolverRun:
    """Minimize the 1D span mismatch between contour and projected mesh.

    Alternates: select the per-axis extremal vertices of the projected mesh,
    run damped Gauss-Newton on the resulting smooth residuals, re-select.
    Converged when the extremal sets stabilize and the final step is below
    tolerance. The reported residual is the true span energy at the
    returned root, re-selected fresh.
    """
    config = config or RegistrationConfig()
    verts = mesh_rel.vertices if isinstance(mesh_rel, TriangleMesh) else np.asarray(mesh_rel, float)
    cspans = project_spans(contour.points, axes)
    targets = np.concatenate([cspans.maxs, cspans.mins])
    avec = axes.vectors

    t = _as_vec(t_init)
    if t[2] <= 0 or np.any(verts[:, 2] + t[2] <= MIN_DEPTH):
        raise DivergedBehindCamera("initial guess places the mesh behind the camera")

    def select(t_cur):
        p2d = project_points(verts + t_cur, k)
        dots = p2d @ avec.T
        return tuple(np.argmax(dots, axis=0)) + tuple(np.argmin(dots, axis=0))

    def fixed_residual(extrema):
        sel = np.array(extrema)
        ax2 = np.concatenate([avec, avec])

        def f(t_cur):
            cam = verts[sel] + t_cur
            proj = project_points(cam, k)
            r = np.sum(proj * ax2, axis=1) - targets
            du, dv = _projection_jacobian(cam, k)
            jac = ax2[:, 0:1] * du + ax2[:, 1:2] * dv
            return r, jac

        return f

    status = "max_iterations"
    total_iters = 0
    prev_sets = None
    for _ in range(config.max_reselections):
        sets = select(t)
        run = _damped_gauss_newton(fixed_residual(sets), t, config)
        t = run.t
        total_iters += run.iterations
        if sets == prev_sets and run.converged:
            status = "converged"
            break
        prev_sets = sets

    residual = e1d_energy(verts, k, t, cspans, axes)
    return SolverRun(t=t, residual=residual, iterations=total_iters, status=status)


def adaptive_fuse(t2d, t1d, config: RegistrationConfig | None = None):
    """Fuse the two roots by their distance d against (delta1, delta2).

    d > delta1 -> the 1D root; d > delta2 -> linear blend with weights
    (delta1-d)/(delta1-delta2) on t2d and (d-delta2)/(delta1-delta2) on
    t1d; otherwise the 2D root. Returns (t_star, regime).
    """
    config = config or RegistrationConfig()
    a2 = _as_vec(t2d)
    a1 = _as_vec(t1d)
    d = float(np.linalg.norm(a2 - a1))
    if d > config.delta1:
        return a1.copy(), REGIME_1D
    elif d > config.delta2:
        w2 = (config.delta1 - d) / (config.delta1 - config.delta2)
        w1 = (d - config.delta2) / (config.delta1 - config.delta2)
        return w2 * a2 + w1 * a1, REGIME_BLEND
    else:
        return a2.copy(), REGIME_2D


def register(
    mesh_rel,
    regressor: JointRegressor,
    k: CameraIntrinsics,
    landmarks: Landmarks2D,
    mask=None,
    config: RegistrationConfig | None = None,
    contour: Contour | None = None,
    collect_diagnostics: bool = False,
) -> RegistrationResult:
    """Full root recovery: 2D solve, 1D solve seeded at the 2D root, fusion.

    The silhouette enters either as a mask (contour extracted here) or as a
    precomputed contour. A 1D solve that diverges falls back to the 2D root
    with e1d_failed set; contour extraction errors propagate.
    """
    config = config or RegistrationConfig()
    if contour is None:
        if mask is None:
            raise ValueError("need a silhouette mask or a contour")
        contour = extract_contour(mask)
    axes = make_axes(config.axis_count)

    e2d = solve_e2d(mesh_rel, regressor, k, landmarks, config)

    diagnostics = None
    e1d = None
    e1d_failed = False
    try:
        e1d = solve_e1d(mesh_rel, k, contour, axes, e2d.t, config)
    except DivergedBehindCamera:
        e1d_failed = True

    if e1d_failed:
        t_star, regime = e2d.t.copy(), REGIME_2D
        distance = float("nan")
        t1d_root = None
    else:
        t_star, regime = adaptive_fuse(e2d.t, e1d.t, config)
        distance = float(np.linalg.norm(e2d.t - e1d.t))
        t1d_root = RootTranslation.from_array(e1d.t)

    if collect_diagnostics:
        diagnostics = _plot_diagnostics(mesh_rel, k, contour, axes, e2d.t, t_star)

    return RegistrationResult(
        t2d=RootTranslation.from_array(e2d.t),
        t1d=t1d_root,
        t_star=RootTranslation.from_array(t_star),
        distance=distance,
        regime=regime,
        e2d=e2d,
        e1d=e1d,
        e1d_failed=e1d_failed,
        diagnostics=diagnostics,
    )


def _subsample(points: np.ndarray, limit: int) -> np.ndarray:
    if len(points) <= limit:
        return points
    idx = np.linspace(0, len(points) - 1, limit).astype(int)
    return points[idx]


def _plot_diagnostics(mesh_rel, k, contour, axes, t_before, t_after) -> dict:
    """Overlay data for the plotting command: contour, projected mesh before
    and after registration, and per-axis span intervals."""
    verts = mesh_rel.vertices if isinstance(mesh_rel, TriangleMesh) else np.asarray(mesh_rel, float)
    cspans = project_spans(contour.points, axes)
    p_before = project_points(verts + _as_vec(t_before), k)
    p_after = project_points(verts + _as_vec(t_after), k)
    s_before = project_spans(p_before, axes)
    s_after = project_spans(p_after, axes)

    def gap(s):
        return float(
            np.max(np.maximum(np.abs(s.maxs - cspans.maxs), np.abs(s.mins - cspans.mins)))
        )

    return {
        "axes": axes.vectors.tolist(),
        "contour": _subsample(contour.points, 2000).tolist(),
        "projected_before": _subsample(p_before, 1500).tolist(),
        "projected_after": _subsample(p_after, 1500).tolist(),
        "spans_contour": np.stack([cspans.mins, cspans.maxs], axis=1).tolist(),
        "spans_before": np.stack([s_before.mins, s_before.maxs], axis=1).tolist(),
        "spans_after": np.stack([s_after.mins, s_after.maxs], axis=1).tolist(),
        "max_span_gap_before": gap(s_before),
        "max_span_gap_after": gap(s_after),
    }
