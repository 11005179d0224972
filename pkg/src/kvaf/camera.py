"""Pinhole camera projection, episode depth ranges, and PnP pose recovery."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, DimensionError, EstimationError, ValidationError
from . import transforms

DEPTH_MARGIN_DEFAULT = 0.05


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Intrinsics K (3x3, pixels), world-to-camera extrinsics E (4x4), image size."""

    K: np.ndarray
    E: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        K = np.array(self.K, dtype=float).reshape(3, 3)
        E = np.array(self.E, dtype=float).reshape(4, 4)
        if abs(K[2, 2] - 1.0) > 1e-12 or np.max(np.abs(K[[1, 2, 2], [0, 0, 1]])) > 1e-12:
            raise ValidationError("K must be upper-triangular with K[2][2] = 1")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValidationError("K focal entries must be positive")
        if not transforms.is_rotation(E[:3, :3], tol=1e-6):
            raise ValidationError("E rotation block is not orthonormal")
        K.flags.writeable = False
        E.flags.writeable = False
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "E", E)


@dataclass(frozen=True)
class Projection:
    """Result of projecting one world point; culled when depth <= 0."""

    status: str          # "visible" | "culled"
    pixel: tuple[float, float] | None
    depth: float

    @property
    def visible(self) -> bool:
        return self.status == "visible"


@dataclass(frozen=True)
class DepthRange:
    z_min: float
    z_max: float

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValidationError("depth range requires z_min < z_max")


@dataclass(frozen=True, eq=False)
class PnpSolution:
    rotation: np.ndarray      # 3x3, camera frame
    translation: np.ndarray   # (3,), camera frame
    reprojection_rmse: float  # pixels, sqrt(mean squared point error)
    converged: bool

    def as_transform(self) -> np.ndarray:
        return transforms.rigid(self.rotation, self.translation)


def project_point(p_world: np.ndarray, cam: CameraModel) -> Projection:
    """Project a world point: u_hat = K (E [p; 1])_{ :3}, (u, v) = u_hat_xy / u_hat_z.

    Points with camera-frame depth <= 0 (strictly) are culled.
    """
    p = np.asarray(p_world, dtype=float).reshape(3)
    if not np.all(np.isfinite(p)):
        raise ValidationError("cannot project a non-finite point")
    p_cam = transforms.apply(cam.E, p)
    depth = float(p_cam[2])
    if depth <= 0.0:
        return Projection(status="culled", pixel=None, depth=depth)
    u_hat = cam.K @ p_cam
    return Projection(
        status="visible",
        pixel=(float(u_hat[0] / u_hat[2]), float(u_hat[1] / u_hat[2])),
        depth=depth,
    )


def project_points(points: np.ndarray, cam: CameraModel) -> list[Projection]:
    return [project_point(p, cam) for p in np.asarray(points, dtype=float).reshape(-1, 3)]


def normalize_depth(z: float, depth_range: DepthRange) -> float:
    """Normalized palette coordinate: clip((z - z_min) / (z_max - z_min), 0, 1)."""
    a = (z - depth_range.z_min) / (depth_range.z_max - depth_range.z_min)
    return float(np.clip(a, 0.0, 1.0))


def estimate_depth_range(
    keypoints_per_frame, cam: CameraModel, margin: float = DEPTH_MARGIN_DEFAULT
) -> DepthRange:
    """Min/max visible camera-frame depth over an episode, padded by ``margin``.

    The pad is ``margin`` times the raw width on each side.  A degenerate
    (single-depth) episode gets a width of max(2 * margin * z, 1e-3).
    """
    depths = []
    for kp in keypoints_per_frame:
        pts = kp.all_points() if hasattr(kp, "all_points") else np.asarray(kp, dtype=float).reshape(-1, 3)
        cam_pts = transforms.apply(cam.E, pts)
        depths.extend(z for z in cam_pts[:, 2] if z > 0)
    if not depths:
        raise EstimationError("no visible keypoints to estimate a depth range from")
    z_min, z_max = float(min(depths)), float(max(depths))
    width = z_max - z_min
    if width == 0.0:
        half = max(2.0 * margin * z_min, 1e-3) / 2.0
        return DepthRange(z_min - half, z_max + half)
    return DepthRange(z_min - margin * width, z_max + margin * width)


def camera_to_world(pose_cam: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Move a camera-frame pose to the world frame: E^-1 @ pose_cam."""
    E = np.asarray(E, dtype=float).reshape(4, 4)
    if not transforms.is_rotation(E[:3, :3], tol=1e-6):
        raise ValidationError("E rotation block is not orthonormal")
    return transforms.invert(E) @ np.asarray(pose_cam, dtype=float).reshape(4, 4)


# ---------------------------------------------------------------------------
# PnP via damped Gauss-Newton over SE(3).

# Deterministic restart rotations: identity first, then the 24 rotational
# symmetries of the cube, tried in a fixed order until convergence.
def _cube_rotations() -> list[np.ndarray]:
    ex, ey, ez = np.eye(3)
    faces = [
        np.eye(3),
        transforms.axis_angle_matrix(ey, np.pi / 2),
        transforms.axis_angle_matrix(ey, -np.pi / 2),
        transforms.axis_angle_matrix(ey, np.pi),
        transforms.axis_angle_matrix(ex, np.pi / 2),
        transforms.axis_angle_matrix(ex, -np.pi / 2),
    ]
    return [
        transforms.axis_angle_matrix(ez, k * np.pi / 2) @ f
        for k in range(4)
        for f in faces
    ]


_RESTART_ROTATIONS = _cube_rotations()

PNP_GRAD_TOL = 1e-10
PNP_RESIDUAL_TOL = 1e-8
PNP_MAX_ITER = 100


def _gauss_newton(local_pts, pixels, K, R0, t0):
    R, t = R0.copy(), t0.copy()
    damping = 1e-12
    rr = np.inf
    for _ in range(PNP_MAX_ITER):
        p_cam = local_pts @ R.T + t
        u_hat = p_cam @ K.T
        w = u_hat[:, 2]
        if np.any(w <= 1e-12):
            return R, t, np.inf, False
        uv = u_hat[:, :2] / w[:, None]
        r = (uv - pixels).ravel()
        rr = float(r @ r)
        J = np.empty((2 * len(local_pts), 6))
        for i, p in enumerate(p_cam):
            # left-perturbation: d(p_cam)/d(omega) = -[p_cam]x, d(p_cam)/dt = I
            dp = np.hstack([-transforms.skew(p), np.eye(3)])
            J[2 * i] = ((K[0] - uv[i, 0] * K[2]) / w[i]) @ dp
            J[2 * i + 1] = ((K[1] - uv[i, 1] * K[2]) / w[i]) @ dp
        g = J.T @ r
        if np.max(np.abs(g)) < PNP_GRAD_TOL or rr < PNP_RESIDUAL_TOL:
            return R, t, rr, True
        H = J.T @ J + damping * np.eye(6)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            return R, t, rr, False
        R = transforms.rotvec_matrix(step[:3]) @ R
        t = t + step[3:]
    return R, t, rr, False


def solve_pnp(
    correspondences,
    K: np.ndarray,
    init_depth: float = 1.0,
    init_rotation: np.ndarray | None = None,
) -> PnpSolution:
    """Recover the camera-frame pose of a local point set from its projections.

    Minimizes the sum of squared reprojection residuals by damped
    Gauss-Newton over SE(3).  Deterministic initialization: translation is
    the first pixel back-projected at ``init_depth`` (callers with an
    episode pass the median episode depth), rotation is ``init_rotation``
    or identity.  If that start does not converge, a fixed list of 24
    cube-symmetry rotations is tried in order and the best converged
    iterate is returned, so results are reproducible.
    """
    if len(correspondences) < 4:
        raise DimensionError("solve_pnp needs at least 4 correspondences")
    local_pts = np.array([np.asarray(c[0], dtype=float) for c in correspondences])
    pixels = np.array([np.asarray(c[1], dtype=float) for c in correspondences])
    K = np.asarray(K, dtype=float).reshape(3, 3)

    centered = local_pts - local_pts.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-10) < 2:
        raise DegeneracyError("local points are collinear")

    t0 = np.linalg.solve(K, np.array([pixels[0, 0], pixels[0, 1], 1.0])) * init_depth
    starts = [np.eye(3) if init_rotation is None else np.asarray(init_rotation, dtype=float)]
    starts += _RESTART_ROTATIONS

    best = None
    for R0 in starts:
        R, t, rr, converged = _gauss_newton(local_pts, pixels, K, R0, t0)
        if best is None or rr < best[2]:
            best = (R, t, rr, converged)
        if converged:
            break
    R, t, rr, converged = best
    rmse = float(np.sqrt(rr / len(local_pts)))
    return PnpSolution(rotation=R, translation=t, reprojection_rmse=rmse, converged=converged)


# ---------------------------------------------------------------------------
# Camera file format: JSON with row-major K (9 numbers) and E (16 numbers).


def camera_to_dict(cam: CameraModel) -> dict:
    return {
        "K": [float(v) for v in cam.K.ravel()],
        "E": [float(v) for v in cam.E.ravel()],
        "width": cam.width,
        "height": cam.height,
    }


def camera_from_dict(d: dict) -> CameraModel:
    try:
        return CameraModel(
            K=np.array(d["K"], dtype=float).reshape(3, 3),
            E=np.array(d["E"], dtype=float).reshape(4, 4),
            width=int(d["width"]),
            height=int(d["height"]),
        )
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad camera record: {exc}") from exc


def save_camera(path, cam: CameraModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(camera_to_dict(cam), fh, indent=2)


def load_camera(path) -> CameraModel:
    with open(path, encoding="utf-8") as fh:
        return camera_from_dict(json.load(fh))
