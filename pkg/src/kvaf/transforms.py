"""Rigid-transform and quaternion utilities.

Conventions used across the package:
  * quaternions are (w, x, y, z), Hamilton product, right-handed frames;
  * rigid transforms are 4x4 homogeneous matrices, float64;
  * roll-pitch-yaw is intrinsic x-y-z (roll about x, then pitch about y,
    then yaw about z), i.e. R = Rx(roll) @ Ry(pitch) @ Rz(yaw).
"""

from __future__ import annotations

import numpy as np

_POLE_LIMIT = 1.0 - 1e-9


def identity() -> np.ndarray:
    return np.eye(4)


def rigid(rotation: np.ndarray, translation: np.ndarray) -> np.ndarray:
    """Assemble a 4x4 transform from a 3x3 rotation and a 3-vector."""
    T = np.eye(4)
    T[:3, :3] = np.asarray(rotation, dtype=float)
    T[:3, 3] = np.asarray(translation, dtype=float)
    return T


def rotation_of(T: np.ndarray) -> np.ndarray:
    return np.asarray(T)[:3, :3]


def translation_of(T: np.ndarray) -> np.ndarray:
    return np.asarray(T)[:3, 3]


def invert(T: np.ndarray) -> np.ndarray:
    """Inverse of a rigid transform (uses R^T, not a general solve)."""
    R = rotation_of(T)
    t = translation_of(T)
    return rigid(R.T, -R.T @ t)


def apply(T: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply a rigid transform to one point (3,) or many (N, 3)."""
    p = np.asarray(points, dtype=float)
    return p @ rotation_of(T).T + translation_of(T)


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    a = np.asarray(axis, dtype=float)
    K = skew(a)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rotvec_matrix(v: np.ndarray) -> np.ndarray:
    """Rotation matrix from an unnormalized rotation vector."""
    v = np.asarray(v, dtype=float)
    angle = float(np.linalg.norm(v))
    if angle < 1e-15:
        return np.eye(3) + skew(v)
    return axis_angle_matrix(v / angle, angle)


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (
        np.max(np.abs(R.T @ R - np.eye(3))) < tol
        and abs(np.linalg.det(R) - 1.0) < tol
    )


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion (w >= 0 branch chosen for stability)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def rpy_from_matrix(R: np.ndarray) -> np.ndarray:
    """Extract intrinsic x-y-z roll-pitch-yaw from a rotation matrix.

    With R = Rx(roll) @ Ry(pitch) @ Rz(yaw):
        pitch = asin(R[0, 2])
        yaw   = atan2(-R[0, 1], R[0, 0])
        roll  = atan2(-R[1, 2], R[2, 2])
    At the gimbal poles (|pitch| = pi/2) only roll + yaw (or roll - yaw) is
    observable; roll is set to 0 and yaw = atan2(R[1, 0], R[1, 1]).
    """
    R = np.asarray(R, dtype=float)
    if R[0, 2] > _POLE_LIMIT:
        return np.array([0.0, np.pi / 2.0, np.arctan2(R[1, 0], R[1, 1])])
    if R[0, 2] < -_POLE_LIMIT:
        return np.array([0.0, -np.pi / 2.0, np.arctan2(R[1, 0], R[1, 1])])
    roll = np.arctan2(-R[1, 2], R[2, 2])
    pitch = np.arcsin(np.clip(R[0, 2], -1.0, 1.0))
    yaw = np.arctan2(-R[0, 1], R[0, 0])
    return np.array([roll, pitch, yaw])


def matrix_from_rpy(rpy: np.ndarray) -> np.ndarray:
    """Inverse of rpy_from_matrix: R = Rx(roll) @ Ry(pitch) @ Rz(yaw)."""
    roll, pitch, yaw = rpy
    return (
        axis_angle_matrix(np.array([1.0, 0.0, 0.0]), roll)
        @ axis_angle_matrix(np.array([0.0, 1.0, 0.0]), pitch)
        @ axis_angle_matrix(np.array([0.0, 0.0, 1.0]), yaw)
    )
