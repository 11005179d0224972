"""Forward kinematics and 3D keypoint extraction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .errors import DimensionError, ValidationError
from .urdf import ArmChain, JointSpec, KinematicChain
from . import transforms


@dataclass(frozen=True, eq=False)
class LinkPoseSet:
    """World-frame pose per link, in chain order (index 0 is the base link)."""

    poses: tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = []
        for p in self.poses:
            p = np.array(p, dtype=float).reshape(4, 4)
            p.flags.writeable = False
            frozen.append(p)
        object.__setattr__(self, "poses", tuple(frozen))

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def terminal(self) -> np.ndarray:
        return self.poses[-1]


@dataclass(frozen=True, eq=False)
class KeypointSet:
    """World-frame robot keypoints for one arm at one timestep."""

    arm_points: np.ndarray                 # (n_links, 3), chain order
    joint_points: MappingProxyType        # joint name -> (3,) world point
    finger_points: np.ndarray              # (n_fingers, 3)
    ee_point: np.ndarray                   # (3,)

    def __post_init__(self):
        arm = np.array(self.arm_points, dtype=float).reshape(-1, 3)
        fingers = np.array(self.finger_points, dtype=float).reshape(-1, 3)
        ee = np.array(self.ee_point, dtype=float).reshape(3)
        for a in (arm, fingers, ee):
            if not np.all(np.isfinite(a)):
                raise ValidationError("keypoints must be finite")
            a.flags.writeable = False
        object.__setattr__(self, "arm_points", arm)
        object.__setattr__(self, "finger_points", fingers)
        object.__setattr__(self, "ee_point", ee)
        object.__setattr__(self, "joint_points", MappingProxyType(dict(self.joint_points)))

    def all_points(self) -> np.ndarray:
        return np.vstack([self.arm_points, self.finger_points, self.ee_point[None, :]])


def joint_motion(joint: JointSpec, value: float) -> np.ndarray:
    """Motion transform of one joint at the given value."""
    if joint.kind == "fixed":
        return transforms.identity()
    if joint.kind == "revolute":
        return transforms.rigid(
            transforms.axis_angle_matrix(joint.axis, value), np.zeros(3)
        )
    return transforms.rigid(np.eye(3), value * joint.axis)


def forward_kinematics(chain: KinematicChain, q: np.ndarray, arm: str = "left") -> LinkPoseSet:
    """Compose world link poses: pose[k] = pose[k-1] @ origin_k @ motion_k(q_k).

    ``q`` holds one value per actuated (non-fixed, non-gripper) joint, in
    chain order.  Values outside declared joint limits produce a warning,
    not an error.
    """
    arm_chain = chain.arm(arm)
    q = np.asarray(q, dtype=float).reshape(-1)
    actuated = arm_chain.actuated_joints
    if len(q) != len(actuated):
        raise DimensionError(
            f"{arm} arm expects {len(actuated)} joint values, got {len(q)}"
        )
    for joint, value in zip(actuated, q):
        if joint.limits is not None:
            lo, hi = joint.limits
            if value < lo - 1e-12 or value > hi + 1e-12:
                warnings.warn(
                    f"joint {joint.name!r} value {value:.6g} outside limits [{lo:.6g}, {hi:.6g}]",
                    stacklevel=2,
                )
    poses = [arm_chain.base_transform]
    qi = iter(q)
    for joint in arm_chain.joints:
        value = next(qi) if joint.actuated else 0.0
        poses.append(poses[-1] @ joint.origin @ joint_motion(joint, value))
    return LinkPoseSet(poses=tuple(poses))


def gripper_displacement(g: float, d_max: float) -> float:
    """Map a normalized gripper signal to a prismatic displacement.

    d = clip(g, 0, 1) * d_max; out-of-range signals are absorbed by the clip.
    """
    if d_max < 0:
        raise ValidationError("d_max must be >= 0")
    return float(np.clip(g, 0.0, 1.0)) * d_max


def extract_keypoints(
    poses: LinkPoseSet,
    chain: KinematicChain,
    g: float,
    arm: str = "left",
    link_mask: np.ndarray | None = None,
) -> KeypointSet:
    """Read skeleton, joint, finger and end-effector keypoints off link poses.

    Skeleton points are the link-origin translations in chain order
    (optionally filtered by ``link_mask``).  Finger endpoints sit at the
    gripper displacement along each gripper joint's axis from the terminal
    link; a single gripper joint is mirrored to produce the opposing finger.
    """
    arm_chain = chain.arm(arm)
    if len(poses) != len(arm_chain.joints) + 1:
        raise DimensionError(
            f"pose set has {len(poses)} links, chain expects {len(arm_chain.joints) + 1}"
        )
    arm_points = np.stack([transforms.translation_of(p) for p in poses.poses])
    if link_mask is not None:
        link_mask = np.asarray(link_mask, dtype=bool)
        if link_mask.shape != (len(arm_points),):
            raise DimensionError("link_mask length must match the number of links")
        arm_points = arm_points[link_mask]

    joint_points = {}
    for k, joint in enumerate(arm_chain.joints):
        if joint.actuated:
            joint_points[joint.name] = transforms.translation_of(poses.poses[k + 1])

    terminal = poses.terminal
    fingers = []
    for gj in arm_chain.gripper_joints:
        d = gripper_displacement(g, gj.d_max if gj.d_max is not None else 0.0)
        tip = terminal @ gj.origin @ joint_motion(gj, d)
        fingers.append(transforms.translation_of(tip))
    if len(arm_chain.gripper_joints) == 1:
        gj = arm_chain.gripper_joints[0]
        d = gripper_displacement(g, gj.d_max if gj.d_max is not None else 0.0)
        tip = terminal @ gj.origin @ joint_motion(gj, -d)
        fingers.append(transforms.translation_of(tip))
    finger_points = np.array(fingers).reshape(-1, 3)

    return KeypointSet(
        arm_points=arm_points,
        joint_points=joint_points,
        finger_points=finger_points,
        ee_point=transforms.translation_of(terminal),
    )
