"""Synthetic episode generation and the built-in bimanual fixture robot.

The fixture is a desk-scale two-arm robot whose geometry keeps both
end-effectors on-canvas for the default camera; it exists so rendering and
recovery can be exercised end-to-end without external robot descriptions.
"""

from __future__ import annotations

import numpy as np

from .camera import CameraModel
from .episode import Episode, RobotState
from .kinematics import forward_kinematics
from .urdf import KinematicChain, parse_urdf
from . import transforms

SMOOTH_BOUND_DEFAULT = 0.05  # max |q_{t+1} - q_t| per joint, radians or meters


def fixture_urdf() -> str:
    """URDF text for the built-in bimanual fixture."""
    arms = []
    for side, sx in (("left", -1.0), ("right", 1.0)):
        arms.append(f"""
  <joint name="{side}_mount" type="fixed">
    <origin xyz="{0.22 * sx} 0 0" rpy="0 0 0"/>
    <parent link="base"/>
    <child link="{side}_base"/>
  </joint>
  <joint name="{side}_shoulder_yaw" type="revolute">
    <origin xyz="0 0 0.15" rpy="0 0 0"/>
    <axis xyz="0 0 1"/>
    <limit lower="-0.40" upper="0.40"/>
    <parent link="{side}_base"/>
    <child link="{side}_shoulder"/>
  </joint>
  <joint name="{side}_shoulder_pitch" type="revolute">
    <origin xyz="0 0.05 0" rpy="0 0 0"/>
    <axis xyz="1 0 0"/>
    <limit lower="-0.45" upper="0.25"/>
    <parent link="{side}_shoulder"/>
    <child link="{side}_upper_arm"/>
  </joint>
  <joint name="{side}_elbow" type="revolute">
    <origin xyz="0 0.22 0" rpy="0 0 0"/>
    <axis xyz="1 0 0"/>
    <limit lower="-0.55" upper="0.55"/>
    <parent link="{side}_upper_arm"/>
    <child link="{side}_forearm"/>
  </joint>
  <joint name="{side}_wrist_roll" type="revolute">
    <origin xyz="0 0.20 0" rpy="0 0 0"/>
    <axis xyz="0 1 0"/>
    <limit lower="-0.80" upper="0.80"/>
    <parent link="{side}_forearm"/>
    <child link="{side}_wrist"/>
  </joint>
  <joint name="{side}_ee_mount" type="fixed">
    <origin xyz="0 0.12 0" rpy="0 0 0"/>
    <parent link="{side}_wrist"/>
    <child link="{side}_ee"/>
  </joint>
  <joint name="{side}_finger_a" type="prismatic">
    <origin xyz="0 0 0" rpy="0 0 0"/>
    <axis xyz="1 0 0"/>
    <limit lower="0" upper="0.04"/>
    <parent link="{side}_ee"/>
    <child link="{side}_finger_a_link"/>
  </joint>
  <joint name="{side}_finger_b" type="prismatic">
    <origin xyz="0 0 0" rpy="0 0 0"/>
    <axis xyz="-1 0 0"/>
    <limit lower="0" upper="0.04"/>
    <parent link="{side}_ee"/>
    <child link="{side}_finger_b_link"/>
  </joint>""")
    return f'<robot name="fixture">{"".join(arms)}\n</robot>\n'


def fixture_chain() -> KinematicChain:
    return parse_urdf(fixture_urdf())


def look_at_extrinsics(position, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera transform for a camera at ``position`` facing ``target``.

    Camera convention: x right, y down, z forward (optical axis).
    """
    position = np.asarray(position, dtype=float)
    forward = np.asarray(target, dtype=float) - position
    z = forward / np.linalg.norm(forward)
    x = np.cross(z, np.asarray(up, dtype=float))
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return transforms.rigid(R, -R @ position)


def fixture_camera(width: int = 640, height: int = 480, focal: float = 600.0) -> CameraModel:
    # Placement keeps the full fixture skeleton and EE axis tips on-canvas
    # for limit-respecting trajectories.
    K = np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])
    E = look_at_extrinsics(position=(0.0, -0.60, 0.62), target=(0.0, 0.45, 0.10))
    return CameraModel(K=K, E=E, width=width, height=height)


def _joint_waves(chain: KinematicChain, arm: str, rng, frames: int, smooth_bound: float):
    waves = []
    for joint in chain.arm(arm).actuated_joints:
        lo, hi = joint.limits if joint.limits is not None else (-np.pi / 2, np.pi / 2)
        mid, halfrange = (lo + hi) / 2.0, (hi - lo) / 2.0
        freq = rng.uniform(0.5, 2.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = min(0.9 * halfrange, 0.9 * smooth_bound * frames / (2.0 * np.pi * freq))
        waves.append((mid, amp, freq, phase))
    return waves


def _eval_waves(waves, t: int, frames: int) -> np.ndarray:
    return np.array(
        [mid + amp * np.sin(2.0 * np.pi * freq * t / frames + phase) for mid, amp, freq, phase in waves]
    )


def synth_trajectory(
    chain: KinematicChain | None = None,
    frames: int = 64,
    seed: int = 0,
    camera: CameraModel | None = None,
    fps: float = 30.0,
    smooth_bound: float = SMOOTH_BOUND_DEFAULT,
) -> Episode:
    """Deterministic smooth random episode for a chain (default: the fixture).

    Joint curves are limit-respecting sinusoids whose per-frame increments
    stay below ``smooth_bound``; end-effector poses come from forward
    kinematics, so xi is exactly consistent with q.  The same seed always
    produces a bit-identical episode.
    """
    if frames < 2:
        raise ValueError("an episode needs at least 2 frames")
    if chain is None:
        chain = fixture_chain()
    if camera is None:
        camera = fixture_camera()
    rng = np.random.default_rng(seed)

    per_arm = {}
    for arm in ("left", "right"):
        side = arm if arm in chain.arms else "left"
        joint_waves = _joint_waves(chain, side, rng, frames, smooth_bound)
        g_wave = (0.5, 0.45, rng.uniform(0.5, 1.5), rng.uniform(0.0, 2.0 * np.pi))
        per_arm[arm] = (side, joint_waves, g_wave)

    states = []
    for t in range(frames):
        qs, gs, xis = {}, {}, {}
        for arm in ("left", "right"):
            side, joint_waves, (g_mid, g_amp, g_freq, g_phase) = per_arm[arm]
            q = _eval_waves(joint_waves, t, frames)
            g = g_mid + g_amp * np.sin(2.0 * np.pi * g_freq * t / frames + g_phase)
            ee = forward_kinematics(chain, q, side).terminal
            xi = np.concatenate(
                [transforms.translation_of(ee), transforms.matrix_to_quat(transforms.rotation_of(ee))]
            )
            qs[arm], gs[arm], xis[arm] = q, float(g), xi
        states.append(
            RobotState(
                t=t,
                q_left=qs["left"],
                q_right=qs["right"],
                g_left=gs["left"],
                g_right=gs["right"],
                xi_left=xis["left"],
                xi_right=xis["right"],
                K=camera.K,
                E=camera.E,
            )
        )
    return Episode(states=tuple(states), chain=chain, camera=camera, fps=fps, source=f"synth(seed={seed})")
