"""Episode and per-frame robot state containers plus their on-disk formats.

An episode bundle is a directory:

    meta.json    {"format": "kvaf-episode/1", "fps", "source",
                  "chain": "chain.json", "camera": "camera.json", "frames": T}
    states.csv   columns: t, q_left_*, q_right_*, g_left, g_right,
                 xi_left_{px,py,pz,qw,qx,qy,qz}, xi_right_{...}
    camera.json  camera-geometry JSON (K row-major 9, E row-major 16, size)
    chain.json   canonical kinematic-chain JSON

Floats are written with 17 significant digits, so save -> load round-trips
are exact.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .camera import CameraModel, load_camera, save_camera
from .errors import LoadError, ValidationError
from .urdf import KinematicChain, chain_from_json, chain_to_json
from . import transforms

FLOAT_FMT = "%.17g"


def _validate_quat(q: np.ndarray, what: str, tol: float = 1e-3) -> np.ndarray:
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"{what}: quaternion norm {norm:.6g} is off by more than {tol}")
    return q / norm


@dataclass(frozen=True, eq=False)
class RobotState:
    """One timestep: joint values, gripper signals, EE poses and camera."""

    t: int
    q_left: np.ndarray
    q_right: np.ndarray
    g_left: float
    g_right: float
    xi_left: np.ndarray    # (7,) position + unit quaternion (w, x, y, z)
    xi_right: np.ndarray   # (7,)
    K: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        q_left = np.array(self.q_left, dtype=float).reshape(-1)
        q_right = np.array(self.q_right, dtype=float).reshape(-1)
        xi_left = np.array(self.xi_left, dtype=float).reshape(7)
        xi_right = np.array(self.xi_right, dtype=float).reshape(7)
        xi_left[3:] = _validate_quat(xi_left[3:], f"frame {self.t} xi_left")
        xi_right[3:] = _validate_quat(xi_right[3:], f"frame {self.t} xi_right")
        K = np.array(self.K, dtype=float).reshape(3, 3)
        E = np.array(self.E, dtype=float).reshape(4, 4)
        if not transforms.is_rotation(E[:3, :3], tol=1e-6):
            raise ValidationError(f"frame {self.t}: E rotation block is not orthonormal")
        for a in (q_left, q_right, xi_left, xi_right, K, E):
            a.flags.writeable = False
        object.__setattr__(self, "q_left", q_left)
        object.__setattr__(self, "q_right", q_right)
        object.__setattr__(self, "xi_left", xi_left)
        object.__setattr__(self, "xi_right", xi_right)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "E", E)

    def q(self, arm: str) -> np.ndarray:
        return self.q_left if arm == "left" else self.q_right

    def g(self, arm: str) -> float:
        return self.g_left if arm == "left" else self.g_right

    def xi(self, arm: str) -> np.ndarray:
        return self.xi_left if arm == "left" else self.xi_right

    def ee_pose(self, arm: str) -> np.ndarray:
        xi = self.xi(arm)
        return transforms.rigid(transforms.quat_to_matrix(xi[3:]), xi[:3])


@dataclass(frozen=True, eq=False)
class Episode:
    """Ordered robot states plus the chain and camera they refer to."""

    states: tuple[RobotState, ...]
    chain: KinematicChain
    camera: CameraModel
    fps: float = 30.0
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        ts = [s.t for s in self.states]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValidationError("frame indices must be strictly increasing")
        for s in self.states:
            if not np.array_equal(s.K, self.camera.K) or not np.array_equal(s.E, self.camera.E):
                raise ValidationError("all states must share the episode camera")

    def __len__(self) -> int:
        return len(self.states)


def _xi_cols(prefix: str) -> list[str]:
    return [f"{prefix}_{c}" for c in ("px", "py", "pz", "qw", "qx", "qy", "qz")]


def _header(n_left: int, n_right: int) -> list[str]:
    return (
        ["t"]
        + [f"q_left_{i}" for i in range(n_left)]
        + [f"q_right_{i}" for i in range(n_right)]
        + ["g_left", "g_right"]
        + _xi_cols("xi_left")
        + _xi_cols("xi_right")
    )


def save_episode(directory, episode: Episode) -> None:
    os.makedirs(directory, exist_ok=True)
    n_left = len(episode.states[0].q_left)
    n_right = len(episode.states[0].q_right)
    with open(os.path.join(directory, "states.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(n_left, n_right))
        for s in episode.states:
            row = [str(s.t)]
            values = np.concatenate(
                [s.q_left, s.q_right, [s.g_left, s.g_right], s.xi_left, s.xi_right]
            )
            row.extend(FLOAT_FMT % v for v in values)
            writer.writerow(row)
    save_camera(os.path.join(directory, "camera.json"), episode.camera)
    with open(os.path.join(directory, "chain.json"), "w", encoding="utf-8") as fh:
        fh.write(chain_to_json(episode.chain))
    meta = {
        "format": "kvaf-episode/1",
        "fps": episode.fps,
        "source": episode.source,
        "chain": "chain.json",
        "camera": "camera.json",
        "frames": len(episode),
    }
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)


def load_episode(directory) -> Episode:
    """Load and invariant-check an episode bundle directory."""
    meta_path = os.path.join(directory, "meta.json")
    if not os.path.exists(meta_path):
        raise LoadError(f"no episode bundle at {directory!r} (missing meta.json)")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format") != "kvaf-episode/1":
        raise LoadError(f"unsupported episode format {meta.get('format')!r}")
    camera = load_camera(os.path.join(directory, meta["camera"]))
    with open(os.path.join(directory, meta["chain"]), encoding="utf-8") as fh:
        chain = chain_from_json(fh.read())

    with open(os.path.join(directory, "states.csv"), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError("states.csv is empty") from None
        n_left = sum(1 for c in header if c.startswith("q_left_"))
        n_right = sum(1 for c in header if c.startswith("q_right_"))
        if header != _header(n_left, n_right):
            raise LoadError(f"states.csv header mismatch: {header}")
        states = []
        for row_idx, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise LoadError(f"states.csv row {row_idx}: {len(row)} fields, expected {len(header)}")
            try:
                values = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise LoadError(f"states.csv row {row_idx}: {exc}") from exc
            if not np.all(np.isfinite(values)):
                col = header[1 + int(np.flatnonzero(~np.isfinite(values))[0])]
                raise LoadError(f"states.csv row {row_idx}, column {col}: non-finite value")
            o = 0
            q_left = values[o : o + n_left]; o += n_left
            q_right = values[o : o + n_right]; o += n_right
            g_left, g_right = values[o], values[o + 1]; o += 2
            xi_left = values[o : o + 7]; o += 7
            xi_right = values[o : o + 7]
            states.append(
                RobotState(
                    t=int(row[0]),
                    q_left=q_left,
                    q_right=q_right,
                    g_left=float(g_left),
                    g_right=float(g_right),
                    xi_left=xi_left,
                    xi_right=xi_right,
                    K=camera.K,
                    E=camera.E,
                )
            )
    if len(states) != meta["frames"]:
        raise LoadError(f"meta.json declares {meta['frames']} frames, states.csv has {len(states)}")
    return Episode(
        states=tuple(states),
        chain=chain,
        camera=camera,
        fps=float(meta["fps"]),
        source=str(meta["source"]),
    )
