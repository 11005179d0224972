"""Rasterization of visual action fields.

Frames are float64 arrays of shape (H, W, 3) with values in [0, 1], black
canvas, pixel (u, v) = (column, row).  Composition order is fixed:
skeleton lines, joint landmark discs, gripper geometry, end-effector
heatmap (max-composited), pose axes (drawn last so they stay detectable).
Anti-aliasing is off throughout so renders are bit-exact.

Gripper geometry is drawn as a sub-saturation gray crossbar between the
two finger endpoints plus a saturated white pad at each endpoint, pointing
along the end-effector approach axis.  The pads are the "white components"
the recovery stage measures for the gripper opening; the crossbar gray
stays below the white detection threshold so the two pads remain separate
components.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from PIL import Image

from .camera import CameraModel, DepthRange, estimate_depth_range, project_point
from .colormap import lookup
from .episode import Episode
from .errors import ValidationError
from .kinematics import KeypointSet, extract_keypoints, forward_kinematics
from .util import parallel_map
from . import transforms


@dataclass(frozen=True)
class RenderConfig:
    width: int = 640
    height: int = 480
    sigma: float = 6.0              # heatmap std, pixels
    radius: float = 18.0            # heatmap truncation, pixels
    axis_length: float = 0.1        # meters
    line_thickness: int = 3
    landmark_radius: int = 4
    colormap: str = "depth"         # "depth" | "grayscale"
    arm_tint: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))  # additive (left, right)
    heatmap_color: tuple = (1.0, 0.0, 1.0)
    finger_color: tuple = (1.0, 1.0, 1.0)
    crossbar_color: tuple = (0.45, 0.45, 0.45)
    finger_pad_length: float = 0.05  # meters, along the EE approach axis

    def __post_init__(self):
        if self.sigma <= 0 or self.radius <= 0 or self.axis_length <= 0:
            raise ValidationError("sigma, radius and axis_length must be positive")
        if self.line_thickness < 1:
            raise ValidationError("line_thickness must be >= 1")

    def tint(self, arm: str) -> np.ndarray:
        return np.asarray(self.arm_tint[0 if arm == "left" else 1], dtype=float)


def blank_canvas(cfg: RenderConfig) -> np.ndarray:
    return np.zeros((cfg.height, cfg.width, 3))


# ---------------------------------------------------------------------------
# Primitives.


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx, sy = (1 if x0 < x1 else -1), (1 if y0 < y1 else -1)
    err = dx + dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def draw_line(
    canvas: np.ndarray,
    pix0,
    pix1,
    color0,
    color1,
    thickness: int = 1,
) -> np.ndarray:
    """Bresenham line with color interpolated from color0 to color1.

    Thickness stamps offsets perpendicular to the major axis; pixels draw
    by overwrite, off-canvas pixels are silently clipped.
    """
    h, w = canvas.shape[:2]
    x0, y0 = int(round(pix0[0])), int(round(pix0[1]))
    x1, y1 = int(round(pix1[0])), int(round(pix1[1]))
    color0 = np.asarray(color0, dtype=float)
    color1 = np.asarray(color1, dtype=float)
    pts = list(_bresenham(x0, y0, x1, y1))
    x_major = abs(x1 - x0) >= abs(y1 - y0)
    offsets = range(-((thickness - 1) // 2), thickness // 2 + 1)
    n = max(len(pts) - 1, 1)
    for i, (x, y) in enumerate(pts):
        color = np.clip(color0 + (color1 - color0) * (i / n), 0.0, 1.0)
        for o in offsets:
            px, py = (x, y + o) if x_major else (x + o, y)
            if 0 <= px < w and 0 <= py < h:
                canvas[py, px] = color
    return canvas


def draw_disc(canvas: np.ndarray, center, radius: float, color) -> np.ndarray:
    h, w = canvas.shape[:2]
    cx, cy = float(center[0]), float(center[1])
    x_lo = max(int(np.floor(cx - radius)), 0)
    x_hi = min(int(np.ceil(cx + radius)) + 1, w)
    y_lo = max(int(np.floor(cy - radius)), 0)
    y_hi = min(int(np.ceil(cy + radius)) + 1, h)
    if x_lo >= x_hi or y_lo >= y_hi:
        return canvas
    ys, xs = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2
    canvas[y_lo:y_hi, x_lo:x_hi][mask] = np.clip(np.asarray(color, dtype=float), 0.0, 1.0)
    return canvas


def gaussian_heatmap(canvas: np.ndarray, center, cfg: RenderConfig) -> np.ndarray:
    """Max-composite a truncated Gaussian bump into the heatmap color mix.

    Per pixel at distance d from the center the intensity is
    exp(-d^2 / (2 sigma^2)) for d <= radius and 0 beyond; each channel takes
    max(current, intensity * heatmap_color).
    """
    h, w = canvas.shape[:2]
    cx, cy = float(center[0]), float(center[1])
    r = cfg.radius
    x_lo = max(int(np.floor(cx - r)), 0)
    x_hi = min(int(np.ceil(cx + r)) + 1, w)
    y_lo = max(int(np.floor(cy - r)), 0)
    y_hi = min(int(np.ceil(cy + r)) + 1, h)
    if x_lo >= x_hi or y_lo >= y_hi:
        return canvas
    ys, xs = np.mgrid[y_lo:y_hi, x_lo:x_hi]
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    intensity = np.exp(-d2 / (2.0 * cfg.sigma**2)) * (d2 <= r**2)
    bump = intensity[:, :, None] * np.asarray(cfg.heatmap_color, dtype=float)
    region = canvas[y_lo:y_hi, x_lo:x_hi]
    np.maximum(region, bump, out=region)
    return canvas


def draw_depth_line(canvas: np.ndarray, p0, p1, depth_range: DepthRange, cfg: RenderConfig, tint=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Skeleton segment between two (pixel, depth) endpoints.

    Endpoint colors come from the palette at each endpoint's normalized
    depth and are interpolated along the segment.
    """
    (pix0, z0), (pix1, z1) = p0, p1
    from .camera import normalize_depth

    tint = np.asarray(tint, dtype=float)
    c0 = lookup(normalize_depth(z0, depth_range), cfg.colormap) + tint
    c1 = lookup(normalize_depth(z1, depth_range), cfg.colormap) + tint
    return draw_line(canvas, pix0, pix1, c0, c1, cfg.line_thickness)


# ---------------------------------------------------------------------------
# Frame and episode rendering.


def episode_keypoints(episode: Episode) -> list[dict]:
    """Per-frame, per-arm keypoint sets via forward kinematics."""
    out = []
    for state in episode.states:
        per_arm = {}
        for arm in episode.chain.arms:
            poses = forward_kinematics(episode.chain, state.q(arm), arm)
            per_arm[arm] = extract_keypoints(poses, episode.chain, state.g(arm), arm)
        out.append(per_arm)
    return out


def episode_depth_range(episode: Episode, margin: float = 0.05) -> DepthRange:
    cam = episode.camera
    all_kp = [kp for per_arm in episode_keypoints(episode) for kp in per_arm.values()]
    return estimate_depth_range(all_kp, cam, margin)


def render_frame(
    state,
    keypoints: dict[str, KeypointSet],
    depth_range: DepthRange,
    cfg: RenderConfig,
    cam: CameraModel | None = None,
) -> np.ndarray:
    """Rasterize one frame from per-arm keypoints and the state's EE poses."""
    if cam is None:
        cam = CameraModel(K=state.K, E=state.E, width=cfg.width, height=cfg.height)
    canvas = blank_canvas(cfg)
    arms = sorted(keypoints.keys())

    def proj(point):
        return project_point(point, cam)

    # 1. depth-aware skeletons
    for arm in arms:
        tint = cfg.tint(arm)
        pts = keypoints[arm].arm_points
        projs = [proj(p) for p in pts]
        for a, b in zip(projs, projs[1:]):
            if a.visible and b.visible:
                draw_depth_line(canvas, (a.pixel, a.depth), (b.pixel, b.depth), depth_range, cfg, tint)

    # 2. joint landmarks
    from .camera import normalize_depth

    for arm in arms:
        for point in keypoints[arm].joint_points.values():
            pr = proj(point)
            if pr.visible:
                color = lookup(normalize_depth(pr.depth, depth_range), cfg.colormap)
                draw_disc(canvas, pr.pixel, cfg.landmark_radius, color)

    # 3. gripper geometry: gray crossbar + white finger pads
    for arm in arms:
        kp = keypoints[arm]
        if len(kp.finger_points) < 2:
            continue
        ee = state.ee_pose(arm)
        approach = transforms.rotation_of(ee)[:, 1]  # EE frame +y
        f0, f1 = kp.finger_points[0], kp.finger_points[1]
        pa, pb = proj(f0), proj(f1)
        if pa.visible and pb.visible:
            draw_line(canvas, pa.pixel, pb.pixel, cfg.crossbar_color, cfg.crossbar_color, cfg.line_thickness)
        for f in (f0, f1):
            tip = f + cfg.finger_pad_length * approach
            p0, p1 = proj(f), proj(tip)
            if p0.visible and p1.visible:
                draw_line(canvas, p0.pixel, p1.pixel, cfg.finger_color, cfg.finger_color, cfg.line_thickness)

    # 4. end-effector heatmap
    for arm in arms:
        ee = state.ee_pose(arm)
        pr = proj(transforms.translation_of(ee))
        if pr.visible:
            gaussian_heatmap(canvas, pr.pixel, cfg)

    # 5. pose axes, pure red/green/blue, drawn last
    axis_colors = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    for arm in arms:
        ee = state.ee_pose(arm)
        R = transforms.rotation_of(ee)
        p = transforms.translation_of(ee)
        center = proj(p)
        if not center.visible:
            continue
        for m in range(3):
            tip = proj(p + cfg.axis_length * R[:, m])
            if tip.visible:
                draw_line(canvas, center.pixel, tip.pixel, axis_colors[m], axis_colors[m], cfg.line_thickness)

    return canvas


@dataclass
class RenderResult:
    frames: np.ndarray                  # (T, H, W, 3) in [0, 1]
    depth_range: DepthRange
    keypoint_log: list = field(default_factory=list)


def render_episode(episode: Episode, cfg: RenderConfig | None = None, margin: float = 0.05) -> RenderResult:
    """Render every frame of an episode with one shared depth range.

    Frames are independent and may be rendered in parallel (KVAF_THREADS);
    the result is identical for any worker count.
    """
    if len(episode) < 1:
        raise ValidationError("episode must have at least one frame")
    cfg = cfg or RenderConfig()
    cam = episode.camera
    keypoints = episode_keypoints(episode)
    depth_range = estimate_depth_range(
        [kp for per_arm in keypoints for kp in per_arm.values()], cam, margin
    )

    log = []
    for state, per_arm in zip(episode.states, keypoints):
        entry = {}
        for arm in episode.chain.arms:
            ee = state.ee_pose(arm)
            pr = project_point(transforms.translation_of(ee), cam)
            entry[arm] = {
                "ee_pixel": None if not pr.visible else [pr.pixel[0], pr.pixel[1]],
                "ee_depth": pr.depth,
            }
        log.append(entry)

    def render_one(i: int) -> np.ndarray:
        return render_frame(episode.states[i], keypoints[i], depth_range, cfg, cam)

    frames = np.stack(parallel_map(render_one, range(len(episode))))
    return RenderResult(frames=frames, depth_range=depth_range, keypoint_log=log)


# ---------------------------------------------------------------------------
# Frame quantization and file I/O.


def quantize(frames: np.ndarray) -> np.ndarray:
    """Float [0,1] -> uint8, round-half-away like image writers do."""
    return np.clip(np.rint(np.asarray(frames) * 255.0), 0, 255).astype(np.uint8)


def dequantize(frames_u8: np.ndarray) -> np.ndarray:
    return np.asarray(frames_u8, dtype=float) / 255.0


def write_ppm(path, frame: np.ndarray) -> None:
    """Binary PPM (P6, maxval 255); golden-file friendly."""
    u8 = quantize(frame) if frame.dtype != np.uint8 else frame
    h, w = u8.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(u8.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValidationError(f"{path}: not a binary PPM (P6) file")
        dims = fh.readline().split()
        maxval = int(fh.readline())
        w, h = int(dims[0]), int(dims[1])
        if maxval != 255:
            raise ValidationError(f"{path}: unsupported maxval {maxval}")
        data = np.frombuffer(fh.read(w * h * 3), dtype=np.uint8)
    return dequantize(data.reshape(h, w, 3))


def write_png(path, frame: np.ndarray) -> None:
    u8 = quantize(frame) if frame.dtype != np.uint8 else frame
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")


def read_image(path) -> np.ndarray:
    path = str(path)
    if path.endswith(".ppm"):
        return read_ppm(path)
    return dequantize(np.asarray(Image.open(path).convert("RGB")))


def save_sequence(directory, result: RenderResult, cfg: RenderConfig, formats=("ppm", "png")) -> dict:
    """Write frame_%05d files plus a manifest echoing config and depth range."""
    os.makedirs(directory, exist_ok=True)
    files = []
    for i, frame in enumerate(result.frames):
        u8 = quantize(frame)
        for ext in formats:
            name = f"frame_{i:05d}.{ext}"
            if ext == "ppm":
                write_ppm(os.path.join(directory, name), u8)
            else:
                write_png(os.path.join(directory, name), u8)
            files.append(name)
    cfg_dict = asdict(cfg)
    manifest = {
        "format": "kvaf-render/1",
        "config": cfg_dict,
        "config_hash": hashlib.sha256(
            json.dumps(cfg_dict, sort_keys=True).encode("utf-8")
        ).hexdigest(),
        "depth_range": [result.depth_range.z_min, result.depth_range.z_max],
        "frames": int(len(result.frames)),
        "files": files,
        "keypoints": result.keypoint_log,
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def load_sequence(directory) -> np.ndarray:
    """Read the PPM frames of a rendered sequence directory."""
    manifest_path = os.path.join(directory, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        names = [f for f in manifest["files"] if f.endswith(".ppm")]
    else:
        names = sorted(f for f in os.listdir(directory) if f.endswith(".ppm"))
    if not names:
        raise ValidationError(f"no PPM frames under {directory!r}")
    return np.stack([read_ppm(os.path.join(directory, n)) for n in names])
