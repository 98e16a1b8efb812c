"""Synthetic desk-scale scenes with scripted motion and analytic camera rigs.

Each preset bundles a scene, a camera path, and a motion script so the
pipeline (simulate -> render -> flow -> discover -> train -> control) is one
command per stage. The simulator writes ground-truth frames, poses, and oracle
flow files that stand in for an external optical-flow estimator.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import finite_difference_flow_oracle
from .flow_io import save_png, write_flo
from .render import render
from .scene import (Camera, CameraVelocity, GaussianScene, Intrinsics, MotionScript,
                    ObjectMotion, Pose, save_poses, save_scene, sample_scene_at)

PRESET_NAMES = ("static", "one-object", "two-objects")
DEFAULT_SIZE = 64
DEFAULT_FRAMES = 30
T_MAX = 1.0


def _wall(rng, n_side: int, half: float, z: float, scale: float):
    xs = np.linspace(-half, half, n_side)
    grid = np.stack(np.meshgrid(xs, xs), -1).reshape(-1, 2)
    centers = np.concatenate([grid, np.full((len(grid), 1), z)], axis=1)
    # Checkerboard-ish texture so photometric and flow losses have structure.
    colors = rng.uniform(0.1, 0.9, (len(grid), 3))
    scales = np.full((len(centers), 3), scale)
    return centers, scales, colors


def _blob(rng, center, k: int, radius: float, scale: float, tint):
    # Golden-angle disc facing the camera: every member splat stays visible,
    # which back-projection discovery relies on.
    i = np.arange(k)
    r = radius * np.sqrt((i + 0.5) / k)
    th = i * 2.399963229728653
    pts = np.stack([r * np.cos(th), r * np.sin(th), rng.uniform(-0.01, 0.01, k)], axis=1)
    pts += np.asarray(center)
    colors = np.clip(np.asarray(tint) + rng.uniform(-0.15, 0.15, (k, 3)), 0.05, 0.95)
    scales = np.full((k, 3), scale)
    return pts, scales, colors


def build_scene(preset: str, seed: int = 0) -> GaussianScene:
    if preset not in PRESET_NAMES:
        raise ValueError(f"unknown preset {preset!r}; have {PRESET_NAMES}")
    rng = np.random.default_rng(seed)
    parts = []
    motion_objects = []

    if preset == "static":
        # Single fronto-parallel textured wall: one depth per pixel, so the
        # depth-dispersion residual vanishes identically.
        c, s, col = _wall(rng, 15, 1.9, 3.0, 0.14)
        parts.append((c, s, col))
    else:
        c, s, col = _wall(rng, 12, 2.1, 4.0, 0.19)
        parts.append((c, s, col))
        n_wall = len(c)
        c1, s1, col1 = _blob(rng, (-0.65, 0.05, 2.5), 24, 0.22, 0.05, (0.85, 0.25, 0.2))
        parts.append((c1, s1, col1))
        motion_objects.append(ObjectMotion(
            indices=np.arange(n_wall, n_wall + 24), kind="linear",
            params={"velocity": [0.55, 0.22, 0.0]}))
        if preset == "two-objects":
            c2, s2, col2 = _blob(rng, (0.55, 0.25, 2.8), 24, 0.22, 0.05, (0.2, 0.45, 0.85))
            parts.append((c2, s2, col2))
            # Arc pivot offset from the blob centroid: lateral circular travel.
            motion_objects.append(ObjectMotion(
                indices=np.arange(n_wall + 24, n_wall + 48), kind="arc",
                params={"center": [0.0, 0.25, 2.8], "axis": [0.0, 0.0, 1.0],
                        "omega": 1.15}))

    centers = np.concatenate([p[0] for p in parts])
    scales = np.concatenate([p[1] for p in parts])
    colors = np.concatenate([p[2] for p in parts])
    n = len(centers)
    scene = GaussianScene(
        centers=centers, scales=scales,
        quats=np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (n, 1)),
        opacities=np.full(n, 0.999),
        colors=colors,
        background=np.array([0.05, 0.05, 0.08]),
        motion=MotionScript(objects=tuple(motion_objects), t_max=T_MAX) if motion_objects else None,
    )
    return scene


@dataclass
class CameraRig:
    """Analytic camera path: linear translation plus constant yaw about the
    camera's own y axis, so instantaneous velocities are exact."""

    intrinsics: Intrinsics
    velocity: np.ndarray      # world m/s
    yaw_rate: float           # rad/s

    def pose(self, t: float) -> Pose:
        th = self.yaw_rate * t
        A = np.array([[np.cos(th), 0.0, np.sin(th)],
                      [0.0, 1.0, 0.0],
                      [-np.sin(th), 0.0, np.cos(th)]])  # camera-to-world
        c = self.velocity * t
        R = A.T
        return Pose(rotation=R, translation=-R @ c)

    def camera(self, t: float) -> Camera:
        return Camera(intrinsics=self.intrinsics, pose=self.pose(t),
                      velocity=self.velocity_at(t))

    def velocity_at(self, t: float) -> CameraVelocity:
        # v in the camera frame; yaw about the body y axis is frame-constant.
        v_cam = self.pose(t).rotation @ self.velocity
        return CameraVelocity(v=v_cam, omega=np.array([0.0, self.yaw_rate, 0.0]))


def build_rig(preset: str, size: int = DEFAULT_SIZE) -> CameraRig:
    intr = Intrinsics(fx=1.25 * size, fy=1.25 * size, cx=size / 2.0, cy=size / 2.0,
                      width=size, height=size)
    if preset == "static":
        # Translation only: a yawing camera slants the wall in camera space,
        # which would give mixed per-pixel depths and a nonzero residual term.
        return CameraRig(intrinsics=intr, velocity=np.array([0.3, 0.1, 0.05]), yaw_rate=0.0)
    return CameraRig(intrinsics=intr, velocity=np.array([0.22, 0.07, 0.0]), yaw_rate=0.05)


def simulate(preset: str, out_dir: str | Path, *, n_frames: int = DEFAULT_FRAMES,
             size: int = DEFAULT_SIZE, seed: int = 0) -> dict:
    """Emit scene.json, poses.json, frames/*.png, and oracle flows/*.flo.

    Flow file k (1-based) holds the displacement flow from frame k-1 to frame
    k on frame k-1's pixel grid, playing the role of an external optical-flow
    estimate.
    """
    out_dir = Path(out_dir)
    (out_dir / "frames").mkdir(parents=True, exist_ok=True)
    (out_dir / "flows").mkdir(parents=True, exist_ok=True)
    scene = build_scene(preset, seed=seed)
    rig = build_rig(preset, size=size)
    times = np.linspace(0.0, T_MAX, n_frames)
    poses = [rig.pose(float(t)) for t in times]
    vels = [rig.velocity_at(float(t)) for t in times]

    save_scene(scene, out_dir / "scene.json")
    save_poses(out_dir / "poses.json", rig.intrinsics, times, poses, vels)

    frame_paths, flow_paths = [], []
    for k, t in enumerate(times):
        cam = Camera(intrinsics=rig.intrinsics, pose=poses[k])
        frame = sample_scene_at(scene, float(t))
        buf = render(frame, cam)
        path = out_dir / "frames" / f"{k:04d}.png"
        save_png(path, buf.color)
        frame_paths.append(str(path))
        if k > 0:
            dt = float(times[k] - times[k - 1])
            cam_prev = Camera(intrinsics=rig.intrinsics, pose=poses[k - 1])
            rate = finite_difference_flow_oracle(scene, cam_prev, cam, dt,
                                                 t0=float(times[k - 1]), mode="weighted")
            fpath = out_dir / "flows" / f"{k:04d}.flo"
            write_flo(fpath, rate.data * dt)
            flow_paths.append(str(fpath))
    return {"scene": str(out_dir / "scene.json"), "poses": str(out_dir / "poses.json"),
            "frames": frame_paths, "flows": flow_paths}
