"""Instantaneous flow analysis: per-pixel flow basis, camera-induced flow,
depth-dispersion residual, flow decomposition, and the finite-difference
oracle that validates all of it independently.

Conventions: (v, omega) are the camera's own velocities expressed in the
camera frame at the reference time; a static point then moves relative to the
camera as dX/dt = -v - omega x X, which yields the closed-form basis matrices
below (validated against the finite-difference oracle in the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .render import RenderBuffers, render
from .scene import Camera, CameraVelocity, GaussianScene, Intrinsics, Pose, sample_scene_at

INVALID_FLOW = 1e9  # magnitudes above this mark unknown flow (file convention)


@dataclass
class FlowMap:
    """Dense 2D flow with a units tag: "px" (displacement) or "px/s"."""

    data: np.ndarray            # (H, W, 2) float64
    units: str = "px"
    valid: np.ndarray | None = None  # (H, W) bool; None means all valid

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 2 or min(self.data.shape[:2]) < 1:
            raise ValueError(f"flow map must be (H, W, 2), got {self.data.shape}")
        if self.units not in ("px", "px/s"):
            raise ValueError(f"unknown flow units {self.units!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.data[..., 0] ** 2 + self.data[..., 1] ** 2)

    def valid_mask(self) -> np.ndarray:
        mask = self.magnitude() <= INVALID_FLOW
        if self.valid is not None:
            mask &= self.valid
        return mask

    def to_rate(self, dt: float) -> "FlowMap":
        """Convert a frame-pair displacement map to pixels/second."""
        if self.units == "px/s":
            return self
        return FlowMap(self.data / dt, units="px/s", valid=self.valid)

    def to_displacement(self, dt: float) -> "FlowMap":
        if self.units == "px":
            return self
        return FlowMap(self.data * dt, units="px", valid=self.valid)


@dataclass(frozen=True)
class PixelFlowBasis:
    """Closed-form 2x3 basis matrices mapping (v, omega) to pixel velocity."""

    A: np.ndarray
    B: np.ndarray
    pixel: tuple[float, float]


@dataclass
class FlowDecomposition:
    u: FlowMap
    u_cam: FlowMap
    u_gs: FlowMap
    delta: FlowMap


def flow_basis(intr: Intrinsics, pixel) -> PixelFlowBasis:
    """Basis matrices at one pixel: u = A v / Z + B omega for a static scene."""
    x, y = float(pixel[0]), float(pixel[1])
    if not (0 <= x < intr.width and 0 <= y < intr.height):
        raise ValueError(f"pixel {pixel} outside image bounds")
    fx, fy = intr.fx, intr.fy
    dx, dy = x - intr.cx, y - intr.cy
    A = np.array([[-fx, 0.0, dx],
                  [0.0, -fy, dy]])
    B = np.array([[dx * dy / fy, -fx - dx * dx / fx, dy * fx / fy],
                  [fy + dy * dy / fy, -dx * dy / fx, -dx * fy / fx]])
    return PixelFlowBasis(A=A, B=B, pixel=(x, y))


def _pixel_grid(intr: Intrinsics):
    xs = np.arange(intr.width, dtype=np.float64) - intr.cx
    ys = np.arange(intr.height, dtype=np.float64) - intr.cy
    return np.meshgrid(xs, ys)  # dx (H, W), dy (H, W)


def camera_flow(vel: CameraVelocity, depth: np.ndarray, intr: Intrinsics) -> FlowMap:
    """Camera-induced flow A v / Z + B omega (px/s); zero and flagged where depth = 0."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (intr.height, intr.width):
        raise ValueError(f"depth shape {depth.shape} does not match image size")
    dx, dy = _pixel_grid(intr)
    fx, fy = intr.fx, intr.fy
    vx, vy, vz = vel.v
    wx, wy, wz = vel.omega
    covered = depth > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_z = np.where(covered, 1.0 / depth, 0.0)
    ux = (-fx * vx + dx * vz) * inv_z \
        + (dx * dy / fy) * wx - (fx + dx * dx / fx) * wy + (dy * fx / fy) * wz
    uy = (-fy * vy + dy * vz) * inv_z \
        + (fy + dy * dy / fy) * wx - (dx * dy / fx) * wy - (dx * fy / fx) * wz
    data = np.stack([np.where(covered, ux, 0.0), np.where(covered, uy, 0.0)], axis=-1)
    return FlowMap(data, units="px/s", valid=covered)


def residual_term(buffers: RenderBuffers, vel: CameraVelocity) -> FlowMap:
    """Depth-dispersion residual: A * sum_i T_i alpha_i v (1/Z_i - 1/Z), px/s.

    Z is the alpha-composited expected depth, so the bracket vanishes exactly
    at single-depth pixels. Zero where the pixel has no coverage.
    """
    if buffers.contrib_splat is None or len(buffers.contrib_offsets) == 0:
        raise ValueError("buffers carry no contribution lists")
    intr = buffers.camera.intrinsics
    h, w = intr.height, intr.width
    counts = np.diff(buffers.contrib_offsets)
    pix = np.repeat(np.arange(h * w), counts)
    z_i = buffers.projection.depth[buffers.contrib_splat]
    z_bar = buffers.depth.reshape(-1)[pix]
    covered = z_bar > 0
    bracket = np.zeros(len(pix))
    bracket[covered] = 1.0 / z_i[covered] - 1.0 / z_bar[covered]
    s = np.bincount(pix, weights=buffers.contrib_weight * bracket, minlength=h * w).reshape(h, w)
    dx, dy = _pixel_grid(intr)
    vx, vy, vz = vel.v
    av_x = -intr.fx * vx + dx * vz
    av_y = -intr.fy * vy + dy * vz
    data = np.stack([av_x * s, av_y * s], axis=-1)
    return FlowMap(data, units="px/s", valid=buffers.depth > 0)


def decompose_flow(u: FlowMap, u_cam: FlowMap, delta: FlowMap) -> FlowDecomposition:
    """Split measured flow into camera and splat-motion parts: u_gs = u - u_cam - delta."""
    if u.shape != u_cam.shape or u.shape != delta.shape:
        raise ValueError("flow map dimensions differ")
    if not (u.units == u_cam.units == delta.units):
        raise ValueError(f"flow units differ: {u.units}, {u_cam.units}, {delta.units}")
    valid = u.valid_mask() & u_cam.valid_mask() & delta.valid_mask()
    u_gs = FlowMap(u.data - u_cam.data - delta.data, units=u.units, valid=valid)
    return FlowDecomposition(u=u, u_cam=u_cam, u_gs=u_gs, delta=delta)


def binarize_flow(f: FlowMap, tau: float) -> np.ndarray:
    """Boolean mask of pixels whose flow magnitude exceeds tau."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return (f.magnitude() > tau) & f.valid_mask()


def camera_velocity_from_poses(p0: Pose, p1: Pose, dt: float) -> CameraVelocity:
    """Instantaneous (v, omega) of the camera from a pose pair, in frame-0 coordinates.

    Derived from the relative transform x_c1 = dR x_c0 + dt_vec of a static
    point: dX/dt = -v - omega x X gives v = -dt_vec/dt, omega = -log(dR)/dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dR = p1.rotation @ p0.rotation.T
    dt_vec = p1.translation - dR @ p0.translation
    omega = -Rotation.from_matrix(dR).as_rotvec() / dt
    v = -dt_vec / dt
    return CameraVelocity(v=v, omega=omega)


def finite_difference_flow_oracle(scene: GaussianScene, cam0: Camera, cam1: Camera,
                                  dt: float, *, t0: float = 0.0,
                                  mode: str = "dominant") -> FlowMap:
    """Independent flow oracle: advect contributor points, reproject, difference.

    For every covered pixel of the frame at t0, contributor points are taken at
    their composited depths along the pixel ray, advected by the scene motion
    over [t0, t0+dt], and reprojected through cam1. "dominant" uses the single
    strongest contributor; "weighted" averages all contributors with their
    blend weights. Result is in px/s.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if mode not in ("dominant", "weighted"):
        raise ValueError(f"unknown oracle mode {mode!r}")
    scene0 = sample_scene_at(scene, t0)
    scene1 = sample_scene_at(scene, t0 + dt)
    buffers = render(scene0, cam0)
    intr = cam0.intrinsics
    h, w = intr.height, intr.width

    counts = np.diff(buffers.contrib_offsets)
    pix = np.repeat(np.arange(h * w), counts)
    weights = buffers.contrib_weight
    splat = buffers.contrib_splat
    src = buffers.projection.src[splat]
    z_i = buffers.projection.depth[splat]

    # Unproject each contribution's pixel at the contributor depth (camera frame).
    px = (pix % w).astype(np.float64)
    py = (pix // w).astype(np.float64)
    x_cam = np.stack([(px - intr.cx) / intr.fx * z_i,
                      (py - intr.cy) / intr.fy * z_i,
                      z_i], axis=1)
    x_world = cam0.pose.to_world(x_cam)
    x_world = x_world + (scene1.centers[src] - scene0.centers[src])
    x_cam1 = cam1.pose.to_camera(x_world)
    in_front = x_cam1[:, 2] > 1e-9
    mu1 = np.zeros((len(pix), 2))
    mu1[in_front, 0] = intr.fx * x_cam1[in_front, 0] / x_cam1[in_front, 2] + intr.cx
    mu1[in_front, 1] = intr.fy * x_cam1[in_front, 1] / x_cam1[in_front, 2] + intr.cy
    disp = mu1 - np.stack([px, py], axis=1)
    disp[~in_front] = 0.0

    data = np.zeros((h * w, 2))
    wsum = np.bincount(pix, weights=weights, minlength=h * w)
    covered = wsum > 1e-6
    if mode == "weighted":
        num_x = np.bincount(pix, weights=weights * disp[:, 0], minlength=h * w)
        num_y = np.bincount(pix, weights=weights * disp[:, 1], minlength=h * w)
        data[covered, 0] = num_x[covered] / wsum[covered]
        data[covered, 1] = num_y[covered] / wsum[covered]
    else:
        # Strongest contributor per pixel (first wins ties: stable argmax).
        best = np.full(h * w, -1, dtype=np.int64)
        best_w = np.zeros(h * w)
        for j in range(len(pix)):  # contribution lists are short; fine serially
            p = pix[j]
            if weights[j] > best_w[p]:
                best_w[p] = weights[j]
                best[p] = j
        sel = best >= 0
        data[sel] = disp[best[sel]]
    return FlowMap(data.reshape(h, w, 2) / dt, units="px/s", valid=covered.reshape(h, w))
