"""Projection of 3D Gaussians to 2D splats and tile-based alpha composition.

Produces color, alpha-weighted expected depth, accumulated alpha, per-pixel
contribution lists, and the splat-displacement flow channel. The backward pass
chains pixel-space gradients through the projection back to Gaussian
parameters; it is exact and finite-difference checked by the training module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .scene import Camera, Gaussian3D, GaussianScene, quat_to_rotmat

NEAR_PLANE = 0.01        # meters; splats at or behind are culled
COV2D_REG = 0.3          # pixels^2 added to the projected covariance diagonal
SIGMA_CUTOFF = 3.0       # splat support half-extent in projected sigmas
ALPHA_CLAMP = 0.999
T_MIN = 1e-4             # compositing stops once transmittance drops below
CONTRIB_CUTOFF = 1e-4    # contribution-list record threshold


@dataclass(frozen=True)
class Splat2D:
    """A projected Gaussian: 2D mean (pixels), 2x2 covariance, camera depth."""

    mu: np.ndarray
    cov2d: np.ndarray
    depth: float
    opacity: float
    color: np.ndarray
    source_index: int


@dataclass
class SplatProjection:
    """Culled, projected splat arrays ready for compositing (all length M)."""

    mu: np.ndarray       # (M, 2)
    cov2: np.ndarray     # (M, 3) upper-triangular (a, b, c) incl. regularization
    conic: np.ndarray    # (M, 3) inverse covariance (a, b, c)
    depth: np.ndarray    # (M,)
    opacity: np.ndarray  # (M,)
    color: np.ndarray    # (M, 3)
    bbox: np.ndarray     # (M, 4) int32 inclusive pixel bounds x0,x1,y0,y1
    order: np.ndarray    # (M,) int32 front-to-back iteration order
    src: np.ndarray      # (M,) int32 original Gaussian indices
    t_cam: np.ndarray    # (M, 3) camera-frame centers
    n_gaussians: int

    def __len__(self) -> int:
        return len(self.mu)


def _project_points(centers: np.ndarray, cam: Camera):
    """Camera-frame points and pixel coordinates for a batch of world centers."""
    R = cam.pose.rotation
    t = cam.pose.translation
    intr = cam.intrinsics
    t_cam = centers @ R.T + t
    z = t_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.stack([intr.fx * t_cam[:, 0] / z + intr.cx,
                       intr.fy * t_cam[:, 1] / z + intr.cy], axis=1)
    return t_cam, mu


def _pinhole_jacobian(t_cam: np.ndarray, intr) -> np.ndarray:
    """(N, 2, 3) Jacobian of the pinhole projection at camera-frame points."""
    x, y, z = t_cam[:, 0], t_cam[:, 1], t_cam[:, 2]
    inv_z = 1.0 / z
    J = np.zeros((len(t_cam), 2, 3), dtype=np.float64)
    J[:, 0, 0] = intr.fx * inv_z
    J[:, 0, 2] = -intr.fx * x * inv_z * inv_z
    J[:, 1, 1] = intr.fy * inv_z
    J[:, 1, 2] = -intr.fy * y * inv_z * inv_z
    return J


def project_scene(scene: GaussianScene, cam: Camera) -> SplatProjection:
    """EWA projection of every Gaussian; culls behind-camera and off-image splats."""
    intr = cam.intrinsics
    t_cam, mu = _project_points(scene.centers, cam)
    z = t_cam[:, 2]
    keep = z > NEAR_PLANE
    # Behind-camera entries carry junk mu/cov; drop them before the cov math.
    idx0 = np.flatnonzero(keep)
    t_cam = t_cam[idx0]
    mu = mu[idx0]

    # 2D covariance: J W Sigma W^T J^T with J the pinhole Jacobian at the center.
    W = cam.pose.rotation
    cov3 = scene.covariances()[idx0]
    J = _pinhole_jacobian(t_cam, intr)            # (K, 2, 3)
    M = J @ W[None]                               # (K, 2, 3)
    cov2_full = M @ cov3 @ np.swapaxes(M, 1, 2)   # (K, 2, 2)
    a = cov2_full[:, 0, 0] + COV2D_REG
    b = cov2_full[:, 0, 1]
    c = cov2_full[:, 1, 1] + COV2D_REG

    sx = np.sqrt(a)
    sy = np.sqrt(c)
    inside = (mu[:, 0] + SIGMA_CUTOFF * sx >= 0) & (mu[:, 0] - SIGMA_CUTOFF * sx <= intr.width - 1) \
        & (mu[:, 1] + SIGMA_CUTOFF * sy >= 0) & (mu[:, 1] - SIGMA_CUTOFF * sy <= intr.height - 1)
    src = idx0[inside].astype(np.int32)
    mu, a, b, c, sx, sy = mu[inside], a[inside], b[inside], c[inside], sx[inside], sy[inside]
    t_cam = t_cam[inside]

    x0 = np.clip(np.ceil(mu[:, 0] - SIGMA_CUTOFF * sx), 0, intr.width - 1)
    x1 = np.clip(np.floor(mu[:, 0] + SIGMA_CUTOFF * sx), 0, intr.width - 1)
    y0 = np.clip(np.ceil(mu[:, 1] - SIGMA_CUTOFF * sy), 0, intr.height - 1)
    y1 = np.clip(np.floor(mu[:, 1] + SIGMA_CUTOFF * sy), 0, intr.height - 1)
    det = a * c - b * b
    conic = np.stack([c / det, -b / det, a / det], axis=1)
    bbox = np.stack([x0, x1, y0, y1], axis=1).astype(np.int32)
    depth = t_cam[:, 2]
    order = np.lexsort((src, depth)).astype(np.int32)

    return SplatProjection(
        mu=np.ascontiguousarray(mu),
        cov2=np.ascontiguousarray(np.stack([a, b, c], axis=1)),
        conic=np.ascontiguousarray(conic),
        depth=np.ascontiguousarray(depth),
        opacity=np.ascontiguousarray(scene.opacities[src]),
        color=np.ascontiguousarray(scene.colors[src]),
        bbox=np.ascontiguousarray(bbox),
        order=order,
        src=src,
        t_cam=np.ascontiguousarray(t_cam),
        n_gaussians=len(scene),
    )


def project_gaussian(g: Gaussian3D, cam: Camera) -> Splat2D | None:
    """Project one Gaussian; returns None when culled."""
    scene = GaussianScene(centers=g.center[None], scales=g.scale[None], quats=g.quat[None],
                          opacities=np.array([g.opacity]), colors=g.color[None])
    proj = project_scene(scene, cam)
    if len(proj) == 0:
        return None
    a, b, c = proj.cov2[0]
    return Splat2D(mu=proj.mu[0], cov2d=np.array([[a, b], [b, c]]), depth=float(proj.depth[0]),
                   opacity=float(proj.opacity[0]), color=proj.color[0], source_index=0)


def alpha_at(splat: Splat2D, m) -> float:
    """Gaussian falloff opacity at pixel m, clamped for compositing."""
    d = np.asarray(m, dtype=np.float64) - splat.mu
    q = np.linalg.solve(splat.cov2d, d)
    alpha = splat.opacity * np.exp(-0.5 * float(d @ q))
    return min(float(alpha), ALPHA_CLAMP)


@dataclass
class RenderBuffers:
    """Per-pixel render outputs plus the contribution lists needed for analysis."""

    color: np.ndarray        # (H, W, 3)
    depth: np.ndarray        # (H, W) alpha-weighted expected depth, 0 where uncovered
    accum_alpha: np.ndarray  # (H, W)
    gs_flow: np.ndarray      # (H, W, 2) splat-displacement flow channel
    tfinal: np.ndarray       # (H, W) transmittance after compositing
    contrib_offsets: np.ndarray  # (H*W + 1,) int64 CSR offsets
    contrib_splat: np.ndarray    # (K,) int32 positions into the projection arrays
    contrib_alpha: np.ndarray    # (K,)
    contrib_weight: np.ndarray   # (K,) T_i * alpha_i, front-to-back per pixel
    projection: SplatProjection
    scene: GaussianScene
    camera: Camera
    record_cutoff: float

    @property
    def contrib_source(self) -> np.ndarray:
        """Contribution Gaussian indices in the original scene ordering."""
        return self.projection.src[self.contrib_splat]

    def pixel_contributions(self, x: int, y: int) -> list[tuple[int, float]]:
        """Ordered (gaussian index, blend weight) pairs at one pixel."""
        p = y * self.color.shape[1] + x
        s, e = self.contrib_offsets[p], self.contrib_offsets[p + 1]
        return [(int(self.projection.src[self.contrib_splat[j]]), float(self.contrib_weight[j]))
                for j in range(s, e)]


def _displacement_inputs(proj: SplatProjection, scene_t: GaussianScene | None, cam: Camera):
    """Per-splat mean displacement for the flow channel; zero where culled at t.

    Also returns the camera-frame centers of scene_t for the backward chain.
    """
    m = len(proj)
    if scene_t is None:
        return np.zeros((m, 2)), np.zeros(m, dtype=np.uint8), None
    t_cam_t, mu_t = _project_points(scene_t.centers, cam)
    valid_t = t_cam_t[:, 2] > NEAR_PLANE
    dmu = np.zeros((m, 2))
    valid = valid_t[proj.src]
    dmu[valid] = mu_t[proj.src[valid]] - proj.mu[valid]
    return np.ascontiguousarray(dmu), valid.astype(np.uint8), t_cam_t


def render(scene: GaussianScene, cam: Camera, *, scene_t: GaussianScene | None = None,
           record_cutoff: float = CONTRIB_CUTOFF, t_min: float = T_MIN,
           backend: str | None = None) -> RenderBuffers:
    """Render a scene; when scene_t is given the gs_flow channel accumulates
    T_i alpha_i (mu_i,t - mu_i,0) with weights anchored at this scene's splats.
    """
    if len(scene) == 0:
        raise ValueError("cannot render an empty scene")
    if scene_t is not None and len(scene_t) != len(scene):
        raise ValueError(f"scene_t has {len(scene_t)} Gaussians, expected {len(scene)}")
    proj = project_scene(scene, cam)
    dmu, dmu_valid, _ = _displacement_inputs(proj, scene_t, cam)
    intr = cam.intrinsics
    kern = kernels.get_backend(backend)
    out = kern.composite_forward(proj.mu, proj.conic, proj.depth, proj.opacity, proj.color,
                                 proj.bbox, proj.order, dmu, dmu_valid,
                                 np.ascontiguousarray(scene.background, dtype=np.float64),
                                 intr.width, intr.height, t_min, record_cutoff)
    return RenderBuffers(
        color=out["color"], depth=out["depth"], accum_alpha=out["accum"], gs_flow=out["flow"],
        tfinal=out["tfinal"], contrib_offsets=out["offsets"], contrib_splat=out["cidx"],
        contrib_alpha=out["calpha"], contrib_weight=out["cweight"],
        projection=proj, scene=scene, camera=cam, record_cutoff=record_cutoff,
    )


def render_gaussian_flow(scene0: GaussianScene, scene_t: GaussianScene, cam: Camera,
                         backend: str | None = None) -> np.ndarray:
    """(H, W, 2) splat-displacement flow between two states of the same scene."""
    return render(scene0, cam, scene_t=scene_t, backend=backend).gs_flow


# ---------------------------------------------------------------------------
# Backward: pixel-space gradients -> Gaussian-parameter gradients


def _rotation_quat_grads(q: np.ndarray, gR: np.ndarray) -> np.ndarray:
    """d(sum gR*R)/dq for unit quaternions q (N,4) in (w,x,y,z) order."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    dRw = 2 * np.stack([zero, -z, y, z, zero, -x, -y, x, zero], axis=1).reshape(-1, 3, 3)
    dRx = 2 * np.stack([zero, y, z, y, -2 * x, -w, z, w, -2 * x], axis=1).reshape(-1, 3, 3)
    dRy = 2 * np.stack([-2 * y, x, w, x, zero, z, -w, z, -2 * y], axis=1).reshape(-1, 3, 3)
    dRz = 2 * np.stack([-2 * z, -w, x, w, -2 * z, y, x, y, zero], axis=1).reshape(-1, 3, 3)
    return np.stack([np.einsum("nij,nij->n", gR, d) for d in (dRw, dRx, dRy, dRz)], axis=1)


def render_backward(buffers: RenderBuffers, grad_color: np.ndarray,
                    grad_flow: np.ndarray | None = None,
                    scene_t: GaussianScene | None = None,
                    backend: str | None = None) -> dict[str, np.ndarray]:
    """Backpropagate image-space gradients to Gaussian parameters.

    grad_color is dL/d(color image); grad_flow, when given, is dL/d(gs_flow) and
    requires the same scene_t passed to the forward render. The buffers must
    have been recorded with record_cutoff=0 so every composited splat is
    present.

    Returns gradients for "centers", "scales", "quats" (w.r.t. the unit
    quaternion), "opacities", "colors" of the rendered scene, plus "centers_t"
    for scene_t when the flow channel carries gradient.
    """
    if buffers.record_cutoff != 0.0:
        raise ValueError("backward needs buffers rendered with record_cutoff=0")
    proj = buffers.projection
    scene = buffers.scene
    cam = buffers.camera
    intr = cam.intrinsics
    n = proj.n_gaussians
    dmu_t, dmu_valid, t_cam_t = _displacement_inputs(proj, scene_t, cam)
    if grad_flow is None:
        grad_flow = np.zeros((intr.height, intr.width, 2))

    kern = kernels.get_backend(backend)
    gmu, gconic, gopa, gcol, gdmu = kern.composite_backward(
        proj.mu, proj.conic, proj.opacity, proj.color, dmu_t, dmu_valid,
        np.ascontiguousarray(scene.background, dtype=np.float64),
        buffers.contrib_offsets, buffers.contrib_splat, buffers.contrib_alpha,
        np.ascontiguousarray(grad_color, dtype=np.float64),
        np.ascontiguousarray(grad_flow, dtype=np.float64),
        intr.width, intr.height,
    )

    # The flow displacement splits into the two means: dmu_t = mu_t - mu_0.
    gmu_total = gmu - gdmu

    # Conic -> 2x2 covariance: Q = S'^-1, dL/dS' = -Q dL/dQ Q.
    qa, qb, qc = proj.conic[:, 0], proj.conic[:, 1], proj.conic[:, 2]
    Q = np.stack([np.stack([qa, qb], -1), np.stack([qb, qc], -1)], -2)
    gQ = np.stack([np.stack([gconic[:, 0], 0.5 * gconic[:, 1]], -1),
                   np.stack([0.5 * gconic[:, 1], gconic[:, 2]], -1)], -2)
    G2 = -Q @ gQ @ Q  # (M, 2, 2), symmetric

    # S' = M Sigma M^T + reg with M = J W.
    W = cam.pose.rotation
    quats = scene.quats[proj.src]
    scales = scene.scales[proj.src]
    Rq = quat_to_rotmat(quats)                      # (M, 3, 3)
    M3 = Rq * scales[:, None, :]                    # columns scaled
    Sigma = M3 @ np.swapaxes(M3, 1, 2)
    J = _pinhole_jacobian(proj.t_cam, intr)
    Mjw = J @ W[None]

    gM = 2.0 * (G2 @ Mjw @ Sigma)                   # dL/dM, (M, 2, 3)
    gSigma = np.swapaxes(Mjw, 1, 2) @ G2 @ Mjw      # dL/dSigma, (M, 3, 3)
    gJ = gM @ W.T[None]                             # dL/dJ, (M, 2, 3)

    # Projection mean path.
    x, y, z = proj.t_cam[:, 0], proj.t_cam[:, 1], proj.t_cam[:, 2]
    inv_z = 1.0 / z
    gt_cam = np.zeros((len(proj), 3))
    gt_cam[:, 0] = gmu_total[:, 0] * intr.fx * inv_z
    gt_cam[:, 1] = gmu_total[:, 1] * intr.fy * inv_z
    gt_cam[:, 2] = (-gmu_total[:, 0] * intr.fx * x - gmu_total[:, 1] * intr.fy * y) * inv_z * inv_z
    # Jacobian-entry path (J depends on the camera-frame center).
    gt_cam[:, 0] += gJ[:, 0, 2] * (-intr.fx * inv_z * inv_z)
    gt_cam[:, 1] += gJ[:, 1, 2] * (-intr.fy * inv_z * inv_z)
    gt_cam[:, 2] += (gJ[:, 0, 0] * (-intr.fx * inv_z * inv_z)
                     + gJ[:, 1, 1] * (-intr.fy * inv_z * inv_z)
                     + gJ[:, 0, 2] * (2.0 * intr.fx * x * inv_z ** 3)
                     + gJ[:, 1, 2] * (2.0 * intr.fy * y * inv_z ** 3))
    gcenter_splat = gt_cam @ W  # d t_cam/d X = W

    # Sigma = M3 M3^T path to scales and quaternions.
    gM3 = 2.0 * (gSigma @ M3)
    gscale_splat = np.einsum("nij,nij->nj", gM3, Rq)
    gR = gM3 * scales[:, None, :]
    gquat_splat = _rotation_quat_grads(quats, gR)

    grads = {
        "centers": np.zeros((n, 3)),
        "scales": np.zeros((n, 3)),
        "quats": np.zeros((n, 4)),
        "opacities": np.zeros(n),
        "colors": np.zeros((n, 3)),
    }
    np.add.at(grads["centers"], proj.src, gcenter_splat)
    np.add.at(grads["scales"], proj.src, gscale_splat)
    np.add.at(grads["quats"], proj.src, gquat_splat)
    np.add.at(grads["opacities"], proj.src, gopa)
    np.add.at(grads["colors"], proj.src, gcol)

    if scene_t is not None:
        # mu_t projection of the displaced centers through the same camera.
        Jt = _pinhole_jacobian(t_cam_t[proj.src], intr)
        gt = np.einsum("nij,ni->nj", Jt, gdmu)  # dL/d t_cam_t
        gt[dmu_valid == 0] = 0.0
        gcenters_t = np.zeros((n, 3))
        np.add.at(gcenters_t, proj.src, gt @ W)
        grads["centers_t"] = gcenters_t
    return grads
