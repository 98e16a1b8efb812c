"""Two-stage optimization with hand-chained analytic gradients.

Stage 1 pretrains a time-conditioned deformation over the whole scene
(photometric + D-SSIM). Stage 2 trains per-cluster deformation networks driven
by trajectory control vectors, adding the splat-flow residual loss between
consecutive frames. All gradients flow through the renderer's backward pass and
are finite-difference checked by `gradcheck`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .deform import (OUT_DIM, DeformationModel, EncodingConfig, encode_control, encode_time)
from .discover import ClusterTrajectory
from .flow import FlowMap, camera_flow, camera_velocity_from_poses
from .losses import (LossConfig, dssim_loss, endpoint_error, flow_loss, photometric_loss,
                     psnr, total_loss)
from .render import render, render_backward
from .scene import Camera, GaussianScene

DEFAULT_LR = 1.6e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Per-block learning-rate multipliers on top of the base rate. The base rate is
# a position-scale rate; color/opacity logits and the deformation nets need
# proportionally larger steps to converge within the desk-scale budget.
LR_MULTIPLIERS = {
    "centers": 1.0,
    "log_scales": 10.0,
    "quats_raw": 2.0,
    "opacity_raw": 100.0,
    "colors_raw": 50.0,
}
NET_LR_MULTIPLIER = 20.0

_RAW_CLIP = 1e-4  # margin when mapping [0,1] quantities to logits


@dataclass
class TrainSample:
    t: float
    camera: Camera
    target: np.ndarray                 # (H, W, 3)
    index: int = 0
    flow: FlowMap | None = None        # measured displacement flow prev -> t
    prev_camera: Camera | None = None
    prev_t: float | None = None

    def __post_init__(self):
        h, w = self.target.shape[:2]
        intr = self.camera.intrinsics
        if (h, w) != (intr.height, intr.width):
            raise ValueError(f"target image {h}x{w} does not match camera "
                             f"{intr.height}x{intr.width}")


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class OptimizerState:
    lr: float = DEFAULT_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(params: dict[str, np.ndarray], lr: float = DEFAULT_LR) -> OptimizerState:
    state = OptimizerState(lr=lr)
    for key, value in params.items():
        state.m[key] = np.zeros_like(value)
        state.v[key] = np.zeros_like(value)
    return state


def adam_step(state: OptimizerState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray],
              lr_multipliers: dict[str, float] | None = None) -> None:
    """Standard bias-corrected Adam update, in place, deterministic key order."""
    state.step += 1
    t = state.step
    for key in sorted(params):
        g = grads[key]
        if g.shape != params[key].shape:
            raise ValueError(f"gradient shape mismatch for {key!r}")
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        lr = state.lr * (lr_multipliers or {}).get(key, 1.0)
        params[key] -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Trainable parameterization


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    p = np.clip(p, _RAW_CLIP, 1.0 - _RAW_CLIP)
    return np.log(p / (1.0 - p))


@dataclass
class TrainableGaussians:
    """Unconstrained Gaussian parameters: optimization never leaves the valid set."""

    centers: np.ndarray       # (N, 3)
    log_scales: np.ndarray    # (N, 3)
    quats_raw: np.ndarray     # (N, 4), normalized on activation
    opacity_raw: np.ndarray   # (N,), sigmoid on activation
    colors_raw: np.ndarray    # (N, 3), sigmoid on activation
    background: np.ndarray    # (3,), fixed

    @classmethod
    def from_scene(cls, scene: GaussianScene) -> "TrainableGaussians":
        return cls(centers=scene.centers.copy(),
                   log_scales=np.log(scene.scales),
                   quats_raw=scene.quats.copy(),
                   opacity_raw=_logit(scene.opacities),
                   colors_raw=_logit(scene.colors),
                   background=scene.background.copy())

    def __len__(self):
        return len(self.centers)

    def params(self) -> dict[str, np.ndarray]:
        return {"centers": self.centers, "log_scales": self.log_scales,
                "quats_raw": self.quats_raw, "opacity_raw": self.opacity_raw,
                "colors_raw": self.colors_raw}

    def to_scene(self) -> GaussianScene:
        q = self.quats_raw / np.linalg.norm(self.quats_raw, axis=1, keepdims=True)
        return GaussianScene(centers=self.centers.copy(), scales=np.exp(self.log_scales),
                             quats=q, opacities=_sigmoid(self.opacity_raw),
                             colors=_sigmoid(self.colors_raw),
                             background=self.background.copy())


def _normalize_rows(q: np.ndarray):
    norms = np.linalg.norm(q, axis=1, keepdims=True)
    return q / norms, norms


def _normalize_rows_backward(q_hat: np.ndarray, norms: np.ndarray, g: np.ndarray) -> np.ndarray:
    # d(q/|q|) adjoint: (g - q_hat * <q_hat, g>) / |q|
    return (g - q_hat * np.sum(q_hat * g, axis=1, keepdims=True)) / norms


@dataclass
class DeformEval:
    """One deformation-network evaluation bound to a member set."""

    prefix: str                    # parameter-dict prefix, e.g. "net0/"
    model: DeformationModel
    members: np.ndarray
    feats: np.ndarray
    feat_backward: object
    acts: list[np.ndarray]
    out: np.ndarray                # (k, 10)


def _evaluate_model(prefix: str, model: DeformationModel, members: np.ndarray,
                    centers: np.ndarray, *, v_c: np.ndarray | None = None,
                    t: float | None = None) -> DeformEval:
    if model.mode == "control":
        feats, fb = encode_control(v_c, centers[members], model.cfg)
    else:
        feats, fb = encode_time(t, centers[members], model.cfg)
    out, acts = model.forward(feats)
    return DeformEval(prefix=prefix, model=model, members=members, feats=feats,
                      feat_backward=fb, acts=acts, out=out)


@dataclass
class SceneState:
    """A rendered-ready scene built from raw parameters plus deformations,
    with everything needed to chain gradients back."""

    scene: GaussianScene
    q_hat: np.ndarray
    q_hat_norms: np.ndarray
    q_pre: np.ndarray
    q_out_norms: np.ndarray
    evals: list[DeformEval]


def build_scene_state(tg: TrainableGaussians, evals: list[DeformEval]) -> SceneState:
    n = len(tg)
    d_center = np.zeros((n, 3))
    d_log_scale = np.zeros((n, 3))
    d_quat = np.zeros((n, 4))
    for ev in evals:
        d_center[ev.members] += ev.out[:, 0:3]
        d_log_scale[ev.members] += ev.out[:, 3:6]
        d_quat[ev.members] += ev.out[:, 6:10]
    q_hat, q_hat_norms = _normalize_rows(tg.quats_raw)
    q_pre = q_hat + d_quat
    q_out, q_out_norms = _normalize_rows(q_pre)
    scene = GaussianScene(
        centers=tg.centers + d_center,
        scales=np.exp(tg.log_scales + d_log_scale),
        quats=q_out,
        opacities=_sigmoid(tg.opacity_raw),
        colors=_sigmoid(tg.colors_raw),
        background=tg.background.copy(),
    )
    return SceneState(scene=scene, q_hat=q_hat, q_hat_norms=q_hat_norms,
                      q_pre=q_pre, q_out_norms=q_out_norms, evals=evals)


def backward_scene_state(state: SceneState, tg: TrainableGaussians,
                         g_scene: dict[str, np.ndarray],
                         grads: dict[str, np.ndarray]) -> None:
    """Chain gradients on the activated scene back to raw parameters and
    network weights, accumulating into `grads`."""
    scene = state.scene
    g_centers = g_scene.get("centers", 0.0)
    g_scales = g_scene.get("scales")
    g_quats = g_scene.get("quats")
    g_opa = g_scene.get("opacities")
    g_col = g_scene.get("colors")

    # scales: s = exp(log_s + d); d(log-domain) = g_s * s
    g_log_total = g_scales * scene.scales if g_scales is not None else None
    # quats: q_out = normalize(q_hat + d_quat)
    if g_quats is not None:
        g_qpre = _normalize_rows_backward(scene.quats, state.q_out_norms, g_quats)
        grads["quats_raw"] += _normalize_rows_backward(state.q_hat, state.q_hat_norms, g_qpre)
    else:
        g_qpre = None
    if isinstance(g_centers, np.ndarray):
        grads["centers"] += g_centers
    if g_log_total is not None:
        grads["log_scales"] += g_log_total
    if g_opa is not None:
        grads["opacity_raw"] += g_opa * scene.opacities * (1.0 - scene.opacities)
    if g_col is not None:
        grads["colors_raw"] += g_col * scene.colors * (1.0 - scene.colors)

    for ev in state.evals:
        gout = np.zeros((len(ev.members), OUT_DIM))
        if isinstance(g_centers, np.ndarray):
            gout[:, 0:3] = g_centers[ev.members]
        if g_log_total is not None:
            gout[:, 3:6] = g_log_total[ev.members]
        if g_qpre is not None:
            gout[:, 6:10] = g_qpre[ev.members]
        gws, gbs, gfeats = ev.model.backward(ev.acts, gout)
        for i, (gw, gb) in enumerate(zip(gws, gbs)):
            grads[f"{ev.prefix}w{i}"] += gw
            grads[f"{ev.prefix}b{i}"] += gb
        # Encoding depends on the (trainable) base centers of the members.
        grads["centers"][ev.members] += ev.feat_backward(gfeats)


# ---------------------------------------------------------------------------
# One optimization step (shared by training and gradcheck)


@dataclass
class StepModels:
    """Model registry for a step: stage 1 uses {"net/": (model, all, time)},
    stage 2 one entry per cluster keyed by trajectory."""

    entries: list[tuple[str, DeformationModel, np.ndarray]]  # (prefix, model, members)
    trajectories: dict[str, ClusterTrajectory] = field(default_factory=dict)

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, model, _ in self.entries:
            out.update(model.parameters(prefix=prefix))
        return out


def _deform_evals(models: StepModels, tg: TrainableGaussians, t: float) -> list[DeformEval]:
    evals = []
    for prefix, model, members in models.entries:
        if model.mode == "time":
            evals.append(_evaluate_model(prefix, model, members, tg.centers, t=t))
        else:
            traj = models.trajectories[prefix]
            v_c = traj.control_vector_at(t)
            evals.append(_evaluate_model(prefix, model, members, tg.centers, v_c=v_c))
    return evals


def make_flow_context(tg: TrainableGaussians, models: StepModels, sample: TrainSample,
                      backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Camera-compensated flow target and validity mask for a sample.

    The camera-induced part uses the current composited depth but is training
    data, not part of the differentiated graph; gradcheck freezes this context.
    """
    dt_pair = sample.t - sample.prev_t
    state_p = build_scene_state(tg, _deform_evals(models, tg, sample.prev_t))
    buffers_p = render(state_p.scene, sample.prev_camera, record_cutoff=0.0, backend=backend)
    vel = camera_velocity_from_poses(sample.prev_camera.pose, sample.camera.pose, dt_pair)
    u_cam = camera_flow(vel, buffers_p.depth, sample.prev_camera.intrinsics)
    target_resid = sample.flow.data - u_cam.data * dt_pair
    valid = (buffers_p.accum_alpha > 1e-3) & sample.flow.valid_mask() & u_cam.valid_mask()
    return target_resid, valid


def compute_step(tg: TrainableGaussians, models: StepModels, sample: TrainSample,
                 cfg: LossConfig, *, want_grads: bool = True,
                 flow_context: tuple[np.ndarray, np.ndarray] | None = None,
                 backend: str | None = None) -> tuple[float, dict, dict]:
    """Forward (and optionally backward) pass for one sample.

    Returns (loss, grads, metrics). The flow term activates when cfg.beta > 0
    and the sample carries a measured flow with its previous camera; the
    camera-induced part is computed from the current composited depth but
    treated as data (not differentiated).
    """
    state_t = build_scene_state(tg, _deform_evals(models, tg, sample.t))
    buffers_t = render(state_t.scene, sample.camera, record_cutoff=0.0, backend=backend)
    l_rgb, g_rgb = photometric_loss(buffers_t.color, sample.target)
    l_ds, g_ds = dssim_loss(buffers_t.color, sample.target)

    use_flow = cfg.beta > 0 and sample.flow is not None and sample.prev_camera is not None
    l_flow = 0.0
    metrics = {}
    if use_flow:
        if flow_context is None:
            flow_context = make_flow_context(tg, models, sample, backend=backend)
        target_resid, valid = flow_context
        state_p = build_scene_state(tg, _deform_evals(models, tg, sample.prev_t))
        buffers_p = render(state_p.scene, sample.prev_camera, scene_t=state_t.scene,
                           record_cutoff=0.0, backend=backend)
        l_flow, g_flow = flow_loss(buffers_p.gs_flow, target_resid, valid)
        metrics["epe"] = endpoint_error(buffers_p.gs_flow, target_resid, valid)

    loss = total_loss(cfg, l_rgb, l_ds, l_flow)
    metrics.update({"l_rgb": l_rgb, "l_dssim": l_ds, "l_flow": l_flow,
                    "psnr": psnr(buffers_t.color, sample.target), "loss": loss})
    if not want_grads:
        return loss, {}, metrics

    grads = {key: np.zeros_like(value)
             for key, value in {**tg.params(), **models.params()}.items()}
    grad_color = cfg.lam * g_rgb + (1.0 - cfg.lam) * g_ds
    g_t = render_backward(buffers_t, grad_color, backend=backend)
    if use_flow:
        zeros_color = np.zeros_like(buffers_p.color)
        g_p = render_backward(buffers_p, zeros_color, grad_flow=cfg.beta * g_flow,
                              scene_t=state_t.scene, backend=backend)
        g_t["centers"] = g_t["centers"] + g_p.pop("centers_t")
        backward_scene_state(state_p, tg, g_p, grads)
    backward_scene_state(state_t, tg, g_t, grads)
    return loss, grads, metrics


# ---------------------------------------------------------------------------
# Gradient checking


@dataclass
class GradCheckReport:
    h: float
    max_rel_error: float
    per_block: dict[str, float]

    def to_json(self) -> dict:
        return {"h": self.h, "max_rel_error": self.max_rel_error,
                "per_block": dict(sorted(self.per_block.items()))}


def gradcheck_against(f, params: dict[str, np.ndarray], analytic: dict[str, np.ndarray],
                      h: float = 1e-4, blocks: list[str] | None = None) -> GradCheckReport:
    """Central-difference check of analytic gradients for a scalar function f(a)
    of the parameter dict (mutated in place during probing, then restored)."""
    per_block = {}
    for key in sorted(params):
        if blocks is not None and key not in blocks:
            continue
        arr = params[key]
        worst = 0.0
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            fp = f()
            arr[idx] = orig - h
            fm = f()
            arr[idx] = orig
            fd = (fp - fm) / (2.0 * h)
            an = analytic[key][idx]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-8))
        per_block[key] = worst
    return GradCheckReport(h=h, max_rel_error=max(per_block.values()), per_block=per_block)


def gradcheck_fixture(seed: int = 3):
    """Canonical small scene for the gradient gate: 5 Gaussians, 16x16 image,
    two control clusters, photometric + D-SSIM + flow losses all active.

    Splats are kept wide and opacities moderate so the loss is smooth at the
    probe scale (the 3-sigma support box and the alpha clamp are discrete).
    """
    from .discover import ClusterTrajectory
    from .flow import FlowMap
    from .scene import Intrinsics, Pose

    rng = np.random.default_rng(seed)
    n = 5
    centers = np.array([[0, 0, 2.0], [0.15, 0.08, 2.3], [-0.14, 0.09, 1.9],
                        [0.05, -0.12, 2.2], [-0.03, 0.13, 2.6]])
    quats = rng.normal(size=(n, 4))
    scene = GaussianScene(
        centers=centers,
        scales=rng.uniform(0.15, 0.25, (n, 3)),
        quats=quats / np.linalg.norm(quats, axis=1, keepdims=True),
        opacities=rng.uniform(0.4, 0.8, n),
        colors=rng.uniform(0.25, 0.75, (n, 3)),
        background=np.array([0.15, 0.1, 0.2]),
    )
    intr = Intrinsics(fx=40, fy=40, cx=8, cy=8, width=16, height=16)
    th = 0.05
    rot = np.array([[np.cos(th), 0, np.sin(th)], [0, 1, 0], [-np.sin(th), 0, np.cos(th)]])
    cam0 = Camera(intrinsics=intr, pose=Pose(rotation=np.eye(3), translation=np.zeros(3)))
    cam1 = Camera(intrinsics=intr, pose=Pose(rotation=rot,
                                             translation=np.array([0.01, -0.02, 0.03])))
    tg = TrainableGaussians.from_scene(scene)
    enc = EncodingConfig.for_scene(scene, n_freqs=3, t_max=1.0)
    traj0 = ClusterTrajectory(cluster_id=0, times=np.array([0.0, 0.5, 1.0]),
                              centers=np.array([[0, 0, 2], [0.05, 0.01, 2], [0.1, 0.02, 2.0]]),
                              members=np.array([0, 1]))
    traj1 = ClusterTrajectory(cluster_id=1, times=np.array([0.0, 0.5, 1.0]),
                              centers=np.array([[0, 0, 2.2], [0.0, 0.04, 2.2], [0, 0.08, 2.2]]),
                              members=np.array([2, 3]))
    m0 = DeformationModel.create(enc, hidden=(16, 16), mode="control", seed=seed + 1)
    m1 = DeformationModel.create(enc, hidden=(16, 16), mode="control", seed=seed + 2)
    # Nonzero heads so gradient flows through live deformations.
    m0.weights[-1][:] = rng.normal(0, 0.02, m0.weights[-1].shape)
    m1.weights[-1][:] = rng.normal(0, 0.02, m1.weights[-1].shape)
    m0.biases[-1][:] = rng.normal(0, 0.005, OUT_DIM)
    models = StepModels(entries=[("net0/", m0, traj0.members), ("net1/", m1, traj1.members)],
                        trajectories={"net0/": traj0, "net1/": traj1})
    sample = TrainSample(t=0.7, camera=cam1, target=rng.uniform(0, 1, (16, 16, 3)),
                         flow=FlowMap(rng.normal(0, 0.5, (16, 16, 2)), units="px"),
                         prev_camera=cam0, prev_t=0.5)
    return tg, models, sample, LossConfig(lam=0.8, beta=0.5)


def gradcheck(tg: TrainableGaussians, models: StepModels, sample: TrainSample,
              cfg: LossConfig, h: float = 1e-4,
              blocks: list[str] | None = None) -> GradCheckReport:
    """Finite-difference gate over every trainable block of the full pipeline."""
    params = {**tg.params(), **models.params()}
    ctx = None
    if cfg.beta > 0 and sample.flow is not None and sample.prev_camera is not None:
        ctx = make_flow_context(tg, models, sample)
    _, grads, _ = compute_step(tg, models, sample, cfg, want_grads=True, flow_context=ctx)

    def f():
        loss, _, _ = compute_step(tg, models, sample, cfg, want_grads=False,
                                  flow_context=ctx)
        return loss

    return gradcheck_against(f, params, grads, h=h, blocks=blocks)


# ---------------------------------------------------------------------------
# Stage drivers


@dataclass
class StageResult:
    gaussians: TrainableGaussians
    models: StepModels
    metrics: list[dict]

    def scene(self) -> GaussianScene:
        return self.gaussians.to_scene()


def _run_stage(tg: TrainableGaussians, models: StepModels, samples: list[TrainSample],
               steps: int, cfg: LossConfig, lr: float, seed: int,
               freeze_gaussians: bool = False, log_every: int = 1,
               backend: str | None = None) -> list[dict]:
    params = {**({} if freeze_gaussians else tg.params()), **models.params()}
    opt = adam_init(params, lr=lr)
    multipliers = dict(LR_MULTIPLIERS)
    for key in models.params():
        multipliers[key] = NET_LR_MULTIPLIER
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(samples))
    metrics_log = []
    for step in range(steps):
        if step % len(samples) == 0 and step > 0:
            order = rng.permutation(len(samples))
        sample = samples[order[step % len(samples)]]
        loss, grads, metrics = compute_step(tg, models, sample, cfg, backend=backend)
        adam_step(opt, params, {key: grads[key] for key in params}, multipliers)
        if step % log_every == 0 or step == steps - 1:
            metrics_log.append({"step": step, **metrics})
    return metrics_log


def train_deformable_stage(scene: GaussianScene, samples: list[TrainSample], steps: int,
                           *, cfg: LossConfig | None = None, lr: float = DEFAULT_LR,
                           seed: int = 0, hidden: tuple[int, ...] = (64, 64),
                           n_freqs: int = 4, freeze_gaussians: bool = False,
                           backend: str | None = None) -> StageResult:
    """Stage 1: time-conditioned deformation pretraining (photometric + D-SSIM)."""
    times = [s.t for s in samples]
    if len(set(times)) < 2:
        raise ValueError("deformable pretraining needs at least 2 distinct timestamps")
    cfg = cfg or LossConfig()
    tg = TrainableGaussians.from_scene(scene)
    enc = EncodingConfig.for_scene(scene, n_freqs=n_freqs, t_max=max(times))
    model = DeformationModel.create(enc, hidden=hidden, mode="time", seed=seed)
    models = StepModels(entries=[("net/", model, np.arange(len(scene)))])
    log = _run_stage(tg, models, samples, steps, cfg, lr, seed,
                     freeze_gaussians=freeze_gaussians, backend=backend)
    return StageResult(gaussians=tg, models=models, metrics=log)


def deformed_positions(result: StageResult, times: np.ndarray) -> np.ndarray:
    """(T, N, 3) centers of the stage-1 model evaluated at each time."""
    tg = result.gaussians
    out = np.empty((len(times), len(tg), 3))
    for i, t in enumerate(times):
        state = build_scene_state(tg, _deform_evals(result.models, tg, float(t)))
        out[i] = state.scene.centers
    return out


def render_state(tg: TrainableGaussians, models: StepModels, t: float, cam: Camera,
                 backend: str | None = None):
    state = build_scene_state(tg, _deform_evals(models, tg, t))
    return render(state.scene, cam, backend=backend)


def discovery_inputs(result: StageResult, times: np.ndarray, cameras: list[Camera],
                     tau: float = 0.5, backend: str | None = None):
    """Per-frame dynamic-flow masks and buffers for discovery, from a trained
    deformable stage.

    Flow maps are anchored at the first frame: map k is the splat-displacement
    channel between the state at times[0] and times[k], rendered through the
    first camera, so a Gaussian scores once its cumulative motion exceeds tau.
    """
    from .flow import FlowMap, binarize_flow

    tg = result.gaussians
    state0 = build_scene_state(tg, _deform_evals(result.models, tg, float(times[0]))).scene
    frames = []
    for k in range(1, len(times)):
        state_k = build_scene_state(tg, _deform_evals(result.models, tg, float(times[k]))).scene
        buf = render(state0, cameras[0], scene_t=state_k, backend=backend)
        mask = binarize_flow(FlowMap(buf.gs_flow, units="px"), tau=tau)
        frames.append((cameras[0], mask, buf))
    return frames


def train_controllable_stage(scene: GaussianScene, trajectories: list[ClusterTrajectory],
                             samples: list[TrainSample], steps: int, *,
                             cfg: LossConfig | None = None, lr: float = DEFAULT_LR,
                             seed: int = 0, hidden: tuple[int, ...] = (64, 64),
                             n_freqs: int = 4, freeze_gaussians: bool = False,
                             backend: str | None = None) -> StageResult:
    """Stage 2: per-cluster control deformation with the full loss of the
    photometric, structural, and flow terms."""
    if not trajectories:
        raise ValueError("controllable training needs at least one cluster trajectory")
    cfg = cfg or LossConfig()
    tg = TrainableGaussians.from_scene(scene)
    t_max = max(s.t for s in samples)
    enc = EncodingConfig.for_scene(scene, n_freqs=n_freqs, t_max=t_max)
    entries = []
    trajmap = {}
    for traj in sorted(trajectories, key=lambda tr: tr.cluster_id):
        prefix = f"net{traj.cluster_id}/"
        model = DeformationModel.create(enc, hidden=hidden, mode="control",
                                        seed=seed + traj.cluster_id)
        entries.append((prefix, model, traj.members))
        trajmap[prefix] = traj
    models = StepModels(entries=entries, trajectories=trajmap)
    log = _run_stage(tg, models, samples, steps, cfg, lr, seed,
                     freeze_gaussians=freeze_gaussians, backend=backend)
    return StageResult(gaussians=tg, models=models, metrics=log)


def evaluate_samples(tg: TrainableGaussians, models: StepModels,
                     samples: list[TrainSample], backend: str | None = None) -> dict:
    """Mean PSNR (and flow endpoint error where available) over samples."""
    cfg = LossConfig(beta=0.5)
    vals, epes = [], []
    for sample in samples:
        _, _, metrics = compute_step(tg, models, sample, cfg, want_grads=False,
                                     backend=backend)
        vals.append(metrics["psnr"])
        if "epe" in metrics:
            epes.append(metrics["epe"])
    out = {"psnr": float(np.mean(vals))}
    if epes:
        out["epe"] = float(np.mean(epes))
    return out
