"""Spherical-vector control: encode (control vector, center) pairs, map them
through a small deformation network to per-Gaussian offsets, and apply the
offsets to produce a controlled scene.

The network is a plain fully connected net with tanh hidden layers and a
zero-initialized linear head, so a fresh model is exactly the identity
deformation. Forward/backward are hand-rolled numpy; gradients are verified by
the training module's finite-difference gate.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .render import RenderBuffers, render
from .scene import Camera, GaussianScene

OUT_DIM = 10  # d-center (3) + d-log-scale (3) + d-quaternion (4)
CHECKPOINT_MAGIC = b"SPLATFLOW1"


@dataclass(frozen=True)
class EncodingConfig:
    """Frequency encoding over normalized inputs.

    Positions normalize to [-1, 1] over the padded scene AABB; control vectors
    by the AABB half-extent; time by t_max. Inputs outside the bounds clamp
    with a warning.
    """

    n_freqs: int = 6
    aabb_min: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    aabb_max: tuple[float, float, float] = (1.0, 1.0, 1.0)
    t_max: float = 1.0

    def __post_init__(self):
        if self.n_freqs < 1:
            raise ValueError("n_freqs must be >= 1")

    @classmethod
    def for_scene(cls, scene: GaussianScene, n_freqs: int = 6, t_max: float = 1.0,
                  pad: float = 0.2) -> "EncodingConfig":
        lo, hi = scene.aabb()
        span = np.maximum(hi - lo, 1e-6)
        lo = lo - pad * span
        hi = hi + pad * span
        return cls(n_freqs=n_freqs, aabb_min=tuple(lo), aabb_max=tuple(hi), t_max=t_max)

    def feature_dim(self, n_scalars: int) -> int:
        return 2 * self.n_freqs * n_scalars


def _normalize_positions(X: np.ndarray, cfg: EncodingConfig) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(cfg.aabb_min)
    hi = np.asarray(cfg.aabb_max)
    xn = 2.0 * (X - lo) / (hi - lo) - 1.0
    scale = 2.0 / (hi - lo)
    if np.any(np.abs(xn) > 1.0):
        warnings.warn("encode: positions outside normalization bounds; clamping")
        xn = np.clip(xn, -1.0, 1.0)
    return xn, np.broadcast_to(scale, X.shape)


def _normalize_control(v: np.ndarray, cfg: EncodingConfig) -> np.ndarray:
    half = 0.5 * (np.asarray(cfg.aabb_max) - np.asarray(cfg.aabb_min))
    vn = v / half
    if np.any(np.abs(vn) > 1.0):
        warnings.warn("encode: control vector outside normalization bounds; clamping")
        vn = np.clip(vn, -1.0, 1.0)
    return vn


def _frequency_features(xn: np.ndarray, n_freqs: int):
    """sin/cos(2^l pi x) features; returns (N, 2*L*S) plus the cache for backward."""
    n = xn.shape[0]
    freqs = (2.0 ** np.arange(n_freqs)) * np.pi            # (L,)
    args = xn[:, :, None] * freqs[None, None, :]           # (N, S, L)
    feats = np.concatenate([np.sin(args), np.cos(args)], axis=2)  # (N, S, 2L)
    return feats.reshape(n, -1), (args, freqs)


def _frequency_backward(gfeat: np.ndarray, cache, shape) -> np.ndarray:
    """d(features)/d(xn) adjoint; gfeat (N, S*2L) -> (N, S)."""
    args, freqs = cache
    n, s, L = args.shape
    g = gfeat.reshape(n, s, 2 * L)
    gsin, gcos = g[:, :, :L], g[:, :, L:]
    return ((gsin * np.cos(args) - gcos * np.sin(args)) * freqs[None, None, :]).sum(axis=2)


def encode_control(v_c: np.ndarray, X: np.ndarray, cfg: EncodingConfig):
    """Features for (control vector, center) pairs: (N, 12*n_freqs).

    Returns (features, backward) where backward(gfeat) gives d/dX (the control
    vector is training data, not a parameter).
    """
    X = np.atleast_2d(X)
    n = X.shape[0]
    vn = _normalize_control(np.asarray(v_c, dtype=np.float64), cfg)
    xn, xscale = _normalize_positions(X, cfg)
    scalars = np.concatenate([np.broadcast_to(vn, (n, 3)), xn], axis=1)  # (N, 6)
    feats, cache = _frequency_features(scalars, cfg.n_freqs)

    def backward(gfeat: np.ndarray) -> np.ndarray:
        gs = _frequency_backward(gfeat, cache, (n, 6))
        return gs[:, 3:] * xscale

    return feats, backward


def encode_time(t: float, X: np.ndarray, cfg: EncodingConfig):
    """Features for (time, center) pairs: (N, 8*n_freqs); backward gives d/dX."""
    X = np.atleast_2d(X)
    n = X.shape[0]
    tn = np.clip(2.0 * t / cfg.t_max - 1.0, -1.0, 1.0)
    xn, xscale = _normalize_positions(X, cfg)
    scalars = np.concatenate([np.full((n, 1), tn), xn], axis=1)  # (N, 4)
    feats, cache = _frequency_features(scalars, cfg.n_freqs)

    def backward(gfeat: np.ndarray) -> np.ndarray:
        gs = _frequency_backward(gfeat, cache, (n, 4))
        return gs[:, 1:] * xscale

    return feats, backward


# ---------------------------------------------------------------------------
# Deformation network


@dataclass
class DeformationModel:
    """Fully connected net: tanh hidden layers, zero-initialized linear head."""

    weights: list[np.ndarray]   # (out, in) per layer
    biases: list[np.ndarray]    # (out,) per layer
    cfg: EncodingConfig
    mode: str = "control"       # "control" or "time": which encoder feeds it

    @classmethod
    def create(cls, cfg: EncodingConfig, hidden: tuple[int, ...] = (64, 64, 64, 64),
               mode: str = "control", seed: int = 0) -> "DeformationModel":
        in_dim = cfg.feature_dim(6 if mode == "control" else 4)
        rng = np.random.default_rng(seed)
        dims = [in_dim, *hidden, OUT_DIM]
        weights, biases = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            lim = np.sqrt(6.0 / (a + b))
            weights.append(rng.uniform(-lim, lim, (b, a)))
            biases.append(np.zeros(b))
        weights[-1][:] = 0.0  # identity deformation at init
        return cls(weights=weights, biases=biases, cfg=cfg, mode=mode)

    def parameters(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}w{i}"] = w
            out[f"{prefix}b{i}"] = b
        return out

    def forward(self, feats: np.ndarray):
        """(N, F) -> (N, 10) with a cache for backward."""
        acts = [feats]
        h = feats
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            h = np.tanh(z) if i < len(self.weights) - 1 else z
            acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], gout: np.ndarray):
        """Gradient of sum(gout * out) w.r.t. parameters and input features."""
        gws = [None] * len(self.weights)
        gbs = [None] * len(self.biases)
        g = gout
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (1.0 - acts[i + 1] ** 2)  # through tanh
            gws[i] = g.T @ acts[i]
            gbs[i] = g.sum(axis=0)
            g = g @ self.weights[i]
        return gws, gbs, g


@dataclass
class DeformationOutput:
    indices: np.ndarray      # member Gaussian indices
    d_center: np.ndarray     # (k, 3)
    d_log_scale: np.ndarray  # (k, 3)
    d_quat: np.ndarray       # (k, 4)


def deform(model: DeformationModel, v_c: np.ndarray, scene: GaussianScene,
           members: np.ndarray) -> DeformationOutput:
    """Evaluate the deformation for one cluster; non-members implicitly zero."""
    members = np.asarray(members, dtype=np.int64)
    if len(members) and (members.min() < 0 or members.max() >= len(scene)):
        raise ValueError("member indices out of range")
    feats, _ = encode_control(np.asarray(v_c, dtype=np.float64), scene.centers[members], model.cfg)
    out, _ = model.forward(feats)
    return DeformationOutput(indices=members, d_center=out[:, 0:3],
                             d_log_scale=out[:, 3:6], d_quat=out[:, 6:10])


def apply_deformation(scene: GaussianScene, out: DeformationOutput) -> GaussianScene:
    """New scene with member centers, scales, and orientations offset."""
    new = scene.copy()
    idx = out.indices
    new.centers[idx] += out.d_center
    new.scales[idx] *= np.exp(out.d_log_scale)
    q = new.quats[idx] + out.d_quat
    norms = np.linalg.norm(q, axis=1)
    if np.any(norms < 1e-12):
        raise ValueError("deformation produced a zero-norm quaternion")
    new.quats[idx] = q / norms[:, None]
    return new


def control_render(scene: GaussianScene, models: dict[int, DeformationModel],
                   trajectories: list, commands: list[tuple[int, np.ndarray]],
                   cam: Camera) -> tuple[RenderBuffers, list[dict]]:
    """Render the scene under per-cluster control commands.

    Each command (cluster id, vector) snaps to the nearest trajectory state;
    commandless clusters rest at their start state. Returns the buffers and one
    acknowledgment per command with the snapped state.
    """
    from .discover import nearest_trajectory_state

    by_id = {traj.cluster_id: traj for traj in trajectories}
    requested: dict[int, np.ndarray] = {}
    for k, v in commands:
        if k not in by_id or k not in models:
            raise KeyError(f"unknown cluster id {k}")
        if k in requested:
            raise ValueError(f"multiple commands for cluster {k}")
        requested[k] = np.asarray(v, dtype=np.float64)

    acks = []
    current = scene
    for k, traj in sorted(by_id.items()):
        v_query = requested.get(k, np.zeros(3))
        t_star, v_snapped = nearest_trajectory_state(traj, v_query)
        out = deform(models[k], v_snapped, scene, traj.members)
        current = apply_deformation(current, out)
        acks.append({
            "k": int(k),
            "t_star": t_star,
            "v_snapped": [float(x) for x in v_snapped],
            "snap_distance": float(np.linalg.norm(v_snapped - v_query)),
            "commanded": k in requested,
        })
    buffers = render(current, cam)
    return buffers, acks


# ---------------------------------------------------------------------------
# Checkpoints: JSON config header + little-endian float32 parameter blob


def _scene_blocks(scene: GaussianScene) -> dict[str, np.ndarray]:
    return {
        "scene/centers": scene.centers,
        "scene/scales": scene.scales,
        "scene/quats": scene.quats,
        "scene/opacities": scene.opacities,
        "scene/colors": scene.colors,
        "scene/background": scene.background,
    }


def save_checkpoint(path: str | Path, scene: GaussianScene,
                    models: dict[int, DeformationModel], extra: dict | None = None) -> None:
    blocks: dict[str, np.ndarray] = dict(_scene_blocks(scene))
    model_meta = {}
    for k in sorted(models):
        m = models[k]
        for name, arr in m.parameters(prefix=f"model{k}/").items():
            blocks[name] = arr
        model_meta[str(k)] = {
            "mode": m.mode,
            "hidden": [w.shape[0] for w in m.weights[:-1]],
            "encoding": {"n_freqs": m.cfg.n_freqs, "aabb_min": list(m.cfg.aabb_min),
                         "aabb_max": list(m.cfg.aabb_max), "t_max": m.cfg.t_max},
        }
    manifest = []
    offset = 0
    for name in sorted(blocks):
        arr = blocks[name]
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += int(np.prod(arr.shape))
    header = {
        "version": 1,
        "models": model_meta,
        "blocks": manifest,
        "n_gaussians": len(scene),
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blob = np.concatenate([blocks[name].reshape(-1) for name in sorted(blocks)]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob.tobytes())


def load_checkpoint(path: str | Path) -> tuple[GaussianScene, dict[int, DeformationModel], dict]:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a splatflow checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        blob = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
    arrays = {}
    for rec in header["blocks"]:
        size = int(np.prod(rec["shape"]))
        arrays[rec["name"]] = blob[rec["offset"]:rec["offset"] + size].reshape(rec["shape"])
    scene = GaussianScene(
        centers=arrays["scene/centers"], scales=arrays["scene/scales"],
        quats=arrays["scene/quats"] / np.linalg.norm(arrays["scene/quats"], axis=1, keepdims=True),
        opacities=np.clip(arrays["scene/opacities"], 0.0, 1.0),
        colors=np.clip(arrays["scene/colors"], 0.0, 1.0),
        background=arrays["scene/background"],
    )
    models = {}
    for key, meta in header["models"].items():
        k = int(key)
        enc = meta["encoding"]
        cfg = EncodingConfig(n_freqs=enc["n_freqs"], aabb_min=tuple(enc["aabb_min"]),
                             aabb_max=tuple(enc["aabb_max"]), t_max=enc["t_max"])
        model = DeformationModel.create(cfg, hidden=tuple(meta["hidden"]), mode=meta["mode"])
        for i in range(len(model.weights)):
            model.weights[i] = arrays[f"model{k}/w{i}"]
            model.biases[i] = arrays[f"model{k}/b{i}"]
        models[k] = model
    return scene, models, header["extra"]
