"""Dynamic-object discovery: flow-mask back-projection scoring, density
clustering of dynamic Gaussians, and per-cluster center trajectories."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import ClusterLabeling, hdbscan
from .render import RenderBuffers
from .scene import Camera

W_MIN_DEFAULT = 0.05            # minimum blend weight for a back-projection hit
THETA_DEFAULT = 0.5             # dynamic-score selection threshold
MIN_CLUSTER_FRACTION = 0.004    # keeps the published min-cluster proportion at desk scale


@dataclass
class DynamicScore:
    score: np.ndarray   # (N,) hits / frames
    hits: np.ndarray    # (N,) int
    n_frames: int


def score_dynamic_gaussians(frames: list[tuple[Camera, np.ndarray, RenderBuffers]],
                            w_min: float = W_MIN_DEFAULT) -> DynamicScore:
    """Fraction of frames in which each Gaussian lands on the dynamic-flow mask.

    A hit requires the splat center pixel to be mask-true and the Gaussian's
    blend weight at that pixel to exceed w_min.
    """
    if not frames:
        raise ValueError("no frames given")
    n = frames[0][2].projection.n_gaussians
    hits = np.zeros(n, dtype=np.int64)
    for cam, mask, buffers in frames:
        h, w = cam.intrinsics.height, cam.intrinsics.width
        if mask.shape != (h, w):
            raise ValueError(f"mask shape {mask.shape} does not match image {(h, w)}")
        proj = buffers.projection
        px = np.rint(proj.mu[:, 0]).astype(np.int64)
        py = np.rint(proj.mu[:, 1]).astype(np.int64)
        inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
        candidates = np.flatnonzero(inside)
        candidates = candidates[mask[py[candidates], px[candidates]]]
        if len(candidates) == 0:
            continue
        # Blend weight of each candidate splat at its own center pixel.
        pix = py[candidates] * w + px[candidates]
        frame_hit = np.zeros(len(candidates), dtype=bool)
        for j, (m, p) in enumerate(zip(candidates, pix)):
            s, e = buffers.contrib_offsets[p], buffers.contrib_offsets[p + 1]
            sl = buffers.contrib_splat[s:e]
            k = np.flatnonzero(sl == m)
            if len(k) and buffers.contrib_weight[s + k[0]] > w_min:
                frame_hit[j] = True
        hits[proj.src[candidates[frame_hit]]] += 1
    score = hits / len(frames)
    return DynamicScore(score=score, hits=hits, n_frames=len(frames))


def select_dynamic(scores: DynamicScore, theta: float = THETA_DEFAULT) -> np.ndarray:
    """Sorted indices of Gaussians whose score reaches theta."""
    if not 0 < theta <= 1:
        raise ValueError("theta must be in (0, 1]")
    return np.flatnonzero(scores.score >= theta)


def default_min_cluster_size(n_dynamic: int) -> int:
    return max(10, int(round(MIN_CLUSTER_FRACTION * n_dynamic)))


@dataclass
class ClusterTrajectory:
    """Center path of one cluster over time; differences from the start define
    the control vectors."""

    cluster_id: int
    times: np.ndarray     # (S,) strictly increasing, starts at the reference time
    centers: np.ndarray   # (S, 3)
    members: np.ndarray   # (k,) Gaussian indices in the full scene

    def __post_init__(self):
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    def control_vectors(self) -> np.ndarray:
        return self.centers - self.centers[0]

    def center_at(self, t: float) -> np.ndarray:
        """Piecewise-linear interpolation of the center path."""
        return np.array([np.interp(t, self.times, self.centers[:, d]) for d in range(3)])

    def control_vector_at(self, t: float) -> np.ndarray:
        return self.center_at(t) - self.centers[0]


def cluster_trajectories(labeling: ClusterLabeling, dynamic_indices: np.ndarray,
                         times: np.ndarray, positions: np.ndarray) -> list[ClusterTrajectory]:
    """Mean member-center paths, one per cluster; noise points are excluded.

    positions is (T, N, 3): per-frame centers for the full scene; trajectories
    are means over each cluster's members.
    """
    times = np.asarray(times, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[0] != len(times):
        raise ValueError(f"positions have {positions.shape[0]} frames, times {len(times)}")
    out = []
    for k in range(labeling.n_clusters):
        members = np.asarray(dynamic_indices)[labeling.labels == k]
        centers = positions[:, members].mean(axis=1)
        out.append(ClusterTrajectory(cluster_id=k, times=times.copy(),
                                     centers=centers, members=members))
    return out


def nearest_trajectory_state(traj: ClusterTrajectory, v_query) -> tuple[float, np.ndarray]:
    """Snap a control vector to the nearest trajectory state.

    Returns (t*, snapped vector); ties resolve to the earliest sample.
    """
    v_query = np.asarray(v_query, dtype=np.float64)
    candidates = traj.control_vectors()
    d = np.linalg.norm(candidates - v_query[None], axis=1)
    j = int(np.argmin(d))
    return float(traj.times[j]), candidates[j].copy()


# ---------------------------------------------------------------------------
# clusters.json


def save_clusters(path: str | Path, trajectories: list[ClusterTrajectory],
                  noise_indices: np.ndarray) -> None:
    doc = {
        "clusters": [
            {
                "id": int(traj.cluster_id),
                "member_indices": traj.members.tolist(),
                "trajectory": [[float(t), *map(float, c)]
                               for t, c in zip(traj.times, traj.centers)],
            }
            for traj in trajectories
        ],
        "noise": np.asarray(noise_indices).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_clusters(path: str | Path) -> tuple[list[ClusterTrajectory], np.ndarray]:
    with open(path) as fh:
        doc = json.load(fh)
    trajectories = []
    for rec in doc["clusters"]:
        arr = np.asarray(rec["trajectory"], dtype=np.float64)
        trajectories.append(ClusterTrajectory(
            cluster_id=int(rec["id"]), times=arr[:, 0], centers=arr[:, 1:4],
            members=np.asarray(rec["member_indices"], dtype=np.int64)))
    return trajectories, np.asarray(doc["noise"], dtype=np.int64)


def discover(scene_len: int, frames: list[tuple[Camera, np.ndarray, RenderBuffers]],
             frame0_centers: np.ndarray, times: np.ndarray, positions: np.ndarray,
             theta: float = THETA_DEFAULT, w_min: float = W_MIN_DEFAULT,
             min_samples: int = 5, min_cluster_size: int | None = None,
             epsilon: float = 0.05):
    """Full discovery pass: score -> select -> cluster -> trajectories.

    Returns (scores, dynamic_indices, labeling, trajectories, noise_indices).
    """
    scores = score_dynamic_gaussians(frames, w_min=w_min)
    dynamic = select_dynamic(scores, theta=theta)
    if len(dynamic) == 0:
        return scores, dynamic, None, [], np.empty(0, dtype=np.int64)
    if min_cluster_size is None:
        min_cluster_size = default_min_cluster_size(len(dynamic))
    if len(dynamic) < max(min_samples, 2):
        return scores, dynamic, None, [], dynamic
    labeling = hdbscan(frame0_centers[dynamic], min_samples=min_samples,
                       min_cluster_size=min_cluster_size, epsilon=epsilon)
    trajectories = cluster_trajectories(labeling, dynamic, times, positions)
    noise = dynamic[labeling.labels == -1]
    return scores, dynamic, labeling, trajectories, noise
