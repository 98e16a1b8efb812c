"""Scene primitives: Gaussians, cameras, motion scripts, and scene file I/O."""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# DC band coefficient of the real spherical harmonics basis.
SH_C0 = 0.2820947917738781


class SceneError(ValueError):
    """Raised for scene file schema or invariant violations. Message carries the field path."""


def _as_float_array(value, shape, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise SceneError(f"{path}: expected numeric array") from None
    if arr.shape != shape:
        raise SceneError(f"{path}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SceneError(f"{path}: non-finite value")
    return arr


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics. Pixel x grows right, y grows down; pixel centers at integers."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise SceneError("intrinsics: focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise SceneError("intrinsics: principal point outside image")

    def to_json(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_json(cls, obj: dict) -> "Intrinsics":
        try:
            return cls(fx=float(obj["fx"]), fy=float(obj["fy"]), cx=float(obj["cx"]),
                       cy=float(obj["cy"]), width=int(obj["width"]), height=int(obj["height"]))
        except KeyError as exc:
            raise SceneError(f"intrinsics: missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray    # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        R = _as_float_array(self.rotation, (3, 3), "pose.rotation")
        t = _as_float_array(self.translation, (3,), "pose.translation")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise SceneError("pose.rotation: not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise SceneError("pose.rotation: determinant != +1")

    def camera_center(self) -> np.ndarray:
        """Camera origin in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_world(self, x_cam: np.ndarray) -> np.ndarray:
        return (x_cam - self.translation) @ self.rotation

    def to_camera(self, x_world: np.ndarray) -> np.ndarray:
        return x_world @ self.rotation.T + self.translation

    def to_json(self) -> dict:
        return {"rotation": self.rotation.reshape(-1).tolist(),
                "translation": self.translation.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Pose":
        R = _as_float_array(obj.get("rotation"), (9,), "pose.rotation").reshape(3, 3)
        t = _as_float_array(obj.get("translation"), (3,), "pose.translation")
        return cls(rotation=R, translation=t)


@dataclass(frozen=True)
class CameraVelocity:
    """Camera's own instantaneous motion, expressed in the camera frame."""

    v: np.ndarray      # (3,) translational, m/s
    omega: np.ndarray  # (3,) rotational, rad/s

    def __post_init__(self):
        object.__setattr__(self, "v", _as_float_array(self.v, (3,), "velocity.v"))
        object.__setattr__(self, "omega", _as_float_array(self.omega, (3,), "velocity.omega"))

    @classmethod
    def zero(cls) -> "CameraVelocity":
        return cls(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Camera:
    intrinsics: Intrinsics
    pose: Pose
    velocity: CameraVelocity | None = None


@dataclass(frozen=True)
class Gaussian3D:
    """One scene primitive. Quaternion order (w, x, y, z), unit norm."""

    center: np.ndarray   # (3,) meters, world frame
    scale: np.ndarray    # (3,) positive
    quat: np.ndarray     # (4,) unit
    opacity: float       # in [0, 1]
    color: np.ndarray    # (3,) RGB in [0, 1]
    velocity: np.ndarray | None = None  # (3,) m/s world frame (simulator ground truth)

    def covariance(self) -> np.ndarray:
        """Sigma = R S S^T R^T, symmetric positive definite."""
        R = quat_to_rotmat(self.quat[None])[0]
        M = R * self.scale[None, :]
        return M @ M.T


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Batched unit quaternion (N,4) (w,x,y,z) to rotation matrices (N,3,3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((len(q), 3, 3), dtype=np.float64)
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def normalize_quats(quats: np.ndarray, tol: float = 1e-3, path: str = "quat") -> np.ndarray:
    """Normalize quaternions; warn for small deviations, error beyond tol."""
    norms = np.linalg.norm(quats, axis=1)
    if np.any(norms == 0):
        raise SceneError(f"{path}: zero-norm quaternion")
    dev = np.abs(norms - 1.0)
    bad = dev >= tol
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SceneError(f"{path}[{i}]: quaternion norm {norms[i]:.6f} deviates beyond {tol}")
    if np.any(dev > 1e-9):
        warnings.warn(f"{path}: normalizing quaternions (max deviation {dev.max():.2e})")
    return quats / norms[:, None]


# ---------------------------------------------------------------------------
# Motion scripts


@dataclass(frozen=True)
class ObjectMotion:
    """Rigid translation of a Gaussian subset along a scripted path.

    kinds:
      linear    params {"velocity": [3]}             disp(t) = velocity * t
      arc       params {"center": [3], "axis": [3],  reference point travels a circle
                        "omega": rad/s}              about axis through center
      keyframes params {"times": [...],              piecewise-linear offsets,
                        "offsets": [[3], ...]}       offsets[0] must be zero
    """

    indices: np.ndarray  # (k,) int64, sorted unique
    kind: str
    params: dict
    reference: np.ndarray | None = None  # arc pivot reference; set by MotionScript

    def displacement(self, t: float) -> np.ndarray:
        if self.kind == "linear":
            return np.asarray(self.params["velocity"], dtype=np.float64) * t
        if self.kind == "arc":
            c = np.asarray(self.params["center"], dtype=np.float64)
            axis = np.asarray(self.params["axis"], dtype=np.float64)
            axis = axis / np.linalg.norm(axis)
            theta = float(self.params["omega"]) * t
            p0 = self.reference
            r = p0 - c
            # Rodrigues rotation of the reference offset about the axis.
            cos, sin = np.cos(theta), np.sin(theta)
            r_rot = r * cos + np.cross(axis, r) * sin + axis * np.dot(axis, r) * (1 - cos)
            return r_rot - r
        if self.kind == "keyframes":
            times = np.asarray(self.params["times"], dtype=np.float64)
            offsets = np.asarray(self.params["offsets"], dtype=np.float64)
            if t <= times[0]:
                return offsets[0].copy()
            if t >= times[-1]:
                return offsets[-1].copy()
            j = int(np.searchsorted(times, t, side="right")) - 1
            f = (t - times[j]) / (times[j + 1] - times[j])
            return offsets[j] * (1 - f) + offsets[j + 1] * f
        raise SceneError(f"motion.kind: unknown kind {self.kind!r}")

    def velocity(self, t: float) -> np.ndarray:
        if self.kind == "linear":
            return np.asarray(self.params["velocity"], dtype=np.float64)
        if self.kind == "arc":
            c = np.asarray(self.params["center"], dtype=np.float64)
            axis = np.asarray(self.params["axis"], dtype=np.float64)
            axis = axis / np.linalg.norm(axis)
            omega = float(self.params["omega"])
            p = self.reference + self.displacement(t)
            return omega * np.cross(axis, p - c)
        if self.kind == "keyframes":
            # Right-hand slope at knots; constant outside the time range.
            times = np.asarray(self.params["times"], dtype=np.float64)
            offsets = np.asarray(self.params["offsets"], dtype=np.float64)
            if t < times[0] or t >= times[-1]:
                return np.zeros(3)
            j = int(np.searchsorted(times, t, side="right")) - 1
            return (offsets[j + 1] - offsets[j]) / (times[j + 1] - times[j])
        raise SceneError(f"motion.kind: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class MotionScript:
    objects: tuple[ObjectMotion, ...]
    t_max: float

    def __post_init__(self):
        seen: set[int] = set()
        for k, obj in enumerate(self.objects):
            idx = set(int(i) for i in obj.indices)
            if idx & seen:
                raise SceneError(f"motion.objects[{k}].indices: overlap with another object")
            seen |= idx
        if self.t_max <= 0:
            raise SceneError("motion.t_max: must be positive")

    def to_json(self) -> dict:
        return {
            "objects": [
                {"indices": obj.indices.tolist(), "kind": obj.kind, "params": obj.params}
                for obj in self.objects
            ],
            "t_max": self.t_max,
        }


# ---------------------------------------------------------------------------
# Scene


@dataclass
class GaussianScene:
    """Ordered Gaussian collection, stored struct-of-arrays for rendering speed."""

    centers: np.ndarray    # (N, 3)
    scales: np.ndarray     # (N, 3) positive
    quats: np.ndarray      # (N, 4) unit, (w,x,y,z)
    opacities: np.ndarray  # (N,) in [0, 1]
    colors: np.ndarray     # (N, 3) in [0, 1]
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocities: np.ndarray | None = None  # (N, 3) world m/s, simulator ground truth
    motion: MotionScript | None = None

    def __post_init__(self):
        n = len(self.centers)
        self.centers = np.ascontiguousarray(self.centers, dtype=np.float64)
        self.scales = np.ascontiguousarray(self.scales, dtype=np.float64)
        self.quats = np.ascontiguousarray(self.quats, dtype=np.float64)
        self.opacities = np.ascontiguousarray(self.opacities, dtype=np.float64)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
        self.background = np.asarray(self.background, dtype=np.float64)
        for name, arr, shape in (("centers", self.centers, (n, 3)), ("scales", self.scales, (n, 3)),
                                 ("quats", self.quats, (n, 4)), ("opacities", self.opacities, (n,)),
                                 ("colors", self.colors, (n, 3))):
            if arr.shape != shape:
                raise SceneError(f"gaussians.{name}: expected shape {shape}, got {arr.shape}")
        if self.velocities is not None:
            self.velocities = np.ascontiguousarray(self.velocities, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.centers)

    def gaussian(self, i: int) -> Gaussian3D:
        vel = None if self.velocities is None else self.velocities[i]
        return Gaussian3D(center=self.centers[i], scale=self.scales[i], quat=self.quats[i],
                          opacity=float(self.opacities[i]), color=self.colors[i], velocity=vel)

    @property
    def gaussians(self) -> list[Gaussian3D]:
        return [self.gaussian(i) for i in range(len(self))]

    def covariances(self) -> np.ndarray:
        """(N, 3, 3) Sigma = R S S^T R^T."""
        R = quat_to_rotmat(self.quats)
        M = R * self.scales[:, None, :]
        return M @ np.swapaxes(M, 1, 2)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.centers.min(axis=0), self.centers.max(axis=0)

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            centers=self.centers.copy(), scales=self.scales.copy(), quats=self.quats.copy(),
            opacities=self.opacities.copy(), colors=self.colors.copy(),
            background=self.background.copy(),
            velocities=None if self.velocities is None else self.velocities.copy(),
            motion=self.motion,
        )


def validate_scene(scene: GaussianScene) -> None:
    """Check numeric invariants; raises SceneError with the offending field path."""
    if len(scene) == 0:
        raise SceneError("gaussians: empty scene")
    if np.any(scene.scales <= 0):
        i = int(np.argmax(np.any(scene.scales <= 0, axis=1)))
        raise SceneError(f"gaussians[{i}].scale: components must be positive")
    bad = (scene.opacities < 0) | (scene.opacities > 1)
    if np.any(bad):
        raise SceneError(f"gaussians[{int(np.argmax(bad))}].opacity: outside [0, 1]")
    badc = np.any((scene.colors < 0) | (scene.colors > 1), axis=1)
    if np.any(badc):
        raise SceneError(f"gaussians[{int(np.argmax(badc))}].color: outside [0, 1]")
    norms = np.linalg.norm(scene.quats, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        i = int(np.argmax(np.abs(norms - 1.0)))
        raise SceneError(f"gaussians[{i}].quat: not unit norm")
    if scene.motion is not None:
        n = len(scene)
        for k, obj in enumerate(scene.motion.objects):
            if np.any(obj.indices < 0) or np.any(obj.indices >= n):
                raise SceneError(f"motion.objects[{k}].indices: out of range")


def _attach_arc_references(scene: GaussianScene) -> None:
    """Arc displacement pivots around the member centroid at rest; resolved once per scene."""
    if scene.motion is None:
        return
    objs = []
    for obj in scene.motion.objects:
        if obj.kind == "arc" and obj.reference is None:
            ref = scene.centers[obj.indices].mean(axis=0)
            obj = replace(obj, reference=ref)
        objs.append(obj)
    scene.motion = MotionScript(objects=tuple(objs), t_max=scene.motion.t_max)


def sample_scene_at(scene: GaussianScene, t: float) -> GaussianScene:
    """Scene with centers displaced per the motion script at time t.

    The velocity field is populated with the analytic trajectory derivative; all
    other attributes are untouched. Without a script the input is returned as a
    copy with zero velocities.
    """
    out = scene.copy()
    out.velocities = np.zeros_like(scene.centers)
    out.motion = scene.motion
    if scene.motion is None:
        return out
    if not (0.0 <= t <= scene.motion.t_max):
        raise SceneError(f"t={t} outside motion range [0, {scene.motion.t_max}]")
    _attach_arc_references(scene)
    out.motion = scene.motion
    for obj in scene.motion.objects:
        out.centers[obj.indices] += obj.displacement(t)[None, :]
        out.velocities[obj.indices] = obj.velocity(t)[None, :]
    return out


def dynamic_index_set(scene: GaussianScene) -> np.ndarray:
    """Ground-truth dynamic Gaussian indices from the motion script (sorted)."""
    if scene.motion is None:
        return np.empty(0, dtype=np.int64)
    idx = np.concatenate([obj.indices for obj in scene.motion.objects])
    return np.sort(idx)


# ---------------------------------------------------------------------------
# JSON scene files


def _parse_motion(obj: dict) -> MotionScript:
    if "objects" not in obj or "t_max" not in obj:
        raise SceneError("motion: missing 'objects' or 't_max'")
    motions = []
    for k, rec in enumerate(obj["objects"]):
        path = f"motion.objects[{k}]"
        for key in ("indices", "kind", "params"):
            if key not in rec:
                raise SceneError(f"{path}: missing {key!r}")
        idx = np.asarray(rec["indices"], dtype=np.int64)
        if idx.ndim != 1 or len(np.unique(idx)) != len(idx):
            raise SceneError(f"{path}.indices: must be a list of unique indices")
        kind = rec["kind"]
        if kind not in ("linear", "arc", "keyframes"):
            raise SceneError(f"{path}.kind: unknown kind {kind!r}")
        params = dict(rec["params"])
        if kind == "keyframes":
            times = np.asarray(params.get("times", ()), dtype=np.float64)
            offsets = np.asarray(params.get("offsets", ()), dtype=np.float64)
            if times.ndim != 1 or offsets.shape != (len(times), 3) or len(times) < 2:
                raise SceneError(f"{path}.params: keyframes need matching times/offsets")
            if np.any(np.diff(times) <= 0):
                raise SceneError(f"{path}.params.times: must be strictly increasing")
            if np.any(offsets[0] != 0):
                raise SceneError(f"{path}.params.offsets: must start at zero displacement")
        motions.append(ObjectMotion(indices=np.sort(idx), kind=kind, params=params))
    return MotionScript(objects=tuple(motions), t_max=float(obj["t_max"]))


def load_scene(path: str | Path) -> GaussianScene:
    """Load a scene JSON file; see save_scene for the schema."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scene file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneError(f"invalid JSON: {exc}") from None
    if "gaussians" not in doc:
        raise SceneError("missing top-level 'gaussians'")
    records = doc["gaussians"]
    if not isinstance(records, list) or not records:
        raise SceneError("gaussians: must be a non-empty list")
    n = len(records)
    centers = np.empty((n, 3))
    scales = np.empty((n, 3))
    quats = np.empty((n, 4))
    opacities = np.empty(n)
    colors = np.empty((n, 3))
    for i, rec in enumerate(records):
        p = f"gaussians[{i}]"
        for key in ("center", "scale", "quat", "opacity", "color"):
            if key not in rec:
                raise SceneError(f"{p}.{key}: missing")
        centers[i] = _as_float_array(rec["center"], (3,), f"{p}.center")
        scales[i] = _as_float_array(rec["scale"], (3,), f"{p}.scale")
        if np.any(scales[i] <= 0):
            raise SceneError(f"{p}.scale: components must be positive")
        quats[i] = _as_float_array(rec["quat"], (4,), f"{p}.quat")
        opacities[i] = float(rec["opacity"])
        if not 0.0 <= opacities[i] <= 1.0:
            raise SceneError(f"{p}.opacity: outside [0, 1]")
        colors[i] = _as_float_array(rec["color"], (3,), f"{p}.color")
        if np.any((colors[i] < 0) | (colors[i] > 1)):
            raise SceneError(f"{p}.color: outside [0, 1]")
    quats = normalize_quats(quats, path="gaussians.quat")
    background = _as_float_array(doc.get("background", [0, 0, 0]), (3,), "background")
    motion = _parse_motion(doc["motion"]) if doc.get("motion") else None
    scene = GaussianScene(centers=centers, scales=scales, quats=quats, opacities=opacities,
                          colors=colors, background=background, motion=motion)
    validate_scene(scene)
    _attach_arc_references(scene)
    return scene


def save_scene(scene: GaussianScene, path: str | Path) -> None:
    doc = {
        "background": scene.background.tolist(),
        "gaussians": [
            {
                "center": scene.centers[i].tolist(),
                "scale": scene.scales[i].tolist(),
                "quat": scene.quats[i].tolist(),
                "opacity": float(scene.opacities[i]),
                "color": scene.colors[i].tolist(),
            }
            for i in range(len(scene))
        ],
    }
    if scene.motion is not None:
        doc["motion"] = scene.motion.to_json()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Community splat PLY import


_PLY_REQUIRED = ("x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2",
                 "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2")

_PLY_TYPES = {"float": ("<f4", 4), "float32": ("<f4", 4), "double": ("<f8", 8),
              "uchar": ("<u1", 1), "uint8": ("<u1", 1), "int": ("<i4", 4), "int32": ("<i4", 4)}


def import_splat_ply(path: str | Path) -> GaussianScene:
    """Import a trained splat PLY (binary little-endian, raw pre-activation fields).

    Stored opacity is pre-sigmoid, scales pre-exponential, colors are the SH DC
    band; activations are applied here so the result satisfies scene invariants.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise SceneError("not a PLY file (bad magic)")
        fmt = None
        count = None
        props: list[tuple[str, str]] = []
        in_vertex = False
        while True:
            line = fh.readline()
            if not line:
                raise SceneError("unterminated PLY header")
            parts = line.decode("ascii", "replace").strip().split()
            if not parts:
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                in_vertex = parts[1] == "vertex"
                if in_vertex:
                    count = int(parts[2])
            elif parts[0] == "property" and in_vertex:
                props.append((parts[2], parts[1]))
            elif parts[0] == "end_header":
                break
        if fmt != "binary_little_endian":
            raise SceneError(f"unsupported PLY format {fmt!r}")
        if count is None:
            raise SceneError("PLY header missing vertex element")
        names = [p[0] for p in props]
        for req in _PLY_REQUIRED:
            if req not in names:
                raise SceneError(f"PLY missing vertex property {req!r}")
        dtype = np.dtype([(name, _PLY_TYPES[t][0]) for name, t in props])
        data = np.frombuffer(fh.read(count * dtype.itemsize), dtype=dtype, count=count)

    centers = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    scales = np.exp(np.stack([data[f"scale_{i}"] for i in range(3)], axis=1).astype(np.float64))
    quats = np.stack([data[f"rot_{i}"] for i in range(4)], axis=1).astype(np.float64)
    norms = np.linalg.norm(quats, axis=1)
    if np.any(norms == 0):
        raise SceneError(f"gaussians[{int(np.argmax(norms == 0))}].quat: zero-norm quaternion")
    quats = quats / norms[:, None]
    opacities = 1.0 / (1.0 + np.exp(-data["opacity"].astype(np.float64)))
    f_dc = np.stack([data[f"f_dc_{i}"] for i in range(3)], axis=1).astype(np.float64)
    colors = np.clip(0.5 + SH_C0 * f_dc, 0.0, 1.0)
    scene = GaussianScene(centers=centers, scales=scales, quats=quats,
                          opacities=opacities, colors=colors)
    validate_scene(scene)
    return scene


def export_splat_ply(scene: GaussianScene, path: str | Path) -> None:
    """Inverse of import_splat_ply (raw fields); handy for fixtures and interop."""
    n = len(scene)
    names = list(_PLY_REQUIRED)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {name}" for name in names]
    header.append("end_header")
    op = np.clip(scene.opacities, 1e-9, 1 - 1e-9)
    raw = {
        "x": scene.centers[:, 0], "y": scene.centers[:, 1], "z": scene.centers[:, 2],
        "opacity": np.log(op / (1 - op)),
        "scale_0": np.log(scene.scales[:, 0]), "scale_1": np.log(scene.scales[:, 1]),
        "scale_2": np.log(scene.scales[:, 2]),
        "rot_0": scene.quats[:, 0], "rot_1": scene.quats[:, 1],
        "rot_2": scene.quats[:, 2], "rot_3": scene.quats[:, 3],
        "f_dc_0": (scene.colors[:, 0] - 0.5) / SH_C0,
        "f_dc_1": (scene.colors[:, 1] - 0.5) / SH_C0,
        "f_dc_2": (scene.colors[:, 2] - 0.5) / SH_C0,
    }
    rec = np.empty(n, dtype=np.dtype([(name, "<f4") for name in names]))
    for name in names:
        rec[name] = raw[name].astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(rec.tobytes())


def orbit_pose(center: np.ndarray, azimuth: float, elevation: float, radius: float,
               min_radius: float = 0.2) -> Pose:
    """Camera on an orbit sphere around `center`, looking at it.

    Azimuth 0 / elevation 0 places the camera at center - radius*z looking +z;
    radius clamps at min_radius.
    """
    radius = max(float(radius), min_radius)
    ce, se = np.cos(elevation), np.sin(elevation)
    ca, sa = np.cos(azimuth), np.sin(azimuth)
    eye = np.asarray(center) + radius * np.array([sa * ce, -se, -ca * ce])
    forward = np.asarray(center) - eye
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, -1.0, 0.0])
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])  # world-to-camera rows
    return Pose(rotation=rot, translation=-rot @ eye)


# ---------------------------------------------------------------------------
# Pose / camera file helpers (poses.json written by the simulator)


def save_poses(path: str | Path, intr: Intrinsics, times: np.ndarray,
               poses: list[Pose], velocities: list[CameraVelocity] | None = None) -> None:
    doc = {
        "intrinsics": intr.to_json(),
        "times": np.asarray(times, dtype=np.float64).tolist(),
        "poses": [p.to_json() for p in poses],
    }
    if velocities is not None:
        doc["velocities"] = [{"v": v.v.tolist(), "omega": v.omega.tolist()} for v in velocities]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_poses(path: str | Path) -> tuple[Intrinsics, np.ndarray, list[Pose], list[CameraVelocity] | None]:
    with open(path) as fh:
        doc = json.load(fh)
    intr = Intrinsics.from_json(doc["intrinsics"])
    times = np.asarray(doc["times"], dtype=np.float64)
    poses = [Pose.from_json(p) for p in doc["poses"]]
    vels = None
    if "velocities" in doc:
        vels = [CameraVelocity(np.asarray(v["v"]), np.asarray(v["omega"]))
                for v in doc["velocities"]]
    return intr, times, poses, vels
