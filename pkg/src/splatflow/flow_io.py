"""File formats: Middlebury .flo flow maps, PFM float images, PNG, and the
standard flow color-wheel visualization."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .flow import INVALID_FLOW, FlowMap

FLO_MAGIC = 202021.25


def write_flo(path: str | Path, flow: FlowMap | np.ndarray) -> None:
    """Write a .flo file: float32 magic, int32 width/height, interleaved (u, v)."""
    data = flow.data if isinstance(flow, FlowMap) else np.asarray(flow)
    if data.ndim != 3 or data.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {data.shape}")
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, w, h))
        fh.write(data.astype("<f4").tobytes())


def read_flo(path: str | Path, units: str = "px") -> FlowMap:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12:
            raise ValueError(f"{path}: truncated .flo header")
        magic, w, h = struct.unpack("<fii", head)
        if magic != np.float32(FLO_MAGIC):
            raise ValueError(f"{path}: bad .flo magic {magic!r}")
        payload = fh.read(8 * w * h)
        if len(payload) != 8 * w * h:
            raise ValueError(f"{path}: truncated .flo payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, 2).astype(np.float64)
    return FlowMap(data, units=units)


# ---------------------------------------------------------------------------
# Flow visualization (standard 55-entry color wheel)


def _make_colorwheel() -> np.ndarray:
    RY, YG, GC, CB, BM, MR = 15, 6, 4, 11, 13, 6
    ncols = RY + YG + GC + CB + BM + MR
    wheel = np.zeros((ncols, 3))
    col = 0
    wheel[0:RY, 0] = 255
    wheel[0:RY, 1] = np.floor(255 * np.arange(RY) / RY)
    col += RY
    wheel[col:col + YG, 0] = 255 - np.floor(255 * np.arange(YG) / YG)
    wheel[col:col + YG, 1] = 255
    col += YG
    wheel[col:col + GC, 1] = 255
    wheel[col:col + GC, 2] = np.floor(255 * np.arange(GC) / GC)
    col += GC
    wheel[col:col + CB, 1] = 255 - np.floor(255 * np.arange(CB) / CB)
    wheel[col:col + CB, 2] = 255
    col += CB
    wheel[col:col + BM, 2] = 255
    wheel[col:col + BM, 0] = np.floor(255 * np.arange(BM) / BM)
    col += BM
    wheel[col:col + MR, 2] = 255 - np.floor(255 * np.arange(MR) / MR)
    wheel[col:col + MR, 0] = 255
    return wheel


_COLORWHEEL = _make_colorwheel()


def flow_to_image(flow: FlowMap | np.ndarray, max_mag: float | None = None) -> np.ndarray:
    """(H, W, 3) uint8 color-wheel rendering; invalid pixels are black."""
    data = flow.data if isinstance(flow, FlowMap) else np.asarray(flow, dtype=np.float64)
    u, v = data[..., 0].copy(), data[..., 1].copy()
    bad = (np.abs(u) > INVALID_FLOW) | (np.abs(v) > INVALID_FLOW) | ~np.isfinite(u) | ~np.isfinite(v)
    u[bad] = 0.0
    v[bad] = 0.0
    rad = np.sqrt(u * u + v * v)
    scale = max_mag if max_mag is not None else max(float(rad.max()), 1e-9)
    u, v, rad = u / scale, v / scale, rad / scale

    ncols = len(_COLORWHEEL)
    angle = np.arctan2(-v, -u) / np.pi
    fk = (angle + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = fk - k0
    img = np.zeros(u.shape + (3,), dtype=np.uint8)
    for c in range(3):
        col0 = _COLORWHEEL[k0, c] / 255.0
        col1 = _COLORWHEEL[k1, c] / 255.0
        col = (1 - f) * col0 + f * col1
        inside = rad <= 1
        col[inside] = 1 - rad[inside] * (1 - col[inside])
        col[~inside] *= 0.75
        img[..., c] = np.floor(255 * col).astype(np.uint8)
    img[bad] = 0
    return img


# ---------------------------------------------------------------------------
# PFM / PNG


def write_pfm(path: str | Path, data: np.ndarray) -> None:
    """Little-endian PFM; grayscale (H, W) or color (H, W, 3), rows bottom-up."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        header = "Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = "PF"
    else:
        raise ValueError(f"PFM wants (H, W) or (H, W, 3), got {data.shape}")
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.flipud(data).astype("<f4").tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise ValueError(f"{path}: not a PFM file")
        w, h = map(int, fh.readline().split())
        scale = float(fh.readline())
        count = w * h * (3 if header == b"PF" else 1)
        data = np.frombuffer(fh.read(count * 4), dtype="<f4" if scale < 0 else ">f4")
    shape = (h, w, 3) if header == b"PF" else (h, w)
    return np.flipud(data.reshape(shape)).astype(np.float64)


def save_png(path: str | Path, image: np.ndarray) -> None:
    """Save a float image in [0, 1] (or uint8) as PNG."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(img).save(path)


def load_png(path: str | Path) -> np.ndarray:
    """Load a PNG as float64 in [0, 1]."""
    return np.asarray(Image.open(path), dtype=np.float64)[..., :3] / 255.0
