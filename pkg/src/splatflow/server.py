"""Viewer backend: a WebSocket endpoint that snaps control vectors, renders the
controlled scene, and streams PNG frames.

Protocol (JSON text messages; frames as binary messages of 4-byte little-endian
frame id followed by PNG bytes):
  {type:"hello"}                          -> {type:"scene", clusters:[...], image:{...}}
  {type:"control", k, v:[x,y,z]}          -> {type:"ack", k, t_star, v_snapped,
                                              snap_distance, frame_id} + binary frame
  {type:"camera", azimuth, elevation,
   radius}                                -> {type:"frame", frame_id} + binary frame

Rapid updates are last-write-wins: the per-connection queue is drained and only
the latest state per cluster (and camera) is rendered and acknowledged.
"""

from __future__ import annotations

import asyncio
import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .deform import control_render, load_checkpoint
from .discover import load_clusters
from .scene import Camera, Intrinsics, Pose, orbit_pose

MIN_RADIUS = 0.2  # zoom clamp, meters from the orbit center

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>splatflow viewer</title></head>
<body><h1>splatflow viewer backend</h1>
<p>No frontend build found. Connect to <code>/ws</code> with the viewer client,
or build the frontend (see frontend/README.md) and restart.</p></body></html>
"""


class ViewerState:
    """Scene, models, and render cache shared by viewer sessions."""

    def __init__(self, checkpoint_path: str, clusters_path: str):
        self.scene, self.models, extra = load_checkpoint(checkpoint_path)
        self.trajectories, _ = load_clusters(clusters_path)
        ref = extra.get("camera")
        if ref:
            self.default_camera = Camera(intrinsics=Intrinsics.from_json(ref["intrinsics"]),
                                         pose=Pose.from_json(ref["pose"]))
        else:
            intr = Intrinsics(fx=80, fy=80, cx=32, cy=32, width=64, height=64)
            self.default_camera = Camera(intrinsics=intr,
                                         pose=Pose(rotation=np.eye(3), translation=np.zeros(3)))
        lo, hi = self.scene.aabb()
        self.center = 0.5 * (lo + hi)
        self.cache: dict[str, tuple[int, bytes, list]] = {}

    def scene_summary(self) -> dict:
        intr = self.default_camera.intrinsics
        return {
            "type": "scene",
            "clusters": [
                {
                    "id": int(tr.cluster_id),
                    "n_members": int(len(tr.members)),
                    "trajectory": [[float(t), *map(float, c - tr.centers[0])]
                                   for t, c in zip(tr.times, tr.centers)],
                    "extent": float(np.linalg.norm(tr.centers - tr.centers[0], axis=1).max()),
                }
                for tr in self.trajectories
            ],
            "image": {"width": intr.width, "height": intr.height},
        }

    def orbit_camera(self, azimuth: float, elevation: float, radius: float) -> Camera:
        pose = orbit_pose(self.center, azimuth, elevation, radius, min_radius=MIN_RADIUS)
        return Camera(intrinsics=self.default_camera.intrinsics, pose=pose)

    def render_state(self, controls: dict[int, list[float]],
                     camera_params: dict | None) -> tuple[int, bytes, list]:
        key = json.dumps({"controls": {str(k): v for k, v in sorted(controls.items())},
                          "camera": camera_params}, sort_keys=True)
        if key in self.cache:
            return self.cache[key]
        cam = (self.orbit_camera(**camera_params) if camera_params
               else self.default_camera)
        commands = [(k, np.asarray(v)) for k, v in sorted(controls.items())]
        buffers, acks = control_render(self.scene, self.models, self.trajectories,
                                       commands, cam)
        img = np.clip(np.round(buffers.color * 255.0), 0, 255).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(img).save(buf, format="PNG")
        png = buf.getvalue()
        frame_id = int.from_bytes(hashlib.sha1(key.encode()).digest()[:4], "little")
        result = (frame_id, png, acks)
        if len(self.cache) < 256:
            self.cache[key] = result
        return result


def create_app(checkpoint_path: str, clusters_path: str,
               frontend_dir: str | None = None) -> FastAPI:
    state = ViewerState(checkpoint_path, clusters_path)
    app = FastAPI(title="splatflow viewer")
    app.state.viewer = state

    if frontend_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = str(bundled) if bundled.is_dir() else None

    @app.get("/", response_class=HTMLResponse)
    def index():
        if frontend_dir and (Path(frontend_dir) / "index.html").exists():
            return FileResponse(Path(frontend_dir) / "index.html")
        return HTMLResponse(_FALLBACK_PAGE)

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/assets", StaticFiles(directory=frontend_dir), name="assets")

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        controls: dict[int, list[float]] = {}
        camera_params: dict | None = None

        async def reader():
            try:
                while True:
                    text = await websocket.receive_text()
                    try:
                        queue.put_nowait(json.loads(text))
                    except json.JSONDecodeError:
                        queue.put_nowait({"type": "__bad__", "raw": text})
            except WebSocketDisconnect:
                queue.put_nowait({"type": "__closed__"})
            except Exception:
                queue.put_nowait({"type": "__closed__"})

        reader_task = asyncio.create_task(reader())
        try:
            while True:
                batch = [await queue.get()]
                while not queue.empty():
                    batch.append(queue.get_nowait())
                if any(m.get("type") == "__closed__" for m in batch):
                    break
                # Coalesce: keep only the newest control per cluster and the
                # newest camera; stale requests are dropped unacknowledged.
                hello = False
                acked_controls: dict[int, dict] = {}
                camera_touched = False
                for msg in batch:
                    mtype = msg.get("type")
                    if mtype == "hello":
                        hello = True
                    elif mtype == "control":
                        try:
                            k = int(msg["k"])
                            v = [float(x) for x in msg["v"]]
                        except (KeyError, TypeError, ValueError):
                            await websocket.send_text(json.dumps(
                                {"type": "error", "message": "bad control message"}))
                            continue
                        if not any(tr.cluster_id == k for tr in state.trajectories):
                            await websocket.send_text(json.dumps(
                                {"type": "error", "message": f"unknown cluster {k}"}))
                            continue
                        controls[k] = v
                        acked_controls[k] = msg
                    elif mtype == "camera":
                        camera_params = {
                            "azimuth": float(msg.get("azimuth", 0.0)),
                            "elevation": float(msg.get("elevation", 0.0)),
                            "radius": float(msg.get("radius", 3.0)),
                        }
                        camera_touched = True
                    else:
                        await websocket.send_text(json.dumps(
                            {"type": "error", "message": f"unknown message type {mtype!r}"}))
                if hello:
                    await websocket.send_text(json.dumps(state.scene_summary()))
                if acked_controls or camera_touched:
                    frame_id, png, acks = await asyncio.to_thread(
                        state.render_state, controls, camera_params)
                    ack_by_id = {a["k"]: a for a in acks}
                    for k in sorted(acked_controls):
                        ack = dict(ack_by_id[k])
                        ack["type"] = "ack"
                        ack["frame_id"] = frame_id
                        await websocket.send_text(json.dumps(ack))
                    if camera_touched and not acked_controls:
                        await websocket.send_text(json.dumps(
                            {"type": "frame", "frame_id": frame_id}))
                    await websocket.send_bytes(struct.pack("<I", frame_id) + png)
        finally:
            reader_task.cancel()

    return app
