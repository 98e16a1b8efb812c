"""Command-line entry point wiring the pipeline:
simulate -> render -> flow -> discover -> train -> control, plus serve and
gradcheck. Every subcommand writes a run manifest before any other output;
serial execution plus seeded randomness makes reruns byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .scene import (Camera, GaussianScene, Intrinsics, Pose, SceneError, load_poses,
                    load_scene, sample_scene_at)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, command: str, config: dict, inputs: list, outputs: list) -> None:
    """Run manifest: resolved config, seed, version, input hashes, output paths.

    Deterministic (no timestamps) so identical reruns produce identical bytes.
    """
    doc = {
        "command": command,
        "config": {k: v for k, v in sorted(config.items())},
        "version": __version__,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if p and Path(p).exists()},
        "outputs": [str(o) for o in outputs],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _camera_from_args(args, intr=None) -> Camera:
    if getattr(args, "camera", None):
        with open(args.camera) as fh:
            doc = json.load(fh)
        return Camera(intrinsics=Intrinsics.from_json(doc["intrinsics"]),
                      pose=Pose.from_json(doc["pose"]))
    if getattr(args, "poses", None) is None:
        raise SceneError("need --camera or --poses/--frame")
    intr, times, poses, _ = load_poses(args.poses)
    frame = getattr(args, "frame", 0) or 0
    if not 0 <= frame < len(poses):
        raise SceneError(f"--frame {frame} out of range (have {len(poses)})")
    return Camera(intrinsics=intr, pose=poses[frame])


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    from .presets import simulate

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "manifest.json", "simulate",
                   {"preset": args.preset, "frames": args.frames, "size": args.size,
                    "seed": args.seed, "out": str(out)},
                   [], [str(out / "scene.json"), str(out / "poses.json")])
    simulate(args.preset, out, n_frames=args.frames, size=args.size, seed=args.seed)
    print(f"wrote {out}/scene.json, poses.json, frames/, flows/")
    return EXIT_OK


def cmd_render(args) -> int:
    from .flow_io import save_png, write_pfm
    from .render import render

    scene = load_scene(args.scene)
    cam = _camera_from_args(args)
    out = Path(args.out)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "render",
                   {"scene": args.scene, "poses": args.poses, "frame": args.frame,
                    "camera": args.camera, "t": args.t, "out": args.out,
                    "depth_out": args.depth_out, "alpha_out": args.alpha_out},
                   [args.scene, args.poses, args.camera], [args.out])
    if args.t is not None:
        scene = sample_scene_at(scene, args.t)
    buf = render(scene, cam, backend=args.backend)
    save_png(out, buf.color)
    if args.depth_out:
        write_pfm(args.depth_out, buf.depth)
    if args.alpha_out:
        write_pfm(args.alpha_out, buf.accum_alpha)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_flow(args) -> int:
    from .flow import (FlowMap, binarize_flow, camera_flow, camera_velocity_from_poses,
                       decompose_flow, residual_term)
    from .flow_io import flow_to_image, read_flo, save_png, write_flo
    from .render import render
    from .scene import CameraVelocity

    u_path = Path(args.u)
    frame = args.frame if args.frame is not None else int(u_path.stem)
    if frame < 1:
        raise SceneError("flow decomposition needs frame >= 1 (pair is frame-1 -> frame)")
    scene_path = args.scene or str(Path(args.poses).parent / "scene.json")
    intr, times, poses, _ = load_poses(args.poses)
    dt = args.dt if args.dt is not None else float(times[frame] - times[frame - 1])
    scene = load_scene(scene_path)

    prefix = args.out_prefix
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    outs = [f"{prefix}{name}.flo" for name in ("ucam", "ugs", "delta")]
    write_manifest(Path(f"{prefix}manifest.json"), "flow",
                   {"u": args.u, "poses": args.poses, "scene": scene_path, "frame": frame,
                    "dt": dt, "tau": args.tau, "flow_sign": args.flow_sign,
                    "out_prefix": prefix},
                   [args.u, args.poses, scene_path], outs)

    u = read_flo(args.u).to_rate(dt)
    ref = sample_scene_at(scene, float(times[frame - 1])) if scene.motion else scene
    cam = Camera(intrinsics=intr, pose=poses[frame - 1])
    buf = render(ref, cam, backend=args.backend)
    vel = camera_velocity_from_poses(poses[frame - 1], poses[frame], dt)
    if args.flow_sign == "-":
        vel = CameraVelocity(v=-vel.v, omega=-vel.omega)
    u_cam = camera_flow(vel, buf.depth, intr)
    delta = residual_term(buf, vel)
    dec = decompose_flow(u, u_cam, delta)
    mag = max(float(dec.u.magnitude().max()), 1e-9)
    for name, fm in (("ucam", dec.u_cam), ("ugs", dec.u_gs), ("delta", dec.delta)):
        write_flo(f"{prefix}{name}.flo", fm.data * dt)
        save_png(f"{prefix}{name}.png", flow_to_image(fm, max_mag=mag))
    mask = binarize_flow(dec.u_gs.to_displacement(dt), tau=args.tau)
    save_png(f"{prefix}mask.png", mask.astype(np.float64)[..., None].repeat(3, axis=2))
    print(f"wrote {prefix}ucam/ugs/delta .flo+.png and mask.png")
    return EXIT_OK


def _oracle_discovery_inputs(scene, intr, times, poses, tau, backend=None):
    """Per-frame masks/buffers from the scripted scene (consecutive pairs)."""
    from .flow import FlowMap, binarize_flow
    from .render import render

    frames = []
    positions = np.empty((len(times), len(scene), 3))
    prev_state = prev_cam = None
    for k, t in enumerate(times):
        cam = Camera(intrinsics=intr, pose=poses[k])
        state = sample_scene_at(scene, float(t))
        positions[k] = state.centers
        if k > 0:
            buf = render(prev_state, prev_cam, scene_t=state, backend=backend)
            mask = binarize_flow(FlowMap(buf.gs_flow, units="px"), tau=tau)
            frames.append((prev_cam, mask, buf))
        prev_state, prev_cam = state, cam
    return frames, positions


def cmd_discover(args) -> int:
    from .discover import discover, save_clusters

    run_dir = Path(args.frames)
    poses_path = run_dir / "poses.json"
    intr, times, poses, _ = load_poses(poses_path)
    scene = load_scene(args.scene)
    out = Path(args.out)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "discover",
                   {"scene": args.scene, "frames": args.frames, "tau": args.tau,
                    "theta": args.theta, "min_samples": args.min_samples,
                    "min_cluster_size": args.min_cluster_size, "epsilon": args.epsilon,
                    "w_min": args.w_min, "out": args.out},
                   [args.scene, poses_path], [args.out])
    frames, positions = _oracle_discovery_inputs(scene, intr, times, poses, args.tau,
                                                 backend=args.backend)
    scores, dynamic, labeling, trajs, noise = discover(
        len(scene), frames, positions[0], times, positions, theta=args.theta,
        w_min=args.w_min, min_samples=args.min_samples,
        min_cluster_size=args.min_cluster_size, epsilon=args.epsilon)
    save_clusters(out, trajs, noise)
    if not trajs:
        print("no interactive objects found")
    else:
        for tr in trajs:
            print(f"cluster {tr.cluster_id}: {len(tr.members)} members")
    print(f"wrote {out}")
    return EXIT_OK


def _load_samples(run_dir: Path, holdout_every: int):
    from .flow_io import load_png, read_flo
    from .train import TrainSample

    intr, times, poses, _ = load_poses(run_dir / "poses.json")
    cams = [Camera(intrinsics=intr, pose=p) for p in poses]
    train, hold = [], []
    train_idx = [k for k in range(len(times))
                 if holdout_every <= 0 or k % holdout_every != holdout_every // 2]
    tset = set(train_idx)
    for k in range(len(times)):
        target = load_png(run_dir / "frames" / f"{k:04d}.png")
        flow = prev_cam = prev_t = None
        flo = run_dir / "flows" / f"{k:04d}.flo"
        if k > 0 and (k - 1) in tset and k in tset and flo.exists():
            flow = read_flo(flo)
            prev_cam = cams[k - 1]
            prev_t = float(times[k - 1])
        sample = TrainSample(t=float(times[k]), camera=cams[k], target=target, index=k,
                             flow=flow, prev_camera=prev_cam, prev_t=prev_t)
        (train if k in tset else hold).append(sample)
    return intr, times, cams, train, hold


def cmd_train(args) -> int:
    from .deform import save_checkpoint
    from .discover import discover, load_clusters, save_clusters
    from .losses import LossConfig
    from .train import (deformed_positions, discovery_inputs, evaluate_samples,
                        train_controllable_stage, train_deformable_stage)

    run_dir = Path(args.samples)
    scene = load_scene(args.scene)
    ckpt = Path(args.checkpoint_out)
    outputs = [str(ckpt)]
    clusters_out = Path(args.clusters_out) if args.clusters_out else ckpt.parent / "clusters.json"
    if args.stage == "both":
        outputs.append(str(clusters_out))
    write_manifest(ckpt.with_suffix(ckpt.suffix + ".manifest.json"), "train",
                   {"scene": args.scene, "samples": args.samples, "stage": args.stage,
                    "steps": args.steps, "lambda": args.lam, "beta": args.beta,
                    "lr": args.lr, "seed": args.seed, "holdout_every": args.holdout_every,
                    "hidden": args.hidden, "n_freqs": args.n_freqs,
                    "freeze_gaussians": args.freeze_gaussians,
                    "clusters": args.clusters, "checkpoint_out": str(ckpt),
                    "pipeline_tau": args.pipeline_tau, "pipeline_w_min": args.pipeline_w_min,
                    "min_traj_amplitude": args.min_traj_amplitude},
                   [args.scene, run_dir / "poses.json", args.clusters], outputs)

    intr, times, cams, train, hold = _load_samples(run_dir, args.holdout_every)
    cfg = LossConfig(lam=args.lam, beta=args.beta)
    hidden = tuple(int(x) for x in args.hidden.split(",") if x)
    metrics_rows = []

    def log_stage(tag, result):
        for m in result.metrics:
            metrics_rows.append({"stage": tag, "step": m["step"], "L_RGB": m["l_rgb"],
                                 "L_DSSIM": m["l_dssim"], "L_uGS": m["l_flow"],
                                 "PSNR": m["psnr"]})

    trajectories = None
    reference_camera = {"intrinsics": intr.to_json(), "pose": cams[0].pose.to_json()}

    if args.stage in ("deformable", "both"):
        res1 = train_deformable_stage(scene, train, args.steps, cfg=cfg, lr=args.lr,
                                      seed=args.seed, hidden=hidden, n_freqs=args.n_freqs,
                                      freeze_gaussians=args.freeze_gaussians,
                                      backend=args.backend)
        log_stage("deformable", res1)
        ev = evaluate_samples(res1.gaussians, res1.models, hold or train, backend=args.backend)
        print(f"deformable stage: holdout PSNR {ev['psnr']:.2f} dB")
        if args.stage == "deformable":
            model = res1.models.entries[0][1]
            save_checkpoint(ckpt, res1.scene(), {0: model},
                            extra={"stage": "deformable", "camera": reference_camera})
            _write_metrics(args.metrics_out, metrics_rows)
            print(f"wrote {ckpt}")
            return EXIT_OK
        positions = deformed_positions(res1, times)
        frames = discovery_inputs(res1, times, cams, tau=args.pipeline_tau,
                                  backend=args.backend)
        _, _, _, trajs, noise = discover(len(scene), frames, positions[0], times, positions,
                                         theta=args.theta, w_min=args.pipeline_w_min,
                                         min_samples=args.min_samples,
                                         min_cluster_size=args.min_cluster_size,
                                         epsilon=args.epsilon)
        trajs = [tr for tr in trajs
                 if np.linalg.norm(tr.centers - tr.centers[0], axis=1).max()
                 >= args.min_traj_amplitude]
        if not trajs:
            print("no interactive objects found; stopping after deformable stage")
            model = res1.models.entries[0][1]
            save_checkpoint(ckpt, res1.scene(), {0: model},
                            extra={"stage": "deformable", "camera": reference_camera})
            _write_metrics(args.metrics_out, metrics_rows)
            return EXIT_OK
        for i, tr in enumerate(trajs):
            tr.cluster_id = i
        save_clusters(clusters_out, trajs, noise)
        print(f"discovered {len(trajs)} interactive objects -> {clusters_out}")
        scene = res1.scene()
        trajectories = trajs

    if args.stage in ("controllable", "both"):
        if trajectories is None:
            if not args.clusters:
                raise SceneError("--stage controllable needs --clusters")
            trajectories, _ = load_clusters(args.clusters)
        res2 = train_controllable_stage(scene, trajectories, train, args.steps, cfg=cfg,
                                        lr=args.lr, seed=args.seed, hidden=hidden,
                                        n_freqs=args.n_freqs,
                                        freeze_gaussians=args.freeze_gaussians,
                                        backend=args.backend)
        log_stage("controllable", res2)
        ev = evaluate_samples(res2.gaussians, res2.models, hold or train, backend=args.backend)
        print(f"controllable stage: holdout PSNR {ev['psnr']:.2f} dB")
        models = {int(prefix[3:-1]): model for prefix, model, _ in res2.models.entries}
        save_checkpoint(ckpt, res2.scene(), models,
                        extra={"stage": "controllable", "camera": reference_camera})
        print(f"wrote {ckpt}")
    _write_metrics(args.metrics_out, metrics_rows)
    return EXIT_OK


def _write_metrics(path, rows):
    if not path or not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["stage", "step", "L_RGB", "L_DSSIM",
                                                "L_uGS", "PSNR"])
        writer.writeheader()
        writer.writerows(rows)


def _parse_command(text: str):
    k, _, vec = text.partition(":")
    parts = [float(x) for x in vec.split(",")]
    if len(parts) != 3:
        raise ValueError(f"bad --command {text!r}; want k:x,y,z")
    return int(k), np.array(parts)


def cmd_control(args) -> int:
    from .deform import control_render, load_checkpoint
    from .discover import load_clusters
    from .flow_io import save_png

    scene, models, extra = load_checkpoint(args.checkpoint)
    trajectories, _ = load_clusters(args.clusters)
    commands = [_parse_command(c) for c in args.command or []]
    out = Path(args.out)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "control",
                   {"checkpoint": args.checkpoint, "clusters": args.clusters,
                    "command": args.command or [], "camera": args.camera,
                    "poses": args.poses, "frame": args.frame, "orbit": args.orbit,
                    "out": args.out},
                   [args.checkpoint, args.clusters, args.camera, args.poses], [args.out])
    if args.camera or args.poses:
        cam = _camera_from_args(args)
    elif args.orbit:
        from .scene import orbit_pose

        ref = extra.get("camera")
        if not ref:
            raise SceneError("checkpoint has no reference camera for --orbit")
        az, el, radius = (float(x) for x in args.orbit.split(","))
        lo, hi = scene.aabb()
        cam = Camera(intrinsics=Intrinsics.from_json(ref["intrinsics"]),
                     pose=orbit_pose(0.5 * (lo + hi), az, el, radius))
    else:
        ref = extra.get("camera")
        if not ref:
            raise SceneError("checkpoint has no reference camera; pass --camera or --poses")
        cam = Camera(intrinsics=Intrinsics.from_json(ref["intrinsics"]),
                     pose=Pose.from_json(ref["pose"]))
    buffers, acks = control_render(scene, models, trajectories, commands, cam)
    save_png(out, buffers.color)
    print(json.dumps({"acks": acks}, sort_keys=True))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .train import gradcheck_fixture, gradcheck

    tg, models, sample, cfg = gradcheck_fixture()
    report = gradcheck(tg, models, sample, cfg, h=args.h)
    doc = report.to_json()
    if args.out:
        write_manifest(Path(args.out + ".manifest.json"), "gradcheck",
                       {"h": args.h, "out": args.out}, [], [args.out])
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    manifest = {
        "command": "serve",
        "config": {"checkpoint": args.checkpoint, "clusters": args.clusters,
                   "host": args.host, "port": args.port},
        "version": __version__,
        "inputs": {p: _sha256(Path(p)) for p in (args.checkpoint, args.clusters)
                   if Path(p).exists()},
        "outputs": [],
    }
    print(json.dumps(manifest, sort_keys=True))
    app = create_app(args.checkpoint, args.clusters, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="splatflow",
                description="Controllable Gaussian splatting: flow decomposition, "
                            "dynamic-object discovery, and spherical-vector control.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd")

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1,
                        help="reserved; this build always runs serially")
        sp.add_argument("--serial", action="store_true",
                        help="force deterministic serial mode (always on in this build)")
        sp.add_argument("--backend", choices=("auto", "cython", "python"), default=None,
                        help="compositing kernel backend")

    sp = sub.add_parser("simulate", help="emit a synthetic scene with frames and oracle flows")
    sp.add_argument("--preset", required=True, choices=("static", "one-object", "two-objects"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--frames", type=int, default=30)
    sp.add_argument("--size", type=int, default=64)
    common(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("render", help="render a scene to PNG (+ PFM depth/alpha)")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--poses")
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--camera", help="camera JSON: {intrinsics:..., pose:...}")
    sp.add_argument("--t", type=float, default=None, help="sample the motion script at time t")
    sp.add_argument("--out", required=True)
    sp.add_argument("--depth-out")
    sp.add_argument("--alpha-out")
    common(sp)
    sp.set_defaults(fn=cmd_render)

    sp = sub.add_parser("flow", help="decompose a measured flow into camera/dynamic parts")
    sp.add_argument("--u", required=True, help=".flo displacement flow for pair (frame-1, frame)")
    sp.add_argument("--poses", required=True)
    sp.add_argument("--scene", help="defaults to scene.json next to poses.json")
    sp.add_argument("--frame", type=int, help="defaults to the .flo filename index")
    sp.add_argument("--dt", type=float, help="pair interval seconds; defaults from poses times")
    sp.add_argument("--tau", type=float, default=0.5)
    sp.add_argument("--flow-sign", choices=("+", "-"), default="+")
    sp.add_argument("--out-prefix", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_flow)

    sp = sub.add_parser("discover", help="find interactive objects from scripted-scene flows")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--frames", required=True, help="simulate output directory")
    sp.add_argument("--tau", type=float, default=0.5)
    sp.add_argument("--theta", type=float, default=0.5)
    sp.add_argument("--w-min", type=float, default=0.05)
    sp.add_argument("--min-samples", type=int, default=5)
    sp.add_argument("--min-cluster-size", type=int, default=None)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--out", default="clusters.json")
    common(sp)
    sp.set_defaults(fn=cmd_discover)

    sp = sub.add_parser("train", help="two-stage optimization")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--samples", required=True, help="simulate output directory")
    sp.add_argument("--stage", choices=("deformable", "controllable", "both"), default="both")
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--lambda", dest="lam", type=float, default=0.8)
    sp.add_argument("--beta", type=float, default=0.5)
    sp.add_argument("--lr", type=float, default=1.6e-4)
    sp.add_argument("--checkpoint-out", required=True)
    sp.add_argument("--clusters", help="clusters.json for --stage controllable")
    sp.add_argument("--clusters-out", help="clusters.json path for --stage both")
    sp.add_argument("--metrics-out", help="CSV metrics log")
    sp.add_argument("--holdout-every", type=int, default=8,
                    help="hold out every Nth frame (0 disables)")
    sp.add_argument("--hidden", default="64,64")
    sp.add_argument("--n-freqs", type=int, default=4)
    sp.add_argument("--freeze-gaussians", action="store_true")
    sp.add_argument("--theta", type=float, default=0.5)
    sp.add_argument("--min-samples", type=int, default=5)
    sp.add_argument("--min-cluster-size", type=int, default=None)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--pipeline-tau", type=float, default=0.2,
                    help="binarization threshold for learned-motion flow maps")
    sp.add_argument("--pipeline-w-min", type=float, default=0.01,
                    help="blend-weight threshold for learned-motion back-projection")
    sp.add_argument("--min-traj-amplitude", type=float, default=0.03,
                    help="drop discovered clusters whose trajectory moves less (meters)")
    common(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("control", help="render a controlled state")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--clusters", required=True)
    sp.add_argument("--command", action="append", help="k:x,y,z (repeatable)")
    sp.add_argument("--camera")
    sp.add_argument("--poses")
    sp.add_argument("--frame", type=int, default=0)
    sp.add_argument("--orbit", help="az,el,radius orbit camera around the scene center")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_control)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the training gradients")
    sp.add_argument("--h", type=float, default=1e-4)
    sp.add_argument("--out", help="write the JSON report here")
    common(sp)
    sp.set_defaults(fn=cmd_gradcheck)

    sp = sub.add_parser("serve", help="serve the interactive viewer")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--clusters", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8731)
    sp.add_argument("--frontend", help="static frontend directory (defaults to bundled)")
    common(sp)
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not getattr(args, "cmd", None):
        parser.print_help()
        return EXIT_USAGE
    if getattr(args, "backend", None) == "auto":
        args.backend = None
    try:
        return args.fn(args)
    except (SceneError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
