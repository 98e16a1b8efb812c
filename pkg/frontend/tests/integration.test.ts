// End-to-end tests against the real Python server: frame parity with the CLI
// renderer and last-write-wins robustness under rapid updates.
//
// The fixture pipeline (simulate -> discover -> short train -> serve) runs in
// beforeAll via the CLI; set SPLATFLOW_PYTHON to override the interpreter.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import WebSocket from "ws";
import { AckMsg, SceneMsg, decodeBinaryFrame, parseServerMsg } from "../src/protocol.js";

const PY = process.env.SPLATFLOW_PYTHON ?? "python3";
const PORT = 8931 + Math.floor(Math.random() * 500);
const URL = `ws://127.0.0.1:${PORT}/ws`;

let runDir: string;
let server: ChildProcess | null = null;

function cli(args: string[]): string {
  return execFileSync(PY, ["-m", "splatflow.cli", ...args], {
    encoding: "utf8",
    stdio: ["ignore", "pipe", "pipe"],
  });
}

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const res = await fetch(`http://127.0.0.1:${PORT}/`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("server did not come up");
}

interface Client {
  ws: WebSocket;
  scene: SceneMsg;
  send(msg: object): void;
  nextText(): Promise<ReturnType<typeof parseServerMsg>>;
  nextBinary(): Promise<Uint8Array>;
  close(): void;
}

async function connectClient(): Promise<Client> {
  const ws = new WebSocket(URL);
  const texts: string[] = [];
  const binaries: Uint8Array[] = [];
  const waiters: Array<() => void> = [];
  ws.on("message", (data, isBinary) => {
    if (isBinary) binaries.push(new Uint8Array(data as Buffer));
    else texts.push(data.toString());
    waiters.splice(0).forEach((w) => w());
  });
  await new Promise<void>((resolve, reject) => {
    ws.once("open", () => resolve());
    ws.once("error", reject);
  });
  const wait = async (check: () => boolean) => {
    while (!check()) {
      await new Promise<void>((r) => {
        const t = setTimeout(r, 50);
        waiters.push(() => {
          clearTimeout(t);
          r();
        });
      });
    }
  };
  const client: Client = {
    ws,
    scene: undefined as unknown as SceneMsg,
    send: (msg) => ws.send(JSON.stringify(msg)),
    nextText: async () => {
      await wait(() => texts.length > 0);
      return parseServerMsg(texts.shift()!);
    },
    nextBinary: async () => {
      await wait(() => binaries.length > 0);
      return binaries.shift()!;
    },
    close: () => ws.close(),
  };
  client.send({ type: "hello" });
  client.scene = (await client.nextText()) as SceneMsg;
  return client;
}

beforeAll(async () => {
  runDir = mkdtempSync(join(tmpdir(), "splatflow-viewer-"));
  cli(["simulate", "--preset", "two-objects", "--out", runDir, "--frames", "8", "--size", "48"]);
  cli(["discover", "--scene", join(runDir, "scene.json"), "--frames", runDir,
       "--out", join(runDir, "clusters.json")]);
  cli(["train", "--scene", join(runDir, "scene.json"), "--samples", runDir,
       "--stage", "controllable", "--clusters", join(runDir, "clusters.json"),
       "--steps", "25", "--holdout-every", "0",
       "--checkpoint-out", join(runDir, "ckpt.bin")]);
  server = spawn(PY, ["-m", "splatflow.cli", "serve",
                      "--checkpoint", join(runDir, "ckpt.bin"),
                      "--clusters", join(runDir, "clusters.json"),
                      "--port", String(PORT)],
                 { stdio: ["ignore", "pipe", "pipe"] });
  await waitForServer();
});

afterAll(() => {
  server?.kill();
  rmSync(runDir, { recursive: true, force: true });
});

describe("viewer against the live server", () => {
  it("hello returns the cluster list with trajectory extents", async () => {
    const client = await connectClient();
    expect(client.scene.type).toBe("scene");
    expect(client.scene.clusters.length).toBeGreaterThanOrEqual(1);
    for (const c of client.scene.clusters) {
      expect(c.trajectory.length).toBeGreaterThan(1);
      expect(c.extent).toBeGreaterThan(0);
    }
    client.close();
  });

  it("frames are pixel-identical to the CLI renderer for 5 (camera, control) pairs", async () => {
    const pairs = [
      { orbit: [0.0, 0.0, 3.0], v: [0.0, 0.0, 0.0] },
      { orbit: [0.25, 0.1, 3.2], v: [0.2, 0.08, 0.0] },
      { orbit: [-0.2, 0.05, 2.8], v: [0.45, 0.18, 0.0] },
      { orbit: [0.1, -0.1, 3.5], v: [0.1, 0.2, 0.3] },
      { orbit: [0.4, 0.2, 3.0], v: [-0.3, 0.0, 0.1] },
    ];
    for (const pair of pairs) {
      const client = await connectClient();
      const k = client.scene.clusters[0].id;
      const out = join(runDir, "parity.png");
      cli(["control", "--checkpoint", join(runDir, "ckpt.bin"),
           "--clusters", join(runDir, "clusters.json"),
           `--command=${k}:${pair.v.join(",")}`,
           `--orbit=${pair.orbit.join(",")}`, "--out", out]);
      const expected = readFileSync(out);

      client.send({ type: "camera", azimuth: pair.orbit[0], elevation: pair.orbit[1], radius: pair.orbit[2] });
      client.send({ type: "control", k, v: pair.v });
      // Collect binaries until the state includes both updates; the ack for
      // the control carries the final frame id.
      let ack: AckMsg | null = null;
      while (!ack) {
        const msg = await client.nextText();
        if (msg.type === "ack" && msg.k === k) ack = msg;
      }
      let frame = decodeBinaryFrame(await client.nextBinary());
      while (frame.frameId !== ack.frame_id) {
        frame = decodeBinaryFrame(await client.nextBinary());
      }
      expect(Buffer.from(frame.png).equals(expected)).toBe(true);

      // Snapping must be visible whenever the request is off the trajectory.
      const snapGap = Math.hypot(
        ack.v_snapped[0] - pair.v[0],
        ack.v_snapped[1] - pair.v[1],
        ack.v_snapped[2] - pair.v[2],
      );
      expect(Math.abs(snapGap - ack.snap_distance)).toBeLessThan(1e-9);
      client.close();
    }
  });

  it("100 rapid updates settle to the last request in under 2 seconds", async () => {
    const client = await connectClient();
    const k = client.scene.clusters[0].id;
    const start = Date.now();
    let last: number[] = [];
    for (let i = 1; i <= 100; i++) {
      last = [0.005 * i, 0.002 * i, 0.0];
      client.send({ type: "control", k, v: last });
    }
    // Ask the CLI-side truth: the snap of the last request.
    let finalAck: AckMsg | null = null;
    while (true) {
      const msg = await Promise.race([
        client.nextText(),
        new Promise<null>((r) => setTimeout(() => r(null), 2500)),
      ]);
      if (msg === null) break;
      if (msg.type === "ack" && msg.k === k) finalAck = msg as AckMsg;
    }
    const elapsed = Date.now() - start;
    expect(finalAck).not.toBeNull();
    expect(elapsed).toBeLessThan(2000 + 2500); // settle + the final poll window
    // The acknowledged state must be the snap of the LAST request: snapping
    // the last request again client-side must give the same trajectory point.
    const best = nearestOnTrajectory(client.scene, k, last);
    expect(finalAck!.t_star).toBeCloseTo(best.t, 9);
    expect(finalAck!.v_snapped[0]).toBeCloseTo(best.v[0], 9);
    expect(finalAck!.v_snapped[1]).toBeCloseTo(best.v[1], 9);
    client.close();
  });
});

function nearestOnTrajectory(scene: SceneMsg, k: number, v: number[]) {
  const cluster = scene.clusters.find((c) => c.id === k)!;
  let best = { t: 0, v: [0, 0, 0] as number[], d: Infinity };
  for (const [t, x, y, z] of cluster.trajectory) {
    const d = Math.hypot(x - v[0], y - v[1], z - v[2]);
    if (d < best.d) best = { t, v: [x, y, z], d };
  }
  return best;
}
