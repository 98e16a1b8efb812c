import { describe, expect, it } from "vitest";
import { SceneMsg } from "../src/protocol.js";
import { ViewerSession } from "../src/session.js";

const scene: SceneMsg = {
  type: "scene",
  clusters: [
    { id: 0, n_members: 24, trajectory: [[0, 0, 0, 0], [1, 0.5, 0.2, 0]], extent: 0.54 },
    { id: 1, n_members: 20, trajectory: [[0, 0, 0, 0], [1, -0.3, 0.1, 0]], extent: 0.32 },
  ],
  image: { width: 64, height: 64 },
};

describe("viewer session", () => {
  it("lists clusters from the scene message", () => {
    const s = new ViewerSession();
    s.applyScene(scene);
    expect([...s.clusters.keys()]).toEqual([0, 1]);
    expect(s.clusters.get(0)!.info.extent).toBeCloseTo(0.54);
  });

  it("never treats a request as the applied state", () => {
    const s = new ViewerSession();
    s.applyScene(scene);
    s.setRequested(0, [0.4, 0.4, 0.4]);
    expect(s.clusters.get(0)!.applied).toBeNull();
    // Applied state arrives only via acknowledgment.
    s.applyAck({ type: "ack", k: 0, t_star: 1, v_snapped: [0.5, 0.2, 0], snap_distance: 0.3, frame_id: 42 });
    expect(s.clusters.get(0)!.applied).toEqual([0.5, 0.2, 0]);
    expect(s.clusters.get(0)!.requested).toEqual([0.4, 0.4, 0.4]);
    expect(s.lastFrameId).toBe(42);
  });

  it("surfaces the snap gap only above the visibility threshold", () => {
    const s = new ViewerSession();
    s.applyScene(scene);
    s.setRequested(0, [0.5, 0.2, 0]);
    s.applyAck({ type: "ack", k: 0, t_star: 1, v_snapped: [0.5, 0.2, 0], snap_distance: 0, frame_id: 1 });
    expect(s.snapGap(0)).toBeNull(); // exactly on the trajectory
    s.setRequested(0, [0.6, 0.2, 0]);
    expect(s.snapGap(0)).toBeCloseTo(0.1);
  });

  it("keeps the last acknowledged state across reconnects", () => {
    const s = new ViewerSession();
    s.applyScene(scene);
    s.applyAck({ type: "ack", k: 1, t_star: 0.5, v_snapped: [-0.1, 0.05, 0], snap_distance: 0, frame_id: 9 });
    s.setConnected(false);
    s.setConnected(true);
    s.applyScene(scene); // fresh scene summary on reconnect
    expect(s.clusters.get(1)!.applied).toEqual([-0.1, 0.05, 0]);
    expect(s.lastFrameId).toBe(9);
  });

  it("drops clusters that disappear from the scene", () => {
    const s = new ViewerSession();
    s.applyScene(scene);
    s.applyScene({ ...scene, clusters: scene.clusters.slice(0, 1) });
    expect([...s.clusters.keys()]).toEqual([0]);
  });
});
