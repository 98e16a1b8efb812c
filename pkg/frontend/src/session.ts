// Viewer session state. The applied control state comes only from server
// acknowledgments; user input is tracked separately as the requested state so
// snapping is always visible.

import { AckMsg, ClusterInfo, SceneMsg, Vec3, vecDistance } from "./protocol.js";

export const SNAP_VISIBLE_THRESHOLD = 1e-6;

export interface ClusterState {
  info: ClusterInfo;
  requested: Vec3;
  applied: Vec3 | null; // last acknowledged snapped vector
  tStar: number | null;
  snapDistance: number;
}

export interface SessionSnapshot {
  connected: boolean;
  clusters: ClusterState[];
  lastFrameId: number | null;
  imageSize: { width: number; height: number } | null;
}

export class ViewerSession {
  connected = false;
  clusters = new Map<number, ClusterState>();
  lastFrameId: number | null = null;
  imageSize: { width: number; height: number } | null = null;

  applyScene(msg: SceneMsg): void {
    this.imageSize = msg.image;
    const seen = new Set<number>();
    for (const info of msg.clusters) {
      seen.add(info.id);
      const existing = this.clusters.get(info.id);
      if (existing) {
        existing.info = info;
      } else {
        this.clusters.set(info.id, {
          info,
          requested: [0, 0, 0],
          applied: null,
          tStar: null,
          snapDistance: 0,
        });
      }
    }
    for (const id of [...this.clusters.keys()]) {
      if (!seen.has(id)) this.clusters.delete(id);
    }
  }

  setRequested(k: number, v: Vec3): void {
    const cluster = this.clusters.get(k);
    if (!cluster) throw new Error(`unknown cluster ${k}`);
    cluster.requested = [...v] as Vec3;
  }

  applyAck(msg: AckMsg): void {
    const cluster = this.clusters.get(msg.k);
    if (!cluster) return;
    cluster.applied = [...msg.v_snapped] as Vec3;
    cluster.tStar = msg.t_star;
    cluster.snapDistance = msg.snap_distance;
    this.lastFrameId = msg.frame_id;
  }

  setFrame(frameId: number): void {
    this.lastFrameId = frameId;
  }

  setConnected(connected: boolean): void {
    this.connected = connected;
  }

  /** Snap gap worth surfacing in the UI (requested differs from applied). */
  snapGap(k: number): number | null {
    const cluster = this.clusters.get(k);
    if (!cluster || cluster.applied === null) return null;
    const gap = vecDistance(cluster.requested, cluster.applied);
    return gap > SNAP_VISIBLE_THRESHOLD ? gap : null;
  }

  snapshot(): SessionSnapshot {
    return {
      connected: this.connected,
      clusters: [...this.clusters.values()],
      lastFrameId: this.lastFrameId,
      imageSize: this.imageSize,
    };
  }
}
