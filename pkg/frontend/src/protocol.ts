// Wire protocol for the viewer WebSocket: JSON text messages plus binary
// frames of a 4-byte little-endian frame id followed by PNG bytes.

export type Vec3 = [number, number, number];

export interface ClusterInfo {
  id: number;
  n_members: number;
  // [t, x, y, z] control-vector samples relative to the rest state.
  trajectory: [number, number, number, number][];
  extent: number;
}

export interface SceneMsg {
  type: "scene";
  clusters: ClusterInfo[];
  image: { width: number; height: number };
}

export interface AckMsg {
  type: "ack";
  k: number;
  t_star: number;
  v_snapped: Vec3;
  snap_distance: number;
  frame_id: number;
}

export interface FrameMsg {
  type: "frame";
  frame_id: number;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg = SceneMsg | AckMsg | FrameMsg | ErrorMsg;

export type ClientMsg =
  | { type: "hello" }
  | { type: "control"; k: number; v: Vec3 }
  | { type: "camera"; azimuth: number; elevation: number; radius: number };

export interface BinaryFrame {
  frameId: number;
  png: Uint8Array;
}

export function parseServerMsg(text: string): ServerMsg {
  const msg = JSON.parse(text);
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new Error(`malformed server message: ${text}`);
  }
  return msg as ServerMsg;
}

export function encodeClientMsg(msg: ClientMsg): string {
  return JSON.stringify(msg);
}

export function decodeBinaryFrame(data: ArrayBuffer | Uint8Array): BinaryFrame {
  const bytes = data instanceof Uint8Array ? data : new Uint8Array(data);
  if (bytes.byteLength < 4) {
    throw new Error(`binary frame too short: ${bytes.byteLength} bytes`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  return { frameId: view.getUint32(0, true), png: bytes.slice(4) };
}

export function encodeBinaryFrame(frame: BinaryFrame): Uint8Array {
  const out = new Uint8Array(4 + frame.png.byteLength);
  new DataView(out.buffer).setUint32(0, frame.frameId, true);
  out.set(frame.png, 4);
  return out;
}

export function vecDistance(a: Vec3, b: Vec3): number {
  return Math.hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
}
