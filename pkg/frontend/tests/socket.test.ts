import { describe, expect, it } from "vitest";
import { encodeBinaryFrame, ServerMsg } from "../src/protocol.js";
import { Connection, SocketLike } from "../src/socket.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }
  close(): void {
    this.closed = true;
  }
  open(): void {
    this.onopen?.();
  }
  reply(msg: object): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
  replyFrame(frameId: number): void {
    const bytes = encodeBinaryFrame({ frameId, png: new Uint8Array([1]) });
    this.onmessage?.({ data: bytes.buffer.slice(0) });
  }
}

function setup() {
  const sockets: FakeSocket[] = [];
  const messages: ServerMsg[] = [];
  const frames: number[] = [];
  const status: boolean[] = [];
  const scheduled: Array<() => void> = [];
  const conn = new Connection(
    "ws://test/ws",
    {
      onMessage: (m) => messages.push(m),
      onFrame: (f) => frames.push(f.frameId),
      onStatus: (c) => status.push(c),
    },
    () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    (fn) => {
      scheduled.push(fn);
      return 0 as unknown as ReturnType<typeof setTimeout>;
    },
  );
  return { conn, sockets, messages, frames, status, scheduled };
}

describe("connection", () => {
  it("sends hello on open and parses the scene reply", () => {
    const { conn, sockets, messages } = setup();
    conn.connect();
    sockets[0].open();
    expect(JSON.parse(sockets[0].sent[0])).toEqual({ type: "hello" });
    sockets[0].reply({ type: "scene", clusters: [], image: { width: 8, height: 8 } });
    expect(messages[0].type).toBe("scene");
  });

  it("coalesces rapid control updates: last write wins per cluster", () => {
    const { conn, sockets, frames } = setup();
    conn.connect();
    sockets[0].open();
    const sock = sockets[0];
    sock.sent.length = 0;

    conn.request({ type: "control", k: 0, v: [0.1, 0, 0] }); // goes out (in-flight)
    for (let i = 2; i <= 100; i++) {
      conn.request({ type: "control", k: 0, v: [0.1 * i, 0, 0] }); // coalesced
    }
    expect(sock.sent.length).toBe(1);
    expect(conn.pendingCount()).toBe(1);

    sock.reply({ type: "ack", k: 0, t_star: 0, v_snapped: [0, 0, 0], snap_distance: 0, frame_id: 1 });
    sock.replyFrame(1); // completes the in-flight request
    expect(sock.sent.length).toBe(2); // only the latest pending went out
    expect(JSON.parse(sock.sent[1]).v[0]).toBeCloseTo(10.0);
    sock.reply({ type: "ack", k: 0, t_star: 1, v_snapped: [0.5, 0, 0], snap_distance: 9.5, frame_id: 2 });
    sock.replyFrame(2);
    expect(conn.pendingCount()).toBe(0);
    expect(frames).toEqual([1, 2]);
  });

  it("tracks separate pending slots per cluster and for the camera", () => {
    const { conn, sockets } = setup();
    conn.connect();
    sockets[0].open();
    const sock = sockets[0];
    sock.sent.length = 0;
    conn.request({ type: "control", k: 0, v: [1, 0, 0] });
    conn.request({ type: "control", k: 1, v: [2, 0, 0] });
    conn.request({ type: "camera", azimuth: 0, elevation: 0, radius: 3 });
    conn.request({ type: "control", k: 1, v: [3, 0, 0] }); // replaces cluster 1 slot
    expect(sock.sent.length).toBe(1);
    expect(conn.pendingCount()).toBe(2);
    sock.replyFrame(1);
    sock.replyFrame(2);
    sock.replyFrame(3);
    expect(sock.sent.length).toBe(3);
    const second = JSON.parse(sock.sent[1]);
    expect(second.k).toBe(1);
    expect(second.v[0]).toBe(3);
  });

  it("reconnects with backoff after a close", () => {
    const { conn, sockets, status, scheduled } = setup();
    conn.connect();
    sockets[0].open();
    sockets[0].onclose?.();
    expect(status).toEqual([true, false]);
    expect(scheduled.length).toBe(1);
    scheduled[0]();
    expect(sockets.length).toBe(2);
    sockets[1].open();
    expect(status).toEqual([true, false, true]);
  });

  it("errors complete the in-flight slot so the queue drains", () => {
    const { conn, sockets } = setup();
    conn.connect();
    sockets[0].open();
    const sock = sockets[0];
    sock.sent.length = 0;
    conn.request({ type: "control", k: 0, v: [1, 0, 0] });
    conn.request({ type: "control", k: 0, v: [2, 0, 0] });
    sock.reply({ type: "error", message: "unknown cluster 0" });
    expect(sock.sent.length).toBe(2);
  });
});
