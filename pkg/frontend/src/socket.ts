// Connection management: reconnect with backoff, single in-flight request with
// a coalesced pending update (last-write-wins on rapid slider drags).

import {
  BinaryFrame,
  ClientMsg,
  ServerMsg,
  decodeBinaryFrame,
  encodeClientMsg,
  parseServerMsg,
} from "./protocol.js";

// Minimal WebSocket surface so tests can substitute a fake.
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionEvents {
  onMessage(msg: ServerMsg): void;
  onFrame(frame: BinaryFrame): void;
  onStatus(connected: boolean, attempt: number): void;
}

const BACKOFF_BASE_MS = 250;
const BACKOFF_MAX_MS = 5000;

export class Connection {
  private socket: SocketLike | null = null;
  private attempt = 0;
  private closed = false;
  private inFlight = false;
  // Latest unsent update per coalescing key; replaced on rapid updates.
  private pending = new Map<string, ClientMsg>();
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private events: ConnectionEvents,
    private factory: SocketFactory,
    private schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  ) {}

  connect(): void {
    if (this.closed) return;
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.attempt = 0;
      this.events.onStatus(true, 0);
      this.inFlight = false;
      this.sendNow({ type: "hello" });
      this.flush();
    };
    sock.onclose = () => {
      this.socket = null;
      this.inFlight = false;
      this.events.onStatus(false, this.attempt);
      if (!this.closed) {
        const delay = Math.min(BACKOFF_BASE_MS * 2 ** this.attempt, BACKOFF_MAX_MS);
        this.attempt += 1;
        this.timer = this.schedule(() => this.connect(), delay);
      }
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
  }

  close(): void {
    this.closed = true;
    if (this.timer) clearTimeout(this.timer);
    this.socket?.close();
  }

  /** Queue a request; rapid updates with the same key replace the pending one. */
  request(msg: ClientMsg): void {
    const key = msg.type === "control" ? `control:${msg.k}` : msg.type;
    if (!this.socket || this.inFlight) {
      this.pending.set(key, msg);
      return;
    }
    this.inFlight = true;
    this.sendNow(msg);
  }

  /** Frames complete the in-flight request; send whatever coalesced next. */
  private handleMessage(data: unknown): void {
    if (typeof data === "string") {
      const msg = parseServerMsg(data);
      if (msg.type === "error") this.completeOne();
      this.events.onMessage(msg);
      return;
    }
    this.completeOne();
    const frame = decodeBinaryFrame(data as ArrayBuffer);
    this.events.onFrame(frame);
  }

  private completeOne(): void {
    this.inFlight = false;
    this.flush();
  }

  private flush(): void {
    if (!this.socket || this.inFlight) return;
    const next = this.pending.entries().next();
    if (next.done) return;
    const [key, msg] = next.value;
    this.pending.delete(key);
    this.inFlight = true;
    this.sendNow(msg);
  }

  private sendNow(msg: ClientMsg): void {
    this.socket?.send(encodeClientMsg(msg));
  }

  pendingCount(): number {
    return this.pending.size;
  }
}
