// Composition root: wires the connection, session state, and widgets.

import { Connection } from "./socket.js";
import { ViewerSession } from "./session.js";
import { Vec3 } from "./protocol.js";
import { ClusterPanel, FrameView, StatusBanner } from "./widgets.js";

export function startViewer(doc: Document, url?: string): void {
  const wsUrl = url ?? `ws://${doc.location.host}/ws`;
  const session = new ViewerSession();
  const banner = new StatusBanner(doc);
  const frameView = new FrameView(doc);
  const panels = new Map<number, ClusterPanel>();

  const sidebar = doc.createElement("div");
  sidebar.className = "sidebar";
  const main = doc.createElement("main");
  main.appendChild(banner.root);
  main.appendChild(frameView.root);
  main.appendChild(sidebar);
  doc.body.appendChild(main);

  const connection = new Connection(
    wsUrl,
    {
      onMessage(msg) {
        if (msg.type === "scene") {
          session.applyScene(msg);
          sidebar.textContent = "";
          panels.clear();
          for (const cluster of msg.clusters) {
            const panel = new ClusterPanel(doc, cluster, (k: number, v: Vec3) => {
              session.setRequested(k, v);
              connection.request({ type: "control", k, v });
              refresh();
            });
            panels.set(cluster.id, panel);
            sidebar.appendChild(panel.root);
          }
          refresh();
        } else if (msg.type === "ack") {
          session.applyAck(msg);
          refresh();
        } else if (msg.type === "frame") {
          session.setFrame(msg.frame_id);
        } else {
          console.warn("server error:", msg.message);
        }
      },
      onFrame(frame) {
        session.setFrame(frame.frameId);
        frameView.show(frame.frameId, frame.png);
      },
      onStatus(connected, attempt) {
        session.setConnected(connected);
        banner.set(connected, attempt);
      },
    },
    (u) => new WebSocket(u) as unknown as import("./socket.js").SocketLike,
  );

  function refresh(): void {
    for (const [k, panel] of panels) {
      const state = session.clusters.get(k);
      if (state) panel.update(state, session.snapGap(k));
    }
  }

  connection.connect();
}

declare global {
  interface Window {
    startViewer: typeof startViewer;
  }
}

if (typeof window !== "undefined") {
  window.startViewer = startViewer;
}
