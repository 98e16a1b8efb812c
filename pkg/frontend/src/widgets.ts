// DOM widgets: per-cluster slider trio with a trajectory-path preview, the
// frame canvas, and the connection banner. Valid control states live on the
// trajectory, so the preview draws that manifold and both the requested and
// snapped markers.

import { ClusterInfo, Vec3 } from "./protocol.js";
import { ClusterState } from "./session.js";

const AXES = ["x", "y", "z"] as const;

export class ClusterPanel {
  readonly root: HTMLElement;
  private sliders: HTMLInputElement[] = [];
  private readouts: HTMLElement[] = [];
  private snapLabel: HTMLElement;
  private svg: SVGSVGElement;
  private requestedDot: SVGCircleElement;
  private snappedDot: SVGCircleElement;
  private pathScale = 1;

  constructor(
    doc: Document,
    info: ClusterInfo,
    private onChange: (k: number, v: Vec3) => void,
  ) {
    this.root = doc.createElement("section");
    this.root.className = "cluster";
    const title = doc.createElement("h3");
    title.textContent = `object ${info.id} (${info.n_members} splats)`;
    this.root.appendChild(title);

    const limit = Math.max(info.extent * 1.25, 1e-3);
    for (let axis = 0; axis < 3; axis++) {
      const row = doc.createElement("label");
      row.className = "slider-row";
      row.textContent = `v${AXES[axis]} `;
      const slider = doc.createElement("input");
      slider.type = "range";
      slider.min = (-limit).toString();
      slider.max = limit.toString();
      slider.step = (limit / 200).toString();
      slider.value = "0";
      slider.addEventListener("input", () => {
        this.onChange(info.id, this.value());
      });
      const readout = doc.createElement("span");
      readout.className = "readout";
      readout.textContent = "0.000";
      row.appendChild(slider);
      row.appendChild(readout);
      this.root.appendChild(row);
      this.sliders.push(slider);
      this.readouts.push(readout);
    }

    this.snapLabel = doc.createElement("div");
    this.snapLabel.className = "snap-label";
    this.root.appendChild(this.snapLabel);

    this.svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
    this.svg.setAttribute("viewBox", "-1.1 -1.1 2.2 2.2");
    this.svg.setAttribute("class", "trajectory");
    this.pathScale = limit;
    const poly = doc.createElementNS("http://www.w3.org/2000/svg", "polyline");
    poly.setAttribute(
      "points",
      info.trajectory.map(([, x, y]) => `${x / limit},${y / limit}`).join(" "),
    );
    poly.setAttribute("class", "trajectory-path");
    this.svg.appendChild(poly);
    this.requestedDot = doc.createElementNS("http://www.w3.org/2000/svg", "circle");
    this.requestedDot.setAttribute("r", "0.05");
    this.requestedDot.setAttribute("class", "requested-dot");
    this.snappedDot = doc.createElementNS("http://www.w3.org/2000/svg", "circle");
    this.snappedDot.setAttribute("r", "0.05");
    this.snappedDot.setAttribute("class", "snapped-dot");
    this.svg.appendChild(this.requestedDot);
    this.svg.appendChild(this.snappedDot);
    this.root.appendChild(this.svg);
  }

  value(): Vec3 {
    return this.sliders.map((s) => parseFloat(s.value)) as Vec3;
  }

  update(state: ClusterState, snapGap: number | null): void {
    for (let axis = 0; axis < 3; axis++) {
      this.readouts[axis].textContent = state.requested[axis].toFixed(3);
    }
    this.requestedDot.setAttribute("cx", (state.requested[0] / this.pathScale).toString());
    this.requestedDot.setAttribute("cy", (state.requested[1] / this.pathScale).toString());
    if (state.applied) {
      this.snappedDot.setAttribute("cx", (state.applied[0] / this.pathScale).toString());
      this.snappedDot.setAttribute("cy", (state.applied[1] / this.pathScale).toString());
      const t = state.tStar !== null ? state.tStar.toFixed(3) : "?";
      this.snapLabel.textContent =
        snapGap !== null
          ? `snapped to t*=${t}, gap ${snapGap.toFixed(4)} m`
          : `on trajectory at t*=${t}`;
      this.snapLabel.classList.toggle("snap-gap", snapGap !== null);
    } else {
      this.snapLabel.textContent = "no state applied yet";
    }
  }
}

export class FrameView {
  readonly root: HTMLElement;
  private img: HTMLImageElement;
  private label: HTMLElement;
  private lastUrl: string | null = null;

  constructor(doc: Document) {
    this.root = doc.createElement("div");
    this.root.className = "frame-view";
    this.img = doc.createElement("img");
    this.img.alt = "rendered frame";
    this.label = doc.createElement("div");
    this.label.className = "frame-label";
    this.root.appendChild(this.img);
    this.root.appendChild(this.label);
  }

  show(frameId: number, png: Uint8Array): void {
    const blob = new Blob([png.buffer.slice(png.byteOffset, png.byteOffset + png.byteLength) as ArrayBuffer], { type: "image/png" });
    const url = URL.createObjectURL(blob);
    if (this.lastUrl) URL.revokeObjectURL(this.lastUrl);
    this.lastUrl = url;
    this.img.src = url;
    this.label.textContent = `frame ${frameId.toString(16).padStart(8, "0")}`;
  }
}

export class StatusBanner {
  readonly root: HTMLElement;

  constructor(doc: Document) {
    this.root = doc.createElement("div");
    this.root.className = "status-banner";
    this.set(false, 0);
  }

  set(connected: boolean, attempt: number): void {
    this.root.textContent = connected
      ? "connected"
      : attempt > 0
        ? `disconnected, retrying (attempt ${attempt})`
        : "disconnected";
    this.root.classList.toggle("connected", connected);
  }
}
