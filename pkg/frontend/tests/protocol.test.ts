import { describe, expect, it } from "vitest";
import {
  decodeBinaryFrame,
  encodeBinaryFrame,
  encodeClientMsg,
  parseServerMsg,
  vecDistance,
} from "../src/protocol.js";

describe("protocol codec", () => {
  it("round-trips binary frames", () => {
    const png = new Uint8Array([0x89, 0x50, 0x4e, 0x47, 1, 2, 3]);
    const bytes = encodeBinaryFrame({ frameId: 0xdeadbeef, png });
    const frame = decodeBinaryFrame(bytes);
    expect(frame.frameId).toBe(0xdeadbeef);
    expect([...frame.png]).toEqual([...png]);
  });

  it("reads the frame id little-endian", () => {
    const bytes = new Uint8Array([0x01, 0x00, 0x00, 0x00, 0xaa]);
    expect(decodeBinaryFrame(bytes).frameId).toBe(1);
  });

  it("rejects truncated binary frames", () => {
    expect(() => decodeBinaryFrame(new Uint8Array([1, 2]))).toThrow(/too short/);
  });

  it("parses server messages and rejects garbage", () => {
    const msg = parseServerMsg('{"type":"ack","k":0,"t_star":0.5,"v_snapped":[0,0,0],"snap_distance":0,"frame_id":7}');
    expect(msg.type).toBe("ack");
    expect(() => parseServerMsg("[1,2,3]")).toThrow(/malformed/);
    expect(() => parseServerMsg("{}")).toThrow(/malformed/);
  });

  it("encodes client messages as JSON", () => {
    expect(JSON.parse(encodeClientMsg({ type: "control", k: 1, v: [1, 2, 3] }))).toEqual({
      type: "control",
      k: 1,
      v: [1, 2, 3],
    });
  });

  it("computes snap distances", () => {
    expect(vecDistance([0, 0, 0], [3, 4, 0])).toBeCloseTo(5);
  });
});
