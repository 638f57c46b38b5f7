import { describe, expect, it } from "vitest";

import { SteerClient, type Transport } from "../src/client.js";
import { encodeFrame, type DecodeError, type Frame } from "../src/protocol.js";

class FakeTransport implements Transport {
  sent: string[] = [];
  closed = false;
  private textCb: ((chunk: string) => void) | null = null;
  private openCb: (() => void) | null = null;
  private closeCb: (() => void) | null = null;

  send(text: string): void {
    this.sent.push(text);
  }
  close(): void {
    this.closed = true;
  }
  onText(cb: (chunk: string) => void): void {
    this.textCb = cb;
  }
  onOpen(cb: () => void): void {
    this.openCb = cb;
  }
  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  arrive(chunk: string): void {
    this.textCb?.(chunk);
  }
  open(): void {
    this.openCb?.();
  }
  drop(): void {
    this.closeCb?.();
  }
}

const snapshotLine = encodeFrame({
  kind: "snapshot",
  iteration: 9,
  circles: [0, 0.25, 0.75, 1, 0.5, 0.5],
  radius: 0.05,
  density: 0.12,
  overlapCircle: 1,
  overlapDepth: 2e-8,
  converged: false,
});

describe("SteerClient", () => {
  it("decodes frames arriving in arbitrary chunks", () => {
    const transport = new FakeTransport();
    const frames: Frame[] = [];
    new SteerClient(transport, { onFrame: (f) => frames.push(f) });
    const mid = Math.floor(snapshotLine.length / 2);
    transport.arrive(snapshotLine.slice(0, mid));
    expect(frames).toHaveLength(0);
    transport.arrive(snapshotLine.slice(mid));
    expect(frames).toHaveLength(1);
    expect(frames[0]?.kind).toBe("snapshot");
    if (frames[0]?.kind === "snapshot") {
      expect(frames[0].circles).toEqual([0, 0.25, 0.75, 1, 0.5, 0.5]);
      expect(frames[0].overlapCircle).toBe(1);
    }
  });

  it("sends nothing while only watching", () => {
    const transport = new FakeTransport();
    new SteerClient(transport, { onFrame: () => {} });
    transport.open();
    for (let i = 0; i < 200; i++) {
      transport.arrive(snapshotLine);
    }
    expect(transport.sent).toEqual([]);
  });

  it("puts exact wire lines on the transport for each helper", () => {
    const transport = new FakeTransport();
    const client = new SteerClient(transport);
    client.dragStart(4);
    client.dragMove(4, 0.5, 0.25);
    client.dragEnd(4);
    client.vacancy(0.1, 0.9);
    client.pause();
    client.resume();
    client.setParam("drag_weight", 3.5);
    expect(transport.sent).toEqual([
      '{"type":"command","cmd":"drag_start","id":4}\n',
      '{"type":"command","cmd":"drag_move","id":4,"x":0.5,"y":0.25}\n',
      '{"type":"command","cmd":"drag_end","id":4}\n',
      '{"type":"command","cmd":"vacancy","x":0.1,"y":0.9}\n',
      '{"type":"command","cmd":"pause"}\n',
      '{"type":"command","cmd":"resume"}\n',
      '{"type":"command","cmd":"set_param","key":"drag_weight","value":3.5}\n',
    ]);
  });

  it("surfaces a bad line and keeps the stream alive", () => {
    const transport = new FakeTransport();
    const frames: Frame[] = [];
    const errors: DecodeError[] = [];
    new SteerClient(transport, {
      onFrame: (f) => frames.push(f),
      onDecodeError: (e) => errors.push(e),
    });
    transport.arrive('{"type":"snapsho\n' + snapshotLine);
    expect(errors).toHaveLength(1);
    expect(errors[0]?.offset).toBe(0);
    expect(frames).toHaveLength(1);
  });

  it("reports a stream cut mid-frame on close", () => {
    const transport = new FakeTransport();
    const errors: DecodeError[] = [];
    let closed = false;
    new SteerClient(transport, {
      onDecodeError: (e) => errors.push(e),
      onClose: () => {
        closed = true;
      },
    });
    transport.arrive(snapshotLine.slice(0, 10));
    transport.drop();
    expect(closed).toBe(true);
    expect(errors).toHaveLength(1);
    expect(String(errors[0]?.message)).toMatch(/mid-frame/);
  });

  it("forwards open and clean close", () => {
    const transport = new FakeTransport();
    const events: string[] = [];
    const client = new SteerClient(transport, {
      onOpen: () => events.push("open"),
      onClose: () => events.push("close"),
    });
    transport.open();
    transport.arrive(snapshotLine);
    transport.drop();
    expect(events).toEqual(["open", "close"]);
    client.close();
    expect(transport.closed).toBe(true);
  });
});
