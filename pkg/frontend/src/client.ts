/**
 * Connection plumbing: a transport hands over text chunks, frames come
 * out decoded and in order; command helpers encode and send. The client
 * originates no traffic by itself, which is what keeps an idle viewer
 * invisible to the solver.
 */

import type { Command, DecodeError, Frame } from "./protocol.js";
import { LineDecoder, encodeFrame } from "./protocol.js";

export interface Transport {
  send(text: string): void;
  close(): void;
  onText(cb: (chunk: string) => void): void;
  onOpen(cb: () => void): void;
  onClose(cb: () => void): void;
}

export interface ClientEvents {
  onFrame?(frame: Frame): void;
  onDecodeError?(error: DecodeError): void;
  onOpen?(): void;
  onClose?(): void;
}

export class SteerClient {
  private readonly decoder = new LineDecoder();

  constructor(
    private readonly transport: Transport,
    private readonly events: ClientEvents = {},
  ) {
    transport.onOpen(() => this.events.onOpen?.());
    transport.onText((chunk) => {
      for (const item of this.decoder.feed(chunk)) {
        if (item.error !== null) {
          this.events.onDecodeError?.(item.error);
        } else {
          this.events.onFrame?.(item.frame);
        }
      }
    });
    transport.onClose(() => {
      const dangling = this.decoder.end();
      if (dangling !== null) {
        this.events.onDecodeError?.(dangling);
      }
      this.events.onClose?.();
    });
  }

  send(cmd: Command): void {
    this.transport.send(encodeFrame(cmd));
  }

  dragStart(id: number): void {
    this.send({ kind: "drag_start", id });
  }

  dragMove(id: number, x: number, y: number): void {
    this.send({ kind: "drag_move", id, x, y });
  }

  dragEnd(id: number): void {
    this.send({ kind: "drag_end", id });
  }

  vacancy(x: number, y: number): void {
    this.send({ kind: "vacancy", x, y });
  }

  pause(): void {
    this.send({ kind: "pause" });
  }

  resume(): void {
    this.send({ kind: "resume" });
  }

  setParam(key: string, value: number): void {
    this.send({ kind: "set_param", key, value });
  }

  close(): void {
    this.transport.close();
  }
}

/** Browser transport over a WebSocket carrying wire frames as text. */
export function webSocketTransport(url: string): Transport {
  const ws = new WebSocket(url);
  return {
    send: (text) => ws.send(text),
    close: () => ws.close(),
    onText: (cb) => {
      ws.addEventListener("message", (ev) => {
        if (typeof ev.data === "string") {
          cb(ev.data);
        }
      });
    },
    onOpen: (cb) => ws.addEventListener("open", cb),
    onClose: (cb) => ws.addEventListener("close", cb),
  };
}
