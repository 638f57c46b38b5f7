/**
 * Pointer and key handling. One rule decides what a press means: inside
 * a circle it is a drag, anywhere else it is a pan that becomes a
 * vacancy mark if the pointer never really moved. Commands only ever
 * leave through the sink, so no input means no bytes on the wire.
 */

import type { Command } from "./protocol.js";
import { ViewState } from "./state.js";
import { pan, screenToWorld, zoomAt } from "./transform.js";

export interface CommandSink {
  send(cmd: Command): void;
}

export interface PointerLike {
  pointerId: number;
  clientX: number;
  clientY: number;
}

/** Subset of HTMLCanvasElement the binding needs; tests fake it. */
export interface InputSurface {
  setPointerCapture?(pointerId: number): void;
  releasePointerCapture?(pointerId: number): void;
}

const DRAG_MOVE_MIN_INTERVAL_MS = 1000 / 60;
const CLICK_SLOP_PX = 4;

function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

export class InputBinding {
  private drag: { pointerId: number; circleId: number; lastSentMs: number } | null = null;
  private panning: {
    pointerId: number;
    startX: number;
    startY: number;
    lastX: number;
    lastY: number;
    moved: boolean;
  } | null = null;

  constructor(
    private readonly state: ViewState,
    private readonly sink: CommandSink,
    private readonly surface: InputSurface = {},
    private readonly nowMs: () => number = () => performance.now(),
  ) {}

  pointerDown(ev: PointerLike): void {
    if (this.drag !== null || this.panning !== null) {
      return; // single-pointer interaction model
    }
    const [wx, wy] = screenToWorld(this.state.camera, ev.clientX, ev.clientY);
    const hit = this.state.index?.pickAt(wx, wy) ?? null;
    this.surface.setPointerCapture?.(ev.pointerId);
    if (hit !== null) {
      this.drag = { pointerId: ev.pointerId, circleId: hit.id, lastSentMs: -Infinity };
      this.state.draggingId = hit.id;
      this.sink.send({ kind: "drag_start", id: hit.id });
      this.sendMove(wx, wy);
      return;
    }
    this.panning = {
      pointerId: ev.pointerId,
      startX: ev.clientX,
      startY: ev.clientY,
      lastX: ev.clientX,
      lastY: ev.clientY,
      moved: false,
    };
  }

  pointerMove(ev: PointerLike): void {
    if (this.drag !== null && ev.pointerId === this.drag.pointerId) {
      const [wx, wy] = screenToWorld(this.state.camera, ev.clientX, ev.clientY);
      this.sendMove(wx, wy);
      return;
    }
    const p = this.panning;
    if (p !== null && ev.pointerId === p.pointerId) {
      if (
        Math.abs(ev.clientX - p.startX) > CLICK_SLOP_PX ||
        Math.abs(ev.clientY - p.startY) > CLICK_SLOP_PX
      ) {
        p.moved = true;
      }
      if (p.moved) {
        this.state.camera = pan(this.state.camera, ev.clientX - p.lastX, ev.clientY - p.lastY);
      }
      p.lastX = ev.clientX;
      p.lastY = ev.clientY;
    }
  }

  /** Release anywhere ends the gesture; capture routes it here. */
  pointerUp(ev: PointerLike): void {
    if (this.drag !== null && ev.pointerId === this.drag.pointerId) {
      const [wx, wy] = screenToWorld(this.state.camera, ev.clientX, ev.clientY);
      this.sendMove(wx, wy, true);
      this.sink.send({ kind: "drag_end", id: this.drag.circleId });
      this.state.draggingId = null;
      this.drag = null;
    } else if (this.panning !== null && ev.pointerId === this.panning.pointerId) {
      if (!this.panning.moved) {
        const [wx, wy] = screenToWorld(this.state.camera, ev.clientX, ev.clientY);
        if (wx >= 0 && wx <= 1 && wy >= 0 && wy <= 1) {
          this.sink.send({ kind: "vacancy", x: wx, y: wy });
          this.state.markVacancy(wx, wy, this.nowMs());
        }
      }
      this.panning = null;
    }
    this.surface.releasePointerCapture?.(ev.pointerId);
  }

  pointerCancel(ev: PointerLike): void {
    // treat like a release so a drag never leaks past its gesture
    this.pointerUp(ev);
  }

  wheel(clientX: number, clientY: number, deltaY: number): void {
    const factor = Math.exp(-deltaY * 0.001);
    this.state.camera = zoomAt(this.state.camera, clientX, clientY, factor);
  }

  /** Space toggles pause; everything else falls through. */
  key(code: string): void {
    if (code !== "Space") {
      return;
    }
    if (this.state.paused) {
      this.sink.send({ kind: "resume" });
      this.state.paused = false;
    } else {
      this.sink.send({ kind: "pause" });
      this.state.paused = true;
    }
  }

  private sendMove(wx: number, wy: number, force = false): void {
    const d = this.drag;
    if (d === null) {
      return;
    }
    const now = this.nowMs();
    if (!force && now - d.lastSentMs < DRAG_MOVE_MIN_INTERVAL_MS) {
      return;
    }
    d.lastSentMs = now;
    // the wire rejects coordinates outside the box, so pin the cursor to it
    this.sink.send({ kind: "drag_move", id: d.circleId, x: clamp01(wx), y: clamp01(wy) });
  }
}
