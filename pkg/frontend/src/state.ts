/**
 * Client-side session state. Frames flow in, pure data updates; the
 * renderer reads it, nothing here talks back to the solver.
 */

import { CircleIndex } from "./hittest.js";
import type { Frame, Snapshot } from "./protocol.js";
import type { Camera } from "./transform.js";
import { fitBox } from "./transform.js";

export type Connection = "connecting" | "open" | "closed";

export interface VacancyMark {
  x: number;
  y: number;
  placedAtMs: number;
}

export const VACANCY_MARK_TTL_MS = 2000;

export interface Stats {
  iteration: number;
  density: number;
  overlapDepth: number;
  overlapCircle: number;
  converged: boolean;
}

export class ViewState {
  snapshot: Snapshot | null = null;
  index: CircleIndex | null = null;
  camera: Camera;
  connection: Connection = "connecting";
  draggingId: number | null = null;
  paused = false;
  lastError: string | null = null;
  marks: VacancyMark[] = [];

  constructor(viewportW: number, viewportH: number) {
    this.camera = fitBox(viewportW, viewportH);
  }

  apply(frame: Frame): void {
    if (frame.kind === "snapshot") {
      this.snapshot = frame;
      this.index = new CircleIndex(frame);
    } else if (frame.kind === "error") {
      this.lastError = frame.message;
    }
    // command frames never arrive from the service; nothing else to do
  }

  stats(): Stats | null {
    const s = this.snapshot;
    if (s === null) {
      return null;
    }
    return {
      iteration: s.iteration,
      density: s.density,
      overlapDepth: s.overlapDepth,
      overlapCircle: s.overlapCircle,
      converged: s.converged,
    };
  }

  markVacancy(x: number, y: number, nowMs: number): void {
    this.marks.push({ x, y, placedAtMs: nowMs });
  }

  /** Drop expired vacancy markers; returns the live ones. */
  liveMarks(nowMs: number): VacancyMark[] {
    this.marks = this.marks.filter((m) => nowMs - m.placedAtMs < VACANCY_MARK_TTL_MS);
    return this.marks;
  }
}
