/**
 * Spatial hash over one snapshot's circles: constant-time point picks
 * and near-pair enumeration without touching the quadratic pair set.
 */

import type { Snapshot } from "./protocol.js";

export interface Pick {
  id: number;
  x: number;
  y: number;
}

export const CONTACT_SLACK = 1e-4;

function clampCell(c: number): number {
  return Math.min(0xffff, Math.max(0, c));
}

export class CircleIndex {
  private readonly cell: number;
  private readonly buckets = new Map<number, number[]>(); // key -> triple indexes
  readonly count: number;

  constructor(private readonly snapshot: Snapshot) {
    // bucket at the full contact distance so near-pair scans never have
    // to look past the 3x3 neighborhood
    this.cell = Math.max(snapshot.radius * 2 + CONTACT_SLACK, 1e-6);
    this.count = Math.floor(snapshot.circles.length / 3);
    for (let i = 0; i < this.count; i++) {
      const key = this.keyFor(this.x(i), this.y(i));
      const bucket = this.buckets.get(key);
      if (bucket === undefined) {
        this.buckets.set(key, [i]);
      } else {
        bucket.push(i);
      }
    }
  }

  private keyFor(x: number, y: number): number {
    // interleave-free packing; coordinates live in [0, 1] so 16 bits per
    // axis is far more cells than circles
    return clampCell(Math.floor(x / this.cell)) * 0x10000 + clampCell(Math.floor(y / this.cell));
  }

  x(i: number): number {
    return this.snapshot.circles[3 * i + 1] as number;
  }

  y(i: number): number {
    return this.snapshot.circles[3 * i + 2] as number;
  }

  id(i: number): number {
    return this.snapshot.circles[3 * i] as number;
  }

  private *near(x: number, y: number): Iterable<number> {
    const cx = Math.floor(x / this.cell);
    const cy = Math.floor(y / this.cell);
    // clamping can fold the two outermost columns or rows into one at the
    // box edge; dedupe so no bucket is visited (and no pair seen) twice
    const cols = new Set([clampCell(cx - 1), clampCell(cx), clampCell(cx + 1)]);
    const rows = new Set([clampCell(cy - 1), clampCell(cy), clampCell(cy + 1)]);
    for (const col of cols) {
      for (const row of rows) {
        const bucket = this.buckets.get(col * 0x10000 + row);
        if (bucket !== undefined) {
          yield* bucket;
        }
      }
    }
  }

  /** The circle containing the point, nearest center winning; null if none. */
  pickAt(x: number, y: number): Pick | null {
    const r = this.snapshot.radius;
    let best: number | null = null;
    let bestD2 = r * r;
    for (const i of this.near(x, y)) {
      const dx = this.x(i) - x;
      const dy = this.y(i) - y;
      const d2 = dx * dx + dy * dy;
      if (d2 <= bestD2) {
        best = i;
        bestD2 = d2;
      }
    }
    if (best === null) {
      return null;
    }
    return { id: this.id(best), x: this.x(best), y: this.y(best) };
  }

  /**
   * Index pairs (i < j) of circles whose centers sit within
   * 2r + slack, i.e. touching or overlapping. Restricted to circles
   * intersecting the given world-space rectangle when one is passed, so
   * an off-screen crowd costs nothing to draw.
   */
  contactPairs(view?: {
    x0: number;
    y0: number;
    x1: number;
    y1: number;
  }): Array<[number, number]> {
    const r = this.snapshot.radius;
    const limit = 2 * r + CONTACT_SLACK;
    const limit2 = limit * limit;
    const out: Array<[number, number]> = [];
    for (let i = 0; i < this.count; i++) {
      const xi = this.x(i);
      const yi = this.y(i);
      if (
        view !== undefined &&
        (xi + r < view.x0 || xi - r > view.x1 || yi + r < view.y0 || yi - r > view.y1)
      ) {
        continue;
      }
      for (const j of this.near(xi, yi)) {
        if (j <= i) {
          continue;
        }
        const dx = this.x(j) - xi;
        const dy = this.y(j) - yi;
        if (dx * dx + dy * dy <= limit2) {
          out.push([i, j]);
        }
      }
    }
    return out;
  }
}
