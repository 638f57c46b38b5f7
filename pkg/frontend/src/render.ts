/**
 * Immediate-mode canvas renderer. Reads ViewState, draws one frame,
 * mutates nothing. Steering happens elsewhere; this is a pure view.
 */

import { ViewState } from "./state.js";
import { screenToWorld, worldToScreen } from "./transform.js";

/** The slice of CanvasRenderingContext2D the renderer uses (stubable). */
export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

const COLORS = {
  background: "#10141a",
  box: "#8899aa",
  circleFill: "#2d5e8f",
  circleEdge: "#9cc4e8",
  contact: "#4d6a84",
  distressed: "#e8743c",
  dragged: "#f0d44c",
  mark: "#6fd08c",
  text: "#d7dde4",
  textDim: "#7d8894",
};

export interface RenderInfo {
  circlesDrawn: number;
  contactLines: number;
}

/**
 * Draw one frame. Returns what was drawn, or null when there is no
 * snapshot yet (the frame is skipped, only the backdrop is painted).
 */
export function render(
  ctx: Draw2D,
  state: ViewState,
  viewportW: number,
  viewportH: number,
  nowMs: number,
): RenderInfo | null {
  ctx.globalAlpha = 1;
  ctx.fillStyle = COLORS.background;
  ctx.fillRect(0, 0, viewportW, viewportH);

  const snap = state.snapshot;
  const index = state.index;
  if (snap === null || index === null) {
    drawStatusLine(ctx, state, viewportH);
    return null;
  }
  const cam = state.camera;

  const [bx0, by1] = worldToScreen(cam, 0, 0);
  const [bx1, by0] = worldToScreen(cam, 1, 1);
  ctx.strokeStyle = COLORS.box;
  ctx.lineWidth = 1.5;
  ctx.strokeRect(bx0, by0, bx1 - bx0, by1 - by0);

  // world rectangle the viewport sees, for culling
  const [wx0, wy1] = screenToWorld(cam, 0, 0);
  const [wx1, wy0] = screenToWorld(cam, viewportW, viewportH);
  const view = { x0: wx0, y0: wy0, x1: wx1, y1: wy1 };

  const rPx = snap.radius * cam.scale;
  const r = snap.radius;

  let contactLines = 0;
  ctx.strokeStyle = COLORS.contact;
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (const [i, j] of index.contactPairs(view)) {
    const [ax, ay] = worldToScreen(cam, index.x(i), index.y(i));
    const [bx, by] = worldToScreen(cam, index.x(j), index.y(j));
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    contactLines++;
  }
  ctx.stroke();

  let circlesDrawn = 0;
  for (let i = 0; i < index.count; i++) {
    const x = index.x(i);
    const y = index.y(i);
    if (x + r < view.x0 || x - r > view.x1 || y + r < view.y0 || y - r > view.y1) {
      continue;
    }
    const [sx, sy] = worldToScreen(cam, x, y);
    ctx.beginPath();
    ctx.arc(sx, sy, rPx, 0, Math.PI * 2);
    ctx.fillStyle = COLORS.circleFill;
    ctx.fill();
    const id = index.id(i);
    if (id === state.draggingId) {
      ctx.strokeStyle = COLORS.dragged;
      ctx.lineWidth = 2.5;
    } else if (id === snap.overlapCircle && snap.overlapDepth > 0) {
      ctx.strokeStyle = COLORS.distressed;
      ctx.lineWidth = 2.5;
    } else {
      ctx.strokeStyle = COLORS.circleEdge;
      ctx.lineWidth = 1;
    }
    ctx.stroke();
    circlesDrawn++;
  }

  for (const mark of state.liveMarks(nowMs)) {
    const [sx, sy] = worldToScreen(cam, mark.x, mark.y);
    const age = (nowMs - mark.placedAtMs) / 2000;
    ctx.globalAlpha = Math.max(0, 1 - age);
    ctx.strokeStyle = COLORS.mark;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(sx, sy, rPx * (0.6 + age), 0, Math.PI * 2);
    ctx.stroke();
    ctx.globalAlpha = 1;
  }

  drawStatusLine(ctx, state, viewportH);
  return { circlesDrawn, contactLines };
}

function drawStatusLine(ctx: Draw2D, state: ViewState, viewportH: number): void {
  ctx.font = "13px system-ui, sans-serif";
  const stats = state.stats();
  ctx.fillStyle = COLORS.text;
  const parts: string[] = [];
  if (stats !== null) {
    parts.push(
      `iter ${stats.iteration}`,
      `density ${stats.density.toFixed(3)}`,
      `overlap ${stats.overlapDepth.toExponential(2)}`,
      stats.converged ? "converged" : "running",
    );
  }
  if (state.paused) {
    parts.push("paused");
  }
  parts.push(state.connection);
  ctx.fillText(parts.join("   "), 12, viewportH - 12);
  if (state.lastError !== null) {
    ctx.fillStyle = COLORS.textDim;
    ctx.fillText(`service: ${state.lastError}`, 12, viewportH - 30);
  }
}
