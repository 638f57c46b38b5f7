import { describe, expect, it } from "vitest";

import type { Snapshot } from "../src/protocol.js";
import { render, type Draw2D } from "../src/render.js";
import { ViewState } from "../src/state.js";

class StubDraw implements Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 0;
  font = "";
  globalAlpha = 1;

  arcs = 0;
  segments = 0;
  fillRects = 0;
  strokeRects = 0;
  strokeStyles: string[] = [];
  texts: string[] = [];

  beginPath(): void {}
  arc(): void {
    this.arcs++;
  }
  moveTo(): void {}
  lineTo(): void {
    this.segments++;
  }
  fill(): void {}
  stroke(): void {
    this.strokeStyles.push(String(this.strokeStyle));
  }
  fillRect(): void {
    this.fillRects++;
  }
  strokeRect(): void {
    this.strokeRects++;
  }
  fillText(text: string): void {
    this.texts.push(text);
  }
}

function snap(circles: number[], extra: Partial<Snapshot> = {}): Snapshot {
  return {
    kind: "snapshot",
    iteration: 3,
    circles,
    radius: 0.05,
    density: 0.15,
    overlapCircle: -1,
    overlapDepth: 0,
    converged: false,
    ...extra,
  };
}

function freshState(): ViewState {
  return new ViewState(500, 500);
}

describe("render", () => {
  it("skips the frame when no snapshot has arrived", () => {
    const ctx = new StubDraw();
    const info = render(ctx, freshState(), 500, 500, 0);
    expect(info).toBeNull();
    expect(ctx.fillRects).toBe(1); // backdrop only
    expect(ctx.arcs).toBe(0);
    expect(ctx.strokeRects).toBe(0);
    expect(ctx.texts.join(" ")).toContain("connecting");
  });

  it("draws just the box for an empty snapshot", () => {
    const ctx = new StubDraw();
    const state = freshState();
    state.apply(snap([]));
    const info = render(ctx, state, 500, 500, 0);
    expect(info).toEqual({ circlesDrawn: 0, contactLines: 0 });
    expect(ctx.strokeRects).toBe(1);
    expect(ctx.arcs).toBe(0);
  });

  it("draws circles and one contact line for a tangent pair", () => {
    const ctx = new StubDraw();
    const state = freshState();
    state.apply(snap([0, 0.45, 0.5, 1, 0.55, 0.5]));
    const info = render(ctx, state, 500, 500, 0);
    expect(info).toEqual({ circlesDrawn: 2, contactLines: 1 });
    expect(ctx.arcs).toBe(2);
    expect(ctx.segments).toBe(1);
  });

  it("leaves separated circles unconnected", () => {
    const ctx = new StubDraw();
    const state = freshState();
    state.apply(snap([0, 0.2, 0.2, 1, 0.8, 0.8]));
    const info = render(ctx, state, 500, 500, 0);
    expect(info).toEqual({ circlesDrawn: 2, contactLines: 0 });
  });

  it("gives the deepest-overlap circle its own edge color only when distressed", () => {
    const calm = new StubDraw();
    const stateCalm = freshState();
    stateCalm.apply(snap([0, 0.3, 0.5, 1, 0.7, 0.5]));
    render(calm, stateCalm, 500, 500, 0);

    const hurt = new StubDraw();
    const stateHurt = freshState();
    stateHurt.apply(snap([0, 0.3, 0.5, 1, 0.7, 0.5], { overlapCircle: 1, overlapDepth: 3e-4 }));
    render(hurt, stateHurt, 500, 500, 0);

    // calm: every circle edge uses one style; hurt: one circle stands out
    expect(new Set(hurt.strokeStyles).size).toBe(new Set(calm.strokeStyles).size + 1);
  });

  it("highlights the circle being dragged", () => {
    const ctx = new StubDraw();
    const state = freshState();
    state.apply(snap([0, 0.3, 0.5, 1, 0.7, 0.5]));
    state.draggingId = 1;
    render(ctx, state, 500, 500, 0);
    const plain = new StubDraw();
    const stateP = freshState();
    stateP.apply(snap([0, 0.3, 0.5, 1, 0.7, 0.5]));
    render(plain, stateP, 500, 500, 0);
    expect(new Set(ctx.strokeStyles).size).toBe(new Set(plain.strokeStyles).size + 1);
  });

  it("culls circles outside the view window", () => {
    const ctx = new StubDraw();
    const state = freshState();
    state.apply(snap([0, 0.05, 0.05, 1, 0.95, 0.95]));
    // zoom hard onto the lower-left corner: 500px across 0.1 world units
    state.camera = { scale: 5000, x: 0, y: 500 };
    const info = render(ctx, state, 500, 500, 0);
    expect(info?.circlesDrawn).toBe(1);
  });

  it("draws vacancy marks while fresh and drops them when stale", () => {
    const state = freshState();
    state.apply(snap([0, 0.5, 0.5]));
    state.markVacancy(0.3, 0.3, 1000);

    const fresh = new StubDraw();
    render(fresh, state, 500, 500, 1100);
    expect(fresh.arcs).toBe(2); // circle + mark ring

    const stale = new StubDraw();
    render(stale, state, 500, 500, 5000);
    expect(stale.arcs).toBe(1);
  });

  it("prints solver stats in the status line", () => {
    const ctx = new StubDraw();
    const state = freshState();
    state.apply(snap([], { iteration: 77, density: 0.512, converged: true }));
    state.paused = true;
    render(ctx, state, 500, 500, 0);
    const text = ctx.texts.join(" ");
    expect(text).toContain("iter 77");
    expect(text).toContain("density 0.512");
    expect(text).toContain("converged");
    expect(text).toContain("paused");
  });
});
