import { describe, expect, it } from "vitest";

import type { Snapshot } from "../src/protocol.js";
import { VACANCY_MARK_TTL_MS, ViewState } from "../src/state.js";

function snap(circles: number[], extra: Partial<Snapshot> = {}): Snapshot {
  return {
    kind: "snapshot",
    iteration: 5,
    circles,
    radius: 0.05,
    density: 0.31,
    overlapCircle: 2,
    overlapDepth: 1.5e-7,
    converged: false,
    ...extra,
  };
}

describe("ViewState", () => {
  it("starts empty with the camera fit to the viewport", () => {
    const state = new ViewState(800, 600);
    expect(state.snapshot).toBeNull();
    expect(state.index).toBeNull();
    expect(state.stats()).toBeNull();
    expect(state.camera.scale).toBeGreaterThan(0);
    expect(state.connection).toBe("connecting");
  });

  it("applies snapshots and rebuilds the spatial index", () => {
    const state = new ViewState(800, 600);
    state.apply(snap([0, 0.2, 0.2, 1, 0.8, 0.8]));
    expect(state.index?.count).toBe(2);
    expect(state.index?.pickAt(0.2, 0.2)?.id).toBe(0);

    state.apply(snap([4, 0.5, 0.5]));
    expect(state.index?.count).toBe(1);
    expect(state.index?.pickAt(0.2, 0.2)).toBeNull();
    expect(state.index?.pickAt(0.5, 0.5)?.id).toBe(4);
  });

  it("reports stats straight off the latest snapshot", () => {
    const state = new ViewState(800, 600);
    state.apply(snap([], { iteration: 42, density: 0.5, converged: true }));
    expect(state.stats()).toEqual({
      iteration: 42,
      density: 0.5,
      overlapDepth: 1.5e-7,
      overlapCircle: 2,
      converged: true,
    });
  });

  it("keeps the last service error message", () => {
    const state = new ViewState(800, 600);
    state.apply({ kind: "error", message: "unknown command 'warp'", offset: 31 });
    expect(state.lastError).toBe("unknown command 'warp'");
    state.apply(snap([]));
    // a snapshot does not clear the error banner
    expect(state.lastError).toBe("unknown command 'warp'");
  });

  it("ignores command frames echoed at it", () => {
    const state = new ViewState(800, 600);
    state.apply({ kind: "pause" });
    state.apply({ kind: "drag_start", id: 1 });
    expect(state.snapshot).toBeNull();
    expect(state.lastError).toBeNull();
  });

  it("expires vacancy marks after their TTL", () => {
    const state = new ViewState(800, 600);
    state.markVacancy(0.3, 0.4, 1000);
    state.markVacancy(0.6, 0.6, 1500);
    expect(state.liveMarks(1000 + VACANCY_MARK_TTL_MS - 1)).toHaveLength(2);
    expect(state.liveMarks(1000 + VACANCY_MARK_TTL_MS)).toHaveLength(1);
    expect(state.liveMarks(1500 + VACANCY_MARK_TTL_MS)).toHaveLength(0);
    expect(state.marks).toHaveLength(0);
  });
});
