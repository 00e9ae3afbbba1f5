import { describe, expect, it } from "vitest";

import { classColor, frontierRadius, pickFrontier } from "../src/render.js";
import { applyDelta, applySnapshot, emptyViewModel } from "../src/state.js";
import type { Delta, Snapshot } from "../src/protocol.js";

function snap(): Snapshot {
  return {
    type: "snapshot",
    format_version: 1,
    revision: 0,
    scenario_id: "t",
    grid_size: 8,
    cell_size: 0.25,
    class_names: ["door", "bed"],
    mode: "coverage",
    seed: 0,
    status: "running",
    robot: [1, 1],
    traveled: 0,
    steps: 0,
    cells: [[1, 1, 3, 1]],
    objects: [],
    frontiers: [],
    tour: [],
    subgoal: null,
    run_mode: "paused",
  };
}

function delta(rev: number, extra: Partial<Delta> = {}): Delta {
  return {
    type: "delta",
    revision: rev,
    step: rev,
    status: "running",
    robot: [1, 2],
    traveled: 0.25,
    cells: [],
    objects: [],
    frontiers: [],
    tour: [],
    subgoal: null,
    replanned: false,
    intervention: null,
    ...extra,
  };
}

describe("view model", () => {
  it("a delta with three new frontiers yields three clickable markers", () => {
    const vm = applySnapshot(emptyViewModel(), snap());
    applyDelta(vm, delta(1, {
      frontiers: [[4, 2, 2, 1.0], [5, 3, 3, 0.5], [6, 4, 4, 2.0]],
    }));
    expect(vm.frontiers.length).toBe(3);
    // each marker is hit-testable at its own position
    for (const [id, y, x] of vm.frontiers) {
      expect(pickFrontier(vm, y, x)).toBe(id);
    }
  });

  it("selection clears when the selected frontier vanishes", () => {
    const vm = applySnapshot(emptyViewModel(), snap());
    applyDelta(vm, delta(1, { frontiers: [[4, 2, 2, 1.0]] }));
    vm.selected = 4;
    applyDelta(vm, delta(2, { frontiers: [[9, 5, 5, 1.0]] }));
    expect(vm.selected).toBeNull();
  });

  it("occupancy spans apply row-major", () => {
    const vm = applySnapshot(emptyViewModel(), snap());
    expect(vm.occupancy[1 * 8 + 1]).toBe(1);
    expect(vm.occupancy[1 * 8 + 3]).toBe(1);
    expect(vm.occupancy[1 * 8 + 4]).toBe(0);
    applyDelta(vm, delta(1, { cells: [[2, 0, 2, -1]] }));
    expect(vm.occupancy[2 * 8]).toBe(-1);
  });

  it("intervention history accumulates", () => {
    const vm = applySnapshot(emptyViewModel(), snap());
    applyDelta(vm, delta(1, { intervention: 7 }));
    applyDelta(vm, delta(2, {}));
    applyDelta(vm, delta(3, { intervention: 9 }));
    expect(vm.interventionLog).toEqual([
      { step: 1, frontier: 7 },
      { step: 3, frontier: 9 },
    ]);
  });
});

describe("render helpers", () => {
  it("class colors are stable and distinct for typical names", () => {
    expect(classColor("bed")).toBe(classColor("bed"));
    expect(classColor("bed")).not.toBe(classColor("door"));
  });

  it("frontier radius grows with gain but stays bounded", () => {
    const small = frontierRadius(0.2, 6);
    const big = frontierRadius(9.0, 6);
    expect(big).toBeGreaterThan(small);
    expect(big).toBeLessThanOrEqual(30);
  });

  it("pickFrontier returns null away from any marker", () => {
    const vm = applySnapshot(emptyViewModel(), snap());
    applyDelta(vm, delta(1, { frontiers: [[4, 2, 2, 1.0]] }));
    expect(pickFrontier(vm, 7.5, 7.5)).toBeNull();
  });
});
