import { describe, expect, it } from "vitest";

import { projectSkeleton } from "../src/skeleton.js";

describe("skeleton projection", () => {
  it("produces one segment per link", () => {
    const joints = [
      [0, 0, 0],
      [0.1, 0, 0],
      [0.2, 0, 0.05],
    ];
    const segments = projectSkeleton(joints, 320, 240);
    expect(segments.length).toBe(2);
  });

  it("chains segments end to end", () => {
    const joints = [
      [0, 0, 0],
      [0.1, 0, 0.1],
      [0.2, 0.3, 0.2],
    ];
    const segments = projectSkeleton(joints, 320, 240);
    expect(segments[0].x2).toBeCloseTo(segments[1].x1);
    expect(segments[0].y2).toBeCloseTo(segments[1].y1);
  });

  it("maps +z up (screen y decreases) and keeps the base fixed", () => {
    const up = projectSkeleton([[0, 0, 0], [0, 0, 0.3]], 320, 240);
    expect(up[0].y2).toBeLessThan(up[0].y1);
    const other = projectSkeleton([[0, 0, 0], [0.3, 0, 0]], 320, 240);
    expect(other[0].x1).toBeCloseTo(up[0].x1);
    expect(other[0].y1).toBeCloseTo(up[0].y1);
  });
});
