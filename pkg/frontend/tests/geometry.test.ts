import { describe, expect, it } from "vitest";

import {
  boxToPixelRect,
  clampBox,
  dragToBox,
  isValidBox,
  pixelRectToBox,
} from "../src/geometry.js";
import type { NormBox } from "../src/types.js";

function mulberry32(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s + 0x6d2b79f5) >>> 0;
    let t = Math.imul(s ^ (s >>> 15), 1 | s);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("dragToBox", () => {
  it("maps a full-canvas drag to the unit box", () => {
    expect(dragToBox(0, 0, 120, 176, 120, 176)).toEqual([0.5, 0.5, 1, 1]);
  });

  it("ignores drags shorter than 4 px", () => {
    expect(dragToBox(10, 10, 12, 80, 120, 176)).toBeNull();
    expect(dragToBox(10, 10, 80, 12, 120, 176)).toBeNull();
    expect(dragToBox(50, 50, 50, 50, 120, 176)).toBeNull();
  });

  it("normalizes reversed drag direction", () => {
    const forward = dragToBox(10, 20, 60, 90, 120, 176);
    const backward = dragToBox(60, 90, 10, 20, 120, 176);
    expect(backward).toEqual(forward);
  });

  it("clamps drags that leave the canvas", () => {
    const box = dragToBox(-30, -10, 60, 90, 120, 176);
    expect(box).not.toBeNull();
    const rect = boxToPixelRect(box!, 120, 176);
    expect(rect.x).toBeCloseTo(0, 6);
    expect(rect.y).toBeCloseTo(0, 6);
  });
});

describe("pixel round trip", () => {
  it("drawn rect -> normalized -> rendered rect agrees within 1 px", () => {
    const rand = mulberry32(7);
    for (let trial = 0; trial < 500; trial++) {
      const canvasW = 80 + Math.floor(rand() * 1200);
      const canvasH = 80 + Math.floor(rand() * 1200);
      const w = 4 + rand() * (canvasW - 4);
      const h = 4 + rand() * (canvasH - 4);
      const x = rand() * (canvasW - w);
      const y = rand() * (canvasH - h);

      // what the editor sends to the API
      const sent = dragToBox(x, y, x + w, y + h, canvasW, canvasH);
      expect(sent).not.toBeNull();
      // the service echoes normalized boxes back; the overlay renders them
      const drawn = boxToPixelRect(sent!, canvasW, canvasH);

      expect(Math.abs(drawn.x - x)).toBeLessThan(1);
      expect(Math.abs(drawn.y - y)).toBeLessThan(1);
      expect(Math.abs(drawn.w - w)).toBeLessThan(1);
      expect(Math.abs(drawn.h - h)).toBeLessThan(1);
    }
  });

  it("normalized -> pixels -> normalized is stable", () => {
    const rand = mulberry32(11);
    for (let trial = 0; trial < 500; trial++) {
      const canvasW = 80 + Math.floor(rand() * 600);
      const canvasH = 80 + Math.floor(rand() * 600);
      const w = 0.05 + rand() * 0.9;
      const h = 0.05 + rand() * 0.9;
      const box: NormBox = [
        w / 2 + rand() * (1 - w),
        h / 2 + rand() * (1 - h),
        w,
        h,
      ];
      const back = pixelRectToBox(boxToPixelRect(box, canvasW, canvasH), canvasW, canvasH);
      for (let i = 0; i < 4; i++) {
        expect(Math.abs(back[i]! - box[i]!)).toBeLessThan(1e-9);
      }
    }
  });
});

describe("clampBox / isValidBox", () => {
  it("clamps centers so the box stays inside the canvas", () => {
    expect(clampBox([0, 0, 0.4, 0.2])).toEqual([0.2, 0.1, 0.4, 0.2]);
    expect(clampBox([1, 1, 0.4, 0.2])).toEqual([0.8, 0.9, 0.4, 0.2]);
    expect(clampBox([0.5, 0.5, 2, 2])).toEqual([0.5, 0.5, 1, 1]);
  });

  it("accepts in-bounds boxes and rejects malformed ones", () => {
    expect(isValidBox([0.5, 0.5, 0.2, 0.2])).toBe(true);
    expect(isValidBox([0.5, 0.5, 1, 1])).toBe(true);
    expect(isValidBox([1.5, 0.5, 0.2, 0.2])).toBe(false);
    expect(isValidBox([0.5, 0.5, 0.2])).toBe(false);
    expect(isValidBox([0.5, 0.5, -0.1, 0.2])).toBe(false);
    expect(isValidBox(["a", 0.5, 0.2, 0.2])).toBe(false);
    expect(isValidBox(null)).toBe(false);
  });
});
