import type { NormBox, PixelRect } from "./types.js";

/** Drags shorter than this (either axis, in canvas pixels) are ignored. */
export const MIN_DRAG_PX = 4;

/**
 * Turns a drag gesture (two corner points in canvas pixels) into a
 * normalized center-format box, clamped to the canvas. Returns null for
 * degenerate drags.
 */
export function dragToBox(
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  canvasW: number,
  canvasH: number,
): NormBox | null {
  const left = Math.max(0, Math.min(x0, x1));
  const top = Math.max(0, Math.min(y0, y1));
  const right = Math.min(canvasW, Math.max(x0, x1));
  const bottom = Math.min(canvasH, Math.max(y0, y1));
  if (right - left < MIN_DRAG_PX || bottom - top < MIN_DRAG_PX) {
    return null;
  }
  return pixelRectToBox(
    { x: left, y: top, w: right - left, h: bottom - top },
    canvasW,
    canvasH,
  );
}

/** Pixel rectangle -> normalized center-format box. */
export function pixelRectToBox(
  rect: PixelRect,
  canvasW: number,
  canvasH: number,
): NormBox {
  return [
    (rect.x + rect.w / 2) / canvasW,
    (rect.y + rect.h / 2) / canvasH,
    rect.w / canvasW,
    rect.h / canvasH,
  ];
}

/** Normalized center-format box -> pixel rectangle for canvas drawing. */
export function boxToPixelRect(
  box: NormBox,
  canvasW: number,
  canvasH: number,
): PixelRect {
  const [cx, cy, w, h] = box;
  return {
    x: (cx - w / 2) * canvasW,
    y: (cy - h / 2) * canvasH,
    w: w * canvasW,
    h: h * canvasH,
  };
}

/** Clamps a normalized box so it lies fully inside the canvas. */
export function clampBox(box: NormBox): NormBox {
  const w = Math.min(1, Math.max(0, box[2]));
  const h = Math.min(1, Math.max(0, box[3]));
  const cx = Math.min(1 - w / 2, Math.max(w / 2, box[0]));
  const cy = Math.min(1 - h / 2, Math.max(h / 2, box[1]));
  return [cx, cy, w, h];
}

export function isValidBox(box: unknown): box is NormBox {
  return (
    Array.isArray(box) &&
    box.length === 4 &&
    box.every((v) => typeof v === "number" && Number.isFinite(v)) &&
    box[2] >= 0 &&
    box[3] >= 0 &&
    box[0] - box[2] / 2 >= -1e-6 &&
    box[0] + box[2] / 2 <= 1 + 1e-6 &&
    box[1] - box[3] / 2 >= -1e-6 &&
    box[1] + box[3] / 2 <= 1 + 1e-6
  );
}
