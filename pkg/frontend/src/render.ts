import { boxToPixelRect } from "./geometry.js";
import {
  CATEGORY_COLORS,
  CATEGORY_NAMES,
  type ConstraintBox,
  type LayoutElement,
  type PixelRect,
} from "./types.js";

function labelRect(ctx: CanvasRenderingContext2D, rect: PixelRect, text: string, color: string): void {
  ctx.font = "11px ui-monospace, monospace";
  const tw = ctx.measureText(text).width;
  const ty = Math.max(12, rect.y - 4);
  ctx.fillStyle = "rgba(0, 0, 0, 0.65)";
  ctx.fillRect(rect.x, ty - 11, tw + 6, 14);
  ctx.fillStyle = color;
  ctx.fillText(text, rect.x + 3, ty);
}

/**
 * Paints the user's constraint boxes as shadowed, dashed rectangles so they
 * read as sketches rather than results.
 */
export function drawConstraints(
  ctx: CanvasRenderingContext2D,
  constraints: ConstraintBox[],
  canvasW: number,
  canvasH: number,
): void {
  for (const c of constraints) {
    const rect = boxToPixelRect(c.box, canvasW, canvasH);
    const color = CATEGORY_COLORS[c.category];
    ctx.save();
    ctx.shadowColor = "rgba(0, 0, 0, 0.5)";
    ctx.shadowBlur = 8;
    ctx.fillStyle = color + "33";
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    ctx.shadowBlur = 0;
    ctx.setLineDash([6, 4]);
    ctx.lineWidth = 2;
    ctx.strokeStyle = color;
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    ctx.restore();
    labelRect(ctx, rect, CATEGORY_NAMES[c.category], color);
  }
}

/**
 * Paints a returned proposal as solid rectangles, underlays first so
 * foreground elements stay visible on top of them.
 */
export function drawProposal(
  ctx: CanvasRenderingContext2D,
  elements: LayoutElement[],
  canvasW: number,
  canvasH: number,
): void {
  const ordered = [...elements].sort(
    (a, b) => (a.category === 3 ? 0 : 1) - (b.category === 3 ? 0 : 1),
  );
  for (const e of ordered) {
    const rect = boxToPixelRect(e.box, canvasW, canvasH);
    const color = CATEGORY_COLORS[e.category];
    ctx.save();
    ctx.fillStyle = color + "40";
    ctx.fillRect(rect.x, rect.y, rect.w, rect.h);
    ctx.lineWidth = 2;
    ctx.strokeStyle = color;
    ctx.strokeRect(rect.x, rect.y, rect.w, rect.h);
    ctx.restore();
    labelRect(ctx, rect, CATEGORY_NAMES[e.category], color);
  }
}

/** Live rubber-band rectangle while the user is dragging. */
export function drawRubberBand(
  ctx: CanvasRenderingContext2D,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  color: string,
): void {
  ctx.save();
  ctx.setLineDash([4, 3]);
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = color;
  ctx.strokeRect(Math.min(x0, x1), Math.min(y0, y1), Math.abs(x1 - x0), Math.abs(y1 - y0));
  ctx.restore();
}
