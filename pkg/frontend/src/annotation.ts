import { CATEGORY_NAMES, type AnnotationRecordObj, type CategoryId, type LayoutElement } from "./types.js";
import { isValidBox } from "./geometry.js";

/**
 * Serializes one annotation record in the same JSON shape the backend's
 * dataset files use, so an exported layout can be fed straight back to the
 * CLI or re-imported here.
 */
export function exportRecord(record: AnnotationRecordObj): string {
  return JSON.stringify({
    image_path: record.image_path,
    width: record.width,
    height: record.height,
    elements: record.elements.map((e) => ({
      category: e.category,
      box: e.box,
    })),
  });
}

/**
 * Parses an annotation record from exported JSON (or the first line of a
 * JSONL file). Throws an Error with a readable message on any schema
 * violation; never partially succeeds.
 */
export function importRecord(text: string): AnnotationRecordObj {
  const firstLine = text.trim().split("\n")[0] ?? "";
  let raw: unknown;
  try {
    raw = JSON.parse(firstLine);
  } catch {
    throw new Error("not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new Error("record must be a JSON object");
  }
  const obj = raw as Record<string, unknown>;
  const imagePath = obj.image_path;
  if (typeof imagePath !== "string" || imagePath.length === 0) {
    throw new Error("missing image_path");
  }
  const width = obj.width;
  const height = obj.height;
  if (
    typeof width !== "number" ||
    typeof height !== "number" ||
    !Number.isInteger(width) ||
    !Number.isInteger(height) ||
    width <= 0 ||
    height <= 0
  ) {
    throw new Error("width and height must be positive integers");
  }
  if (!Array.isArray(obj.elements)) {
    throw new Error("elements must be an array");
  }
  const elements: LayoutElement[] = obj.elements.map((el, i) => {
    if (typeof el !== "object" || el === null) {
      throw new Error(`element ${i} is not an object`);
    }
    const e = el as Record<string, unknown>;
    const category = e.category;
    if (
      typeof category !== "number" ||
      !(category in CATEGORY_NAMES)
    ) {
      throw new Error(`element ${i}: category must be 1..4`);
    }
    if (!isValidBox(e.box)) {
      throw new Error(`element ${i}: box must be [cx, cy, w, h] inside the canvas`);
    }
    return { category: category as CategoryId, box: e.box };
  });
  return { image_path: imagePath, width, height, elements };
}
