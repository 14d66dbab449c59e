import { describe, expect, it } from "vitest";

import { exportRecord, importRecord } from "../src/annotation.js";
import type { AnnotationRecordObj } from "../src/types.js";

const record: AnnotationRecordObj = {
  image_path: "clean_00042.png",
  width: 120,
  height: 176,
  elements: [
    { category: 2, box: [0.5, 0.25, 0.6, 0.12] },
    { category: 3, box: [0.5, 0.25, 0.7, 0.2] },
    { category: 1, box: [0.2, 0.8, 0.15, 0.1] },
  ],
};

describe("export / import round trip", () => {
  it("preserves every field exactly", () => {
    const back = importRecord(exportRecord(record));
    expect(back).toEqual(record);
  });

  it("matches the backend annotation schema key for key", () => {
    const obj = JSON.parse(exportRecord(record));
    expect(Object.keys(obj).sort()).toEqual(["elements", "height", "image_path", "width"]);
    expect(Object.keys(obj.elements[0]).sort()).toEqual(["box", "category"]);
    expect(obj.elements[1].box).toHaveLength(4);
  });

  it("reads only the first line of a JSONL file", () => {
    const jsonl = exportRecord(record) + "\n" + exportRecord({ ...record, image_path: "other.png" }) + "\n";
    expect(importRecord(jsonl).image_path).toBe("clean_00042.png");
  });

  it("survives re-export after import", () => {
    const once = exportRecord(record);
    expect(exportRecord(importRecord(once))).toBe(once);
  });
});

describe("import validation", () => {
  it("rejects malformed JSON", () => {
    expect(() => importRecord("{nope")).toThrow("not valid JSON");
  });

  it("rejects non-object records", () => {
    expect(() => importRecord("[1,2]")).toThrow("JSON object");
  });

  it("rejects a missing image path", () => {
    expect(() => importRecord(JSON.stringify({ width: 10, height: 10, elements: [] }))).toThrow(
      "image_path",
    );
  });

  it("rejects bad canvas dimensions", () => {
    expect(() =>
      importRecord(JSON.stringify({ image_path: "a.png", width: -3, height: 10, elements: [] })),
    ).toThrow("positive integers");
    expect(() =>
      importRecord(JSON.stringify({ image_path: "a.png", width: 10.5, height: 10, elements: [] })),
    ).toThrow("positive integers");
  });

  it("rejects out-of-range categories and boxes", () => {
    expect(() =>
      importRecord(
        JSON.stringify({
          image_path: "a.png",
          width: 10,
          height: 10,
          elements: [{ category: 7, box: [0.5, 0.5, 0.1, 0.1] }],
        }),
      ),
    ).toThrow("category must be 1..4");
    expect(() =>
      importRecord(
        JSON.stringify({
          image_path: "a.png",
          width: 10,
          height: 10,
          elements: [{ category: 2, box: [1.9, 0.5, 0.1, 0.1] }],
        }),
      ),
    ).toThrow("box");
    expect(() =>
      importRecord(
        JSON.stringify({
          image_path: "a.png",
          width: 10,
          height: 10,
          elements: [{ category: 2, box: [0.5, 0.5, 0.1] }],
        }),
      ),
    ).toThrow("box");
  });
});
