import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, ServiceClient, isAbort } from "../src/api.js";

const okResponse = {
  proposals: [],
  model: { weights_version: "ckpt-v1-epoch-59" },
};

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

afterEach(() => {
  vi.restoreAllMocks();
});

describe("generate", () => {
  it("posts multipart form data with the image and a JSON payload", async () => {
    const fetchMock = vi
      .spyOn(globalThis, "fetch")
      .mockResolvedValue(jsonResponse(200, okResponse));
    const client = new ServiceClient("http://example.test/");

    const res = await client.generate(
      new Blob([new Uint8Array([1, 2, 3])], { type: "image/png" }),
      "canvas.png",
      [{ category: 2, box: [0.5, 0.5, 0.4, 0.2] }],
      { nProposals: 3, seed: 7 },
    );

    expect(res.model.weights_version).toBe("ckpt-v1-epoch-59");
    const [url, init] = fetchMock.mock.calls[0]!;
    expect(url).toBe("http://example.test/api/generate");
    const form = init!.body as FormData;
    expect(form.get("image")).toBeInstanceOf(File);
    const payload = JSON.parse(String(form.get("payload")));
    expect(payload).toEqual({
      constraints: [{ category: 2, box: [0.5, 0.5, 0.4, 0.2] }],
      n_proposals: 3,
      seed: 7,
    });
  });

  it("surfaces the server's detail message on 4xx", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse(400, { detail: "box coordinates must lie in [0, 1]" }),
    );
    const client = new ServiceClient("http://example.test");
    const err = await client
      .generate(new Blob(["x"]), "a.png", [])
      .then(() => null)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(400);
    expect((err as ApiError).message).toBe("box coordinates must lie in [0, 1]");
  });

  it("propagates network failures", async () => {
    vi.spyOn(globalThis, "fetch").mockRejectedValue(new TypeError("fetch failed"));
    const client = new ServiceClient("http://example.test");
    await expect(client.generate(new Blob(["x"]), "a.png", [])).rejects.toThrow("fetch failed");
  });

  it("aborts the previous request when a new one starts", async () => {
    const seenSignals: AbortSignal[] = [];
    vi.spyOn(globalThis, "fetch").mockImplementation((_url, init) => {
      const signal = init!.signal!;
      seenSignals.push(signal);
      return new Promise<Response>((resolve, reject) => {
        signal.addEventListener("abort", () =>
          reject(new DOMException("aborted", "AbortError")),
        );
        if (seenSignals.length === 2) resolve(jsonResponse(200, okResponse));
      });
    });

    const client = new ServiceClient("http://example.test");
    const first = client.generate(new Blob(["x"]), "a.png", []);
    const second = client.generate(new Blob(["x"]), "a.png", []);

    await expect(second).resolves.toEqual(okResponse);
    const firstErr = await first.then(() => null).catch((e: unknown) => e);
    expect(isAbort(firstErr)).toBe(true);
    expect(seenSignals[0]!.aborted).toBe(true);
    expect(seenSignals[1]!.aborted).toBe(false);
  });
});

describe("health and evaluate", () => {
  it("reports an unloaded service as an ApiError with status 503", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse(503, { detail: "no weights loaded" }),
    );
    const client = new ServiceClient("http://example.test");
    const err = await client
      .health()
      .then(() => null)
      .catch((e: unknown) => e);
    expect((err as ApiError).status).toBe(503);
  });

  it("sends the layout object for evaluation", async () => {
    const fetchMock = vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse(200, { metrics: { r_occ: 100.0 }, empty: false, skipped: [] }),
    );
    const client = new ServiceClient("http://example.test");
    const layout = {
      width: 120,
      height: 176,
      elements: [{ category: 2 as const, box: [0.5, 0.5, 0.4, 0.2] as [number, number, number, number] }],
    };
    const res = await client.evaluate(new Blob(["x"]), "a.png", layout);
    expect(res.empty).toBe(false);
    const [, init] = fetchMock.mock.calls[0]!;
    const payload = JSON.parse(String((init!.body as FormData).get("payload")));
    expect(payload).toEqual({ layout });
  });
});
