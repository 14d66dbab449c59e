import type { ConstraintBox, GenerateResponse, LayoutObj, ProposalMetrics } from "./types.js";

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

export interface GenerateOptions {
  nProposals?: number;
  seed?: number;
  threshold?: number;
}

async function errorFromResponse(res: Response): Promise<ApiError> {
  let detail = res.statusText || `HTTP ${res.status}`;
  try {
    const body = await res.json();
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(res.status, detail);
}

/**
 * Client for the layout service. Keeps at most one generate request in
 * flight: starting a new one aborts the previous.
 */
export class ServiceClient {
  baseUrl: string;
  private inflight: AbortController | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async health(): Promise<{ status: string; weights_version: string }> {
    const res = await fetch(`${this.baseUrl}/api/health`);
    if (!res.ok) throw await errorFromResponse(res);
    return res.json();
  }

  async generate(
    image: Blob,
    imageName: string,
    constraints: ConstraintBox[],
    options: GenerateOptions = {},
  ): Promise<GenerateResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;

    const payload: Record<string, unknown> = {
      constraints: constraints.map((c) => ({ category: c.category, box: c.box })),
    };
    if (options.nProposals !== undefined) payload.n_proposals = options.nProposals;
    if (options.seed !== undefined) payload.seed = options.seed;
    if (options.threshold !== undefined) payload.threshold = options.threshold;

    const form = new FormData();
    form.append("image", image, imageName);
    form.append("payload", JSON.stringify(payload));

    try {
      const res = await fetch(`${this.baseUrl}/api/generate`, {
        method: "POST",
        body: form,
        signal: controller.signal,
      });
      if (!res.ok) throw await errorFromResponse(res);
      return await res.json();
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }

  async evaluate(
    image: Blob,
    imageName: string,
    layout: LayoutObj,
  ): Promise<{ metrics: ProposalMetrics & Record<string, number | null>; empty: boolean; skipped: string[] }> {
    const form = new FormData();
    form.append("image", image, imageName);
    form.append("payload", JSON.stringify({ layout }));
    const res = await fetch(`${this.baseUrl}/api/evaluate`, {
      method: "POST",
      body: form,
    });
    if (!res.ok) throw await errorFromResponse(res);
    return res.json();
  }
}

export function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}
