// Thin HTTP client for the privacy service. All state lives in the caller.

import type { EndResponse, PrivArRequest, PrivArResponse, TopupResponse } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

// Raised for a 409 whose payload says the session budget cannot pay for a release.
export class BudgetExhaustedError extends Error {
  constructor(
    public readonly spend: number,
    public readonly epsilonTotal: number,
  ) {
    super(`budget exhausted: spent ${spend} of ${epsilonTotal}`);
    this.name = "BudgetExhaustedError";
  }
}

// Any other non-2xx reply, with the service's error payload attached.
export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly payload: unknown,
  ) {
    super(`service replied ${status}: ${JSON.stringify(payload)}`);
    this.name = "ServiceError";
  }
}

async function readJson(resp: Response): Promise<unknown> {
  try {
    return await resp.json();
  } catch {
    return null;
  }
}

export class PrivArClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post(path: string, body: unknown): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = await readJson(resp);
    if (!resp.ok) {
      const err = payload as { error?: string; spend?: number; epsilon_total?: number } | null;
      if (err?.error === "BudgetExhausted") {
        throw new BudgetExhaustedError(err.spend ?? NaN, err.epsilon_total ?? NaN);
      }
      throw new ServiceError(resp.status, payload);
    }
    return payload;
  }

  async privar(req: PrivArRequest): Promise<PrivArResponse> {
    return (await this.post("/PrivAR", req)) as PrivArResponse;
  }

  async topup(sessionId: string, additional: number): Promise<TopupResponse> {
    return (await this.post("/PrivAR/topup", {
      v: 1,
      session_id: sessionId,
      additional,
    })) as TopupResponse;
  }

  async end(sessionId: string): Promise<EndResponse> {
    return (await this.post("/PrivAR/end", { v: 1, session_id: sessionId })) as EndResponse;
  }

  async healthy(): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/healthz`);
      return resp.ok;
    } catch {
      return false;
    }
  }
}
