// Shared fakes: a programmable fetch and canned wire payloads.

import type { FetchLike } from "../src/client.js";
import type { PrivArResponse, WireLocation } from "../src/types.js";

export const ORIGIN: WireLocation = { lat: 40.0, lon: -74.0 };

export interface RecordedCall {
  url: string;
  body: Record<string, unknown> | null;
}

export type Reply = { status?: number; payload: unknown };
export type Handler = (url: string, body: RecordedCall["body"]) => Reply | Promise<Reply>;

// A FetchLike that parses request bodies, records every call, and builds a
// JSON Response from whatever the handler returns.
export function makeFetch(handler: Handler): { fetchImpl: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    const body = init?.body != null ? (JSON.parse(String(init.body)) as Record<string, unknown>) : null;
    calls.push({ url, body });
    const { status = 200, payload } = await handler(url, body);
    return new Response(JSON.stringify(payload), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
  return { fetchImpl, calls };
}

export function privarCalls(calls: RecordedCall[]): RecordedCall[] {
  return calls.filter((c) => c.url.endsWith("/PrivAR"));
}

export function wireResponse(over: Partial<PrivArResponse> = {}): PrivArResponse {
  return {
    v: 1,
    released_location: { lat: 40.0001, lon: -74.0 },
    decision: "released",
    budget_spent: null,
    budget_left: null,
    objects: [],
    catchable_pct: 76.5,
    timings: { perturb_ms: 0.01, objects_ms: 0.02, serialize_ms: 0.01, total_ms: 0.05 },
    ...over,
  };
}

// Deterministic session-id factory so tests can assert on request bodies.
export function idFactory(prefix = "sess"): () => string {
  let n = 0;
  return () => `${prefix}-${(n += 1)}`;
}

export const FIXED_NOW = () => "2026-08-14T12:00:00Z";
