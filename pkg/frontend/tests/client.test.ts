// HTTP client: request shapes, error mapping, health probe.

import { describe, expect, it } from "vitest";
import { BudgetExhaustedError, PrivArClient, ServiceError } from "../src/client.js";
import type { PrivArRequest } from "../src/types.js";
import { makeFetch, wireResponse } from "./helpers.js";

const REQ: PrivArRequest = {
  v: 1,
  session_id: "abc",
  mechanism: "trpsm",
  epsilon: 0.1,
  epsilon_total: 1.2,
  delta: 5,
  true_location: { lat: 40, lon: -74 },
  timestamp: "2026-08-14T12:00:00Z",
  seed: 3,
};

describe("PrivArClient", () => {
  it("posts the report body verbatim as JSON", async () => {
    const reply = wireResponse({ decision: "initial", budget_spent: 0.2, budget_left: 1.0 });
    const { fetchImpl, calls } = makeFetch(() => ({ payload: reply }));
    const client = new PrivArClient("http://svc:8470", fetchImpl);

    const resp = await client.privar(REQ);

    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("http://svc:8470/PrivAR");
    expect(calls[0]!.body).toEqual(REQ);
    expect(resp).toEqual(reply);
  });

  it("shapes topup and end bodies", async () => {
    const { fetchImpl, calls } = makeFetch((url) =>
      url.endsWith("/topup")
        ? { payload: { v: 1, session_id: "abc", budget_left: 0.5, epsilon_total: 1.4 } }
        : { payload: { v: 1, session_id: "abc", releases: 2, spend: 0.4, epsilon: 0.1, epsilon_total: 1.4 } },
    );
    const client = new PrivArClient("http://svc", fetchImpl);

    const ack = await client.topup("abc", 0.2);
    const ledger = await client.end("abc");

    expect(calls[0]!.url).toBe("http://svc/PrivAR/topup");
    expect(calls[0]!.body).toEqual({ v: 1, session_id: "abc", additional: 0.2 });
    expect(calls[1]!.url).toBe("http://svc/PrivAR/end");
    expect(calls[1]!.body).toEqual({ v: 1, session_id: "abc" });
    expect(ack.epsilon_total).toBe(1.4);
    expect(ledger.releases).toBe(2);
  });

  it("maps the budget-exhausted conflict to its own error type", async () => {
    const { fetchImpl } = makeFetch(() => ({
      status: 409,
      payload: { error: "BudgetExhausted", spend: 0.4, epsilon_total: 0.4 },
    }));
    const client = new PrivArClient("http://svc", fetchImpl);

    const err = await client.privar(REQ).then(
      () => null,
      (e: unknown) => e,
    );

    expect(err).toBeInstanceOf(BudgetExhaustedError);
    expect((err as BudgetExhaustedError).spend).toBe(0.4);
    expect((err as BudgetExhaustedError).epsilonTotal).toBe(0.4);
  });

  it("wraps any other failure status with its payload", async () => {
    const { fetchImpl } = makeFetch(() => ({
      status: 409,
      payload: { error: "SessionMismatch" },
    }));
    const client = new PrivArClient("http://svc", fetchImpl);

    const err = await client.privar(REQ).then(
      () => null,
      (e: unknown) => e,
    );

    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).status).toBe(409);
    expect((err as ServiceError).payload).toEqual({ error: "SessionMismatch" });
  });

  it("tolerates a non-JSON error body", async () => {
    const fetchImpl = async () => new Response("gateway timeout", { status: 504 });
    const client = new PrivArClient("http://svc", fetchImpl);

    const err = await client.privar(REQ).then(
      () => null,
      (e: unknown) => e,
    );

    expect(err).toBeInstanceOf(ServiceError);
    expect((err as ServiceError).payload).toBeNull();
  });

  it("reports health as a boolean, swallowing connection errors", async () => {
    const up = new PrivArClient("http://svc", async () => new Response("{}", { status: 200 }));
    const down = new PrivArClient("http://svc", async () => {
      throw new TypeError("fetch failed");
    });

    expect(await up.healthy()).toBe(true);
    expect(await down.healthy()).toBe(false);
  });
});
