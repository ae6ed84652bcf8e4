import { describe, expect, it } from "vitest";

import {
  AlreadyDecided,
  GatewayClient,
  GatewayError,
  GatewayUnreachable,
} from "../src/api.js";
import type { FetchLike } from "../src/api.js";

interface Recorded {
  url: string;
  init?: RequestInit;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function scripted(responses: Response[], log: Recorded[] = []): FetchLike {
  return async (url, init) => {
    log.push({ url, init });
    const next = responses.shift();
    if (!next) throw new Error("scripted fetch exhausted");
    return next;
  };
}

const PENDING_DOC = {
  approvals: [
    {
      approvalId: "appr-0001",
      sessionId: "s1",
      toolName: "shop.create_order",
      actionType: "write",
      arguments: { item: "widget" },
      state: "pending",
      createdAt: 1.0,
      decidedAt: null,
      decidedBy: null,
      ageSeconds: 0.5,
      lintScore: 0.9,
      poisonFindings: [],
    },
  ],
};

describe("GatewayClient.listPending", () => {
  it("queries the pending state and unwraps the approvals array", async () => {
    const log: Recorded[] = [];
    const client = new GatewayClient("http://gw", scripted([jsonResponse(200, PENDING_DOC)], log));
    const pending = await client.listPending();
    expect(log[0]?.url).toBe("http://gw/approvals?state=pending");
    expect(pending).toHaveLength(1);
    expect(pending[0]?.approvalId).toBe("appr-0001");
    expect(pending[0]?.lintScore).toBe(0.9);
  });

  it("wraps connection failures as GatewayUnreachable", async () => {
    const failing: FetchLike = async () => {
      throw new TypeError("fetch failed");
    };
    const client = new GatewayClient("http://gw", failing);
    await expect(client.listPending()).rejects.toBeInstanceOf(GatewayUnreachable);
  });
});

describe("GatewayClient.decide", () => {
  it("posts the decision body and returns the receipt", async () => {
    const log: Recorded[] = [];
    const receipt = { approvalId: "appr-0001", state: "approved", decidedBy: "alice" };
    const client = new GatewayClient("http://gw", scripted([jsonResponse(200, receipt)], log));
    const result = await client.decide("appr-0001", "approved", "alice");
    expect(result).toEqual(receipt);
    expect(log[0]?.url).toBe("http://gw/approvals/appr-0001");
    expect(log[0]?.init?.method).toBe("POST");
    expect(JSON.parse(String(log[0]?.init?.body))).toEqual({
      decision: "approved",
      principal: "alice",
    });
  });

  it("defaults the principal to console", async () => {
    const log: Recorded[] = [];
    const receipt = { approvalId: "appr-0001", state: "denied", decidedBy: "console" };
    const client = new GatewayClient("http://gw", scripted([jsonResponse(200, receipt)], log));
    await client.decide("appr-0001", "denied");
    expect(JSON.parse(String(log[0]?.init?.body)).principal).toBe("console");
  });

  it("turns a 409 into AlreadyDecided carrying the settled state", async () => {
    const client = new GatewayClient(
      "http://gw",
      scripted([jsonResponse(409, { error: "already decided", state: "approved" })]),
    );
    const failure = await client.decide("appr-0001", "denied").catch((e) => e);
    expect(failure).toBeInstanceOf(AlreadyDecided);
    expect((failure as AlreadyDecided).state).toBe("approved");
    expect((failure as AlreadyDecided).approvalId).toBe("appr-0001");
  });

  it("surfaces other gateway errors verbatim", async () => {
    const client = new GatewayClient(
      "http://gw",
      scripted([jsonResponse(404, { error: "unknown approval: appr-9999" })]),
    );
    const failure = await client.decide("appr-9999", "approved").catch((e) => e);
    expect(failure).toBeInstanceOf(GatewayError);
    expect((failure as GatewayError).message).toBe("unknown approval: appr-9999");
    expect((failure as GatewayError).status).toBe(404);
  });
});

describe("GatewayClient.sessionFrame", () => {
  it("fetches the frame document for a session", async () => {
    const log: Recorded[] = [];
    const frame = { services: { shop: { executed: ["create_order"] } } };
    const client = new GatewayClient("http://gw", scripted([jsonResponse(200, frame)], log));
    expect(await client.sessionFrame("s1")).toEqual(frame);
    expect(log[0]?.url).toBe("http://gw/sessions/s1/frame");
  });
});

describe("GatewayClient.health", () => {
  it("is true on 200 and false when unreachable", async () => {
    const up = new GatewayClient("http://gw", scripted([jsonResponse(200, { ok: true })]));
    expect(await up.health()).toBe(true);
    const down = new GatewayClient("http://gw", async () => {
      throw new TypeError("refused");
    });
    expect(await down.health()).toBe(false);
  });
});
