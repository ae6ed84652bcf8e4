// HTTP client for the gateway's console endpoints. Every state change in
// the console round-trips through this module; nothing is decided locally.

export interface PoisonFinding {
  patternId: string;
  severity: string;
  matchedText: string;
  field: string;
}

export interface ApprovalView {
  approvalId: string;
  sessionId: string;
  toolName: string;
  actionType: string;
  arguments: Record<string, unknown>;
  state: string;
  createdAt: number;
  decidedAt: number | null;
  decidedBy: string | null;
  ageSeconds: number;
  lintScore?: number;
  poisonFindings?: PoisonFinding[];
}

export interface DecisionReceipt {
  approvalId: string;
  state: string;
  decidedBy: string | null;
}

export type Decision = "approved" | "denied";

/** The gateway could not be reached at all (connection refused, DNS, ...). */
export class GatewayUnreachable extends Error {
  constructor(readonly baseUrl: string, cause: unknown) {
    super(`gateway unreachable at ${baseUrl}: ${String(cause)}`);
    this.name = "GatewayUnreachable";
  }
}

/** Someone else settled the approval first; carries the settled state. */
export class AlreadyDecided extends Error {
  constructor(readonly approvalId: string, readonly state: string) {
    super(`approval ${approvalId} already decided: ${state}`);
    this.name = "AlreadyDecided";
  }
}

/** Any other non-2xx answer; message is the gateway's error text verbatim. */
export class GatewayError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "GatewayError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

// The console's view of the gateway API; kept as an interface so tests can
// drive the controller with a scripted double.
export interface GatewayApi {
  health(): Promise<boolean>;
  listApprovals(state?: string): Promise<ApprovalView[]>;
  listPending(): Promise<ApprovalView[]>;
  decide(approvalId: string, decision: Decision, principal?: string): Promise<DecisionReceipt>;
  sessionFrame(sessionId: string): Promise<Record<string, unknown>>;
}

export class GatewayClient implements GatewayApi {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    // Wrapped so the browser global keeps its required window binding.
    fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.fetchFn = fetchFn;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    try {
      return await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (cause) {
      throw new GatewayUnreachable(this.baseUrl, cause);
    }
  }

  private async readError(response: Response): Promise<string> {
    try {
      const body = (await response.json()) as { error?: string };
      if (body && typeof body.error === "string") return body.error;
    } catch {
      // fall through to the generic message
    }
    return `gateway answered ${response.status}`;
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.request("/healthz");
      return response.ok;
    } catch {
      return false;
    }
  }

  async listApprovals(state?: string): Promise<ApprovalView[]> {
    const query = state ? `?state=${encodeURIComponent(state)}` : "";
    const response = await this.request(`/approvals${query}`);
    if (!response.ok) {
      throw new GatewayError(response.status, await this.readError(response));
    }
    const body = (await response.json()) as { approvals: ApprovalView[] };
    return body.approvals;
  }

  listPending(): Promise<ApprovalView[]> {
    return this.listApprovals("pending");
  }

  async decide(
    approvalId: string,
    decision: Decision,
    principal = "console",
  ): Promise<DecisionReceipt> {
    const response = await this.request(`/approvals/${encodeURIComponent(approvalId)}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ decision, principal }),
    });
    if (response.status === 409) {
      const body = (await response.json()) as { state?: string };
      throw new AlreadyDecided(approvalId, body.state ?? "decided");
    }
    if (!response.ok) {
      throw new GatewayError(response.status, await this.readError(response));
    }
    return (await response.json()) as DecisionReceipt;
  }

  async sessionFrame(sessionId: string): Promise<Record<string, unknown>> {
    const response = await this.request(`/sessions/${encodeURIComponent(sessionId)}/frame`);
    if (!response.ok) {
      throw new GatewayError(response.status, await this.readError(response));
    }
    return (await response.json()) as Record<string, unknown>;
  }
}
