// Polling controller: owns the console state, talks to the gateway
// through GatewayApi, and never decides anything locally. Rendering is
// someone else's job; the controller only mutates state and notifies.

import { AlreadyDecided, GatewayError, GatewayUnreachable } from "./api.js";
import type { ApprovalView, Decision, GatewayApi } from "./api.js";

// Pending calls must surface within two seconds, so the poll interval is
// clamped to half that budget no matter what the configuration says.
export const MAX_POLL_INTERVAL_MS = 1000;

export interface ConsoleState {
  connected: boolean;
  pending: ApprovalView[];
  lastSyncMs: number | null;
  stale: boolean;
  notice: string | null;
}

export interface ControllerOptions {
  pollIntervalMs?: number;
  principal?: string;
  now?: () => number;
}

export class ConsoleController {
  readonly state: ConsoleState = {
    connected: false,
    pending: [],
    lastSyncMs: null,
    stale: false,
    notice: null,
  };
  readonly pollIntervalMs: number;
  onChange: (() => void) | null = null;

  private readonly principal: string;
  private readonly now: () => number;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly client: GatewayApi,
    options: ControllerOptions = {},
  ) {
    this.pollIntervalMs = Math.min(
      options.pollIntervalMs ?? MAX_POLL_INTERVAL_MS,
      MAX_POLL_INTERVAL_MS,
    );
    this.principal = options.principal ?? "console";
    this.now = options.now ?? (() => Date.now());
  }

  private notify(): void {
    if (this.onChange) this.onChange();
  }

  async tick(): Promise<void> {
    try {
      const pending = await this.client.listPending();
      this.state.pending = pending;
      this.state.connected = true;
      this.state.stale = false;
      this.state.lastSyncMs = this.now();
    } catch (error) {
      this.state.connected = false;
      // Old cards stay on screen but are flagged; an empty console that
      // never synced has nothing to be stale about.
      this.state.stale = this.state.lastSyncMs !== null;
      if (!(error instanceof GatewayUnreachable) && !(error instanceof GatewayError)) {
        throw error;
      }
    }
    this.notify();
  }

  /** Approve or deny one card. Returns true when this console's decision won. */
  async decide(approvalId: string, decision: Decision): Promise<boolean> {
    try {
      await this.client.decide(approvalId, decision, this.principal);
      this.removeCard(approvalId);
      this.notify();
      return true;
    } catch (error) {
      if (error instanceof AlreadyDecided) {
        // Non-blocking: someone else won the race; reflect their outcome.
        this.state.notice = `approval ${approvalId} was already decided: ${error.state}`;
        this.removeCard(approvalId);
        this.notify();
        return false;
      }
      if (error instanceof GatewayError || error instanceof GatewayUnreachable) {
        this.state.notice = error.message;
        this.notify();
        return false;
      }
      throw error;
    }
  }

  dismissNotice(): void {
    this.state.notice = null;
    this.notify();
  }

  start(): void {
    if (this.timer) return;
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private removeCard(approvalId: string): void {
    this.state.pending = this.state.pending.filter((v) => v.approvalId !== approvalId);
  }
}
