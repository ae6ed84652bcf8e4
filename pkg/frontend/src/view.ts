// Pure HTML-string renderers. Everything that reaches the page goes
// through escapeHtml, since tool names, arguments, and matched poison
// text all originate from upstream servers.

import type { ApprovalView, PoisonFinding } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

const KNOWN_ACTIONS = new Set(["read", "write", "destructive"]);

export function actionBadge(actionType: string): string {
  const kind = KNOWN_ACTIONS.has(actionType) ? actionType : "unknown";
  return `<span class="badge badge-${kind}">${escapeHtml(actionType)}</span>`;
}

export function warningRibbon(findings: PoisonFinding[] | undefined): string {
  if (!findings || findings.length === 0) return "";
  const rows = findings
    .map(
      (f) =>
        `<li class="poison-${escapeHtml(f.severity)}">` +
        `<code>${escapeHtml(f.patternId)}</code> in ${escapeHtml(f.field)}: ` +
        `<q>${escapeHtml(f.matchedText)}</q></li>`,
    )
    .join("");
  return (
    `<div class="ribbon ribbon-warning" role="alert">` +
    `suspicious description text<ul>${rows}</ul></div>`
  );
}

export function renderArguments(args: Record<string, unknown>): string {
  return `<pre class="arguments">${escapeHtml(JSON.stringify(args, null, 2))}</pre>`;
}

export function renderAge(ageSeconds: number): string {
  const whole = Math.max(0, Math.floor(ageSeconds));
  if (whole < 60) return `${whole}s`;
  const minutes = Math.floor(whole / 60);
  const seconds = whole % 60;
  return `${minutes}m ${String(seconds).padStart(2, "0")}s`;
}

export function renderLintScore(score: number | undefined): string {
  if (score === undefined) return "";
  const cls = score >= 0.8 ? "good" : score >= 0.5 ? "middling" : "poor";
  return `<span class="lint lint-${cls}">lint ${score.toFixed(2)}</span>`;
}

export function approvalCard(view: ApprovalView): string {
  const id = escapeHtml(view.approvalId);
  // Reads never queue, so pending cards always carry controls; the guard
  // stays anyway so a read can never grow decision buttons.
  const controls =
    view.actionType === "read"
      ? ""
      : `<div class="controls">` +
        `<button data-decision="approved" data-approval-id="${id}">approve</button>` +
        `<button data-decision="denied" data-approval-id="${id}">deny</button>` +
        `</div>`;
  return (
    `<article class="card" data-approval-id="${id}">` +
    `<header>${actionBadge(view.actionType)}` +
    `<strong>${escapeHtml(view.toolName)}</strong>` +
    `<span class="session">session ${escapeHtml(view.sessionId)}</span>` +
    `<span class="age">${renderAge(view.ageSeconds)}</span>` +
    `${renderLintScore(view.lintScore)}</header>` +
    warningRibbon(view.poisonFindings) +
    renderArguments(view.arguments) +
    controls +
    `</article>`
  );
}

export function renderPendingList(views: ApprovalView[]): string {
  if (views.length === 0) {
    return `<div class="empty-state">No pending approvals. Gated calls will appear here.</div>`;
  }
  return views.map(approvalCard).join("");
}

export function connectionBanner(connected: boolean, stale: boolean): string {
  if (connected && !stale) return "";
  if (!connected && stale) {
    return (
      `<div class="banner banner-error" role="alert">` +
      `gateway unreachable; showing stale data</div>`
    );
  }
  if (!connected) {
    return `<div class="banner banner-error" role="alert">gateway unreachable</div>`;
  }
  return `<div class="banner banner-warning" role="alert">data may be stale</div>`;
}

export function renderNotice(notice: string | null): string {
  if (!notice) return "";
  return (
    `<div class="notice" role="status">${escapeHtml(notice)}` +
    `<button data-dismiss-notice>dismiss</button></div>`
  );
}
