// Browser bootstrap: wire the controller to the static page. The gateway
// base URL comes from the ?gateway= query parameter so one console build
// can point at any gateway instance.

import { GatewayClient } from "./api.js";
import { ConsoleController } from "./app.js";
import { connectionBanner, renderNotice, renderPendingList } from "./view.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("gateway") ?? "http://127.0.0.1:8787";

const client = new GatewayClient(baseUrl);
const controller = new ConsoleController(client);

const bannerHost = document.getElementById("banner");
const noticeHost = document.getElementById("notice");
const listHost = document.getElementById("approvals");
const targetLabel = document.getElementById("target");

if (targetLabel) targetLabel.textContent = baseUrl;

function redraw(): void {
  if (bannerHost) {
    bannerHost.innerHTML = connectionBanner(controller.state.connected, controller.state.stale);
  }
  if (noticeHost) noticeHost.innerHTML = renderNotice(controller.state.notice);
  if (listHost) listHost.innerHTML = renderPendingList(controller.state.pending);
}

controller.onChange = redraw;

document.addEventListener("click", (event) => {
  const target = event.target as HTMLElement | null;
  if (!target) return;
  const button = target.closest("button");
  if (!button) return;
  if (button.hasAttribute("data-dismiss-notice")) {
    controller.dismissNotice();
    return;
  }
  const decision = button.getAttribute("data-decision");
  const approvalId = button.getAttribute("data-approval-id");
  if ((decision === "approved" || decision === "denied") && approvalId) {
    void controller.decide(approvalId, decision);
  }
});

controller.start();
