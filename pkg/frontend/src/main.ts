/** Entry point: boots the panel named by the page's data-role attribute.
 *
 * Query parameters:
 *   api = REST base (default http://127.0.0.1:8600 user / :8601 assistant)
 */

import { AssistantApi, StateSocket, UserApi } from "./api.js";
import { AssistantPanel } from "./assistant.js";
import { initialState, reduce, UiState } from "./state.js";
import { UserPanel } from "./user.js";

export function boot(doc: Document): void {
  const role = doc.body.dataset.role === "assistant" ? "assistant" : "user";
  const params = new URLSearchParams(doc.defaultView?.location.search ?? "");
  const defaultPort = role === "assistant" ? 8601 : 8600;
  const base = params.get("api") ?? `http://127.0.0.1:${defaultPort}`;
  const wsBase = base.replace(/^http/, "ws");

  const host = doc.getElementById("app") ?? doc.body;
  let state: UiState = initialState();

  let apply: (s: UiState) => void;
  let refresh: () => void;
  if (role === "assistant") {
    const panel = new AssistantPanel(doc, host, new AssistantApi(base));
    apply = (s) => panel.update(s);
    refresh = () => void panel.refreshActions();
  } else {
    const panel = new UserPanel(doc, host, new UserApi(base));
    apply = (s) => panel.update(s);
    refresh = () => void panel.runSearch();
  }

  const socket = new StateSocket(`${wsBase}/ws/state`, {
    onEvent(event) {
      state = reduce(state, event);
      apply(state);
    },
    onResync() {
      state = initialState();
      refresh();
    },
  });
  socket.connect();
}

if (typeof document !== "undefined" && document.body?.dataset.role) {
  boot(document);
}
