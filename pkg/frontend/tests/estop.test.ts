// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { AssistantApi } from "../src/api.js";
import { AssistantPanel } from "../src/assistant.js";

function fakeFetch() {
  const calls: { url: string; method: string }[] = [];
  const fn = async (url: string, init?: RequestInit) => {
    calls.push({ url, method: init?.method ?? "GET" });
    if (url.endsWith("/actions") && (!init || !init.method || init.method === "GET")) {
      return new Response(JSON.stringify({ actions: [] }), { status: 200 });
    }
    if (url.endsWith("/record/stop")) {
      return new Response(
        JSON.stringify({ clip: { id: "c1", samples: 12, duration_s: 0.4, playable: true } }),
        { status: 200 },
      );
    }
    return new Response(JSON.stringify({ safety: { mode: "Locked" } }), { status: 200 });
  };
  return { fn, calls };
}

function estopCalls(calls: { url: string; method: string }[]) {
  return calls.filter((c) => c.url.endsWith("/estop") && c.method === "POST");
}

describe("one-activation emergency stop from every assistant view", () => {
  let panel: AssistantPanel;
  let calls: { url: string; method: string }[];

  beforeEach(() => {
    document.body.innerHTML = "";
    const fetcher = fakeFetch();
    calls = fetcher.calls;
    panel = new AssistantPanel(
      document,
      document.body,
      new AssistantApi("http://svc", fetcher.fn),
    );
  });

  const views: ["actions" | "recording" | "naming", (p: AssistantPanel) => void][] = [
    ["actions", (p) => p.showActionsView()],
    ["recording", (p) => p.showRecordingView()],
    ["naming", (p) => p.showNamingView("name it")],
  ];

  for (const [name, enter] of views) {
    it(`escape key fires the e-stop from the ${name} view`, () => {
      enter(panel);
      expect(panel.view).toBe(name);
      document.dispatchEvent(new KeyboardEvent("keydown", { key: "Escape", bubbles: true }));
      expect(estopCalls(calls).length).toBe(1);
    });

    it(`the e-stop button stays on screen in the ${name} view`, () => {
      enter(panel);
      expect(panel.estopButton.isConnected).toBe(true);
      panel.estopButton.click();
      expect(estopCalls(calls).length).toBe(1);
    });
  }

  it("estop button is the first control in the panel", () => {
    const firstButton = panel.root.querySelector("button");
    expect(firstButton).toBe(panel.estopButton);
  });
});
