/** User panel: Search & Play mode, AI Recommend mode, input settings, and
 * the tap-anywhere stop overlay. Fully operable with a single switch via
 * the scanner: the highlight walks every actionable control of the
 * current mode and one activation triggers the highlighted one.
 */

import { UserApi } from "./api.js";
import { button, el } from "./dom.js";
import { PlaybackOverlay } from "./overlay.js";
import { Scannable, SwitchScanner } from "./scan.js";
import { UiState } from "./state.js";
import { ScanSettings, UiMode } from "./types.js";

function scannable(node: HTMLButtonElement): Scannable {
  return {
    setHighlight(on: boolean) {
      node.classList.toggle("scan-focus", on);
      if (on) node.focus();
    },
    activate() {
      node.click();
    },
  };
}

export class UserPanel {
  mode: UiMode = "search_play";
  readonly root: HTMLElement;
  readonly overlay: PlaybackOverlay;
  readonly scanner: SwitchScanner;
  private doc: Document;
  private modeBar: HTMLElement;
  private viewHost: HTMLElement;
  private statusLine: HTMLElement;
  private errorBanner: HTMLElement;
  private searchInput: HTMLInputElement | null = null;
  private actionNames: string[] = [];
  private suggestions: string[] = [];
  private settings: ScanSettings;

  constructor(
    doc: Document,
    host: HTMLElement,
    private api: UserApi,
    settings: ScanSettings = { scanIntervalS: 1.0, debounceS: 0.3, enabled: false },
  ) {
    this.doc = doc;
    this.settings = { ...settings };
    this.scanner = new SwitchScanner(this.settings);
    this.overlay = new PlaybackOverlay(doc, () => this.api.stop());
    this.root = el(doc, "div", "panel user-panel");

    this.statusLine = el(doc, "div", "status", "connecting…");
    this.root.appendChild(this.statusLine);
    this.errorBanner = el(doc, "div", "error-banner");
    this.errorBanner.style.display = "none";
    this.root.appendChild(this.errorBanner);

    this.modeBar = el(doc, "div", "mode-bar");
    this.root.appendChild(this.modeBar);
    this.viewHost = el(doc, "div", "view-host");
    this.root.appendChild(this.viewHost);

    host.appendChild(this.root);

    // The single switch maps to Space (or any pointer press on the switch
    // region); when scanning is enabled it activates the highlighted item.
    doc.addEventListener("keydown", (event: KeyboardEvent) => {
      if (this.settings.enabled && event.key === " " && !this.overlay.isVisible) {
        event.preventDefault();
        this.scanner.press();
      }
    });

    this.setMode("search_play");
  }

  setMode(mode: UiMode): void {
    this.mode = mode;
    this.render();
  }

  applySettings(settings: Partial<ScanSettings>): void {
    this.settings = { ...this.settings, ...settings };
    this.scanner.configure(this.settings);
    if (this.settings.enabled) this.scanner.start();
    else this.scanner.stop();
    void this.api
      .setInputSettings(this.settings.scanIntervalS, this.settings.debounceS)
      .catch((err) => this.showError(String(err.message)));
  }

  async runSearch(): Promise<void> {
    const query = this.searchInput?.value ?? "";
    try {
      this.actionNames = await this.api.searchActions(query);
      this.render();
    } catch (err) {
      this.showError(String((err as Error).message));
    }
  }

  async play(name: string): Promise<void> {
    try {
      this.clearError();
      await this.api.play(name);
    } catch (err) {
      this.showError(String((err as Error).message));
    }
  }

  async captureFile(file: Blob): Promise<void> {
    try {
      this.clearError();
      this.suggestions = [];
      const result = await this.api.capture(file);
      this.suggestions = result.suggestions;
      this.render();
    } catch (err) {
      this.showError(`${(err as Error).message}`, true);
    }
  }

  // -- rendering ---------------------------------------------------------------

  private render(): void {
    this.modeBar.replaceChildren();
    const searchBtn = button(
      this.doc,
      "Search and Play mode",
      () => this.setMode("search_play"),
      this.mode === "search_play" ? "btn mode active" : "btn mode",
    );
    searchBtn.setAttribute("aria-pressed", String(this.mode === "search_play"));
    const aiBtn = button(
      this.doc,
      "AI Recommend mode",
      () => this.setMode("ai_recommend"),
      this.mode === "ai_recommend" ? "btn mode active" : "btn mode",
    );
    aiBtn.setAttribute("aria-pressed", String(this.mode === "ai_recommend"));
    this.modeBar.append(searchBtn, aiBtn);

    this.viewHost.replaceChildren();
    const scanItems: HTMLButtonElement[] = [searchBtn, aiBtn];

    if (this.mode === "search_play") {
      this.searchInput = el(this.doc, "input", "search-input") as HTMLInputElement;
      this.searchInput.setAttribute("aria-label", "Search actions by name");
      this.searchInput.addEventListener("input", () => void this.runSearch());
      this.viewHost.appendChild(this.searchInput);
      const list = el(this.doc, "div", "action-buttons");
      for (const name of this.actionNames) {
        const btn = button(this.doc, name, () => void this.play(name), "btn action");
        list.appendChild(btn);
        scanItems.push(btn);
      }
      this.viewHost.appendChild(list);
    } else {
      const pick = el(this.doc, "input", "capture-input") as HTMLInputElement;
      pick.type = "file";
      pick.accept = "image/png,image/jpeg";
      pick.setAttribute("aria-label", "Choose a photo of your conversation partner");
      pick.addEventListener("change", () => {
        const file = pick.files?.[0];
        if (file) void this.captureFile(file);
      });
      this.viewHost.appendChild(pick);
      const captureBtn = button(this.doc, "Capture photo", () => pick.click(), "btn capture");
      this.viewHost.appendChild(captureBtn);
      scanItems.push(captureBtn);
      const list = el(this.doc, "div", "suggestion-buttons");
      for (const name of this.suggestions) {
        const btn = button(this.doc, name, () => void this.play(name), "btn suggestion");
        list.appendChild(btn);
        scanItems.push(btn);
      }
      this.viewHost.appendChild(list);
    }

    // input-device settings, reachable in both modes
    const settingsRow = el(this.doc, "div", "settings-row");
    const interval = el(this.doc, "input", "setting") as HTMLInputElement;
    interval.type = "number";
    interval.step = "0.1";
    interval.min = "0.2";
    interval.value = String(this.settings.scanIntervalS);
    interval.setAttribute("aria-label", "Scan interval in seconds");
    const debounce = el(this.doc, "input", "setting") as HTMLInputElement;
    debounce.type = "number";
    debounce.step = "0.05";
    debounce.min = "0";
    debounce.value = String(this.settings.debounceS);
    debounce.setAttribute("aria-label", "Activation debounce in seconds");
    const scanToggle = button(
      this.doc,
      this.settings.enabled ? "Disable switch scanning" : "Enable switch scanning",
      () => this.applySettings({ enabled: !this.settings.enabled }),
    );
    const apply = button(this.doc, "Apply input settings", () =>
      this.applySettings({
        scanIntervalS: Number(interval.value),
        debounceS: Number(debounce.value),
      }),
    );
    settingsRow.append(interval, debounce, scanToggle, apply);
    this.viewHost.appendChild(settingsRow);
    scanItems.push(scanToggle, apply);

    this.scanner.setItems(scanItems.map(scannable));
  }

  // -- stream ---------------------------------------------------------------------

  update(state: UiState): void {
    this.overlay.setActive(state.playbackActive);
    const parts: string[] = [];
    if (state.safety?.mode === "Locked") {
      parts.push(`locked (${state.safety.reason}) — ask your assistant to release`);
    }
    if (state.playback && state.playbackActive) {
      parts.push(`playing ${state.playback.name}`);
    }
    if (state.recommendation.status === "pending") parts.push("asking for suggestions…");
    if (state.recommendation.status === "error") {
      this.showError(state.recommendation.detail ?? "suggestion failed", true);
    }
    if (
      state.recommendation.status === "ready" &&
      state.recommendation.suggestions &&
      state.recommendation.suggestions.join("|") !== this.suggestions.join("|")
    ) {
      this.suggestions = state.recommendation.suggestions;
      if (this.mode === "ai_recommend") this.render();
    }
    if (state.seqGap) parts.push("stream gap — resyncing");
    this.statusLine.textContent = parts.join(" · ") || "ready";
  }

  private showError(text: string, retry = false): void {
    this.errorBanner.replaceChildren();
    this.errorBanner.appendChild(el(this.doc, "span", "", text));
    if (retry) {
      this.errorBanner.appendChild(
        button(this.doc, "Retry capture", () => {
          this.clearError();
          this.setMode("ai_recommend");
        }),
      );
    }
    this.errorBanner.style.display = "block";
  }

  private clearError(): void {
    this.errorBanner.style.display = "none";
    this.errorBanner.replaceChildren();
  }
}
