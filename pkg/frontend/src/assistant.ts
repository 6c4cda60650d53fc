/** Assistant panel: e-stop, unlock, record/name/play/delete.
 *
 * The emergency stop is one activation away from every view: the button
 * sits in a bar that never leaves the screen, and Escape triggers it
 * globally regardless of focus or view.
 */

import { ActionInfo, AssistantApi } from "./api.js";
import { button, el } from "./dom.js";
import { drawSkeleton } from "./skeleton.js";
import { UiState } from "./state.js";

export type AssistantView = "actions" | "recording" | "naming";

export class AssistantPanel {
  view: AssistantView = "actions";
  readonly root: HTMLElement;
  readonly estopButton: HTMLButtonElement;
  private statusLine: HTMLElement;
  private listHost: HTMLElement;
  private viewHost: HTMLElement;
  private nameInput: HTMLInputElement | null = null;
  private pendingClipId: string | null = null;
  private actions: ActionInfo[] = [];
  private canvas: HTMLCanvasElement;
  private doc: Document;

  constructor(
    doc: Document,
    host: HTMLElement,
    private api: AssistantApi,
  ) {
    this.doc = doc;
    this.root = el(doc, "div", "panel assistant-panel");

    const bar = el(doc, "div", "safety-bar");
    this.estopButton = button(doc, "EMERGENCY STOP", () => void this.estop(), "btn estop");
    bar.appendChild(this.estopButton);
    bar.appendChild(button(doc, "Release arm (unlock)", () => void this.unlock()));
    this.statusLine = el(doc, "div", "status", "connecting…");
    bar.appendChild(this.statusLine);
    this.root.appendChild(bar);

    this.canvas = el(doc, "canvas", "skeleton");
    this.canvas.width = 320;
    this.canvas.height = 240;
    this.canvas.setAttribute("aria-label", "Live arm skeleton");
    this.root.appendChild(this.canvas);

    this.viewHost = el(doc, "div", "view-host");
    this.root.appendChild(this.viewHost);
    this.listHost = el(doc, "div", "action-list");

    host.appendChild(this.root);
    // One-activation e-stop from anywhere, whatever has focus.
    doc.addEventListener("keydown", (event: KeyboardEvent) => {
      if (event.key === "Escape") {
        event.preventDefault();
        void this.estop();
      }
    });
    this.showActionsView();
  }

  // -- commands ---------------------------------------------------------------

  async estop(): Promise<void> {
    await this.api.estop();
  }

  async unlock(): Promise<void> {
    try {
      await this.api.unlock();
    } catch (err) {
      this.note(String((err as Error).message));
    }
  }

  async startRecording(): Promise<void> {
    await this.api.recordStart();
    this.showRecordingView();
  }

  async stopRecording(): Promise<void> {
    const clip = await this.api.recordStop();
    this.pendingClipId = clip.id;
    this.showNamingView(`New recording (${clip.samples} samples)`);
  }

  async saveName(): Promise<void> {
    if (!this.pendingClipId || !this.nameInput) return;
    try {
      await this.api.nameClip(this.pendingClipId, this.nameInput.value);
      this.pendingClipId = null;
      await this.refreshActions();
      this.showActionsView();
    } catch (err) {
      this.note(String((err as Error).message));
    }
  }

  async refreshActions(): Promise<void> {
    this.actions = await this.api.listActions();
    this.renderActionList();
  }

  // -- views ----------------------------------------------------------------------

  showActionsView(): void {
    this.view = "actions";
    this.viewHost.replaceChildren();
    this.viewHost.appendChild(
      button(this.doc, "Start recording", () => void this.startRecording()),
    );
    this.viewHost.appendChild(this.listHost);
    this.renderActionList();
  }

  showRecordingView(): void {
    this.view = "recording";
    this.viewHost.replaceChildren();
    this.viewHost.appendChild(el(this.doc, "p", "hint",
      "Recording: move the arm by hand, then stop."));
    this.viewHost.appendChild(
      button(this.doc, "Stop recording", () => void this.stopRecording()),
    );
  }

  showNamingView(caption: string, renameOf: string | null = null): void {
    this.view = "naming";
    this.viewHost.replaceChildren();
    this.viewHost.appendChild(el(this.doc, "p", "hint", caption));
    this.nameInput = el(this.doc, "input", "name-input") as HTMLInputElement;
    this.nameInput.setAttribute("aria-label", "Action name");
    if (renameOf) this.nameInput.value = renameOf;
    this.viewHost.appendChild(this.nameInput);
    this.viewHost.appendChild(button(this.doc, "Save name", () => void this.saveName()));
    this.viewHost.appendChild(
      button(this.doc, "Cancel", () => this.showActionsView()),
    );
  }

  private renderActionList(): void {
    this.listHost.replaceChildren();
    for (const action of this.actions) {
      const row = el(this.doc, "div", "action-row");
      row.appendChild(el(this.doc, "span", "action-name", action.name));
      row.appendChild(
        button(this.doc, `Play ${action.name}`, () => void this.api.play(action.name)),
      );
      row.appendChild(
        button(this.doc, `Rename ${action.name}`, () => {
          this.pendingClipId = action.id;
          this.showNamingView(`Rename "${action.name}"`, action.name);
        }),
      );
      row.appendChild(
        button(this.doc, `Delete ${action.name}`, () => {
          void this.api.deleteAction(action.name).then(() => this.refreshActions());
        }),
      );
      this.listHost.appendChild(row);
    }
  }

  // -- stream -----------------------------------------------------------------------

  update(state: UiState): void {
    const parts: string[] = [];
    if (state.safety) {
      parts.push(
        state.safety.mode === "Locked"
          ? `LOCKED (${state.safety.reason})`
          : "unlocked",
      );
    }
    if (state.playback) parts.push(`${state.playback.name}: ${state.playback.phase}`);
    if (state.seqGap) parts.push("stream gap — resyncing");
    this.statusLine.textContent = parts.join(" · ") || "idle";
    if (state.arm) {
      const ctx = this.canvas.getContext("2d");
      if (ctx) drawSkeleton(ctx, state.arm.joints, this.canvas.width, this.canvas.height);
    }
  }

  private note(text: string): void {
    this.statusLine.textContent = text;
  }
}
