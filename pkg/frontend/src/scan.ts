/** Single-switch scanning: a highlight cycles through the actionable
 * elements at a fixed interval and one activation (any key, click, or
 * assistive switch mapped to either) triggers the highlighted element.
 * Activations inside the debounce window are ignored, absorbing switch
 * chatter and accidental double hits.
 */

import { ScanSettings } from "./types.js";

export interface Scannable {
  setHighlight(on: boolean): void;
  activate(): void;
}

export class SwitchScanner {
  private items: Scannable[] = [];
  private index = 0;
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastPressMs: number | null = null;
  private settings: ScanSettings;
  private nowFn: () => number;

  constructor(settings: ScanSettings, nowFn: () => number = () => Date.now()) {
    this.settings = { ...settings };
    this.nowFn = nowFn;
  }

  get focusedIndex(): number {
    return this.index;
  }

  get running(): boolean {
    return this.timer !== null;
  }

  configure(settings: Partial<ScanSettings>): void {
    this.settings = { ...this.settings, ...settings };
    if (this.timer !== null) {
      this.stop();
      this.start();
    }
  }

  setItems(items: Scannable[]): void {
    for (const item of this.items) item.setHighlight(false);
    this.items = items.slice();
    this.index = 0;
    this.applyHighlight();
  }

  start(): void {
    if (this.timer !== null || !this.settings.enabled || this.items.length === 0) return;
    this.timer = setInterval(() => this.advance(), this.settings.scanIntervalS * 1000);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  advance(): void {
    if (this.items.length === 0) return;
    this.index = (this.index + 1) % this.items.length;
    this.applyHighlight();
  }

  /** One switch activation. Returns true when it triggered the focused item. */
  press(): boolean {
    const now = this.nowFn();
    if (this.lastPressMs !== null && now - this.lastPressMs < this.settings.debounceS * 1000) {
      return false;
    }
    this.lastPressMs = now;
    const item = this.items[this.index];
    if (!item) return false;
    item.activate();
    return true;
  }

  private applyHighlight(): void {
    this.items.forEach((item, i) => item.setHighlight(i === this.index));
  }
}
