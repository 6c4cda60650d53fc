import { afterEach, describe, expect, it, vi } from "vitest";

import { SwitchScanner, Scannable } from "../src/scan.js";

function makeItems(labels: string[]) {
  const highlights: string[] = [];
  const activations: string[] = [];
  const items: Scannable[] = labels.map((label) => ({
    setHighlight(on: boolean) {
      if (on) highlights.push(label);
    },
    activate() {
      activations.push(label);
    },
  }));
  return { items, highlights, activations };
}

afterEach(() => {
  vi.useRealTimers();
});

describe("scan cycle ordering and timing", () => {
  it("advances A,B,C,A at one-second steps", () => {
    vi.useFakeTimers();
    const { items, highlights } = makeItems(["A", "B", "C"]);
    const scanner = new SwitchScanner({ scanIntervalS: 1.0, debounceS: 0.3, enabled: true });
    scanner.setItems(items);
    scanner.start();
    expect(highlights.at(-1)).toBe("A"); // highlight starts on the first item
    vi.advanceTimersByTime(999);
    expect(highlights.at(-1)).toBe("A"); // nothing before the interval elapses
    vi.advanceTimersByTime(1);
    expect(highlights.at(-1)).toBe("B");
    vi.advanceTimersByTime(1000);
    expect(highlights.at(-1)).toBe("C");
    vi.advanceTimersByTime(1000);
    expect(highlights.at(-1)).toBe("A"); // wraps around
    expect(highlights).toEqual(["A", "B", "C", "A"]);
    scanner.stop();
  });

  it("activation at t=1.5s triggers the second item", () => {
    vi.useFakeTimers();
    const { items, activations } = makeItems(["A", "B", "C"]);
    const scanner = new SwitchScanner({ scanIntervalS: 1.0, debounceS: 0.3, enabled: true });
    scanner.setItems(items);
    scanner.start();
    vi.advanceTimersByTime(1500);
    expect(scanner.press()).toBe(true);
    expect(activations).toEqual(["B"]);
    scanner.stop();
  });

  it("real timers keep the advance period within 20% of the interval", async () => {
    const stamps: number[] = [];
    const items: Scannable[] = [0, 1, 2].map(() => ({
      setHighlight(on: boolean) {
        if (on) stamps.push(performance.now());
      },
      activate() {},
    }));
    const scanner = new SwitchScanner({ scanIntervalS: 0.1, debounceS: 0, enabled: true });
    scanner.setItems(items);
    stamps.length = 0; // measure from start()
    scanner.start();
    await new Promise((resolve) => setTimeout(resolve, 560));
    scanner.stop();
    const gaps = stamps.slice(2).map((t, i) => t - stamps[i + 1]);
    expect(gaps.length).toBeGreaterThanOrEqual(3);
    for (const gap of gaps) {
      expect(gap).toBeGreaterThanOrEqual(80);
      expect(gap).toBeLessThanOrEqual(120);
    }
  });
});

describe("debounce", () => {
  it("two activations 50ms apart with 300ms debounce trigger once", () => {
    vi.useFakeTimers();
    const { items, activations } = makeItems(["A", "B", "C"]);
    const scanner = new SwitchScanner({ scanIntervalS: 1.0, debounceS: 0.3, enabled: true });
    scanner.setItems(items);
    scanner.start();
    expect(scanner.press()).toBe(true);
    vi.advanceTimersByTime(50);
    expect(scanner.press()).toBe(false); // inside the debounce window
    expect(activations).toEqual(["A"]);
    vi.advanceTimersByTime(300);
    expect(scanner.press()).toBe(true);
    expect(activations.length).toBe(2);
    scanner.stop();
  });
});

describe("item management", () => {
  it("setItems resets focus and clears old highlights", () => {
    const first = makeItems(["A", "B"]);
    const scanner = new SwitchScanner({ scanIntervalS: 1, debounceS: 0, enabled: true });
    scanner.setItems(first.items);
    scanner.advance();
    expect(scanner.focusedIndex).toBe(1);
    const second = makeItems(["X"]);
    scanner.setItems(second.items);
    expect(scanner.focusedIndex).toBe(0);
    expect(second.highlights).toEqual(["X"]);
  });

  it("press on empty scanner does nothing", () => {
    const scanner = new SwitchScanner({ scanIntervalS: 1, debounceS: 0, enabled: true });
    expect(scanner.press()).toBe(false);
  });
});
