/** Full-screen stop surface shown while a playback runs.
 *
 * Any activation anywhere on it (pointer, key, or switch) issues a stop;
 * it dismisses itself when the playback ends or the interlock trips.
 */

export class PlaybackOverlay {
  readonly element: HTMLDivElement;
  private visible = false;

  constructor(
    doc: Document,
    private stopFn: () => Promise<void> | void,
  ) {
    this.element = doc.createElement("div");
    this.element.className = "playback-overlay";
    this.element.setAttribute("role", "button");
    this.element.setAttribute(
      "aria-label",
      "Playback running. Activate anywhere to stop the arm.",
    );
    this.element.tabIndex = 0;
    this.element.style.display = "none";
    this.element.textContent = "Arm is moving — tap anywhere to STOP";
    const trigger = (event: Event) => {
      event.preventDefault();
      void this.stopFn();
    };
    this.element.addEventListener("pointerdown", trigger);
    this.element.addEventListener("click", trigger);
    this.element.addEventListener("keydown", trigger);
    doc.body.appendChild(this.element);
  }

  get isVisible(): boolean {
    return this.visible;
  }

  /** Follow the playback state from the event stream. */
  setActive(active: boolean): void {
    this.visible = active;
    this.element.style.display = active ? "flex" : "none";
    if (active) this.element.focus();
  }
}
