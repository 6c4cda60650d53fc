/** REST and WebSocket clients for the control service. */

import { WsEvent } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function unwrap(response: Response): Promise<any> {
  let doc: any = null;
  try {
    doc = await response.json();
  } catch {
    // non-JSON error body
  }
  if (!response.ok) {
    throw new ApiError(
      response.status,
      doc?.error ?? "HttpError",
      doc?.detail ?? `HTTP ${response.status}`,
    );
  }
  return doc;
}

/** User-port client. */
export class UserApi {
  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async searchActions(query = ""): Promise<string[]> {
    const q = query ? `?query=${encodeURIComponent(query)}` : "";
    const doc = await unwrap(await this.fetchFn(`${this.baseUrl}/actions${q}`));
    return doc.actions;
  }

  async play(name: string): Promise<void> {
    await unwrap(
      await this.fetchFn(`${this.baseUrl}/play/${encodeURIComponent(name)}`, { method: "POST" }),
    );
  }

  async stop(): Promise<void> {
    await unwrap(await this.fetchFn(`${this.baseUrl}/stop`, { method: "POST" }));
  }

  async capture(image: Blob): Promise<{ suggestions: string[]; latency_s: number }> {
    const form = new FormData();
    form.append("image", image, "capture.png");
    const doc = await unwrap(
      await this.fetchFn(`${this.baseUrl}/capture`, { method: "POST", body: form }),
    );
    return doc.recommendation;
  }

  async recommendation(): Promise<any> {
    return unwrap(await this.fetchFn(`${this.baseUrl}/recommendation`));
  }

  async setInputSettings(scanIntervalS: number, debounceS: number): Promise<void> {
    await unwrap(
      await this.fetchFn(`${this.baseUrl}/settings/input`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ scan_interval_s: scanIntervalS, debounce_s: debounceS }),
      }),
    );
  }
}

export interface ActionInfo {
  name: string;
  id: string;
  created_at: string;
  last_used_at: string | null;
  duration_s: number;
  samples: number;
}

/** Assistant-port client. */
export class AssistantApi {
  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async estop(): Promise<void> {
    await unwrap(await this.fetchFn(`${this.baseUrl}/estop`, { method: "POST" }));
  }

  async unlock(): Promise<void> {
    await unwrap(await this.fetchFn(`${this.baseUrl}/unlock`, { method: "POST" }));
  }

  async recordStart(): Promise<void> {
    await unwrap(await this.fetchFn(`${this.baseUrl}/record/start`, { method: "POST" }));
  }

  async recordStop(): Promise<{ id: string; samples: number; duration_s: number }> {
    const doc = await unwrap(await this.fetchFn(`${this.baseUrl}/record/stop`, { method: "POST" }));
    return doc.clip;
  }

  async nameClip(id: string, name: string): Promise<void> {
    await unwrap(
      await this.fetchFn(`${this.baseUrl}/actions/${encodeURIComponent(id)}/name`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ name }),
      }),
    );
  }

  async play(name: string): Promise<void> {
    await unwrap(
      await this.fetchFn(`${this.baseUrl}/actions/${encodeURIComponent(name)}/play`, {
        method: "POST",
      }),
    );
  }

  async deleteAction(name: string): Promise<void> {
    await unwrap(
      await this.fetchFn(`${this.baseUrl}/actions/${encodeURIComponent(name)}`, {
        method: "DELETE",
      }),
    );
  }

  async listActions(): Promise<ActionInfo[]> {
    const doc = await unwrap(await this.fetchFn(`${this.baseUrl}/actions`));
    return doc.actions;
  }
}

export interface StateSocketHooks {
  onEvent(event: WsEvent): void;
  /** Called when the stream restarted (fresh seq space): refetch via REST. */
  onResync?(): void;
}

/** Auto-reconnecting state stream. seq is per-connection, so every
 * (re)connect starts a fresh sequence and triggers onResync. */
export class StateSocket {
  private socket: WebSocket | null = null;
  private closed = false;
  private retryMs = 500;

  constructor(
    private wsUrl: string,
    private hooks: StateSocketHooks,
    private wsFactory: (url: string) => WebSocket = (url) => new WebSocket(url),
  ) {}

  connect(): void {
    if (this.closed) return;
    const socket = this.wsFactory(this.wsUrl);
    this.socket = socket;
    socket.onopen = () => {
      this.retryMs = 500;
      this.hooks.onResync?.();
    };
    socket.onmessage = (msg: MessageEvent) => {
      this.hooks.onEvent(JSON.parse(String(msg.data)) as WsEvent);
    };
    socket.onclose = () => {
      if (this.closed) return;
      setTimeout(() => this.connect(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, 5000);
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
