/** Wire types shared with the control service. */

export type EventKind = "arm" | "safety" | "playback" | "recommendation" | "library";

export interface WsEvent {
  type: EventKind;
  seq: number;
  payload: Record<string, unknown>;
}

export interface ArmPayload {
  t: number;
  positions: number[];
  targets: number[];
  torque_enabled: boolean;
  /** Base-to-tip joint origins from forward kinematics, for the skeleton view. */
  joints: number[][];
}

export interface SafetyPayload {
  mode: "Locked" | "Unlocked";
  reason: string;
  joint: number | null;
  since: number;
}

export interface PlaybackPayload {
  name: string;
  phase: "queued" | "lead_in" | "playing" | "homing" | "completed" | "interrupted";
  sample_index: number;
  sample_count: number;
  stop_reason: string | null;
}

export interface RecommendationPayload {
  status: "none" | "pending" | "ready" | "error";
  suggestions?: string[];
  latency_s?: number;
  detail?: string;
}

export interface LibraryPayload {
  event: string;
  names: string[];
}

export interface ScanSettings {
  /** Highlight advance period; the service rejects values under 0.2 s. */
  scanIntervalS: number;
  debounceS: number;
  enabled: boolean;
}

export type UiMode = "search_play" | "ai_recommend";

export const PLAYBACK_ACTIVE_PHASES = new Set(["queued", "lead_in", "playing", "homing"]);
