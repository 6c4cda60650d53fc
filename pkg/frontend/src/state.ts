/** UI state as a pure function of the WebSocket event stream.
 *
 * Panels render from this state only; reconnects replay the server's
 * baseline events into a fresh state, and a sequence gap flags the view
 * as stale until a resync (reconnect plus REST refetch) completes.
 */

import {
  ArmPayload,
  LibraryPayload,
  PLAYBACK_ACTIVE_PHASES,
  PlaybackPayload,
  RecommendationPayload,
  SafetyPayload,
  WsEvent,
} from "./types.js";

export interface HistoryEntry {
  name: string;
  atSeq: number;
}

export interface UiState {
  lastSeq: number | null;
  seqGap: boolean;
  arm: ArmPayload | null;
  safety: SafetyPayload | null;
  playback: PlaybackPayload | null;
  playbackActive: boolean;
  recommendation: RecommendationPayload;
  libraryNames: string[];
  /** Most recent first, capped; derived from playback-start events. */
  history: HistoryEntry[];
}

export const HISTORY_CAP = 50;

export function initialState(): UiState {
  return {
    lastSeq: null,
    seqGap: false,
    arm: null,
    safety: null,
    playback: null,
    playbackActive: false,
    recommendation: { status: "none" },
    libraryNames: [],
    history: [],
  };
}

export function reduce(state: UiState, event: WsEvent): UiState {
  const next: UiState = { ...state };
  if (state.lastSeq !== null && event.seq !== state.lastSeq + 1) {
    next.seqGap = true;
  }
  next.lastSeq = event.seq;

  switch (event.type) {
    case "arm":
      next.arm = event.payload as unknown as ArmPayload;
      break;
    case "safety":
      next.safety = event.payload as unknown as SafetyPayload;
      break;
    case "playback": {
      const playback = event.payload as unknown as PlaybackPayload;
      const wasActive = state.playbackActive;
      next.playback = playback;
      next.playbackActive = PLAYBACK_ACTIVE_PHASES.has(playback.phase);
      if (!wasActive && next.playbackActive) {
        next.history = [{ name: playback.name, atSeq: event.seq }, ...state.history].slice(
          0,
          HISTORY_CAP,
        );
      }
      break;
    }
    case "recommendation":
      next.recommendation = event.payload as unknown as RecommendationPayload;
      break;
    case "library":
      next.libraryNames = (event.payload as unknown as LibraryPayload).names ?? [];
      break;
  }
  return next;
}
