/** Explorer state and the transitions the invariants hang on:
 * the displayed frame's sequence number never decreases, and slider
 * values are clamped before they can reach a request.
 */

import { ATTRIBUTES, Attribute, clamp01 } from "./lerp.js";

export interface Pose {
  yaw: number;
  pitch: number;
  distance: number;
}

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface ExplorerState {
  presets: string[];
  presetA: Record<Attribute, string>;
  presetB: Record<Attribute, string>;
  t: Record<Attribute, number>;
  pose: Pose;
  connection: ConnectionStatus;
  nextSeq: number;
  displayedSeq: number;
  latencyMs: number | null;
}

export function initialState(presets: string[] = []): ExplorerState {
  const first = presets[0] ?? "zero";
  const second = presets[1] ?? first;
  const record = <V,>(v: V): Record<Attribute, V> =>
    Object.fromEntries(ATTRIBUTES.map((a) => [a, v])) as Record<Attribute, V>;
  return {
    presets,
    presetA: record(first),
    presetB: record(second),
    t: record(0),
    pose: { yaw: 0, pitch: 0, distance: 3 },
    connection: "connecting",
    nextSeq: 1,
    displayedSeq: 0,
    latencyMs: null,
  };
}

export function setSlider(state: ExplorerState, attribute: Attribute,
                          value: number): ExplorerState {
  return { ...state, t: { ...state.t, [attribute]: clamp01(value) } };
}

export function setPose(state: ExplorerState, pose: Partial<Pose>): ExplorerState {
  const next = { ...state.pose, ...pose };
  next.pitch = Math.min(1.4, Math.max(-1.4, next.pitch));
  next.distance = Math.max(1.2, next.distance);
  return { ...state, pose: next };
}

export function takeSeq(state: ExplorerState): [number, ExplorerState] {
  return [state.nextSeq, { ...state, nextSeq: state.nextSeq + 1 }];
}

export interface FrameDecision {
  state: ExplorerState;
  display: boolean;
}

/** Accept a frame only if it does not move the displayed sequence backwards. */
export function acceptFrame(state: ExplorerState, seq: number,
                            latencyMs: number | null = null): FrameDecision {
  if (seq < state.displayedSeq) {
    return { state, display: false };
  }
  return {
    state: {
      ...state,
      displayedSeq: seq,
      latencyMs: latencyMs ?? state.latencyMs,
    },
    display: true,
  };
}

export function setConnection(state: ExplorerState,
                              connection: ConnectionStatus): ExplorerState {
  return { ...state, connection };
}
