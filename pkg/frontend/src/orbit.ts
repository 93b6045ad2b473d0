/** Drag-to-orbit math, kept pure for testing. */

import { Pose } from "./state.js";

export const PITCH_LIMIT = 1.4;

export function dragOrbit(pose: Pose, dxPixels: number, dyPixels: number,
                          sensitivity = 0.008): Pose {
  return {
    yaw: pose.yaw + dxPixels * sensitivity,
    pitch: Math.min(PITCH_LIMIT, Math.max(-PITCH_LIMIT,
                                          pose.pitch - dyPixels * sensitivity)),
    distance: pose.distance,
  };
}

export function wheelZoom(pose: Pose, deltaY: number, minDistance = 1.2,
                          maxDistance = 12): Pose {
  const factor = Math.exp(deltaY * 0.001);
  return {
    ...pose,
    distance: Math.min(maxDistance, Math.max(minDistance, pose.distance * factor)),
  };
}
