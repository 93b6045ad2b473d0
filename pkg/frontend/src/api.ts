/** REST helpers for the render service. */

import { Attribute, LatentDoc } from "./lerp.js";
import { Pose } from "./state.js";

export interface ModelInfo {
  latent_dims: Record<string, number>;
  resolution: [number, number];
  feature_grid: [number, number];
  bounding_radius: number;
  step: number;
  presets: string[];
}

export async function getInfo(baseUrl: string): Promise<ModelInfo> {
  const res = await fetch(`${baseUrl}/model/info`);
  if (!res.ok) throw new Error(`model/info failed: ${res.status}`);
  return (await res.json()) as ModelInfo;
}

export async function interpolate(
  baseUrl: string,
  a: string,
  b: string,
  attribute: Attribute,
  t: number,
): Promise<LatentDoc> {
  const res = await fetch(`${baseUrl}/interpolate`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ a, b, attribute, t }),
  });
  if (!res.ok) throw new Error(`interpolate failed: ${res.status}`);
  return (await res.json()) as LatentDoc;
}

/** A preset's own codes: blend it with itself at t = 0. */
export function getPresetDoc(baseUrl: string, preset: string): Promise<LatentDoc> {
  return interpolate(baseUrl, preset, preset, "exp", 0);
}

export async function transferSequence(
  baseUrl: string,
  target: string | LatentDoc,
  sequence: (string | LatentDoc)[],
): Promise<LatentDoc[]> {
  const res = await fetch(`${baseUrl}/transfer`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ target, sequence }),
  });
  if (!res.ok) throw new Error(`transfer failed: ${res.status}`);
  const payload = (await res.json()) as { states: LatentDoc[] };
  return payload.states;
}

export async function renderPng(
  baseUrl: string,
  body: { latents?: LatentDoc; preset?: string; pose?: Partial<Pose> },
): Promise<ArrayBuffer> {
  const res = await fetch(`${baseUrl}/render`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) throw new Error(`render failed: ${res.status}`);
  return res.arrayBuffer();
}
