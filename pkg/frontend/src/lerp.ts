/** Latent document math shared by the UI and its tests.
 *
 * The client-side lerp mirrors the service's /interpolate exactly: copy
 * the base document and blend only the chosen attribute, so one slider
 * move costs one websocket message instead of a REST round trip.
 */

export const ATTRIBUTES = ["id", "exp", "alb", "ill"] as const;
export type Attribute = (typeof ATTRIBUTES)[number];

export interface LatentDoc {
  z_id: number[];
  z_exp: number[];
  z_alb: number[];
  z_ill: number[];
}

export function clamp01(t: number): number {
  if (Number.isNaN(t)) return 0;
  return Math.min(1, Math.max(0, t));
}

export function codeKey(attribute: Attribute): keyof LatentDoc {
  return `z_${attribute}` as keyof LatentDoc;
}

export function copyDoc(doc: LatentDoc): LatentDoc {
  return {
    z_id: doc.z_id.slice(),
    z_exp: doc.z_exp.slice(),
    z_alb: doc.z_alb.slice(),
    z_ill: doc.z_ill.slice(),
  };
}

/** Copy of `a` with one attribute blended toward `b`'s; t is clamped. */
export function lerpAttribute(
  a: LatentDoc,
  b: LatentDoc,
  attribute: Attribute,
  t: number,
): LatentDoc {
  const key = codeKey(attribute);
  const va = a[key];
  const vb = b[key];
  if (va.length !== vb.length) {
    throw new Error(`attribute ${attribute}: dims ${va.length} vs ${vb.length}`);
  }
  const tt = clamp01(t);
  const out = copyDoc(a);
  out[key] = va.map((x, i) => (1 - tt) * x + tt * (vb[i] as number));
  return out;
}

export interface MixSpec {
  b: LatentDoc;
  t: number;
}

/** Base document with several attributes blended toward other documents. */
export function composeMix(
  base: LatentDoc,
  mixes: Partial<Record<Attribute, MixSpec>>,
): LatentDoc {
  let doc = copyDoc(base);
  for (const attribute of ATTRIBUTES) {
    const mix = mixes[attribute];
    if (mix) doc = lerpAttribute(doc, mix.b, attribute, mix.t);
  }
  return doc;
}

export function maxAbsDifference(a: LatentDoc, b: LatentDoc): number {
  let worst = 0;
  for (const attribute of ATTRIBUTES) {
    const key = codeKey(attribute);
    const va = a[key];
    const vb = b[key];
    if (va.length !== vb.length) return Infinity;
    for (let i = 0; i < va.length; i++) {
      worst = Math.max(worst, Math.abs((va[i] as number) - (vb[i] as number)));
    }
  }
  return worst;
}
