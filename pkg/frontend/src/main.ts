/** Browser entry point: wires sliders, orbit, live stream, transfer playback. */

import { getInfo, getPresetDoc, renderPng, transferSequence } from "./api.js";
import { RequestCoalescer } from "./coalescer.js";
import { ATTRIBUTES, Attribute, LatentDoc, composeMix, copyDoc } from "./lerp.js";
import { dragOrbit, wheelZoom } from "./orbit.js";
import {
  ExplorerState,
  acceptFrame,
  initialState,
  setConnection,
  setPose,
  setSlider,
  takeSeq,
} from "./state.js";
import { LiveClient, LiveRequest } from "./transport.js";

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? "http://127.0.0.1:8600";
}

function wsUrl(base: string): string {
  return base.replace(/^http/, "ws") + "/live";
}

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

async function boot(): Promise<void> {
  const base = serviceUrl();
  const info = await getInfo(base);
  let state: ExplorerState = initialState(info.presets);
  state = setPose(state, { distance: 3 * info.bounding_radius });

  const presetDocs = new Map<string, LatentDoc>();
  async function docFor(name: string): Promise<LatentDoc> {
    let doc = presetDocs.get(name);
    if (!doc) {
      doc = await getPresetDoc(base, name);
      presetDocs.set(name, doc);
    }
    return doc;
  }

  const frameImg = $<HTMLImageElement>("frame");
  const latency = $<HTMLSpanElement>("latency");
  const seqLabel = $<HTMLSpanElement>("seq");
  const banner = $<HTMLDivElement>("banner");
  const toast = $<HTMLDivElement>("toast");
  let lastFrameB64 = "";
  let lastDoc: LatentDoc | null = null;

  function showToast(message: string): void {
    toast.textContent = message;
    toast.style.display = "block";
    setTimeout(() => (toast.style.display = "none"), 4000);
  }

  const live = new LiveClient(wsUrl(base), {
    onFrame: (frame, rtt) => {
      const decision = acceptFrame(state, frame.seq, rtt);
      state = decision.state;
      if (!decision.display) return;  // stale frame: displayed seq stays monotone
      lastFrameB64 = frame.image_b64;
      frameImg.src = `data:image/${frame.encoding};base64,${frame.image_b64}`;
      latency.textContent = Number.isNaN(rtt)
        ? `${frame.render_ms.toFixed(0)} ms render`
        : `${rtt.toFixed(0)} ms round trip / ${frame.render_ms.toFixed(0)} ms render`;
      seqLabel.textContent = `frame #${frame.seq}`;
    },
    onStatus: (status) => {
      state = setConnection(state, status);
      banner.style.display = status === "open" ? "none" : "block";
      banner.textContent = status === "connecting"
        ? "connecting to render service..."
        : "disconnected: retrying";
    },
    onError: (message) => showToast(message),
  });
  live.connect();

  const coalescer = new RequestCoalescer<LiveRequest>((req) => live.send(req));

  async function pushFrame(): Promise<void> {
    // copy before editing: docFor returns cached documents
    const baseDoc = copyDoc(await docFor(state.presetA.id));
    const mixes: Partial<Record<Attribute, { b: LatentDoc; t: number }>> = {};
    for (const attribute of ATTRIBUTES) {
      const aDoc = await docFor(state.presetA[attribute]);
      const bDoc = await docFor(state.presetB[attribute]);
      // per-attribute base: attribute taken from its own preset-A choice
      baseDoc[`z_${attribute}`] = aDoc[`z_${attribute}`].slice();
      mixes[attribute] = { b: bDoc, t: state.t[attribute] };
    }
    lastDoc = composeMix(baseDoc, mixes);
    const [seq, next] = takeSeq(state);
    state = next;
    coalescer.submit({ seq, latents: lastDoc, pose: state.pose });
  }

  // attribute selectors and sliders
  const controls = $<HTMLDivElement>("controls");
  for (const attribute of ATTRIBUTES) {
    const row = document.createElement("div");
    row.className = "control-row";
    const label = document.createElement("label");
    label.textContent = attribute;
    const selA = document.createElement("select");
    const selB = document.createElement("select");
    for (const sel of [selA, selB]) {
      for (const preset of info.presets) {
        const opt = document.createElement("option");
        opt.value = preset;
        opt.textContent = preset;
        sel.appendChild(opt);
      }
    }
    selA.value = state.presetA[attribute];
    selB.value = state.presetB[attribute];
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.01";
    slider.value = "0";
    const readout = document.createElement("span");
    readout.textContent = "0.00";
    selA.onchange = () => {
      state = { ...state, presetA: { ...state.presetA, [attribute]: selA.value } };
      void pushFrame();
    };
    selB.onchange = () => {
      state = { ...state, presetB: { ...state.presetB, [attribute]: selB.value } };
      void pushFrame();
    };
    slider.oninput = () => {
      state = setSlider(state, attribute, Number(slider.value));
      readout.textContent = state.t[attribute].toFixed(2);
      void pushFrame();
    };
    row.append(label, selA, selB, slider, readout);
    controls.appendChild(row);
  }

  // pose: drag to orbit, wheel to zoom, numeric fields
  const yawField = $<HTMLInputElement>("yaw");
  const pitchField = $<HTMLInputElement>("pitch");
  const distanceField = $<HTMLInputElement>("distance");

  function syncPoseFields(): void {
    yawField.value = state.pose.yaw.toFixed(2);
    pitchField.value = state.pose.pitch.toFixed(2);
    distanceField.value = state.pose.distance.toFixed(2);
  }
  syncPoseFields();

  let dragging = false;
  let last: [number, number] = [0, 0];
  frameImg.onpointerdown = (ev) => {
    dragging = true;
    last = [ev.clientX, ev.clientY];
    frameImg.setPointerCapture(ev.pointerId);
  };
  frameImg.onpointermove = (ev) => {
    if (!dragging) return;
    const [dx, dy] = [ev.clientX - last[0], ev.clientY - last[1]];
    last = [ev.clientX, ev.clientY];
    state = { ...state, pose: dragOrbit(state.pose, dx, dy) };
    syncPoseFields();
    void pushFrame();
  };
  frameImg.onpointerup = () => (dragging = false);
  frameImg.onwheel = (ev) => {
    ev.preventDefault();
    state = { ...state, pose: wheelZoom(state.pose, ev.deltaY) };
    syncPoseFields();
    void pushFrame();
  };
  for (const [field, key] of [[yawField, "yaw"], [pitchField, "pitch"],
                              [distanceField, "distance"]] as const) {
    field.onchange = () => {
      state = setPose(state, { [key]: Number(field.value) });
      syncPoseFields();
      void pushFrame();
    };
  }

  // expression transfer playback
  $<HTMLButtonElement>("play-transfer").onclick = async () => {
    try {
      const target = state.presetA.id;
      const sequence = info.presets.filter((p) => p !== "zero");
      const states = await transferSequence(base, target, sequence);
      let index = 0;
      const timer = setInterval(() => {
        const doc = states[index];
        if (!doc) {
          clearInterval(timer);
          return;
        }
        const [seq, next] = takeSeq(state);
        state = next;
        live.send({ seq, latents: doc, pose: state.pose });
        index += 1;
      }, 250);
    } catch (err) {
      showToast(String(err));
    }
  };

  // snapshot: current frame + latent document
  $<HTMLButtonElement>("snapshot").onclick = async () => {
    const stamp = Date.now();
    if (lastFrameB64) {
      download(`frame-${stamp}.png`, b64ToBlob(lastFrameB64, "image/png"));
    } else {
      const png = await renderPng(base, { latents: lastDoc ?? undefined,
                                          pose: state.pose });
      download(`frame-${stamp}.png`, new Blob([png], { type: "image/png" }));
    }
    if (lastDoc) {
      download(`latents-${stamp}.json`,
               new Blob([JSON.stringify(lastDoc)], { type: "application/json" }));
    }
  };

  void pushFrame();
}

function b64ToBlob(b64: string, type: string): Blob {
  const bytes = atob(b64);
  const arr = new Uint8Array(bytes.length);
  for (let i = 0; i < bytes.length; i++) arr[i] = bytes.charCodeAt(i);
  return new Blob([arr], { type });
}

function download(name: string, blob: Blob): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = name;
  a.click();
  URL.revokeObjectURL(a.href);
}

boot().catch((err) => {
  document.body.textContent = `failed to start explorer: ${err}`;
});
