import { describe, expect, it } from "vitest";

import {
  acceptFrame,
  initialState,
  setPose,
  setSlider,
  takeSeq,
} from "../src/state.js";

describe("initialState", () => {
  it("primes preset choices from the service list", () => {
    const s = initialState(["zero", "s0/e0/l0"]);
    expect(s.presetA.exp).toBe("zero");
    expect(s.presetB.exp).toBe("s0/e0/l0");
    expect(s.displayedSeq).toBe(0);
  });
});

describe("setSlider", () => {
  it("clamps slider values into [0,1]", () => {
    let s = initialState([]);
    s = setSlider(s, "exp", 1.7);
    expect(s.t.exp).toBe(1);
    s = setSlider(s, "exp", -0.2);
    expect(s.t.exp).toBe(0);
    s = setSlider(s, "alb", 0.42);
    expect(s.t.alb).toBe(0.42);
  });
});

describe("setPose", () => {
  it("clamps pitch and keeps distance above the bounding sphere", () => {
    let s = initialState([]);
    s = setPose(s, { pitch: 9 });
    expect(s.pose.pitch).toBeLessThanOrEqual(1.4);
    s = setPose(s, { distance: 0.1 });
    expect(s.pose.distance).toBeGreaterThanOrEqual(1.2);
  });
});

describe("sequence numbers", () => {
  it("takeSeq hands out strictly increasing numbers", () => {
    let s = initialState([]);
    const seen: number[] = [];
    for (let i = 0; i < 5; i++) {
      const [seq, next] = takeSeq(s);
      seen.push(seq);
      s = next;
    }
    expect(seen).toEqual([1, 2, 3, 4, 5]);
  });

  it("displayed frame sequence is monotone non-decreasing", () => {
    let s = initialState([]);
    const outcomes: boolean[] = [];
    for (const seq of [1, 3, 2, 5, 4, 5, 6]) {
      const { state, display } = acceptFrame(s, seq, 10);
      s = state;
      outcomes.push(display);
    }
    // 2 and 4 arrive after newer frames were already shown: dropped
    expect(outcomes).toEqual([true, true, false, true, false, true, true]);
    expect(s.displayedSeq).toBe(6);
  });

  it("stale frames do not update latency", () => {
    let s = initialState([]);
    s = acceptFrame(s, 5, 42).state;
    const { state, display } = acceptFrame(s, 3, 999);
    expect(display).toBe(false);
    expect(state.latencyMs).toBe(42);
  });
});
