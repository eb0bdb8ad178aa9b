import { describe, expect, it } from "vitest";

import { Param } from "../src/net.js";
import { Adam, crossEntropy, hardestK, topkRatio } from "../src/optim.js";

describe("top-k schedule", () => {
  it("starts at 1.0 and is monotone non-increasing to the floor", () => {
    const epochs = 50;
    let prev = Infinity;
    expect(topkRatio(0, epochs)).toBe(1.0);
    for (let e = 0; e < epochs; e++) {
      const r = topkRatio(e, epochs, 0.3);
      expect(r).toBeLessThanOrEqual(prev);
      expect(r).toBeGreaterThanOrEqual(0.3);
      prev = r;
    }
    expect(topkRatio(epochs - 1, epochs, 0.3)).toBeCloseTo(0.3, 10);
  });

  it("hardestK picks the largest losses", () => {
    expect(hardestK([0.1, 5.0, 0.2, 3.0], 2).sort()).toEqual([1, 3]);
    expect(hardestK([1.0], 5)).toEqual([0]);
  });
});

describe("cosine schedule", () => {
  it("descends from lr0 towards zero", () => {
    const adam = new Adam(1e-3);
    expect(adam.lrAt(0, 100)).toBeCloseTo(1e-3, 12);
    expect(adam.lrAt(50, 100)).toBeCloseTo(0.5e-3, 12);
    expect(adam.lrAt(100, 100)).toBeCloseTo(0, 12);
  });
});

describe("cross entropy", () => {
  it("loss and gradient agree with finite differences", () => {
    const logits = new Float64Array([1.0, -2.0, 0.5, 3.0]);
    const d = new Float64Array(4);
    const base = crossEntropy(logits, 2, d);
    expect(base).toBeGreaterThan(0);
    const eps = 1e-6;
    for (let i = 0; i < 4; i++) {
      const bumped = Float64Array.from(logits);
      bumped[i] += eps;
      const up = crossEntropy(bumped, 2, new Float64Array(4));
      expect((up - base) / eps).toBeCloseTo(d[i], 4);
    }
  });
});

describe("adam", () => {
  it("minimizes a quadratic", () => {
    const p = new Param(1);
    p.data[0] = 5;
    const adam = new Adam(0.1);
    for (let i = 0; i < 300; i++) {
      p.grad[0] = 2 * (p.data[0] - 1.5);
      adam.apply([p], 0.1);
    }
    expect(Math.abs(p.data[0] - 1.5)).toBeLessThan(0.05);
  });
});
