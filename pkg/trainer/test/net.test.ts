import { describe, expect, it } from "vitest";

import { evnet16Spec, Net, NetSpec, Param, quantWeight, requantU8 } from "../src/net.js";
import { Adam, crossEntropy } from "../src/optim.js";
import { Rng } from "../src/rng.js";

function tinySpec(): NetSpec {
  return {
    name: "tiny",
    inputChannels: 2,
    stages: [
      { kind: "conv", inCh: 2, outCh: 3, stride: 2 },
      { kind: "dwsep", inCh: 3, outCh: 4, stride: 2 },
    ],
    headCh: 4,
    classCount: 5,
  };
}

function tinyNet(seed = 3): Net {
  const net = new Net(tinySpec(), seed);
  net.inputHeight = 12;
  net.inputWidth = 12;
  return net;
}

function randomFrame(rng: Rng, c: number, h: number, w: number): Uint8Array {
  const out = new Uint8Array(c * h * w);
  for (let i = 0; i < out.length; i++) {
    out[i] = rng.int(256);
  }
  return out;
}

function lossOf(net: Net, frame: Uint8Array, label: number): number {
  const tape = net.forward(frame, false);
  return crossEntropy(tape.logits, label, new Float64Array(tape.logits.length));
}

function analyticGrads(net: Net, frame: Uint8Array, label: number): void {
  for (const p of net.params()) {
    p.grad.fill(0);
  }
  const tape = net.forward(frame, false);
  const dLogits = new Float64Array(tape.logits.length);
  crossEntropy(tape.logits, label, dLogits);
  net.backward(tape, dLogits);
}

describe("float-phase gradients", () => {
  it("match finite differences on every parameter family", () => {
    const net = tinyNet();
    const rng = new Rng(11);
    const frame = randomFrame(rng, 2, 12, 12);
    const label = 2;
    // settle the running batch-norm stats, then freeze by using train=false
    for (let i = 0; i < 5; i++) {
      net.forward(frame, true);
    }
    analyticGrads(net, frame, label);

    const eps = 1e-5;
    const checks: Array<[string, Param, number[]]> = [
      ["conv w", net.stages[0].conv.w, [0, 7, 35]],
      ["conv gamma", net.stages[0].conv.bn.gamma, [0, 2]],
      ["conv beta", net.stages[0].conv.bn.beta, [1]],
      ["dw w", net.stages[1].conv.w, [4, 20]],
      ["pw w", net.stages[1].pw!.w, [0, 5, 11]],
      ["pw beta", net.stages[1].pw!.bn.beta, [3]],
      ["head w", net.head.w, [0, 9, 19]],
      ["head b", net.head.b, [0, 4]],
    ];
    for (const [name, param, idxs] of checks) {
      for (const idx of idxs) {
        const keep = param.data[idx];
        param.data[idx] = keep + eps;
        const up = lossOf(net, frame, label);
        param.data[idx] = keep - eps;
        const down = lossOf(net, frame, label);
        param.data[idx] = keep;
        const numeric = (up - down) / (2 * eps);
        const analytic = param.grad[idx];
        const scale = Math.max(Math.abs(numeric), Math.abs(analytic), 1e-4);
        expect(Math.abs(numeric - analytic) / scale, `${name}[${idx}]`).toBeLessThan(1e-3);
      }
    }
  });
});

describe("integer phase", () => {
  it("emits u8 activations and integer logits", () => {
    const net = tinyNet();
    const rng = new Rng(5);
    const frame = randomFrame(rng, 2, 12, 12);
    for (let i = 0; i < 3; i++) {
      net.forward(frame, true);
    }
    net.transitionToInt([frame]);
    const tape = net.forward(frame, false);
    for (const v of tape.pooled) {
      expect(Number.isInteger(v)).toBe(true);
      expect(v).toBeGreaterThanOrEqual(0);
      expect(v).toBeLessThanOrEqual(255);
    }
    for (const v of tape.logits) {
      expect(Number.isInteger(v)).toBe(true);
    }
  });

  it("integer-phase training reduces loss via straight-through grads", () => {
    const net = tinyNet(9);
    const rng = new Rng(17);
    const data = Array.from({ length: 8 }, (_, i) => ({
      frame: randomFrame(rng, 2, 12, 12),
      label: i % 5,
    }));
    for (const d of data) {
      net.forward(d.frame, true);
    }
    net.transitionToInt(data.map((d) => d.frame));

    const lossNow = () => data.reduce((acc, d) => acc + lossOf(net, d.frame, d.label), 0) / data.length;
    const before = lossNow();
    const adam = new Adam(2e-3);
    const dLogits = new Float64Array(5);
    for (let step = 0; step < 60; step++) {
      for (const d of data) {
        const tape = net.forward(d.frame, false);
        crossEntropy(tape.logits, d.label, dLogits);
        net.backward(tape, dLogits);
      }
      adam.apply(net.params(), 2e-3);
    }
    expect(lossNow()).toBeLessThan(before * 0.7);
  });
});

describe("quantization helpers", () => {
  it("weight quantizer is symmetric int8", () => {
    expect(quantWeight(0)).toBe(0);
    expect(quantWeight(1)).toBe(127);
    expect(quantWeight(-1)).toBe(-127);
    expect(quantWeight(5)).toBe(127);
    expect(quantWeight(-5)).toBe(-127);
    expect(quantWeight(0.5)).toBe(64);
  });

  it("requantizer matches round-half-up shift semantics", () => {
    expect(requantU8(0x1234, 5)).toBe(146); // (4660 + 16) >> 5
    expect(requantU8(255, 0)).toBe(255);
    expect(requantU8(9999, 0)).toBe(255);
    expect(requantU8(64, 7)).toBe(1);
    expect(requantU8(63, 7)).toBe(0);
  });
});

describe("topology specs", () => {
  it("evnet16 ends at 128 channels over six conv stages", () => {
    const spec = evnet16Spec(2);
    expect(spec.stages).toHaveLength(6);
    expect(spec.stages[5].outCh).toBe(128);
    expect(spec.headCh).toBe(128);
    expect(spec.classCount).toBe(11);
  });
});
