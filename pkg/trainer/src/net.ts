/**
 * The trainable network: first a standard 3x3 conv stage, then depthwise
 * separable stages, global average pooling and a linear head.
 *
 * Training runs in two phases:
 *  - "float": conv -> batch norm (frozen running stats, trainable affine)
 *    -> ReLU, real arithmetic on inputs scaled to [0, 1];
 *  - "int": the deployed arithmetic exactly (int8 weights on the integer
 *    grid, integer bias, ReLU, power-of-two requantize with round-half-up,
 *    clamp to u8), with straight-through gradient estimates. Weights stay
 *    latent floats in [-1, 1]; the forward pass sees round(127 * w).
 *
 * foldBatchNorm() folds the BN affine into the weights at the phase
 * switch, and calibrateShifts() picks per-stage requantization shifts from
 * a calibration batch. Exported integers are exactly the integers the int
 * phase trains with.
 */

import { Rng } from "./rng.js";

export type Phase = "float" | "int";

export interface StageSpec {
  kind: "conv" | "dwsep";
  inCh: number;
  outCh: number;
  stride: number;
}

export interface NetSpec {
  name: string;
  inputChannels: number;
  stages: StageSpec[];
  headCh: number;
  classCount: number;
}

export function evnet16Spec(inputChannels = 2): NetSpec {
  return {
    name: "evnet16",
    inputChannels,
    stages: [
      { kind: "conv", inCh: inputChannels, outCh: 16, stride: 2 },
      { kind: "dwsep", inCh: 16, outCh: 16, stride: 2 },
      { kind: "dwsep", inCh: 16, outCh: 32, stride: 2 },
      { kind: "dwsep", inCh: 32, outCh: 32, stride: 2 },
      { kind: "dwsep", inCh: 32, outCh: 64, stride: 1 },
      { kind: "dwsep", inCh: 64, outCh: 128, stride: 2 },
    ],
    headCh: 128,
    classCount: 11,
  };
}

export function evnet70Spec(inputChannels = 2): NetSpec {
  return {
    name: "evnet70",
    inputChannels,
    stages: [
      { kind: "conv", inCh: inputChannels, outCh: 16, stride: 2 },
      { kind: "dwsep", inCh: 16, outCh: 16, stride: 1 },
      { kind: "dwsep", inCh: 16, outCh: 32, stride: 2 },
      { kind: "dwsep", inCh: 32, outCh: 32, stride: 1 },
      { kind: "dwsep", inCh: 32, outCh: 64, stride: 2 },
      { kind: "dwsep", inCh: 64, outCh: 128, stride: 1 },
      { kind: "dwsep", inCh: 128, outCh: 128, stride: 1 },
      { kind: "dwsep", inCh: 128, outCh: 256, stride: 2 },
    ],
    headCh: 256,
    classCount: 11,
  };
}

/** One learnable weight array with its gradient and Adam moments. */
export class Param {
  data: Float64Array;
  grad: Float64Array;
  m: Float64Array;
  v: Float64Array;

  constructor(size: number) {
    this.data = new Float64Array(size);
    this.grad = new Float64Array(size);
    this.m = new Float64Array(size);
    this.v = new Float64Array(size);
  }
}

/** Batch norm with frozen running statistics and a trainable affine. */
export class BatchNorm {
  gamma: Param;
  beta: Param;
  runMu: Float64Array;
  runVar: Float64Array;
  readonly eps = 1e-5;
  momentum = 0.9;

  constructor(ch: number) {
    this.gamma = new Param(ch);
    this.gamma.data.fill(1);
    this.beta = new Param(ch);
    this.runMu = new Float64Array(ch);
    this.runVar = new Float64Array(ch);
    this.runVar.fill(1);
  }

  /** EMA update of the running stats from one sample's per-channel stats. */
  observe(x: Float64Array, ch: number, hw: number): void {
    for (let c = 0; c < ch; c++) {
      let sum = 0;
      let sq = 0;
      const off = c * hw;
      for (let i = 0; i < hw; i++) {
        const v = x[off + i];
        sum += v;
        sq += v * v;
      }
      const mu = sum / hw;
      const va = Math.max(sq / hw - mu * mu, 0);
      this.runMu[c] = this.momentum * this.runMu[c] + (1 - this.momentum) * mu;
      this.runVar[c] = this.momentum * this.runVar[c] + (1 - this.momentum) * va;
    }
  }
}

interface ConvBlock {
  w: Param; // conv: (out,in,3,3); dw: (in,3,3); pw: (out,in) -- blob layouts
  b: Param; // integer-phase bias, accumulator units
  bn: BatchNorm;
  shift: number;
}

export class Stage {
  spec: StageSpec;
  conv: ConvBlock; // the 3x3 block (standard or depthwise)
  pw: ConvBlock | null; // pointwise block for dwsep stages

  constructor(spec: StageSpec, rng: Rng) {
    this.spec = spec;
    const k9 = 9;
    if (spec.kind === "conv") {
      this.conv = makeBlock(spec.outCh * spec.inCh * k9, spec.outCh, rng, spec.inCh * k9);
      this.pw = null;
    } else {
      this.conv = makeBlock(spec.inCh * k9, spec.inCh, rng, k9);
      this.pw = makeBlock(spec.outCh * spec.inCh, spec.outCh, rng, spec.inCh);
    }
  }

  blocks(): ConvBlock[] {
    return this.pw ? [this.conv, this.pw] : [this.conv];
  }
}

function makeBlock(wSize: number, outCh: number, rng: Rng, fanIn: number): ConvBlock {
  const block: ConvBlock = { w: new Param(wSize), b: new Param(outCh), bn: new BatchNorm(outCh), shift: 7 };
  const bound = Math.min(Math.sqrt(6 / fanIn), 1);
  for (let i = 0; i < wSize; i++) {
    block.w.data[i] = rng.uniform(-bound, bound);
  }
  return block;
}

export const WEIGHT_LEVELS = 127;

export function quantWeight(v: number): number {
  const q = Math.round(Math.max(-1, Math.min(1, v)) * WEIGHT_LEVELS);
  return Math.max(-WEIGHT_LEVELS, Math.min(WEIGHT_LEVELS, q));
}

export function requantU8(acc: number, shift: number): number {
  let v = acc;
  if (shift > 0) {
    v = Math.floor((v + (1 << (shift - 1))) / (1 << shift));
  }
  return Math.max(0, Math.min(255, v));
}

export interface StageTape {
  xIn: Float64Array; // stage input (u8-valued in int phase, real in float phase)
  acc1: Float64Array; // 3x3 block pre-activation accumulators
  act1: Float64Array; // 3x3 block outputs (dwsep stages: pointwise input)
  acc2: Float64Array | null;
  out: Float64Array;
  oh: number;
  ow: number;
  inH: number;
  inW: number;
}

export interface Tape {
  stages: StageTape[];
  pooled: Float64Array;
  poolH: number;
  poolW: number;
  logits: Float64Array;
}

export class Net {
  spec: NetSpec;
  stages: Stage[];
  head: { w: Param; b: Param };
  phase: Phase = "float";
  logitScale = 1; // int-phase logits are about this many times float scale
  inputHeight = 128;
  inputWidth = 128;

  constructor(spec: NetSpec, seed: number) {
    this.spec = spec;
    const rng = new Rng(seed);
    this.stages = spec.stages.map((s) => new Stage(s, rng));
    this.head = { w: new Param(spec.classCount * spec.headCh), b: new Param(spec.classCount) };
    const bound = Math.sqrt(6 / spec.headCh);
    for (let i = 0; i < this.head.w.data.length; i++) {
      this.head.w.data[i] = rng.uniform(-bound, bound);
    }
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const st of this.stages) {
      for (const blk of st.blocks()) {
        out.push(blk.w, blk.b, blk.bn.gamma, blk.bn.beta);
      }
    }
    out.push(this.head.w, this.head.b);
    return out;
  }

  /** Forward one (C,H,W) u8 frame; returns logits and the cache for backward. */
  forward(frame: Uint8Array, train: boolean): Tape {
    const c0 = this.spec.inputChannels;
    let h = this.inputHeight;
    let w = this.inputWidth;
    let x: Float64Array = new Float64Array(frame.length);
    const scale = this.phase === "float" ? 1 / 255 : 1;
    for (let i = 0; i < frame.length; i++) {
      x[i] = frame[i] * scale;
    }

    const tapes: StageTape[] = [];
    let ch = c0;
    for (const stage of this.stages) {
      const tape = this.stageForward(stage, x, ch, h, w, train);
      tapes.push(tape);
      x = tape.out;
      ch = stage.spec.outCh;
      h = tape.oh;
      w = tape.ow;
    }

    const pooled = new Float64Array(ch);
    const hw = h * w;
    for (let c = 0; c < ch; c++) {
      let sum = 0;
      const off = c * hw;
      for (let i = 0; i < hw; i++) {
        sum += x[off + i];
      }
      pooled[c] = this.phase === "int" ? Math.floor((2 * sum + hw) / (2 * hw)) : sum / hw;
    }

    const logits = new Float64Array(this.spec.classCount);
    for (let o = 0; o < this.spec.classCount; o++) {
      let acc = this.phase === "int" ? Math.round(this.head.b.data[o]) : this.head.b.data[o];
      const woff = o * ch;
      for (let c = 0; c < ch; c++) {
        const wv = this.phase === "int" ? quantWeight(this.head.w.data[woff + c]) : this.head.w.data[woff + c];
        acc += wv * pooled[c];
      }
      logits[o] = acc;
    }
    return { stages: tapes, pooled, poolH: h, poolW: w, logits };
  }

  private stageForward(stage: Stage, x: Float64Array, inCh: number, h: number, w: number, train: boolean): StageTape {
    const { kind, outCh, stride } = stage.spec;
    const int = this.phase === "int";
    let acc1: Float64Array;
    let oh: number;
    let ow: number;
    if (kind === "conv") {
      [acc1, oh, ow] = conv3x3(x, inCh, h, w, stage.conv.w.data, outCh, stride, int);
    } else {
      [acc1, oh, ow] = dw3x3(x, inCh, h, w, stage.conv.w.data, stride, int);
    }
    const midCh = kind === "conv" ? outCh : inCh;
    const act1 = this.blockActivate(stage.conv, acc1, midCh, oh * ow, train);

    if (kind === "conv") {
      return { xIn: x, acc1, act1, acc2: null, out: act1, oh, ow, inH: h, inW: w };
    }
    const acc2 = pointwise(act1, midCh, oh * ow, stage.pw!.w.data, outCh, int);
    const out = this.blockActivate(stage.pw!, acc2, outCh, oh * ow, train);
    return { xIn: x, acc1, act1, acc2, out, oh, ow, inH: h, inW: w };
  }

  /** Bias + (BN) + ReLU (+ requantize in the int phase). */
  private blockActivate(blk: ConvBlock, acc: Float64Array, ch: number, hw: number, train: boolean): Float64Array {
    const out = new Float64Array(acc.length);
    if (this.phase === "int") {
      for (let c = 0; c < ch; c++) {
        const b = Math.round(blk.b.data[c]);
        const off = c * hw;
        for (let i = 0; i < hw; i++) {
          const v = acc[off + i] + b;
          out[off + i] = v <= 0 ? 0 : requantU8(v, blk.shift);
        }
      }
      return out;
    }
    if (train) {
      blk.bn.observe(acc, ch, hw);
    }
    for (let c = 0; c < ch; c++) {
      const inv = 1 / Math.sqrt(blk.bn.runVar[c] + blk.bn.eps);
      const g = blk.bn.gamma.data[c] * inv;
      const off2 = blk.bn.beta.data[c] - blk.bn.runMu[c] * g;
      const off = c * hw;
      for (let i = 0; i < hw; i++) {
        const v = acc[off + i] * g + off2;
        out[off + i] = v > 0 ? v : 0;
      }
    }
    return out;
  }

  /** Backprop from dLogits; accumulates parameter gradients, returns nothing. */
  backward(tape: Tape, dLogits: Float64Array): void {
    const int = this.phase === "int";
    const ch = this.spec.headCh;
    const dPooled = new Float64Array(ch);
    for (let o = 0; o < this.spec.classCount; o++) {
      const g = dLogits[o];
      if (g === 0) continue;
      this.head.b.grad[o] += g;
      const woff = o * ch;
      for (let c = 0; c < ch; c++) {
        const wv = int ? quantWeight(this.head.w.data[woff + c]) : this.head.w.data[woff + c];
        // straight-through: latent weight moves the quantized value 127x
        this.head.w.grad[woff + c] += g * tape.pooled[c] * (int ? WEIGHT_LEVELS : 1);
        dPooled[c] += g * wv;
      }
    }
    const hw = tape.poolH * tape.poolW;
    const last = tape.stages[tape.stages.length - 1];
    let dOut: Float64Array = new Float64Array(last.out.length);
    for (let c = 0; c < ch; c++) {
      const g = dPooled[c] / hw;
      const off = c * hw;
      for (let i = 0; i < hw; i++) {
        dOut[off + i] = g;
      }
    }

    for (let s = this.stages.length - 1; s >= 0; s--) {
      dOut = this.stageBackward(this.stages[s], tape.stages[s], dOut, s === 0);
    }
  }

  private stageBackward(stage: Stage, tape: StageTape, dOut: Float64Array, first: boolean): Float64Array {
    const { kind, inCh, outCh, stride } = stage.spec;
    const hw = tape.oh * tape.ow;
    const int = this.phase === "int";

    let dAct1: Float64Array;
    if (kind === "dwsep") {
      const dAcc2 = this.activateBackward(stage.pw!, tape.acc2!, dOut, outCh, hw);
      dAct1 = pointwiseBackward(tape.act1, inCh, hw, stage.pw!, dAcc2, int);
    } else {
      dAct1 = dOut;
    }
    const midCh = kind === "conv" ? outCh : inCh;
    const dAcc1 = this.activateBackward(stage.conv, tape.acc1, dAct1, midCh, hw);
    if (kind === "conv") {
      return conv3x3Backward(tape, stage.conv, dAcc1, inCh, outCh, stride, int, first);
    }
    return dw3x3Backward(tape, stage.conv, dAcc1, inCh, stride, int, first);
  }

  /** Gradient through bias + BN/requant + ReLU, accumulating block params. */
  private activateBackward(blk: ConvBlock, acc: Float64Array, dOut: Float64Array, ch: number, hw: number): Float64Array {
    const dAcc = new Float64Array(acc.length);
    if (this.phase === "int") {
      const invShift = 1 / (1 << blk.shift);
      for (let c = 0; c < ch; c++) {
        const b = Math.round(blk.b.data[c]);
        const off = c * hw;
        let dB = 0;
        for (let i = 0; i < hw; i++) {
          const pre = acc[off + i] + b;
          if (pre <= 0) continue;
          const q = requantU8(pre, blk.shift);
          // straight-through inside the clamp; saturated cells pass nothing
          if (q >= 255 && pre / (1 << blk.shift) > 255.5) continue;
          const g = dOut[off + i] * invShift;
          dAcc[off + i] = g;
          dB += g;
        }
        blk.b.grad[c] += dB;
      }
      return dAcc;
    }
    for (let c = 0; c < ch; c++) {
      const inv = 1 / Math.sqrt(blk.bn.runVar[c] + blk.bn.eps);
      const g = blk.bn.gamma.data[c] * inv;
      const off2 = blk.bn.beta.data[c] - blk.bn.runMu[c] * g;
      const off = c * hw;
      let dGamma = 0;
      let dBeta = 0;
      for (let i = 0; i < hw; i++) {
        const pre = acc[off + i] * g + off2;
        if (pre <= 0) continue;
        const go = dOut[off + i];
        dAcc[off + i] = go * g;
        dGamma += go * (acc[off + i] - blk.bn.runMu[c]) * inv;
        dBeta += go;
      }
      blk.bn.gamma.grad[c] += dGamma;
      blk.bn.beta.grad[c] += dBeta;
    }
    return dAcc;
  }

  /**
   * Switch to the integer phase as a faithful quantization of the float
   * net: fold batch norm, renormalize weights onto the [-1, 1] latent
   * grid, carry biases over in accumulator units, and pick each block's
   * requantization shift from calibration activations.
   *
   * K tracks the running float-to-int activation scale (int activations
   * are about K times the float net's): the input enters at K = 255
   * (u8 raw versus the float phase's [0, 1] scaling), each block
   * multiplies by 127/maxAbs and divides by 2^shift. Biases map with the
   * pre-shift accumulator scale, and the head's final scale is kept as
   * logitScale so losses can be computed at float magnitude.
   */
  transitionToInt(calFrames: Uint8Array[]): void {
    if (this.phase === "int") {
      return;
    }
    let scaleK = 255;
    // calibration activations flow through the already-converted prefix
    let acts: Float64Array[] = calFrames.map((f) => {
      const x = new Float64Array(f.length);
      for (let i = 0; i < f.length; i++) {
        x[i] = f[i];
      }
      return x;
    });
    let ch = this.spec.inputChannels;
    let h = this.inputHeight;
    let w = this.inputWidth;

    for (const stage of this.stages) {
      const { kind, outCh, stride } = stage.spec;
      const blocks = stage.blocks();
      let oh = h;
      let ow = w;
      blocks.forEach((blk, bi) => {
        const depthwiseFirst = kind === "dwsep" && bi === 0;
        const blockCh = blk.b.data.length;
        const fanPerOut = blk.w.data.length / blockCh;
        // fold the batch norm affine into per-output-channel weight rows
        let maxAbs = 1e-9;
        const folded = new Float64Array(blk.w.data.length);
        const foldedBias = new Float64Array(blockCh);
        for (let c = 0; c < blockCh; c++) {
          const inv = 1 / Math.sqrt(blk.bn.runVar[c] + blk.bn.eps);
          const g = blk.bn.gamma.data[c] * inv;
          for (let i = 0; i < fanPerOut; i++) {
            const v = blk.w.data[c * fanPerOut + i] * g;
            folded[c * fanPerOut + i] = v;
            maxAbs = Math.max(maxAbs, Math.abs(v));
          }
          foldedBias[c] = blk.bn.beta.data[c] - blk.bn.runMu[c] * g;
        }
        for (let i = 0; i < folded.length; i++) {
          blk.w.data[i] = folded[i] / maxAbs;
        }
        const accScale = (scaleK * WEIGHT_LEVELS) / maxAbs;
        for (let c = 0; c < blockCh; c++) {
          blk.b.data[c] = foldedBias[c] * accScale;
        }
        // run calibration through this block to pick the shift
        let peak = 0;
        const accs = acts.map((x) => {
          let acc: Float64Array;
          if (kind === "conv") {
            [acc, oh, ow] = conv3x3(x, ch, h, w, blk.w.data, outCh, stride, true);
          } else if (depthwiseFirst) {
            [acc, oh, ow] = dw3x3(x, ch, h, w, blk.w.data, stride, true);
          } else {
            acc = pointwise(x, ch, oh * ow, blk.w.data, outCh, true);
          }
          peak = Math.max(peak, accPeak(acc, blk.b.data, blockCh, oh * ow));
          return acc;
        });
        let shift = 0;
        while (peak / (1 << shift) > 255 && shift < 15) {
          shift++;
        }
        blk.shift = shift;
        scaleK = accScale / (1 << shift);
        acts = accs.map((acc) => applyIntBlock(acc, blk, blockCh, oh * ow));
        if (!depthwiseFirst) {
          ch = outCh;
        }
      });
      h = oh;
      w = ow;
    }

    // linear head: bias in accumulator units, no requantization
    let headMax = 1e-9;
    for (const v of this.head.w.data) {
      headMax = Math.max(headMax, Math.abs(v));
    }
    for (let i = 0; i < this.head.w.data.length; i++) {
      this.head.w.data[i] /= headMax;
    }
    const headScale = (scaleK * WEIGHT_LEVELS) / headMax;
    for (let i = 0; i < this.head.b.data.length; i++) {
      this.head.b.data[i] *= headScale;
    }
    this.logitScale = Math.max(headScale, 1);
    this.phase = "int";
  }
}

function accPeak(acc: Float64Array, bias: Float64Array, ch: number, hw: number): number {
  let peak = 0;
  for (let c = 0; c < ch; c++) {
    const b = Math.round(bias[c]);
    const off = c * hw;
    for (let i = 0; i < hw; i++) {
      const v = acc[off + i] + b;
      if (v > peak) peak = v;
    }
  }
  return peak;
}

function applyIntBlock(acc: Float64Array, blk: { b: Param; shift: number }, ch: number, hw: number): Float64Array {
  const out = new Float64Array(acc.length);
  for (let c = 0; c < ch; c++) {
    const b = Math.round(blk.b.data[c]);
    const off = c * hw;
    for (let i = 0; i < hw; i++) {
      const v = acc[off + i] + b;
      out[off + i] = v <= 0 ? 0 : requantU8(v, blk.shift);
    }
  }
  return out;
}

function outDim(d: number, stride: number): number {
  return Math.floor((d + 2 - 3) / stride) + 1;
}

/** Standard 3x3 conv, padding 1; weights quantized on the fly in int mode. */
export function conv3x3(
  x: Float64Array,
  inCh: number,
  h: number,
  w: number,
  weights: Float64Array,
  outCh: number,
  stride: number,
  int: boolean,
): [Float64Array, number, number] {
  const oh = outDim(h, stride);
  const ow = outDim(w, stride);
  const out = new Float64Array(outCh * oh * ow);
  const wq = new Float64Array(weights.length);
  for (let i = 0; i < weights.length; i++) {
    wq[i] = int ? quantWeight(weights[i]) : weights[i];
  }
  for (let oc = 0; oc < outCh; oc++) {
    for (let ic = 0; ic < inCh; ic++) {
      const wOff = (oc * inCh + ic) * 9;
      const xOff = ic * h * w;
      for (let ky = 0; ky < 3; ky++) {
        for (let kx = 0; kx < 3; kx++) {
          const wv = wq[wOff + ky * 3 + kx];
          if (wv === 0) continue;
          convAccumulate(out, oc * oh * ow, x, xOff, h, w, oh, ow, stride, ky - 1, kx - 1, wv);
        }
      }
    }
  }
  return [out, oh, ow];
}

/** Depthwise 3x3, padding 1. */
export function dw3x3(
  x: Float64Array,
  ch: number,
  h: number,
  w: number,
  weights: Float64Array,
  stride: number,
  int: boolean,
): [Float64Array, number, number] {
  const oh = outDim(h, stride);
  const ow = outDim(w, stride);
  const out = new Float64Array(ch * oh * ow);
  for (let c = 0; c < ch; c++) {
    const wOff = c * 9;
    const xOff = c * h * w;
    for (let ky = 0; ky < 3; ky++) {
      for (let kx = 0; kx < 3; kx++) {
        const raw = weights[wOff + ky * 3 + kx];
        const wv = int ? quantWeight(raw) : raw;
        if (wv === 0) continue;
        convAccumulate(out, c * oh * ow, x, xOff, h, w, oh, ow, stride, ky - 1, kx - 1, wv);
      }
    }
  }
  return [out, oh, ow];
}

function convAccumulate(
  out: Float64Array,
  outOff: number,
  x: Float64Array,
  xOff: number,
  h: number,
  w: number,
  oh: number,
  ow: number,
  stride: number,
  dy: number,
  dx: number,
  wv: number,
): void {
  // hoist the zero-padding bounds so the inner loop has no branches
  const oyLo = Math.max(0, Math.ceil(-dy / stride));
  const oyHi = Math.min(oh, Math.floor((h - 1 - dy) / stride) + 1);
  const oxLo = Math.max(0, Math.ceil(-dx / stride));
  const oxHi = Math.min(ow, Math.floor((w - 1 - dx) / stride) + 1);
  for (let oy = oyLo; oy < oyHi; oy++) {
    const rowOut = outOff + oy * ow;
    const rowIn = xOff + (oy * stride + dy) * w + dx;
    for (let ox = oxLo; ox < oxHi; ox++) {
      out[rowOut + ox] += wv * x[rowIn + ox * stride];
    }
  }
}

/** Pointwise (1x1) conv over channel-planar data. */
export function pointwise(
  x: Float64Array,
  inCh: number,
  hw: number,
  weights: Float64Array,
  outCh: number,
  int: boolean,
): Float64Array {
  const out = new Float64Array(outCh * hw);
  for (let oc = 0; oc < outCh; oc++) {
    const wOff = oc * inCh;
    const oOff = oc * hw;
    for (let ic = 0; ic < inCh; ic++) {
      const raw = weights[wOff + ic];
      const wv = int ? quantWeight(raw) : raw;
      if (wv === 0) continue;
      const xOff = ic * hw;
      for (let i = 0; i < hw; i++) {
        out[oOff + i] += wv * x[xOff + i];
      }
    }
  }
  return out;
}

function pointwiseBackward(
  act1: Float64Array,
  inCh: number,
  hw: number,
  blk: { w: Param },
  dAcc2: Float64Array,
  int: boolean,
): Float64Array {
  const dIn = new Float64Array(inCh * hw);
  const outCh = blk.w.data.length / inCh;
  const ste = int ? WEIGHT_LEVELS : 1;
  for (let oc = 0; oc < outCh; oc++) {
    const wOff = oc * inCh;
    const gOff = oc * hw;
    for (let ic = 0; ic < inCh; ic++) {
      const raw = blk.w.data[wOff + ic];
      const wv = int ? quantWeight(raw) : raw;
      const xOff = ic * hw;
      let dW = 0;
      for (let i = 0; i < hw; i++) {
        const g = dAcc2[gOff + i];
        if (g === 0) continue;
        dW += g * act1[xOff + i];
        dIn[xOff + i] += g * wv;
      }
      blk.w.grad[wOff + ic] += dW * ste;
    }
  }
  return dIn;
}

function conv3x3Backward(
  tape: StageTape,
  blk: { w: Param },
  dAcc: Float64Array,
  inCh: number,
  outCh: number,
  stride: number,
  int: boolean,
  skipInputGrad: boolean,
): Float64Array {
  const { inH: h, inW: w, oh, ow, xIn } = tape;
  const dIn = new Float64Array(inCh * h * w);
  const ste = int ? WEIGHT_LEVELS : 1;
  for (let oc = 0; oc < outCh; oc++) {
    const accOff = oc * oh * ow;
    for (let ic = 0; ic < inCh; ic++) {
      const wOff = (oc * inCh + ic) * 9;
      const xOff = ic * h * w;
      for (let ky = 0; ky < 3; ky++) {
        for (let kx = 0; kx < 3; kx++) {
          const raw = blk.w.data[wOff + ky * 3 + kx];
          const wv = int ? quantWeight(raw) : raw;
          let dW = 0;
          const dy = ky - 1;
          const dx = kx - 1;
          const oyLo = Math.max(0, Math.ceil(-dy / stride));
          const oyHi = Math.min(oh, Math.floor((h - 1 - dy) / stride) + 1);
          const oxLo = Math.max(0, Math.ceil(-dx / stride));
          const oxHi = Math.min(ow, Math.floor((w - 1 - dx) / stride) + 1);
          for (let oy = oyLo; oy < oyHi; oy++) {
            const rowAcc = accOff + oy * ow;
            const rowIn = xOff + (oy * stride + dy) * w + dx;
            if (skipInputGrad) {
              for (let ox = oxLo; ox < oxHi; ox++) {
                dW += dAcc[rowAcc + ox] * xIn[rowIn + ox * stride];
              }
            } else {
              for (let ox = oxLo; ox < oxHi; ox++) {
                const g = dAcc[rowAcc + ox];
                if (g === 0) continue;
                dW += g * xIn[rowIn + ox * stride];
                dIn[rowIn + ox * stride] += g * wv;
              }
            }
          }
          blk.w.grad[wOff + ky * 3 + kx] += dW * ste;
        }
      }
    }
  }
  return dIn;
}

function dw3x3Backward(
  tape: StageTape,
  blk: { w: Param },
  dAcc: Float64Array,
  ch: number,
  stride: number,
  int: boolean,
  skipInputGrad: boolean,
): Float64Array {
  const { inH: h, inW: w, oh, ow, xIn } = tape;
  const dIn = new Float64Array(ch * h * w);
  const ste = int ? WEIGHT_LEVELS : 1;
  for (let c = 0; c < ch; c++) {
    const accOff = c * oh * ow;
    const wOff = c * 9;
    const xOff = c * h * w;
    for (let ky = 0; ky < 3; ky++) {
      for (let kx = 0; kx < 3; kx++) {
        const raw = blk.w.data[wOff + ky * 3 + kx];
        const wv = int ? quantWeight(raw) : raw;
        let dW = 0;
        const dy = ky - 1;
        const dx = kx - 1;
        const oyLo = Math.max(0, Math.ceil(-dy / stride));
        const oyHi = Math.min(oh, Math.floor((h - 1 - dy) / stride) + 1);
        const oxLo = Math.max(0, Math.ceil(-dx / stride));
        const oxHi = Math.min(ow, Math.floor((w - 1 - dx) / stride) + 1);
        for (let oy = oyLo; oy < oyHi; oy++) {
          const rowAcc = accOff + oy * ow;
          const rowIn = xOff + (oy * stride + dy) * w + dx;
          if (skipInputGrad) {
            for (let ox = oxLo; ox < oxHi; ox++) {
              dW += dAcc[rowAcc + ox] * xIn[rowIn + ox * stride];
            }
          } else {
            for (let ox = oxLo; ox < oxHi; ox++) {
              const g = dAcc[rowAcc + ox];
              if (g === 0) continue;
              dW += g * xIn[rowIn + ox * stride];
              dIn[rowIn + ox * stride] += g * wv;
            }
          }
        }
        blk.w.grad[wOff + ky * 3 + kx] += dW * ste;
      }
    }
  }
  return dIn;
}
