/**
 * Integer forward simulation over exported arrays.
 *
 * This is the export-side reference: it operates on the int8/int32 arrays
 * exactly as written to the bundle, following the frozen arithmetic of the
 * deployed executor (int accumulation, bias, ReLU, round-half-up power-of-
 * two shift, u8 clamp, integer-mean pooling, int32 logits, lowest-index
 * argmax).  The export cross-check compares its classes against the
 * deployed executor's output frame by frame.
 */

export interface IntConvLayer {
  kind: "conv2d";
  inCh: number;
  outCh: number;
  stride: number;
  rescaleShift: number;
  weights: Int8Array; // (out, in, 3, 3)
  bias: Int32Array;
}

export interface IntDwsepLayer {
  kind: "dwsep";
  inCh: number;
  outCh: number;
  stride: number;
  dwRescaleShift: number;
  rescaleShift: number;
  dwWeights: Int8Array; // (in, 3, 3)
  dwBias: Int32Array;
  pwWeights: Int8Array; // (out, in)
  pwBias: Int32Array;
}

export interface IntGapLayer {
  kind: "gap";
}

export interface IntLinearLayer {
  kind: "linear";
  inCh: number;
  outCh: number;
  weights: Int8Array; // (out, in)
  bias: Int32Array;
}

export type IntLayer = IntConvLayer | IntDwsepLayer | IntGapLayer | IntLinearLayer;

export interface IntModel {
  name: string;
  inputChannels: number;
  inputHeight: number;
  inputWidth: number;
  classCount: number;
  layers: IntLayer[];
}

function requant(acc: number, shift: number): number {
  let v = acc < 0 ? 0 : acc; // ReLU (all conv stages carry it)
  if (shift > 0) {
    v = Math.floor((v + (1 << (shift - 1))) / (1 << shift));
  }
  return v > 255 ? 255 : v;
}

function convolve3x3(
  x: Uint8Array,
  inCh: number,
  h: number,
  w: number,
  pick: (oc: number, ic: number, ky: number, kx: number) => number,
  outCh: number,
  stride: number,
  bias: Int32Array,
  shift: number,
  depthwise: boolean,
): { out: Uint8Array; oh: number; ow: number } {
  const oh = Math.floor((h + 2 - 3) / stride) + 1;
  const ow = Math.floor((w + 2 - 3) / stride) + 1;
  const out = new Uint8Array(outCh * oh * ow);
  for (let oc = 0; oc < outCh; oc++) {
    for (let oy = 0; oy < oh; oy++) {
      for (let ox = 0; ox < ow; ox++) {
        let acc = bias[oc];
        const icLo = depthwise ? oc : 0;
        const icHi = depthwise ? oc + 1 : inCh;
        for (let ic = icLo; ic < icHi; ic++) {
          const plane = ic * h * w;
          for (let ky = 0; ky < 3; ky++) {
            const iy = oy * stride + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (let kx = 0; kx < 3; kx++) {
              const ix = ox * stride + kx - 1;
              if (ix < 0 || ix >= w) continue;
              acc += pick(oc, ic, ky, kx) * x[plane + iy * w + ix];
            }
          }
        }
        out[oc * oh * ow + oy * ow + ox] = requant(acc, shift);
      }
    }
  }
  return { out, oh, ow };
}

export function intForward(model: IntModel, frame: Uint8Array): { classId: number; logits: Int32Array } {
  let x = frame;
  let ch = model.inputChannels;
  let h = model.inputHeight;
  let w = model.inputWidth;
  let pooled: Uint8Array | null = null;
  let logits: Int32Array | null = null;

  for (const layer of model.layers) {
    if (layer.kind === "conv2d") {
      const r = convolve3x3(
        x,
        ch,
        h,
        w,
        (oc, ic, ky, kx) => layer.weights[((oc * layer.inCh + ic) * 3 + ky) * 3 + kx],
        layer.outCh,
        layer.stride,
        layer.bias,
        layer.rescaleShift,
        false,
      );
      x = r.out;
      ch = layer.outCh;
      h = r.oh;
      w = r.ow;
    } else if (layer.kind === "dwsep") {
      const dw = convolve3x3(
        x,
        ch,
        h,
        w,
        (oc, _ic, ky, kx) => layer.dwWeights[(oc * 3 + ky) * 3 + kx],
        ch,
        layer.stride,
        layer.dwBias,
        layer.dwRescaleShift,
        true,
      );
      const hw = dw.oh * dw.ow;
      const out = new Uint8Array(layer.outCh * hw);
      for (let oc = 0; oc < layer.outCh; oc++) {
        for (let i = 0; i < hw; i++) {
          let acc = layer.pwBias[oc];
          for (let ic = 0; ic < ch; ic++) {
            acc += layer.pwWeights[oc * ch + ic] * dw.out[ic * hw + i];
          }
          out[oc * hw + i] = requant(acc, layer.rescaleShift);
        }
      }
      x = out;
      ch = layer.outCh;
      h = dw.oh;
      w = dw.ow;
    } else if (layer.kind === "gap") {
      const hw = h * w;
      pooled = new Uint8Array(ch);
      for (let c = 0; c < ch; c++) {
        let sum = 0;
        for (let i = 0; i < hw; i++) {
          sum += x[c * hw + i];
        }
        pooled[c] = Math.floor((2 * sum + hw) / (2 * hw));
      }
    } else {
      if (!pooled) throw new Error("linear before pooling");
      logits = new Int32Array(layer.outCh);
      for (let oc = 0; oc < layer.outCh; oc++) {
        let acc = layer.bias[oc];
        for (let ic = 0; ic < layer.inCh; ic++) {
          acc += layer.weights[oc * layer.inCh + ic] * pooled[ic];
        }
        logits[oc] = acc;
      }
    }
  }
  if (!logits) throw new Error("model has no linear head");
  let best = 0;
  for (let i = 1; i < logits.length; i++) {
    if (logits[i] > logits[best]) best = i;
  }
  return { classId: best, logits };
}
