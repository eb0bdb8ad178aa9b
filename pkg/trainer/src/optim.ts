/** Adam with cosine-annealed learning rate, plus the loss-side helpers. */

import { Param } from "./net.js";

export class Adam {
  readonly lr0: number;
  readonly beta1 = 0.9;
  readonly beta2 = 0.999;
  readonly eps = 1e-8;
  private step = 0;

  constructor(lr0 = 1e-3) {
    this.lr0 = lr0;
  }

  /** Cosine annealing from lr0 down to zero across the epoch budget. */
  lrAt(epoch: number, totalEpochs: number): number {
    return 0.5 * this.lr0 * (1 + Math.cos((Math.PI * epoch) / totalEpochs));
  }

  apply(params: Param[], lr: number): void {
    this.step++;
    const c1 = 1 - Math.pow(this.beta1, this.step);
    const c2 = 1 - Math.pow(this.beta2, this.step);
    for (const p of params) {
      const { data, grad, m, v } = p;
      for (let i = 0; i < data.length; i++) {
        const g = grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        data[i] -= (lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
        grad[i] = 0;
      }
    }
  }
}

/** Softmax cross-entropy; returns the loss and writes dLogits in place. */
export function crossEntropy(logits: Float64Array, label: number, dLogits: Float64Array): number {
  let max = -Infinity;
  for (const v of logits) {
    if (v > max) max = v;
  }
  let sum = 0;
  for (let i = 0; i < logits.length; i++) {
    sum += Math.exp(logits[i] - max);
  }
  const logSum = Math.log(sum) + max;
  for (let i = 0; i < logits.length; i++) {
    dLogits[i] = Math.exp(logits[i] - logSum) - (i === label ? 1 : 0);
  }
  return logSum - logits[label];
}

/**
 * Hard-sample ratio schedule: exponential decay from 1.0 to the floor,
 * reaching the floor exactly at the final epoch.
 */
export function topkRatio(epoch: number, totalEpochs: number, floor = 0.3): number {
  if (totalEpochs <= 1) return floor;
  const lambda = Math.log(1 / floor);
  return Math.max(floor, Math.exp((-lambda * epoch) / (totalEpochs - 1)));
}

/** Indices of the k largest losses (gradients flow only through these). */
export function hardestK(losses: number[], k: number): number[] {
  const order = losses.map((loss, i) => [loss, i] as const).sort((a, b) => b[0] - a[0]);
  return order.slice(0, Math.max(1, k)).map(([, i]) => i);
}
