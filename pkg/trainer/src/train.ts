/**
 * Two-phase training loop.
 *
 * Phase 1 trains in real arithmetic (conv + frozen-stat batch norm + ReLU,
 * inputs scaled to [0,1]); phase 2 folds the batch norm, calibrates the
 * requantization shifts on a training batch, and fine-tunes in the exact
 * deployed integer arithmetic with straight-through gradients. Both phases
 * use Adam under one cosine schedule, cross-entropy loss, and the hardest-k
 * batch selection whose ratio decays exponentially from 1.0 to the floor.
 */

import { LabeledFrame } from "./dataset.js";
import { evnet16Spec, evnet70Spec, Net } from "./net.js";
import { Adam, crossEntropy, hardestK, topkRatio } from "./optim.js";
import { Rng } from "./rng.js";

export interface TrainConfig {
  model: "evnet16" | "evnet70";
  inputChannels: number;
  epochs: number;
  batchSize: number;
  lr: number;
  topkFloor: number;
  seed: number;
  floatPhaseFraction: number; // share of epochs before the integer phase
  targetTrainAccuracy?: number; // early stop once reached (int phase only)
  log?: (line: string) => void;
}

export const DEFAULT_TRAIN: TrainConfig = {
  model: "evnet16",
  inputChannels: 2,
  epochs: 50,
  batchSize: 16,
  lr: 1e-3,
  topkFloor: 0.3,
  seed: 7,
  floatPhaseFraction: 0.2,
};

export interface EpochLog {
  epoch: number;
  phase: string;
  loss: number;
  accuracy: number;
  lr: number;
  topk: number;
}

export interface TrainResult {
  net: Net;
  history: EpochLog[];
  finalTrainAccuracy: number;
}

export function trainAccuracy(net: Net, frames: LabeledFrame[]): number {
  let hits = 0;
  for (const f of frames) {
    const tape = net.forward(f.planes, false);
    let best = 0;
    for (let i = 1; i < tape.logits.length; i++) {
      if (tape.logits[i] > tape.logits[best]) best = i;
    }
    if (best === f.label) hits++;
  }
  return hits / Math.max(frames.length, 1);
}

export function train(frames: LabeledFrame[], config: TrainConfig): TrainResult {
  if (frames.length === 0) {
    throw new Error("empty training set");
  }
  const spec = config.model === "evnet16" ? evnet16Spec(config.inputChannels) : evnet70Spec(config.inputChannels);
  const net = new Net(spec, config.seed);
  const adam = new Adam(config.lr);
  const rng = new Rng(config.seed ^ 0xa5a5);
  const log = config.log ?? (() => undefined);
  const history: EpochLog[] = [];
  const switchEpoch = Math.max(1, Math.round(config.epochs * config.floatPhaseFraction));
  const dLogits = new Float64Array(spec.classCount);

  const scaledLoss = (logits: Float64Array, label: number, d: Float64Array): number => {
    // the integer phase emits logits at about logitScale times float
    // magnitude; a temperature keeps cross-entropy gradients conditioned
    const t = net.logitScale;
    if (t === 1) {
      return crossEntropy(logits, label, d);
    }
    const scaled = new Float64Array(logits.length);
    for (let i = 0; i < logits.length; i++) {
      scaled[i] = logits[i] / t;
    }
    const loss = crossEntropy(scaled, label, d);
    for (let i = 0; i < d.length; i++) {
      d[i] /= t;
    }
    return loss;
  };

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    if (epoch === switchEpoch && net.phase === "float") {
      const calFrames = frames.slice(0, Math.min(frames.length, 24)).map((f) => f.planes);
      net.transitionToInt(calFrames);
      log(
        `epoch ${epoch}: batch norm folded, shifts ${net.stages
          .map((s) => s.blocks().map((b) => b.shift).join("/"))
          .join(",")}, logit scale ${net.logitScale.toExponential(2)}`,
      );
    }
    const order = rng.shuffle(frames.map((_, i) => i));
    const ratio = topkRatio(epoch, config.epochs, config.topkFloor);
    // cosine restarts at the phase switch so the fine-tune gets real steps
    const lr =
      net.phase === "float"
        ? adam.lrAt(epoch, switchEpoch)
        : adam.lrAt(epoch - switchEpoch, Math.max(config.epochs - switchEpoch, 1));
    let lossSum = 0;
    let lossCount = 0;
    let hit = 0;

    for (let start = 0; start < order.length; start += config.batchSize) {
      const batch = order.slice(start, start + config.batchSize);
      const losses: number[] = [];
      const tapes = [];
      for (const idx of batch) {
        const f = frames[idx];
        const tape = net.forward(f.planes, true);
        tapes.push(tape);
        const loss = scaledLoss(tape.logits, f.label, dLogits);
        losses.push(loss);
        lossSum += loss;
        lossCount++;
        let best = 0;
        for (let i = 1; i < tape.logits.length; i++) {
          if (tape.logits[i] > tape.logits[best]) best = i;
        }
        if (best === f.label) hit++;
        if (!Number.isFinite(loss)) {
          throw new Error(`loss diverged at epoch ${epoch} (sample ${idx}): ${loss}`);
        }
      }
      const k = Math.ceil(ratio * batch.length);
      for (const sel of hardestK(losses, k)) {
        scaledLoss(tapes[sel].logits, frames[batch[sel]].label, dLogits);
        net.backward(tapes[sel], dLogits);
      }
      adam.apply(net.params(), lr);
    }

    const entry: EpochLog = {
      epoch,
      phase: net.phase,
      loss: lossSum / Math.max(lossCount, 1),
      accuracy: hit / Math.max(lossCount, 1),
      lr,
      topk: ratio,
    };
    history.push(entry);
    log(
      `epoch ${epoch} [${entry.phase}] loss ${entry.loss.toFixed(4)} acc ${(entry.accuracy * 100).toFixed(1)}% ` +
        `lr ${lr.toExponential(2)} topk ${ratio.toFixed(2)}`,
    );
    if (
      net.phase === "int" &&
      config.targetTrainAccuracy !== undefined &&
      trainAccuracy(net, frames) >= config.targetTrainAccuracy
    ) {
      log(`early stop at epoch ${epoch}: target train accuracy reached`);
      break;
    }
  }
  if (net.phase === "float") {
    net.transitionToInt(frames.slice(0, Math.min(frames.length, 24)).map((f) => f.planes));
  }
  return { net, history, finalTrainAccuracy: trainAccuracy(net, frames) };
}
