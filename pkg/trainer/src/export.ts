/**
 * Bundle export: trained net -> int arrays -> manifest.yaml + blobs.
 *
 * The written integers are exactly the integers the int-phase forward
 * used, so the trainer's integer simulation, the bundle on disk, and the
 * deployed executor all describe one function. exportBundle() verifies
 * that end to end by running the deployed CLI on held-out frames and
 * comparing classes against the integer simulation; any disagreement
 * aborts the export.
 */

import { createHash } from "node:crypto";
import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import yaml from "js-yaml";

import { Net, quantWeight } from "./net.js";
import { IntModel, IntLayer, intForward } from "./quantsim.js";
import { writeEvf1, FrameRecord } from "./evf.js";

export function toIntModel(net: Net): IntModel {
  if (net.phase !== "int") {
    throw new Error("export requires the integer phase (fold batch norm first)");
  }
  const layers: IntLayer[] = [];
  for (const stage of net.stages) {
    const { kind, inCh, outCh, stride } = stage.spec;
    if (kind === "conv") {
      layers.push({
        kind: "conv2d",
        inCh,
        outCh,
        stride,
        rescaleShift: stage.conv.shift,
        weights: quantArray(stage.conv.w.data),
        bias: roundArray(stage.conv.b.data),
      });
    } else {
      layers.push({
        kind: "dwsep",
        inCh,
        outCh,
        stride,
        dwRescaleShift: stage.conv.shift,
        rescaleShift: stage.pw!.shift,
        dwWeights: quantArray(stage.conv.w.data),
        dwBias: roundArray(stage.conv.b.data),
        pwWeights: quantArray(stage.pw!.w.data),
        pwBias: roundArray(stage.pw!.b.data),
      });
    }
  }
  layers.push({ kind: "gap" });
  layers.push({
    kind: "linear",
    inCh: net.spec.headCh,
    outCh: net.spec.classCount,
    weights: quantArray(net.head.w.data),
    bias: roundArray(net.head.b.data),
  });
  return {
    name: net.spec.name,
    inputChannels: net.spec.inputChannels,
    inputHeight: net.inputHeight,
    inputWidth: net.inputWidth,
    classCount: net.spec.classCount,
    layers,
  };
}

function quantArray(latent: Float64Array): Int8Array {
  const out = new Int8Array(latent.length);
  for (let i = 0; i < latent.length; i++) {
    out[i] = quantWeight(latent[i]);
  }
  return out;
}

function roundArray(latent: Float64Array): Int32Array {
  const out = new Int32Array(latent.length);
  for (let i = 0; i < latent.length; i++) {
    out[i] = Math.round(latent[i]);
  }
  return out;
}

export function paramCount(model: IntModel): number {
  let total = 0;
  for (const layer of model.layers) {
    if (layer.kind === "conv2d" || layer.kind === "linear") {
      total += layer.weights.length + layer.bias.length;
    } else if (layer.kind === "dwsep") {
      total += layer.dwWeights.length + layer.dwBias.length + layer.pwWeights.length + layer.pwBias.length;
    }
  }
  return total;
}

function int32LE(arr: Int32Array): Buffer {
  const buf = Buffer.alloc(arr.length * 4);
  for (let i = 0; i < arr.length; i++) {
    buf.writeInt32LE(arr[i], i * 4);
  }
  return buf;
}

function int8Bytes(arr: Int8Array): Buffer {
  return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength);
}

export function writeBundle(model: IntModel, dir: string): string {
  fs.mkdirSync(dir, { recursive: true });
  const layersOut: Record<string, unknown>[] = [];
  model.layers.forEach((layer, i) => {
    const entry: Record<string, unknown> = { kind: layer.kind };
    let blob: Buffer | null = null;
    if (layer.kind === "conv2d") {
      Object.assign(entry, {
        in_ch: layer.inCh,
        out_ch: layer.outCh,
        kernel: 3,
        stride: layer.stride,
        padding: 1,
        relu: true,
        rescale_shift: layer.rescaleShift,
      });
      blob = Buffer.concat([int8Bytes(layer.weights), int32LE(layer.bias)]);
    } else if (layer.kind === "dwsep") {
      Object.assign(entry, {
        in_ch: layer.inCh,
        out_ch: layer.outCh,
        kernel: 3,
        stride: layer.stride,
        padding: 1,
        relu: true,
        rescale_shift: layer.rescaleShift,
        dw_rescale_shift: layer.dwRescaleShift,
      });
      blob = Buffer.concat([
        int8Bytes(layer.dwWeights),
        int32LE(layer.dwBias),
        int8Bytes(layer.pwWeights),
        int32LE(layer.pwBias),
      ]);
    } else if (layer.kind === "linear") {
      Object.assign(entry, { in_ch: layer.inCh, out_ch: layer.outCh, relu: false });
      blob = Buffer.concat([int8Bytes(layer.weights), int32LE(layer.bias)]);
    }
    if (blob) {
      const blobName = `layer${String(i).padStart(2, "0")}_${layer.kind}.bin`;
      fs.writeFileSync(path.join(dir, blobName), blob);
      entry.blob = blobName;
      entry.sha256 = createHash("sha256").update(blob).digest("hex");
    }
    layersOut.push(entry);
  });
  const manifest = {
    format: "evtkit-model/1",
    name: model.name,
    input_channels: model.inputChannels,
    input_height: model.inputHeight,
    input_width: model.inputWidth,
    class_count: model.classCount,
    param_count: paramCount(model),
    layers: layersOut,
  };
  const manifestPath = path.join(dir, "manifest.yaml");
  fs.writeFileSync(manifestPath, yaml.dump(manifest, { sortKeys: false }));
  return manifestPath;
}

export interface CrossCheckResult {
  frames: number;
  agreed: number;
  classes: number[];
}

/** Run the deployed executor on held-out frames and compare class outputs. */
export function crossCheck(
  model: IntModel,
  bundleDir: string,
  frames: FrameRecord[],
  evtkitBin: string,
  workDir: string,
): CrossCheckResult {
  const evfPath = path.join(workDir, "crosscheck.evf");
  writeEvf1(evfPath, frames);
  const stdout = execFileSync(evtkitBin, ["infer", evfPath, "--model", bundleDir], { encoding: "utf-8" });
  const deployed = stdout
    .split("\n")
    .filter((line) => line.startsWith("{"))
    .map((line) => JSON.parse(line) as { frame_index: number; class_id: number });
  if (deployed.length !== frames.length) {
    throw new Error(`deployed executor returned ${deployed.length} predictions for ${frames.length} frames`);
  }
  let agreed = 0;
  const classes: number[] = [];
  frames.forEach((frame, i) => {
    const simulated = intForward(model, frame.planes).classId;
    classes.push(simulated);
    if (simulated === deployed[i].class_id) {
      agreed++;
    }
  });
  return { frames: frames.length, agreed, classes };
}

/** Export with the mandatory cross-check; mismatches abort. */
export function exportBundle(
  net: Net,
  dir: string,
  heldOut: FrameRecord[],
  evtkitBin = process.env.EVTKIT_BIN ?? "evtkit",
): { manifestPath: string; check: CrossCheckResult } {
  const model = toIntModel(net);
  const manifestPath = writeBundle(model, dir);
  const check = crossCheck(model, dir, heldOut, evtkitBin, dir);
  if (check.agreed !== check.frames) {
    fs.rmSync(manifestPath, { force: true });
    throw new Error(`export cross-check failed: ${check.agreed}/${check.frames} frames agree`);
  }
  return { manifestPath, check };
}
