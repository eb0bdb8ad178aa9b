/**
 * Dataset assembly: recordings -> deployed CLI `frame` -> labeled tensors.
 *
 * Preprocessing always runs through the deployed toolkit's CLI, never a
 * reimplementation, so training frames are byte-identical to what the
 * deployed pipeline produces from the same raw input. The 80:20
 * train/test split is by recording, seeded and deterministic.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

import { Ev, writeEvt3 } from "./evt3.js";
import { FrameRecord, readEvf1 } from "./evf.js";
import { Rng } from "./rng.js";
import { CLASS_COUNT, makeRecording } from "./synthdata.js";
import { readAedatRecording } from "./aedat.js";

export interface PreprocessConfig {
  eventsPerFrame: number;
  repr: string; // binary | hist | sets | slts
  tau: number;
  channels: number;
  evtkitBin: string;
}

export const DEFAULT_PREPROCESS: PreprocessConfig = {
  eventsPerFrame: 20000,
  repr: "sets",
  tau: 16,
  channels: 2,
  evtkitBin: process.env.EVTKIT_BIN ?? "evtkit",
};

export interface LabeledFrame {
  planes: Uint8Array;
  label: number;
  recording: string;
}

export interface Dataset {
  train: LabeledFrame[];
  test: LabeledFrame[];
  config: PreprocessConfig;
}

/** Run one raw recording through the deployed CLI; returns its frames. */
export function framesFromRaw(rawPath: string, evfPath: string, cfg: PreprocessConfig): FrameRecord[] {
  execFileSync(cfg.evtkitBin, [
    "frame",
    rawPath,
    "-o",
    evfPath,
    "--repr",
    cfg.repr,
    "--tau",
    String(cfg.tau),
    "--n-events",
    String(cfg.eventsPerFrame),
    "--channels",
    String(cfg.channels),
  ]);
  const frames = readEvf1(evfPath);
  // the trailing flushed frame is partial; keep only full frames
  return frames.filter((f) => f.eventCount === cfg.eventsPerFrame);
}

export function preprocessRecording(
  events: Ev[],
  name: string,
  workDir: string,
  cfg: PreprocessConfig,
): FrameRecord[] {
  fs.mkdirSync(workDir, { recursive: true });
  const rawPath = path.join(workDir, `${name}.raw`);
  const evfPath = path.join(workDir, `${name}.evf`);
  fs.writeFileSync(rawPath, writeEvt3(events));
  return framesFromRaw(rawPath, evfPath, cfg);
}

export interface SyntheticSpec {
  recordingsPerClass: number;
  framesPerRecording: number;
  seed: number;
  config?: Partial<PreprocessConfig>;
}

/** Build the synthetic labeled dataset through the deployed pipeline. */
export function buildSyntheticDataset(workDir: string, spec: SyntheticSpec): Dataset {
  const cfg = { ...DEFAULT_PREPROCESS, ...spec.config };
  const all: LabeledFrame[] = [];
  const recordings: string[] = [];
  const rateUs = 1.0; // one event per microsecond
  for (let cls = 0; cls < CLASS_COUNT; cls++) {
    for (let r = 0; r < spec.recordingsPerClass; r++) {
      const name = `rec_c${cls}_r${r}`;
      // headroom over frames*N so the final full frame closes
      const events = Math.round(cfg.eventsPerFrame * (spec.framesPerRecording + 0.5));
      const rec = makeRecording({
        classId: cls,
        seed: spec.seed * 1000 + r,
        events,
        durationUs: Math.round(events / rateUs),
      });
      const frames = preprocessRecording(rec, name, workDir, cfg);
      recordings.push(name);
      for (const f of frames.slice(0, spec.framesPerRecording)) {
        all.push({ planes: f.planes, label: cls, recording: name });
      }
    }
  }
  return splitByRecording(all, recordings, spec.seed, cfg);
}

/** Deterministic 80:20 split at recording granularity. */
export function splitByRecording(
  frames: LabeledFrame[],
  recordings: string[],
  seed: number,
  cfg: PreprocessConfig,
): Dataset {
  const rng = new Rng(seed ^ 0x5eed);
  const shuffled = rng.shuffle(recordings.slice().sort());
  const cut = Math.max(1, Math.round(shuffled.length * 0.8));
  const trainSet = new Set(shuffled.slice(0, cut));
  const train = frames.filter((f) => trainSet.has(f.recording));
  const test = frames.filter((f) => !trainSet.has(f.recording));
  return { train, test, config: cfg };
}

export interface AedatSpec {
  dir: string; // directory of .aedat recordings with *_labels.csv sidecars
  seed: number;
  config?: Partial<PreprocessConfig>;
}

/** Preprocess a directory of real recordings (AEDAT 3.1 + label windows). */
export function buildAedatDataset(workDir: string, spec: AedatSpec): Dataset {
  const cfg = { ...DEFAULT_PREPROCESS, ...spec.config };
  if (!fs.existsSync(spec.dir)) {
    throw new Error(`dataset path missing: ${spec.dir}`);
  }
  const files = fs
    .readdirSync(spec.dir)
    .filter((f) => f.endsWith(".aedat"))
    .sort();
  if (files.length === 0) {
    throw new Error(`no .aedat recordings under ${spec.dir}`);
  }
  const all: LabeledFrame[] = [];
  const recordings: string[] = [];
  for (const file of files) {
    const segments = readAedatRecording(path.join(spec.dir, file));
    segments.forEach((seg, i) => {
      const name = `${file}#${i}`;
      const frames = preprocessRecording(seg.events, name.replace(/[^\w]/g, "_"), workDir, cfg);
      recordings.push(name);
      for (const f of frames) {
        all.push({ planes: f.planes, label: seg.label, recording: name });
      }
    });
  }
  return splitByRecording(all, recordings, spec.seed, cfg);
}
