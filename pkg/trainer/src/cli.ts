/**
 * Trainer commands:
 *   preprocess --dataset <dir> --out <dir>       real recordings -> tensors
 *   sanity [--frames 200] [--epochs 50]          synthetic overfit check
 *   train ... --export <dir>                     train + export a bundle
 *
 * Configuration may come from a JSON file (--config) holding the same
 * keys; flags win. The deployed CLI path comes from EVTKIT_BIN or the
 * config's evtkitBin (default "evtkit").
 */

import * as fs from "node:fs";

import { buildAedatDataset, buildSyntheticDataset, Dataset, DEFAULT_PREPROCESS } from "./dataset.js";
import { exportBundle } from "./export.js";
import { DEFAULT_TRAIN, train } from "./train.js";

function parseArgs(argv: string[]): { cmd: string; flags: Map<string, string> } {
  const [cmd = "help", ...rest] = argv;
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i++) {
    if (rest[i].startsWith("--")) {
      const key = rest[i].slice(2);
      const next = rest[i + 1];
      if (next !== undefined && !next.startsWith("--")) {
        flags.set(key, next);
        i++;
      } else {
        flags.set(key, "true");
      }
    }
  }
  return { cmd, flags };
}

function loadConfig(flags: Map<string, string>): Record<string, unknown> {
  const configPath = flags.get("config");
  if (!configPath) return {};
  return JSON.parse(fs.readFileSync(configPath, "utf-8")) as Record<string, unknown>;
}

function num(flags: Map<string, string>, cfg: Record<string, unknown>, key: string, fallback: number): number {
  if (flags.has(key)) return Number(flags.get(key));
  if (typeof cfg[key] === "number") return cfg[key] as number;
  return fallback;
}

function buildDataset(flags: Map<string, string>, cfg: Record<string, unknown>, workDir: string): Dataset {
  const preprocess = {
    ...DEFAULT_PREPROCESS,
    evtkitBin: (cfg.evtkitBin as string) ?? process.env.EVTKIT_BIN ?? "evtkit",
  };
  const datasetDir = flags.get("dataset") ?? (cfg.dataset as string | undefined);
  if (datasetDir) {
    return buildAedatDataset(workDir, { dir: datasetDir, seed: num(flags, cfg, "seed", 7), config: preprocess });
  }
  const framesTarget = num(flags, cfg, "frames", 200);
  const perRecording = num(flags, cfg, "frames-per-recording", 2);
  const recordingsPerClass = Math.max(1, Math.ceil(framesTarget / (11 * perRecording)));
  return buildSyntheticDataset(workDir, {
    recordingsPerClass,
    framesPerRecording: perRecording,
    seed: num(flags, cfg, "seed", 7),
    config: preprocess,
  });
}

function main(): void {
  const { cmd, flags } = parseArgs(process.argv.slice(2));
  const cfg = loadConfig(flags);
  const workDir = flags.get("work") ?? (cfg.work as string) ?? ".trainer-work";
  fs.mkdirSync(workDir, { recursive: true });

  if (cmd === "preprocess") {
    const dataset = buildDataset(flags, cfg, workDir);
    console.log(`train frames: ${dataset.train.length}, test frames: ${dataset.test.length}`);
    return;
  }

  if (cmd === "sanity" || cmd === "train") {
    const dataset = buildDataset(flags, cfg, workDir);
    console.log(`dataset: ${dataset.train.length} train / ${dataset.test.length} test frames`);
    const target = cmd === "sanity" ? 0.99 : undefined;
    const result = train(dataset.train, {
      ...DEFAULT_TRAIN,
      epochs: num(flags, cfg, "epochs", cmd === "sanity" ? 50 : 1000),
      batchSize: num(flags, cfg, "batch", 16),
      lr: num(flags, cfg, "lr", 1e-3),
      seed: num(flags, cfg, "seed", 7),
      topkFloor: num(flags, cfg, "topk-floor", 0.3),
      targetTrainAccuracy: target,
      log: (line) => console.log(line),
    });
    console.log(`final train accuracy: ${(result.finalTrainAccuracy * 100).toFixed(2)}%`);
    if (cmd === "sanity" && result.finalTrainAccuracy < 0.99) {
      console.error("sanity FAILED: train accuracy below 99%");
      process.exitCode = 1;
      return;
    }
    const exportDir = flags.get("export") ?? (cfg.export as string | undefined);
    if (exportDir) {
      const heldOut = (dataset.test.length >= 1 ? dataset.test : dataset.train).slice(0, 32);
      const { manifestPath, check } = exportBundle(
        result.net,
        exportDir,
        heldOut.map((f, i) => ({
          width: 128,
          height: 128,
          channels: 2,
          kind: 2,
          mode: 0,
          frameIndex: i,
          tStart: 0,
          tEnd: 0,
          eventCount: 20000,
          planes: f.planes,
        })),
        (cfg.evtkitBin as string) ?? process.env.EVTKIT_BIN ?? "evtkit",
      );
      console.log(`exported ${manifestPath}; cross-check ${check.agreed}/${check.frames}`);
    }
    return;
  }

  console.log("usage: cli.ts <preprocess|train|sanity> [--dataset dir] [--frames n] [--epochs n] [--export dir]");
  if (cmd !== "help") {
    process.exitCode = 2;
  }
}

main();
