/**
 * Synthetic labeled recordings for sanity-scale runs.
 *
 * Each of the 11 classes is a motion signature: a compact event cloud
 * translating along a class-specific direction (classes 0-7), orbiting
 * clockwise/counterclockwise (8-9), or expanding radially (10). Polarity
 * follows the instantaneous velocity the way a real sensor sees a moving
 * edge (leading side positive), so direction is visible inside a single
 * frame, not only across frames. Recordings vary by seed; frames inherit
 * the recording label. Real recordings replace these when a dataset path
 * is supplied.
 */

import { Rng } from "./rng.js";
import { Ev } from "./evt3.js";

export const CLASS_COUNT = 11;

export interface RecordingSpec {
  classId: number;
  seed: number;
  events: number;
  durationUs: number;
  width?: number;
  height?: number;
}

export function makeRecording(spec: RecordingSpec): Ev[] {
  const width = spec.width ?? 1280;
  const height = spec.height ?? 720;
  const rng = new Rng(spec.seed * 7919 + spec.classId * 104729 + 1);
  const n = spec.events;
  const events: Ev[] = [];

  const margin = 260;
  const ox = rng.uniform(margin, width - margin);
  const oy = rng.uniform(margin, height - margin);
  const sigma = rng.uniform(18, 28);
  const cls = spec.classId;
  const theta = (2 * Math.PI * cls) / 8;
  const travel = rng.uniform(160, 220);
  const orbitR = rng.uniform(130, 190);
  const turns = (cls === 9 ? -1 : 1) * rng.uniform(0.6, 0.9);
  const flip = 0.05; // sensor noise: occasional wrong-sign events

  for (let i = 0; i < n; i++) {
    const t = Math.floor((i * spec.durationUs) / n);
    // mildly accelerating progress along the trajectory
    const u = i / n;
    const s = 0.4 * u + 0.6 * u * u;
    let cx: number;
    let cy: number;
    let vx: number;
    let vy: number;
    if (cls < 8) {
      cx = ox + Math.cos(theta) * travel * s;
      cy = oy + Math.sin(theta) * travel * s;
      vx = Math.cos(theta);
      vy = Math.sin(theta);
    } else if (cls < 10) {
      const ang = 2 * Math.PI * turns * s;
      cx = ox + orbitR * Math.cos(ang);
      cy = oy + orbitR * Math.sin(ang);
      vx = -Math.sin(ang) * Math.sign(turns);
      vy = Math.cos(ang) * Math.sign(turns);
    } else {
      const ang = rng.uniform(0, 2 * Math.PI);
      const r = orbitR * (0.25 + 0.75 * s);
      cx = ox + r * Math.cos(ang);
      cy = oy + r * Math.sin(ang);
      vx = Math.cos(ang);
      vy = Math.sin(ang);
    }
    const dx = rng.gauss() * sigma;
    const dy = rng.gauss() * sigma;
    const x = Math.round(cx + dx);
    const y = Math.round(cy + dy);
    if (x < 0 || x >= width || y < 0 || y >= height) {
      continue;
    }
    const leading = dx * vx + dy * vy > 0;
    const p = rng.next() < flip ? (leading ? 0 : 1) : leading ? 1 : 0;
    events.push({ x, y, p, t });
  }
  return events;
}
