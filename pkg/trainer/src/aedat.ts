/**
 * AEDAT 3.1 reader for public gesture recordings.
 *
 * Parses polarity-event packets (x, y, polarity, 32-bit microsecond
 * timestamp) and cuts the stream into labeled segments using the
 * `<name>_labels.csv` sidecar (class, startTime_usec, endTime_usec rows).
 * Timestamps are rebased per segment and wrapped into 24 bits to match
 * the deployed pipeline's timestamp width; coordinates below the sensor
 * bounds pass through unchanged.
 */

import * as fs from "node:fs";

import { Ev } from "./evt3.js";

const POLARITY_EVENT = 1;

export interface LabeledSegment {
  label: number;
  events: Ev[];
}

export interface AedatEvent {
  x: number;
  y: number;
  p: number;
  t: number; // microseconds, 32-bit stream clock
}

export function parseAedat(buf: Buffer): AedatEvent[] {
  let off = 0;
  // header: "#!AER-DAT3.1\r\n" followed by further comment lines
  if (!buf.toString("latin1", 0, 12).startsWith("#!AER-DAT")) {
    throw new Error("not an AEDAT 3.x file");
  }
  while (off < buf.length && buf[off] === 0x23) {
    const nl = buf.indexOf(0x0a, off);
    if (nl < 0) throw new Error("unterminated AEDAT header");
    off = nl + 1;
  }
  const events: AedatEvent[] = [];
  while (off + 28 <= buf.length) {
    const eventType = buf.readUInt16LE(off);
    const eventSize = buf.readUInt32LE(off + 4);
    const eventNumber = buf.readUInt32LE(off + 20);
    off += 28;
    const blockEnd = off + eventSize * eventNumber;
    if (blockEnd > buf.length) {
      break; // truncated final packet: keep what parsed
    }
    if (eventType === POLARITY_EVENT && eventSize === 8) {
      for (let i = 0; i < eventNumber; i++) {
        const data = buf.readUInt32LE(off + i * 8);
        const valid = data & 1;
        if (!valid) continue;
        const t = buf.readInt32LE(off + i * 8 + 4);
        events.push({
          p: (data >>> 1) & 1,
          y: (data >>> 2) & 0x7fff,
          x: (data >>> 17) & 0x7fff,
          t,
        });
      }
    }
    off = blockEnd;
  }
  return events;
}

export function parseLabelWindows(csv: string): { label: number; start: number; end: number }[] {
  const rows = csv.trim().split("\n");
  const out: { label: number; start: number; end: number }[] = [];
  for (const row of rows.slice(1)) {
    const [cls, start, end] = row.split(",").map((v) => Number(v.trim()));
    if (Number.isFinite(cls) && Number.isFinite(start) && Number.isFinite(end)) {
      // gesture classes are published 1-based
      out.push({ label: cls - 1, start, end });
    }
  }
  return out;
}

export function readAedatRecording(aedatPath: string): LabeledSegment[] {
  const events = parseAedat(fs.readFileSync(aedatPath));
  const labelsPath = aedatPath.replace(/\.aedat$/, "_labels.csv");
  if (!fs.existsSync(labelsPath)) {
    throw new Error(`label sidecar missing: ${labelsPath}`);
  }
  const windows = parseLabelWindows(fs.readFileSync(labelsPath, "utf-8"));
  return windows.map(({ label, start, end }) => {
    const segment: Ev[] = [];
    for (const e of events) {
      if (e.t >= start && e.t < end && e.x < 1280 && e.y < 720) {
        segment.push({ x: e.x, y: e.y, p: e.p, t: (e.t - start) & 0xffffff });
      }
    }
    return { label, events: segment };
  });
}
