/** EVF1 frame container read/write (layout documented in docs/FORMAT.md). */

import * as fs from "node:fs";

const MAGIC = "EVF1";
const HEADER_SIZE = 29;

export interface FrameRecord {
  width: number;
  height: number;
  channels: number;
  kind: number;
  mode: number;
  frameIndex: number;
  tStart: number;
  tEnd: number;
  eventCount: number;
  planes: Uint8Array; // channel-planar row-major
}

export function readEvf1(filePath: string): FrameRecord[] {
  const buf = fs.readFileSync(filePath);
  const frames: FrameRecord[] = [];
  let off = 0;
  while (off < buf.length) {
    if (off + HEADER_SIZE > buf.length) {
      throw new Error(`truncated EVF1 header at ${off}`);
    }
    if (buf.toString("latin1", off, off + 4) !== MAGIC) {
      throw new Error(`bad EVF1 magic at ${off}`);
    }
    const version = buf.readUInt8(off + 4);
    if (version !== 1) {
      throw new Error(`unsupported EVF1 version ${version}`);
    }
    const width = buf.readUInt16LE(off + 5);
    const height = buf.readUInt16LE(off + 7);
    const channels = buf.readUInt8(off + 9);
    const dtype = buf.readUInt8(off + 10);
    if (dtype !== 0) {
      throw new Error(`unsupported EVF1 dtype ${dtype}`);
    }
    const kind = buf.readUInt8(off + 11);
    const mode = buf.readUInt8(off + 12);
    const frameIndex = buf.readUInt32LE(off + 13);
    const tStart = buf.readUInt32LE(off + 17);
    const tEnd = buf.readUInt32LE(off + 21);
    const eventCount = buf.readUInt32LE(off + 25);
    const size = width * height * channels;
    if (off + HEADER_SIZE + size > buf.length) {
      throw new Error(`truncated EVF1 payload at ${off}`);
    }
    const planes = new Uint8Array(buf.subarray(off + HEADER_SIZE, off + HEADER_SIZE + size));
    frames.push({ width, height, channels, kind, mode, frameIndex, tStart, tEnd, eventCount, planes });
    off += HEADER_SIZE + size;
  }
  return frames;
}

export function writeEvf1(filePath: string, frames: FrameRecord[]): void {
  const parts: Buffer[] = [];
  for (const f of frames) {
    const head = Buffer.alloc(HEADER_SIZE);
    head.write(MAGIC, 0, "latin1");
    head.writeUInt8(1, 4);
    head.writeUInt16LE(f.width, 5);
    head.writeUInt16LE(f.height, 7);
    head.writeUInt8(f.channels, 9);
    head.writeUInt8(0, 10);
    head.writeUInt8(f.kind, 11);
    head.writeUInt8(f.mode, 12);
    head.writeUInt32LE(f.frameIndex, 13);
    head.writeUInt32LE(f.tStart >>> 0, 17);
    head.writeUInt32LE(f.tEnd >>> 0, 21);
    head.writeUInt32LE(f.eventCount, 25);
    parts.push(head, Buffer.from(f.planes));
  }
  fs.writeFileSync(filePath, Buffer.concat(parts));
}
