/**
 * Minimal EVT 3.0 writer: time-sorted events out as little-endian 16-bit
 * words (single-X encoding with lazy time/row latching; the deployed
 * toolkit's decoder reads this directly, so datasets preprocess through
 * the exact production path).
 */

export interface Ev {
  x: number;
  y: number;
  p: number;
  t: number;
}

const ADDR_Y = 0x0;
const ADDR_X = 0x2;
const TIME_LOW = 0x6;
const TIME_HIGH = 0x8;

export function writeEvt3(events: Ev[]): Buffer {
  const words: number[] = [];
  let high = -1;
  let low = -1;
  let row = -1;
  for (const e of events) {
    if (e.x < 0 || e.x >= 1280 || e.y < 0 || e.y >= 720 || e.t < 0 || e.t >= 1 << 24) {
      throw new Error(`event out of range: ${JSON.stringify(e)}`);
    }
    const th = e.t >>> 12;
    const tl = e.t & 0xfff;
    if (th !== high) {
      high = th;
      words.push((TIME_HIGH << 12) | th);
    }
    if (tl !== low) {
      low = tl;
      words.push((TIME_LOW << 12) | tl);
    }
    if (e.y !== row) {
      row = e.y;
      words.push((ADDR_Y << 12) | e.y);
    }
    words.push((ADDR_X << 12) | ((e.p & 1) << 11) | e.x);
  }
  const buf = Buffer.alloc(words.length * 2);
  words.forEach((w, i) => buf.writeUInt16LE(w, i * 2));
  return buf;
}
