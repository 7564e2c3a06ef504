/** `.lutpack` writer: the restoration engine's little-endian byte format.
 *
 * magic "SLUT" | version u16 | variant u8 | n_blocks u16 | channels u16 |
 * scale u8 | msb u8 | lsb u8 | index_bits u8 | residual bitmask u32 |
 * per-block per-channel (dx i8, dy i8) | eas_epsilon f32 (NaN) |
 * table count u32 | tables (role u8, position u8, in u16, out u16,
 * in_bits u8, stride u8, entry count u32, int8 entries).
 */

import { LutLayer, TrainableModel } from "./model.js";
import { clamp, roundHalfAway } from "./rng.js";

const ROLE_CODES: Record<string, number> = { conv3x3: 0, depthwise: 1, pointwise: 2 };
const VARIANT_CUSTOM = 3;

class Writer {
  private parts: Uint8Array[] = [];

  bytes(b: Uint8Array): void {
    this.parts.push(b);
  }

  u8(v: number): void {
    this.bytes(Uint8Array.of(v & 0xff));
  }

  u16(v: number): void {
    const b = new Uint8Array(2);
    new DataView(b.buffer).setUint16(0, v, true);
    this.bytes(b);
  }

  u32(v: number): void {
    const b = new Uint8Array(4);
    new DataView(b.buffer).setUint32(0, v, true);
    this.bytes(b);
  }

  f32(v: number): void {
    const b = new Uint8Array(4);
    new DataView(b.buffer).setFloat32(0, v, true);
    this.bytes(b);
  }

  finish(): Uint8Array {
    const total = this.parts.reduce((n, p) => n + p.length, 0);
    const out = new Uint8Array(total);
    let off = 0;
    for (const p of this.parts) {
      out.set(p, off);
      off += p.length;
    }
    return out;
  }
}

/** exhaustively sample one mapping's domain into int8 entries */
export function tableEntries(layer: LutLayer, p: number, ci: number, co: number): Int8Array {
  const out = new Int8Array(layer.domain);
  const base = layer.knotBase(p, ci, co);
  for (let k = 0; k < layer.domain; k++) {
    out[k] = clamp(roundHalfAway(layer.knots[base + k]), -128, 127);
  }
  return out;
}

function* layerSlots(layer: LutLayer): Generator<[number, number, number]> {
  for (let p = 0; p < layer.positions; p++) {
    for (let ci = 0; ci < layer.cin; ci++) {
      if (layer.role === "depthwise") {
        yield [p, ci, ci];
      } else {
        for (let co = 0; co < layer.cout; co++) yield [p, ci, co];
      }
    }
  }
}

export function exportLutpack(model: TrainableModel, shifts: Int8Array): Uint8Array {
  const s = model.shape;
  const w = new Writer();
  w.bytes(new TextEncoder().encode("SLUT"));
  w.u16(1); // format version
  w.u8(VARIANT_CUSTOM);
  w.u16(1); // one Shift-Block
  w.u16(s.channels);
  w.u8(s.scale);
  w.u8(s.msbBits);
  w.u8(s.lsbBits);
  w.u8(s.indexBits);
  // residual lookups on for the block's pointwise and depthwise layers
  w.u32((1 << 2) | (1 << 3));
  w.bytes(new Uint8Array(Int8Array.from(shifts).buffer));
  w.f32(Number.NaN); // stride-1 export, no compression tolerance
  const layers = model.layers();
  let count = 0;
  for (const layer of layers) count += layer.tableCount();
  w.u32(count);
  for (const layer of layers) {
    for (const [p, ci, co] of layerSlots(layer)) {
      w.u8(ROLE_CODES[layer.role]);
      w.u8(p);
      w.u16(ci);
      w.u16(co);
      w.u8(layer.inBits);
      w.u8(1); // stride
      w.u32(layer.domain);
      w.bytes(new Uint8Array(tableEntries(layer, p, ci, co).buffer));
    }
  }
  return w.finish();
}
