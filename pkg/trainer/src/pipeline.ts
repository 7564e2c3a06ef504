/** Forward/backward passes.
 *
 * Stage 1 trains with a fully float pipeline: fractional channel offsets
 * applied by bilinear resampling, clamps with pass-through gradients inside
 * the range. The aligned forward reproduces the engine's integer chain
 * (rounded int8 entries, integer means with round-half-away division, index
 * clamps, rotation ensemble) so exported packs can be checked against the
 * engine within one intensity level.
 */

import { Fmap, fmap, LutLayer, TrainableModel } from "./model.js";
import { OffsetCache, OffsetNet } from "./offsets.js";
import { clamp, roundHalfAway } from "./rng.js";

export interface Plane {
  h: number;
  w: number;
  data: Uint8Array;
}

export function splitBits(img: Plane, msbBits = 6): { msb: Fmap; lsb: Fmap } {
  const lsbBits = 8 - msbBits;
  const msb = fmap(1, img.h, img.w);
  const lsb = fmap(1, img.h, img.w);
  const mask = (1 << lsbBits) - 1;
  for (let i = 0; i < img.data.length; i++) {
    msb.data[i] = img.data[i] >> lsbBits;
    lsb.data[i] = img.data[i] & mask;
  }
  return { msb, lsb };
}

export function addFmaps(a: Fmap, b: Fmap): Fmap {
  const out = fmap(a.c, a.h, a.w);
  for (let i = 0; i < out.data.length; i++) out.data[i] = a.data[i] + b.data[i];
  return out;
}

/** clamp to [0, hi]; gradient passes only strictly inside the range */
export function clampDomain(x: Fmap, hi: number): { out: Fmap; mask: Uint8Array } {
  const out = fmap(x.c, x.h, x.w);
  const mask = new Uint8Array(x.data.length);
  for (let i = 0; i < x.data.length; i++) {
    const v = x.data[i];
    out.data[i] = v < 0 ? 0 : v > hi ? hi : v;
    mask[i] = v > 0 && v < hi ? 1 : 0;
  }
  return { out, mask };
}

export function maskedGrad(g: Fmap, mask: Uint8Array): Fmap {
  const out = fmap(g.c, g.h, g.w);
  for (let i = 0; i < g.data.length; i++) out.data[i] = mask[i] ? g.data[i] : 0;
  return out;
}

export interface ShiftCache {
  x: Fmap;
  offsets: Float64Array;
}

/** per-channel fractional shift via bilinear resampling, replicate borders;
 * out(c, y, x) samples the input at (y - dy_c, x - dx_c) */
export function bilinearShift(x: Fmap, offsets: Float64Array): { out: Fmap; cache: ShiftCache } {
  const { c, h, w } = x;
  const out = fmap(c, h, w);
  for (let ch = 0; ch < c; ch++) {
    const dx = offsets[2 * ch];
    const dy = offsets[2 * ch + 1];
    for (let y = 0; y < h; y++) {
      const sy = clamp(y - dy, 0, h - 1);
      const y0 = Math.min(Math.floor(sy), h - 2 < 0 ? 0 : h - 2);
      const wy = h === 1 ? 0 : sy - y0;
      for (let xx = 0; xx < w; xx++) {
        const sx = clamp(xx - dx, 0, w - 1);
        const x0 = Math.min(Math.floor(sx), w - 2 < 0 ? 0 : w - 2);
        const wx = w === 1 ? 0 : sx - x0;
        const p00 = x.data[(ch * h + y0) * w + x0];
        const p01 = x.data[(ch * h + y0) * w + Math.min(x0 + 1, w - 1)];
        const p10 = x.data[(ch * h + Math.min(y0 + 1, h - 1)) * w + x0];
        const p11 = x.data[(ch * h + Math.min(y0 + 1, h - 1)) * w + Math.min(x0 + 1, w - 1)];
        out.data[(ch * h + y) * w + xx] =
          (1 - wy) * ((1 - wx) * p00 + wx * p01) + wy * ((1 - wx) * p10 + wx * p11);
      }
    }
  }
  return { out, cache: { x, offsets } };
}

export function bilinearShiftBackward(cache: ShiftCache, gOut: Fmap): { gX: Fmap; gOffsets: Float64Array } {
  const { x, offsets } = cache;
  const { c, h, w } = x;
  const gX = fmap(c, h, w);
  const gOffsets = new Float64Array(offsets.length);
  for (let ch = 0; ch < c; ch++) {
    const dx = offsets[2 * ch];
    const dy = offsets[2 * ch + 1];
    for (let y = 0; y < h; y++) {
      const syRaw = y - dy;
      const sy = clamp(syRaw, 0, h - 1);
      const clampedY = syRaw !== sy;
      const y0 = Math.min(Math.floor(sy), h - 2 < 0 ? 0 : h - 2);
      const wy = h === 1 ? 0 : sy - y0;
      const y1 = Math.min(y0 + 1, h - 1);
      for (let xx = 0; xx < w; xx++) {
        const sxRaw = xx - dx;
        const sx = clamp(sxRaw, 0, w - 1);
        const clampedX = sxRaw !== sx;
        const x0 = Math.min(Math.floor(sx), w - 2 < 0 ? 0 : w - 2);
        const wx = w === 1 ? 0 : sx - x0;
        const x1 = Math.min(x0 + 1, w - 1);
        const g = gOut.data[(ch * h + y) * w + xx];
        if (g === 0) continue;
        const p00 = x.data[(ch * h + y0) * w + x0];
        const p01 = x.data[(ch * h + y0) * w + x1];
        const p10 = x.data[(ch * h + y1) * w + x0];
        const p11 = x.data[(ch * h + y1) * w + x1];
        gX.data[(ch * h + y0) * w + x0] += g * (1 - wy) * (1 - wx);
        gX.data[(ch * h + y0) * w + x1] += g * (1 - wy) * wx;
        gX.data[(ch * h + y1) * w + x0] += g * wy * (1 - wx);
        gX.data[(ch * h + y1) * w + x1] += g * wy * wx;
        // d out / d sx = (1-wy)(p01-p00) + wy(p11-p10); sx = xx - dx
        if (!clampedX) {
          gOffsets[2 * ch] -= g * ((1 - wy) * (p01 - p00) + wy * (p11 - p10));
        }
        if (!clampedY) {
          gOffsets[2 * ch + 1] -= g * ((1 - wx) * (p10 - p00) + wx * (p11 - p01));
        }
      }
    }
  }
  return { gX, gOffsets };
}

/** frozen-offset shift on the integer grid: matches the engine's
 * shift_channels semantics (replicate padding) exactly */
export function integerShift(x: Fmap, shifts: Int8Array): Fmap {
  const { c, h, w } = x;
  const out = fmap(c, h, w);
  for (let ch = 0; ch < c; ch++) {
    const dx = shifts[2 * ch];
    const dy = shifts[2 * ch + 1];
    for (let y = 0; y < h; y++) {
      const sy = clamp(y - dy, 0, h - 1);
      for (let xx = 0; xx < w; xx++) {
        const sx = clamp(xx - dx, 0, w - 1);
        out.data[(ch * h + y) * w + xx] = x.data[(ch * h + sy) * w + sx];
      }
    }
  }
  return out;
}

export function integerShiftBackward(gOut: Fmap, shifts: Int8Array): Fmap {
  const { c, h, w } = gOut;
  const gX = fmap(c, h, w);
  for (let ch = 0; ch < c; ch++) {
    const dx = shifts[2 * ch];
    const dy = shifts[2 * ch + 1];
    for (let y = 0; y < h; y++) {
      const sy = clamp(y - dy, 0, h - 1);
      for (let xx = 0; xx < w; xx++) {
        const sx = clamp(xx - dx, 0, w - 1);
        gX.data[(ch * h + sy) * w + sx] += gOut.data[(ch * h + y) * w + xx];
      }
    }
  }
  return gX;
}

export function pixelShuffle(x: Fmap, r: number): Float64Array {
  const { h, w } = x;
  const out = new Float64Array(h * r * w * r);
  for (let i = 0; i < r; i++) {
    for (let j = 0; j < r; j++) {
      const ch = i * r + j;
      for (let y = 0; y < h; y++) {
        for (let xx = 0; xx < w; xx++) {
          out[(y * r + i) * (w * r) + (xx * r + j)] = x.data[(ch * h + y) * w + xx];
        }
      }
    }
  }
  return out;
}

export function pixelShuffleBackward(g: Float64Array, c: number, h: number, w: number, r: number): Fmap {
  const gX = fmap(c, h, w);
  for (let i = 0; i < r; i++) {
    for (let j = 0; j < r; j++) {
      const ch = i * r + j;
      for (let y = 0; y < h; y++) {
        for (let xx = 0; xx < w; xx++) {
          gX.data[(ch * h + y) * w + xx] = g[(y * r + i) * (w * r) + (xx * r + j)];
        }
      }
    }
  }
  return gX;
}

export interface ForwardCache {
  msb: Fmap;
  lsb: Fmap;
  fused: Fmap;
  offsetCache: OffsetCache | null;
  shiftCache: ShiftCache | null;
  shifted: Fmap;
  xq1: Fmap;
  mask1: Uint8Array;
  xq2: Fmap;
  mask2: Uint8Array;
  afterDw: Fmap;
  xq3: Fmap;
  mask3: Uint8Array;
  headOut: Fmap;
  offsets: Float64Array;
}

/** stage-1/2 float forward; uses the offset net when the model still carries
 * one, otherwise the frozen integer shifts */
export function forwardTraining(
  model: TrainableModel,
  offsetNet: OffsetNet | null,
  lq: Plane,
): { sr: Float64Array; cache: ForwardCache } {
  const hiD = (1 << model.shape.indexBits) - 1;
  const { msb, lsb } = splitBits(lq, model.shape.msbBits);
  const a = model.convMsb.forward(msb);
  const b = model.convLsb.forward(lsb);
  const fused = addFmaps(a, b);

  let offsets: Float64Array;
  let offsetCache: OffsetCache | null = null;
  let shiftCache: ShiftCache | null = null;
  let shifted: Fmap;
  if (offsetNet) {
    const res = offsetNet.forward(fused);
    offsets = res.offsets;
    offsetCache = res.cache;
    const sh = bilinearShift(fused, offsets);
    shifted = sh.out;
    shiftCache = sh.cache;
  } else {
    if (!model.frozenShifts) throw new Error("stage-2 model has no frozen shifts");
    offsets = Float64Array.from(model.frozenShifts);
    shifted = integerShift(fused, model.frozenShifts);
  }

  const { out: xq1, mask: mask1 } = clampDomain(shifted, hiD);
  const pwOut = model.blockPw.forward(xq1);
  const afterPw = addFmaps(pwOut, xq1); // residual lookup
  const { out: xq2, mask: mask2 } = clampDomain(afterPw, hiD);
  const dwOut = model.blockDw.forward(xq2);
  const afterDw = addFmaps(dwOut, xq2);
  const { out: xq3, mask: mask3 } = clampDomain(afterDw, hiD);
  const headOut = model.head.forward(xq3);
  const sr = pixelShuffle(headOut, model.shape.scale);
  return {
    sr,
    cache: {
      msb, lsb, fused, offsetCache, shiftCache, shifted,
      xq1, mask1, xq2, mask2, afterDw, xq3, mask3, headOut, offsets,
    },
  };
}

export function backwardTraining(
  model: TrainableModel,
  offsetNet: OffsetNet | null,
  cache: ForwardCache,
  gSr: Float64Array,
): void {
  const r = model.shape.scale;
  const { xq3 } = cache;
  const gHead = pixelShuffleBackward(gSr, r * r, xq3.h, xq3.w, r);
  const gXq3 = model.head.backward(cache.xq3, gHead);
  const gAfterDw = maskedGrad(gXq3, cache.mask3);
  const gXq2FromDw = model.blockDw.backward(cache.xq2, gAfterDw);
  // residual: afterDw = dwOut + xq2
  const gXq2 = addFmaps(gXq2FromDw, gAfterDw);
  const gAfterPw = maskedGrad(gXq2, cache.mask2);
  const gXq1FromPw = model.blockPw.backward(cache.xq1, gAfterPw);
  const gXq1 = addFmaps(gXq1FromPw, gAfterPw);
  const gShifted = maskedGrad(gXq1, cache.mask1);

  let gFused: Fmap;
  if (offsetNet) {
    const { gX, gOffsets } = bilinearShiftBackward(cache.shiftCache!, gShifted);
    const gFromOffsets = offsetNet.backward(cache.offsetCache!, gOffsets);
    gFused = addFmaps(gX, gFromOffsets);
  } else {
    gFused = integerShiftBackward(gShifted, model.frozenShifts!);
  }
  model.convMsb.backward(cache.msb, gFused);
  model.convLsb.backward(cache.lsb, gFused);
}

// ---------------------------------------------------------------------------
// engine-aligned integer forward

function rotateOnce(src: Float64Array, h: number, w: number): Float64Array {
  // quarter turn, counter-clockwise in y-down coordinates: out[i][j] = src[h-1-j][i]
  const out = new Float64Array(h * w);
  for (let i = 0; i < w; i++) {
    for (let j = 0; j < h; j++) {
      out[i * h + j] = src[(h - 1 - j) * w + i];
    }
  }
  return out;
}

function rotateK(src: Float64Array, h: number, w: number, k: number): { data: Float64Array; h: number; w: number } {
  let data = src;
  let hh = h;
  let ww = w;
  for (let i = 0; i < k; i++) {
    data = rotateOnce(data, hh, ww);
    const t = hh;
    hh = ww;
    ww = t;
  }
  return { data, h: hh, w: ww };
}

function divRound(num: number, den: number): number {
  const mag = Math.floor((Math.abs(num) + (den >> 1)) / den);
  return num < 0 ? -mag : mag;
}

function quantKnot(v: number): number {
  return clamp(roundHalfAway(v), -128, 127);
}

function layerQuantized(layer: LutLayer, x: Fmap): Fmap {
  const { h, w } = x;
  const out = fmap(layer.cout, h, w);
  const terms = layer.terms();
  const d = layer.domain;
  const acc = new Float64Array(layer.cout * h * w);
  for (let p = 0; p < layer.positions; p++) {
    const dy = layer.positions === 9 ? Math.floor(p / 3) - 1 : 0;
    const dx = layer.positions === 9 ? (p % 3) - 1 : 0;
    for (let ci = 0; ci < layer.cin; ci++) {
      const cos = layer.role === "depthwise" ? [ci] : Array.from({ length: layer.cout }, (_, i) => i);
      for (let y = 0; y < h; y++) {
        const sy = clamp(y + dy, 0, h - 1);
        for (let xx = 0; xx < w; xx++) {
          const sx = clamp(xx + dx, 0, w - 1);
          const idx = x.data[(ci * h + sy) * w + sx];
          if (idx < 0 || idx >= d || !Number.isInteger(idx)) {
            throw new Error(`index ${idx} outside the ${d}-entry domain`);
          }
          for (const co of cos) {
            acc[(co * h + y) * w + xx] += quantKnot(layer.knots[layer.knotBase(p, ci, co) + idx]);
          }
        }
      }
    }
  }
  for (let i = 0; i < acc.length; i++) out.data[i] = divRound(acc[i], terms);
  return out;
}

function clampInt(x: Fmap, hi: number): Fmap {
  const out = fmap(x.c, x.h, x.w);
  for (let i = 0; i < x.data.length; i++) out.data[i] = clamp(x.data[i], 0, hi);
  return out;
}

function alignedSinglePass(model: TrainableModel, shifts: Int8Array, img: Plane): Float64Array {
  const hiD = (1 << model.shape.indexBits) - 1;
  const { msb, lsb } = splitBits(img, model.shape.msbBits);
  const fused = addFmaps(layerQuantized(model.convMsb, msb), layerQuantized(model.convLsb, lsb));
  const shifted = integerShift(fused, shifts);
  const xq1 = clampInt(shifted, hiD);
  const afterPw = addFmaps(layerQuantized(model.blockPw, xq1), xq1);
  const xq2 = clampInt(afterPw, hiD);
  const afterDw = addFmaps(layerQuantized(model.blockDw, xq2), xq2);
  const xq3 = clampInt(afterDw, hiD);
  const headOut = layerQuantized(model.head, xq3);
  return pixelShuffle(headOut, model.shape.scale);
}

/** full engine mirror: integer chain plus the 4-rotation ensemble, averaged
 * in exact integers with a single final rounding */
export function alignedForward(model: TrainableModel, shifts: Int8Array, img: Plane): Uint8Array {
  const r = model.shape.scale;
  const H = img.h * r;
  const W = img.w * r;
  const acc = new Float64Array(H * W);
  for (let k = 0; k < 4; k++) {
    const rot = rotateK(Float64Array.from(img.data), img.h, img.w, k);
    const plane: Plane = { h: rot.h, w: rot.w, data: Uint8Array.from(rot.data) };
    const out = alignedSinglePass(model, shifts, plane);
    const back = rotateK(out, rot.h * r, rot.w * r, (4 - k) % 4);
    for (let i = 0; i < acc.length; i++) acc[i] += back.data[i];
  }
  const out = new Uint8Array(H * W);
  for (let i = 0; i < acc.length; i++) out[i] = clamp(divRound(acc[i], 4), 0, 255);
  return out;
}
