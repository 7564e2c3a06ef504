/** Synthetic LQ/HQ pair generation: band-limited random fields with an edge,
 * HQ intensities kept under the int8 table ceiling so the model can fit them.
 * LQ is the block mean of HQ (integer-rounded into [0, 255]). */

import { Plane } from "./pipeline.js";
import { Rng, clamp, roundHalfAway } from "./rng.js";
import { Sample } from "./train.js";

export function syntheticScene(rng: Rng, size: number): Float64Array {
  const img = new Float64Array(size * size);
  const waves = 4;
  const params: number[][] = [];
  for (let i = 0; i < waves; i++) {
    params.push([rng.uniform(0.02, 0.18), rng.uniform(0.02, 0.18),
                 rng.uniform(0, 2 * Math.PI), rng.uniform(5, 16)]);
  }
  const edge = rng.uniform(0.3, 0.7) * 2 * size;
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      let v = 60;
      for (const [fx, fy, ph, amp] of params) {
        v += amp * Math.sin(2 * Math.PI * (fx * x + fy * y) + ph);
      }
      if (x + y > edge) v += 15;
      img[y * size + x] = clamp(v, 5, 115);
    }
  }
  return img;
}

export function makeDataset(patch: number, scale: number) {
  return (rng: Rng): Sample => {
    const hqSize = patch * scale;
    const hq = syntheticScene(rng, hqSize);
    const lq = new Uint8Array(patch * patch);
    for (let y = 0; y < patch; y++) {
      for (let x = 0; x < patch; x++) {
        let s = 0;
        for (let i = 0; i < scale; i++) {
          for (let j = 0; j < scale; j++) {
            s += hq[(y * scale + i) * hqSize + (x * scale + j)];
          }
        }
        lq[y * patch + x] = clamp(roundHalfAway(s / (scale * scale)), 0, 255);
      }
    }
    const plane: Plane = { h: patch, w: patch, data: lq };
    return { lq: plane, hq };
  };
}
