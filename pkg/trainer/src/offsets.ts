/** Offset prediction network: a small conv + MLP head mapping a feature map
 * to one (dx, dy) pair per channel, squashed to [-2, 2] by tanh so stage-2
 * rounding always lands inside the engine's shift clamp. A bigger network
 * buys nothing here, so this stays tiny. */

import { Fmap, fmap, Param } from "./model.js";
import { Rng, clamp } from "./rng.js";

export interface OffsetCache {
  x: Fmap;
  convOut: Fmap; // post-ReLU
  pooled: Float64Array;
  h1: Float64Array; // post-ReLU
  z: Float64Array; // pre-tanh
}

export class OffsetNet {
  channels: number;
  features: number;
  hidden: number;
  wc: Float64Array; // (F, C, 3, 3)
  bc: Float64Array;
  w1: Float64Array; // (H, F)
  b1: Float64Array;
  w2: Float64Array; // (2C, H)
  b2: Float64Array;
  gWc: Float64Array;
  gBc: Float64Array;
  gW1: Float64Array;
  gB1: Float64Array;
  gW2: Float64Array;
  gB2: Float64Array;

  constructor(channels: number, rng: Rng, features = 8, hidden = 16) {
    this.channels = channels;
    this.features = features;
    this.hidden = hidden;
    const init = (n: number, scale: number) => {
      const a = new Float64Array(n);
      for (let i = 0; i < n; i++) a[i] = rng.normal(0, scale);
      return a;
    };
    this.wc = init(features * channels * 9, 1 / Math.sqrt(channels * 9));
    this.bc = new Float64Array(features);
    this.w1 = init(hidden * features, 1 / Math.sqrt(features));
    this.b1 = new Float64Array(hidden);
    this.w2 = init(2 * channels * hidden, 0.01); // start near zero offsets
    this.b2 = new Float64Array(2 * channels);
    this.gWc = new Float64Array(this.wc.length);
    this.gBc = new Float64Array(this.bc.length);
    this.gW1 = new Float64Array(this.w1.length);
    this.gB1 = new Float64Array(this.b1.length);
    this.gW2 = new Float64Array(this.w2.length);
    this.gB2 = new Float64Array(this.b2.length);
  }

  params(): Param[] {
    return [
      { name: "offset.wc", value: this.wc, grad: this.gWc },
      { name: "offset.bc", value: this.bc, grad: this.gBc },
      { name: "offset.w1", value: this.w1, grad: this.gW1 },
      { name: "offset.b1", value: this.b1, grad: this.gB1 },
      { name: "offset.w2", value: this.w2, grad: this.gW2 },
      { name: "offset.b2", value: this.b2, grad: this.gB2 },
    ];
  }

  zeroGrad(): void {
    for (const p of this.params()) p.grad.fill(0);
  }

  /** offsets laid out [dx_0, dy_0, dx_1, dy_1, ...] */
  forward(x: Fmap): { offsets: Float64Array; cache: OffsetCache } {
    const { c, h, w } = x;
    const F = this.features;
    const convOut = fmap(F, h, w);
    for (let f = 0; f < F; f++) {
      for (let y = 0; y < h; y++) {
        for (let xx = 0; xx < w; xx++) {
          let acc = this.bc[f];
          for (let ci = 0; ci < c; ci++) {
            for (let p = 0; p < 9; p++) {
              const sy = clamp(y + Math.floor(p / 3) - 1, 0, h - 1);
              const sx = clamp(xx + (p % 3) - 1, 0, w - 1);
              acc += this.wc[(f * c + ci) * 9 + p] * x.data[(ci * h + sy) * w + sx];
            }
          }
          convOut.data[(f * h + y) * w + xx] = Math.max(acc, 0);
        }
      }
    }
    const pooled = new Float64Array(F);
    const npx = h * w;
    for (let f = 0; f < F; f++) {
      let s = 0;
      for (let i = 0; i < npx; i++) s += convOut.data[f * npx + i];
      pooled[f] = s / npx;
    }
    const h1 = new Float64Array(this.hidden);
    for (let j = 0; j < this.hidden; j++) {
      let s = this.b1[j];
      for (let f = 0; f < F; f++) s += this.w1[j * F + f] * pooled[f];
      h1[j] = Math.max(s, 0);
    }
    const z = new Float64Array(2 * this.channels);
    const offsets = new Float64Array(2 * this.channels);
    for (let k = 0; k < 2 * this.channels; k++) {
      let s = this.b2[k];
      for (let j = 0; j < this.hidden; j++) s += this.w2[k * this.hidden + j] * h1[j];
      z[k] = s;
      offsets[k] = 2 * Math.tanh(s);
    }
    return { offsets, cache: { x, convOut, pooled, h1, z } };
  }

  backward(cache: OffsetCache, gOffsets: Float64Array): Fmap {
    const { x, convOut, pooled, h1, z } = cache;
    const { c, h, w } = x;
    const F = this.features;
    const npx = h * w;
    const gZ = new Float64Array(2 * this.channels);
    for (let k = 0; k < 2 * this.channels; k++) {
      const t = Math.tanh(z[k]);
      gZ[k] = gOffsets[k] * 2 * (1 - t * t);
    }
    const gH1 = new Float64Array(this.hidden);
    for (let k = 0; k < 2 * this.channels; k++) {
      this.gB2[k] += gZ[k];
      for (let j = 0; j < this.hidden; j++) {
        this.gW2[k * this.hidden + j] += gZ[k] * h1[j];
        gH1[j] += gZ[k] * this.w2[k * this.hidden + j];
      }
    }
    const gPooled = new Float64Array(F);
    for (let j = 0; j < this.hidden; j++) {
      if (h1[j] <= 0) continue;
      this.gB1[j] += gH1[j];
      for (let f = 0; f < F; f++) {
        this.gW1[j * F + f] += gH1[j] * pooled[f];
        gPooled[f] += gH1[j] * this.w1[j * F + f];
      }
    }
    const gX = fmap(c, h, w);
    for (let f = 0; f < F; f++) {
      const gAct = gPooled[f] / npx;
      if (gAct === 0) continue;
      for (let y = 0; y < h; y++) {
        for (let xx = 0; xx < w; xx++) {
          if (convOut.data[(f * h + y) * w + xx] <= 0) continue;
          this.gBc[f] += gAct;
          for (let ci = 0; ci < c; ci++) {
            for (let p = 0; p < 9; p++) {
              const sy = clamp(y + Math.floor(p / 3) - 1, 0, h - 1);
              const sx = clamp(xx + (p % 3) - 1, 0, w - 1);
              this.gWc[(f * c + ci) * 9 + p] += gAct * x.data[(ci * h + sy) * w + sx];
              gX.data[(ci * h + sy) * w + sx] += gAct * this.wc[(f * c + ci) * 9 + p];
            }
          }
        }
      }
    }
    return gX;
  }
}
