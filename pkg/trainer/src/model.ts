/** Trainable separable model.
 *
 * Every layer slot (kernel position, in-channel, out-channel) holds one
 * scalar mapping parameterized as a dense knot table over its integer index
 * domain, evaluated with linear interpolation. That keeps stage-1 training
 * differentiable and makes export exact: sampling the mapping at the integer
 * grid just reads the rounded knots.
 *
 * Layer sequence mirrors the engine: conv3x3 on the MSB plane, conv3x3 on
 * the LSB plane, fused by raw addition, one Shift-Block (channel shift,
 * pointwise with residual, 3x3 depthwise with residual), pointwise head,
 * pixel shuffle, and (at inference alignment only) the 4-rotation ensemble.
 */

import { Rng, clamp } from "./rng.js";

export interface Fmap {
  c: number;
  h: number;
  w: number;
  data: Float64Array;
}

export function fmap(c: number, h: number, w: number): Fmap {
  return { c, h, w, data: new Float64Array(c * h * w) };
}

export type Role = "conv3x3" | "depthwise" | "pointwise";

export interface Param {
  name: string;
  value: Float64Array;
  grad: Float64Array;
}

const KNOT_MIN = -127;
const KNOT_MAX = 127;

export class LutLayer {
  role: Role;
  positions: number;
  cin: number;
  cout: number;
  inBits: number;
  domain: number;
  residual: boolean;
  knots: Float64Array;
  grad: Float64Array;

  constructor(role: Role, cin: number, cout: number, inBits: number, residual: boolean) {
    this.role = role;
    this.positions = role === "pointwise" ? 1 : 9;
    this.cin = cin;
    this.cout = role === "depthwise" ? cin : cout;
    if (role === "depthwise" && cout !== cin) throw new Error("depthwise keeps channels");
    this.inBits = inBits;
    this.domain = 1 << inBits;
    this.residual = residual;
    const n = this.positions * this.cin * this.outWidth() * this.domain;
    this.knots = new Float64Array(n);
    this.grad = new Float64Array(n);
  }

  /** depthwise tables are channel-preserving: one mapping per (position, channel) */
  outWidth(): number {
    return this.role === "depthwise" ? 1 : this.cout;
  }

  knotBase(p: number, ci: number, co: number): number {
    const j = this.role === "depthwise" ? 0 : co;
    return ((p * this.cin + ci) * this.outWidth() + j) * this.domain;
  }

  tableCount(): number {
    return this.positions * this.cin * this.outWidth();
  }

  /** number of summed mappings behind each output scalar */
  terms(): number {
    return this.role === "depthwise" ? this.positions : this.positions * this.cin;
  }

  initRamp(rng: Rng, top: number): void {
    // near-linear ramp with small noise: a sane starting mapping
    const d = this.domain;
    for (let t = 0; t < this.tableCount(); t++) {
      const slope = top / (d - 1 || 1);
      for (let k = 0; k < d; k++) {
        this.knots[t * d + k] = clamp(slope * k + rng.normal(0, 0.5), KNOT_MIN, KNOT_MAX);
      }
    }
  }

  clampKnots(): void {
    for (let i = 0; i < this.knots.length; i++) {
      this.knots[i] = clamp(this.knots[i], KNOT_MIN, KNOT_MAX);
    }
  }

  /** mean over positions/in-channels of interpolated knot reads; input values
   * must already lie inside [0, domain-1] */
  forward(x: Fmap): Fmap {
    const { h, w } = x;
    const out = fmap(this.cout, h, w);
    const inv = 1 / this.terms();
    const d = this.domain;
    for (let p = 0; p < this.positions; p++) {
      const dy = this.positions === 9 ? Math.floor(p / 3) - 1 : 0;
      const dx = this.positions === 9 ? (p % 3) - 1 : 0;
      for (let ci = 0; ci < this.cin; ci++) {
        const cos = this.role === "depthwise" ? [ci] : Array.from({ length: this.cout }, (_, i) => i);
        for (let y = 0; y < h; y++) {
          const sy = clamp(y + dy, 0, h - 1);
          for (let xx = 0; xx < w; xx++) {
            const sx = clamp(xx + dx, 0, w - 1);
            const v = x.data[(ci * h + sy) * w + sx];
            const k0 = Math.min(Math.floor(v), d - 2);
            const wt = v - k0;
            for (const co of cos) {
              const base = this.knotBase(p, ci, co);
              const val = (1 - wt) * this.knots[base + k0] + wt * this.knots[base + k0 + 1];
              out.data[(co * h + y) * w + xx] += val * inv;
            }
          }
        }
      }
    }
    return out;
  }

  /** accumulate knot gradients, return gradient wrt the layer input */
  backward(x: Fmap, gOut: Fmap): Fmap {
    const { h, w } = x;
    const gIn = fmap(this.cin, h, w);
    const inv = 1 / this.terms();
    const d = this.domain;
    for (let p = 0; p < this.positions; p++) {
      const dy = this.positions === 9 ? Math.floor(p / 3) - 1 : 0;
      const dx = this.positions === 9 ? (p % 3) - 1 : 0;
      for (let ci = 0; ci < this.cin; ci++) {
        const cos = this.role === "depthwise" ? [ci] : Array.from({ length: this.cout }, (_, i) => i);
        for (let y = 0; y < h; y++) {
          const sy = clamp(y + dy, 0, h - 1);
          for (let xx = 0; xx < w; xx++) {
            const sx = clamp(xx + dx, 0, w - 1);
            const v = x.data[(ci * h + sy) * w + sx];
            const k0 = Math.min(Math.floor(v), d - 2);
            const wt = v - k0;
            let gx = 0;
            for (const co of cos) {
              const base = this.knotBase(p, ci, co);
              const g = gOut.data[(co * h + y) * w + xx] * inv;
              this.grad[base + k0] += g * (1 - wt);
              this.grad[base + k0 + 1] += g * wt;
              gx += g * (this.knots[base + k0 + 1] - this.knots[base + k0]);
            }
            gIn.data[(ci * h + sy) * w + sx] += gx;
          }
        }
      }
    }
    return gIn;
  }
}

export interface ModelShape {
  channels: number;
  scale: number;
  msbBits: number;
  lsbBits: number;
  indexBits: number;
}

export const DEFAULT_SHAPE: ModelShape = {
  channels: 4,
  scale: 2,
  msbBits: 6,
  lsbBits: 2,
  indexBits: 6,
};

export class TrainableModel {
  shape: ModelShape;
  convMsb: LutLayer;
  convLsb: LutLayer;
  blockPw: LutLayer;
  blockDw: LutLayer;
  head: LutLayer;
  /** stage-2 frozen integer shifts, (dx, dy) per channel; null during stage 1 */
  frozenShifts: Int8Array | null = null;

  constructor(shape: ModelShape, rng: Rng) {
    this.shape = shape;
    const c = shape.channels;
    this.convMsb = new LutLayer("conv3x3", 1, c, shape.msbBits, false);
    this.convLsb = new LutLayer("conv3x3", 1, c, shape.lsbBits, false);
    this.blockPw = new LutLayer("pointwise", c, c, shape.indexBits, true);
    this.blockDw = new LutLayer("depthwise", c, c, shape.indexBits, true);
    this.head = new LutLayer("pointwise", c, shape.scale * shape.scale, shape.indexBits, false);
    this.convMsb.initRamp(rng, 40);
    this.convLsb.initRamp(rng, 3);
    this.blockPw.initRamp(rng, 40);
    this.blockDw.initRamp(rng, 40);
    this.head.initRamp(rng, 80);
  }

  layers(): LutLayer[] {
    return [this.convMsb, this.convLsb, this.blockPw, this.blockDw, this.head];
  }

  zeroGrad(): void {
    for (const l of this.layers()) l.grad.fill(0);
  }

  clampKnots(): void {
    for (const l of this.layers()) l.clampKnots();
  }

  toJSON(): object {
    return {
      shape: this.shape,
      frozenShifts: this.frozenShifts ? Array.from(this.frozenShifts) : null,
      layers: this.layers().map((l) => ({ role: l.role, knots: Array.from(l.knots) })),
    };
  }

  static fromJSON(obj: any): TrainableModel {
    const m = new TrainableModel(obj.shape, new Rng(0));
    const layers = m.layers();
    for (let i = 0; i < layers.length; i++) {
      layers[i].knots.set(obj.layers[i].knots);
    }
    m.frozenShifts = obj.frozenShifts ? Int8Array.from(obj.frozenShifts) : null;
    return m;
  }
}
