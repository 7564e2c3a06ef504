/** Two-stage training.
 *
 * Stage 1 jointly trains the knot tables and the offset prediction network
 * (fractional shifts via bilinear resampling). Stage 2 freezes each channel's
 * shift to the rounded mean of its logged offsets, drops the offset network,
 * and optionally fine-tunes the tables with the shifts fixed.
 */

import { Param, TrainableModel } from "./model.js";
import { OffsetNet } from "./offsets.js";
import { Plane, backwardTraining, forwardTraining } from "./pipeline.js";
import { Rng, clamp, roundHalfAway } from "./rng.js";

export interface TrainConfig {
  iterations: number;
  batch: number;
  lr: number;
  beta1: number;
  beta2: number;
  patch: number;
  seed: number;
  channels: number;
  scale: number;
  stage2Iterations: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  iterations: 200,
  batch: 4,
  lr: 5e-3,
  beta1: 0.9,
  beta2: 0.999,
  patch: 48,
  seed: 1,
  channels: 4,
  scale: 2,
  stage2Iterations: 40,
};

export interface Sample {
  lq: Plane;
  hq: Float64Array; // (patch*scale)^2 target intensities
}

export type Dataset = (rng: Rng) => Sample;

class Adam {
  private m = new Map<string, Float64Array>();
  private v = new Map<string, Float64Array>();
  private t = 0;

  constructor(private beta1: number, private beta2: number, private eps = 1e-8) {}

  step(params: Param[], lr: number): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const p of params) {
      let m = this.m.get(p.name);
      let v = this.v.get(p.name);
      if (!m) {
        m = new Float64Array(p.value.length);
        v = new Float64Array(p.value.length);
        this.m.set(p.name, m);
        this.v.set(p.name, v!);
      }
      for (let i = 0; i < p.value.length; i++) {
        const g = p.grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v![i] = this.beta2 * v![i] + (1 - this.beta2) * g * g;
        p.value[i] -= (lr * (m[i] / c1)) / (Math.sqrt(v![i] / c2) + this.eps);
      }
    }
  }
}

function cosineLr(base: number, step: number, total: number): number {
  return base * 0.5 * (1 + Math.cos((Math.PI * step) / Math.max(total, 1)));
}

function modelParams(model: TrainableModel): Param[] {
  return model.layers().map((l, i) => ({
    name: `layer${i}.knots`,
    value: l.knots,
    grad: l.grad,
  }));
}

export interface Stage1Result {
  model: TrainableModel;
  offsetNet: OffsetNet;
  /** per step: [dx_0, dy_0, dx_1, dy_1, ...] averaged over the batch */
  offsetLog: Float64Array[];
  losses: number[];
}

export function trainStage1(
  config: TrainConfig,
  dataset: Dataset,
  model?: TrainableModel,
): Stage1Result {
  const rng = new Rng(config.seed);
  const net = model ?? new TrainableModel(
    {
      channels: config.channels,
      scale: config.scale,
      msbBits: 6,
      lsbBits: 2,
      indexBits: 6,
    },
    rng,
  );
  const offsetNet = new OffsetNet(config.channels, rng);
  const adam = new Adam(config.beta1, config.beta2);
  const params = [...modelParams(net), ...offsetNet.params()];
  const offsetLog: Float64Array[] = [];
  const losses: number[] = [];

  for (let step = 0; step < config.iterations; step++) {
    net.zeroGrad();
    offsetNet.zeroGrad();
    let loss = 0;
    const stepOffsets = new Float64Array(2 * config.channels);
    for (let b = 0; b < config.batch; b++) {
      const sample = dataset(rng);
      const { sr, cache } = forwardTraining(net, offsetNet, sample.lq);
      const n = sr.length;
      const gSr = new Float64Array(n);
      for (let i = 0; i < n; i++) {
        const diff = sr[i] - sample.hq[i];
        loss += (diff * diff) / n;
        gSr[i] = (2 * diff) / n / config.batch;
      }
      for (let i = 0; i < stepOffsets.length; i++) {
        stepOffsets[i] += cache.offsets[i] / config.batch;
      }
      backwardTraining(net, offsetNet, cache, gSr);
    }
    loss /= config.batch;
    if (!Number.isFinite(loss)) {
      throw new Error(`training diverged: loss is ${loss} at step ${step}`);
    }
    losses.push(loss);
    offsetLog.push(stepOffsets);
    if (config.lr > 0) {
      adam.step(params, cosineLr(config.lr, step, config.iterations));
      net.clampKnots();
    }
  }
  return { model: net, offsetNet, offsetLog, losses };
}

export interface VarianceRow {
  channel: number;
  varDx: number;
  varDy: number;
  flagged: boolean;
}

export function offsetVarianceReport(offsetLog: Float64Array[], threshold = 1e-3): VarianceRow[] {
  if (offsetLog.length === 0) throw new Error("empty offset log");
  const width = offsetLog[0].length;
  const channels = width / 2;
  const rows: VarianceRow[] = [];
  for (let c = 0; c < channels; c++) {
    const variances: number[] = [];
    for (const comp of [0, 1]) {
      let mean = 0;
      for (const rec of offsetLog) mean += rec[2 * c + comp];
      mean /= offsetLog.length;
      let v = 0;
      for (const rec of offsetLog) v += (rec[2 * c + comp] - mean) ** 2;
      variances.push(v / offsetLog.length);
    }
    rows.push({
      channel: c,
      varDx: variances[0],
      varDy: variances[1],
      flagged: variances[0] > threshold || variances[1] > threshold,
    });
  }
  return rows;
}

export function roundOffset(mean: number): number {
  return clamp(roundHalfAway(mean), -2, 2);
}

/** frozen integer shifts from the rounded per-channel mean of the log */
export function freezeOffsets(offsetLog: Float64Array[]): Int8Array {
  if (offsetLog.length === 0) throw new Error("empty offset log");
  const width = offsetLog[0].length;
  const out = new Int8Array(width);
  for (let k = 0; k < width; k++) {
    let mean = 0;
    for (const rec of offsetLog) mean += rec[k];
    out[k] = roundOffset(mean / offsetLog.length);
  }
  return out;
}

/** stage 2: fix the shifts, drop the offset network, fine-tune the tables */
export function trainStage2(
  config: TrainConfig,
  dataset: Dataset,
  stage1: Stage1Result,
): { model: TrainableModel; losses: number[] } {
  const model = stage1.model;
  model.frozenShifts = freezeOffsets(stage1.offsetLog);
  const rng = new Rng(config.seed + 1);
  const adam = new Adam(config.beta1, config.beta2);
  const params = modelParams(model);
  const losses: number[] = [];
  for (let step = 0; step < config.stage2Iterations; step++) {
    model.zeroGrad();
    let loss = 0;
    for (let b = 0; b < config.batch; b++) {
      const sample = dataset(rng);
      const { sr, cache } = forwardTraining(model, null, sample.lq);
      const n = sr.length;
      const gSr = new Float64Array(n);
      for (let i = 0; i < n; i++) {
        const diff = sr[i] - sample.hq[i];
        loss += (diff * diff) / n;
        gSr[i] = (2 * diff) / n / config.batch;
      }
      backwardTraining(model, null, cache, gSr);
    }
    loss /= config.batch;
    if (!Number.isFinite(loss)) {
      throw new Error(`stage-2 fine-tune diverged: loss is ${loss} at step ${step}`);
    }
    losses.push(loss);
    if (config.lr > 0) {
      adam.step(params, cosineLr(config.lr * 0.2, step, config.stage2Iterations));
      model.clampKnots();
    }
  }
  return { model, losses };
}
