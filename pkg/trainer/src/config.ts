/** Flat key=value config files ('#' comments, blank lines ignored). */

import * as fs from "node:fs";

import { DEFAULT_CONFIG, TrainConfig } from "./train.js";

const KEYS: Record<string, keyof TrainConfig> = {
  iterations: "iterations",
  batch: "batch",
  lr: "lr",
  beta1: "beta1",
  beta2: "beta2",
  patch: "patch",
  seed: "seed",
  channels: "channels",
  scale: "scale",
  stage2_iterations: "stage2Iterations",
};

export function parseConfig(text: string): TrainConfig {
  const cfg: TrainConfig = { ...DEFAULT_CONFIG };
  for (const rawLine of text.split("\n")) {
    const line = rawLine.split("#")[0].trim();
    if (!line) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`bad config line (need key=value): ${rawLine.trim()}`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    const field = KEYS[key];
    if (!field) throw new Error(`unknown config key: ${key}`);
    const num = Number(value);
    if (!Number.isFinite(num)) throw new Error(`non-numeric value for ${key}: ${value}`);
    (cfg as any)[field] = num;
  }
  return cfg;
}

export function loadConfig(path: string): TrainConfig {
  return parseConfig(fs.readFileSync(path, "utf8"));
}
