/** CLI: run the two-stage pipeline and export a `.lutpack` the engine loads.
 *
 *   node dist/cli.js train --config train.cfg --out model.json
 *   node dist/cli.js export --model model.json --out model.lutpack
 *   node dist/cli.js report --model model.json
 */

import * as fs from "node:fs";

import { loadConfig } from "./config.js";
import { makeDataset } from "./data.js";
import { exportLutpack } from "./lutpack.js";
import { TrainableModel } from "./model.js";
import { DEFAULT_CONFIG, freezeOffsets, offsetVarianceReport, trainStage1, trainStage2 } from "./train.js";

function arg(argv: string[], name: string): string | undefined {
  const i = argv.indexOf(`--${name}`);
  return i >= 0 ? argv[i + 1] : undefined;
}

function main(argv: string[]): number {
  const cmd = argv[0];
  if (cmd === "train") {
    const cfgPath = arg(argv, "config");
    const out = arg(argv, "out") ?? "model.json";
    const config = cfgPath ? loadConfig(cfgPath) : { ...DEFAULT_CONFIG };
    const dataset = makeDataset(config.patch, config.scale);
    console.log(`stage 1: ${config.iterations} iterations, batch ${config.batch}, patch ${config.patch}`);
    const stage1 = trainStage1(config, dataset);
    console.log(`  loss ${stage1.losses[0].toFixed(3)} -> ${stage1.losses.at(-1)!.toFixed(3)}`);
    const rows = offsetVarianceReport(stage1.offsetLog);
    const worst = Math.max(...rows.map((r) => Math.max(r.varDx, r.varDy)));
    console.log(`  offset variance: worst ${worst.toExponential(2)}, flagged ${rows.filter((r) => r.flagged).length}/${rows.length}`);
    const stage2 = trainStage2(config, dataset, stage1);
    const shifts = stage2.model.frozenShifts!;
    console.log(`stage 2: shifts [${Array.from(shifts).join(", ")}], loss ${stage2.losses[0].toFixed(3)} -> ${stage2.losses.at(-1)!.toFixed(3)}`);
    const payload = { model: stage2.model.toJSON(), offsetLog: stage1.offsetLog.map((r) => Array.from(r)) };
    fs.writeFileSync(out, JSON.stringify(payload));
    console.log(`wrote ${out}`);
    return 0;
  }
  if (cmd === "export") {
    const modelPath = arg(argv, "model");
    const out = arg(argv, "out") ?? "model.lutpack";
    if (!modelPath) {
      console.error("export needs --model");
      return 1;
    }
    const payload = JSON.parse(fs.readFileSync(modelPath, "utf8"));
    const model = TrainableModel.fromJSON(payload.model);
    if (!model.frozenShifts) {
      console.error("model has no frozen shifts: run the two-stage training first");
      return 1;
    }
    fs.writeFileSync(out, exportLutpack(model, model.frozenShifts));
    console.log(`wrote ${out}`);
    return 0;
  }
  if (cmd === "report") {
    const modelPath = arg(argv, "model");
    if (!modelPath) {
      console.error("report needs --model");
      return 1;
    }
    const payload = JSON.parse(fs.readFileSync(modelPath, "utf8"));
    const log = payload.offsetLog.map((r: number[]) => Float64Array.from(r));
    for (const row of offsetVarianceReport(log)) {
      console.log(`channel ${row.channel}: var(dx)=${row.varDx.toExponential(3)} ` +
                  `var(dy)=${row.varDy.toExponential(3)}${row.flagged ? " FLAGGED" : ""}`);
    }
    const frozen = freezeOffsets(log);
    console.log(`frozen shifts: [${Array.from(frozen).join(", ")}]`);
    return 0;
  }
  console.error("usage: cli.js {train|export|report} [--config F] [--model F] [--out F]");
  return 1;
}

process.exit(main(process.argv.slice(2)));
