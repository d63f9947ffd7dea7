/**
 * CLI entry point:
 *
 *   node dist/main.js train --spec training.cfg --out weights.dnwt
 *
 * `--out` overrides the spec's output.path.  Exit codes: 0 success, 1 bad
 * arguments or spec, 2 I/O failure, 3 training failure.
 */
import * as fs from "node:fs";
import { parseArgs } from "node:util";

import { parseSpecText } from "./spec.js";
import { TrainingFailure, exportWeights, train } from "./train.js";

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command !== "train") {
    console.error("usage: train --spec <file> [--out <weights.dnwt>]");
    return 1;
  }
  let parsed;
  try {
    parsed = parseArgs({
      args: rest,
      options: {
        spec: { type: "string" },
        out: { type: "string" },
      },
    });
  } catch (err) {
    console.error(`bad arguments: ${(err as Error).message}`);
    return 1;
  }
  const specPath = parsed.values.spec;
  if (!specPath) {
    console.error("missing required --spec <file>");
    return 1;
  }
  let text: string;
  try {
    text = fs.readFileSync(specPath, "utf-8");
  } catch (err) {
    console.error(`cannot read spec: ${(err as Error).message}`);
    return 2;
  }
  let spec;
  try {
    spec = parseSpecText(text);
  } catch (err) {
    console.error(`spec error: ${(err as Error).message}`);
    return 1;
  }
  const outPath = parsed.values.out ?? spec.outputPath;
  try {
    const result = train(spec);
    exportWeights(result, outPath);
    const m = result.manifest;
    const gain = 1.0 - m.valMseFinal / m.identityValMse;
    console.log(
      `trained ${m.epochs} epochs on ${m.pairs} pairs (${m.imageSize}x${m.imageSize}); ` +
        `val MSE ${m.valMseFinal.toExponential(3)} vs identity ${m.identityValMse.toExponential(3)} ` +
        `(${(100 * gain).toFixed(1)}% reduction)`
    );
    console.log(`wrote ${outPath} and its manifest`);
    return 0;
  } catch (err) {
    if (err instanceof TrainingFailure) {
      console.error(`training failed: ${err.message}`);
      return 3;
    }
    console.error(`I/O failure: ${(err as Error).message}`);
    return 2;
  }
}

const isDirectRun =
  process.argv[1] !== undefined && import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
