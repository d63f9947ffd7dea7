/**
 * Training loop: minimize the MSE between the network's noise estimate and
 * the actual injected noise (equivalently, between the denoised output and
 * the clean image), with Adam on shuffled mini-batches.
 */
import * as fs from "node:fs";
import * as path from "node:path";

import { Adam, Model, LayerGrads } from "./model.js";
import { Dataset, Pair, generatePairs, identityMse } from "./dataset.js";
import { TrainSpec } from "./spec.js";
import { serializeWeights } from "./dnwt.js";
import { Rng } from "./rng.js";

export class TrainingFailure extends Error {
  constructor(public epoch: number, message: string) {
    super(message);
  }
}

export interface Manifest {
  epochs: number;
  pairs: number;
  valPairs: number;
  imageSize: number;
  sigmaMin: number;
  sigmaMax: number;
  seed: number;
  identityValMse: number;
  trainMseFirst: number;
  trainMseFinal: number;
  valMseFirst: number;
  valMseFinal: number;
  valMseHistory: number[];
}

export interface TrainResult {
  model: Model;
  manifest: Manifest;
}

/** Denoiser MSE over a pair list (identical to the training objective). */
export function denoiserMse(model: Model, pairs: Pair[], size: number): number {
  let acc = 0;
  let count = 0;
  for (const pair of pairs) {
    const out = model.denoise(pair.noisy, size, size);
    for (let i = 0; i < out.length; i++) {
      const d = out[i] - pair.clean[i];
      acc += d * d;
    }
    count += pair.clean.length;
  }
  return acc / count;
}

function addGrads(total: LayerGrads[], part: LayerGrads[]): void {
  for (let li = 0; li < total.length; li++) {
    const tk = total[li].kernel;
    const pk = part[li].kernel;
    for (let i = 0; i < tk.length; i++) tk[i] += pk[i];
    const tb = total[li].bias;
    const pb = part[li].bias;
    for (let i = 0; i < tb.length; i++) tb[i] += pb[i];
  }
}

export function train(spec: TrainSpec, dataset?: Dataset): TrainResult {
  const data = dataset ?? generatePairs(spec);
  const size = data.imageSize;
  const model = new Model(spec.seed);
  const optimizer = new Adam(model, spec.learningRate);
  const order = data.train.map((_, i) => i);
  const shuffleRng = new Rng(spec.seed ^ 0x7a1e5);

  const valHistory: number[] = [denoiserMse(model, data.val, size)];
  let trainMseFirst = denoiserMse(model, data.train, size);
  let trainMseFinal = trainMseFirst;

  for (let epoch = 1; epoch <= spec.epochs; epoch++) {
    shuffleRng.shuffle(order);
    let epochLoss = 0;
    let seen = 0;
    for (let start = 0; start < order.length; start += spec.batch) {
      const batch = order.slice(start, start + spec.batch);
      let total: LayerGrads[] | null = null;
      for (const index of batch) {
        const pair = data.train[index];
        const { output, caches } = model.forward(pair.noisy, size, size);
        // target: the injected noise
        const gradOut = new Float64Array(output.length);
        let loss = 0;
        for (let i = 0; i < output.length; i++) {
          const residual = output[i] - (pair.noisy[i] - pair.clean[i]);
          loss += residual * residual;
          gradOut[i] = (2.0 * residual) / (output.length * batch.length);
        }
        epochLoss += loss / output.length;
        seen += 1;
        const grads = model.backward(gradOut, caches, size, size);
        if (total === null) total = grads;
        else addGrads(total, grads);
      }
      if (total !== null) optimizer.step(total);
    }
    const epochMse = epochLoss / Math.max(seen, 1);
    if (!Number.isFinite(epochMse)) {
      throw new TrainingFailure(epoch, `non-finite training loss at epoch ${epoch}`);
    }
    trainMseFinal = epochMse;
    valHistory.push(denoiserMse(model, data.val, size));
  }

  const manifest: Manifest = {
    epochs: spec.epochs,
    pairs: spec.pairs,
    valPairs: spec.valPairs,
    imageSize: size,
    sigmaMin: spec.sigmaMin,
    sigmaMax: spec.sigmaMax,
    seed: spec.seed,
    identityValMse: identityMse(data.val),
    trainMseFirst,
    trainMseFinal,
    valMseFirst: valHistory[0],
    valMseFinal: valHistory[valHistory.length - 1],
    valMseHistory: valHistory,
  };
  return { model, manifest };
}

export function exportWeights(result: TrainResult, outPath: string): void {
  fs.mkdirSync(path.dirname(path.resolve(outPath)), { recursive: true });
  fs.writeFileSync(outPath, serializeWeights(result.model.toWire()));
  const manifestPath = outPath.replace(/(\.dnwt)?$/, ".manifest.json");
  fs.writeFileSync(manifestPath, JSON.stringify(result.manifest, null, 2) + "\n");
}
