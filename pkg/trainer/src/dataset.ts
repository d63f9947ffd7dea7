/**
 * Synthetic noisy/clean training pairs.
 *
 * Clean images cycle through the phantom families; noise is additive Gaussian
 * with a per-pair standard deviation drawn from the spec's sigma range.  The
 * reconstruction pipeline injects Poisson noise in sinogram space, but the
 * denoiser acts in image space where residual noise is approximately
 * Gaussian, so Gaussian pairs are the right training surrogate.  Everything
 * is deterministic per seed.
 */
import { Rng } from "./rng.js";
import { PhantomKind, makePhantom } from "./phantoms.js";
import { TrainSpec } from "./spec.js";

export interface Pair {
  clean: Float64Array;
  noisy: Float64Array;
  sigma: number;
}

export interface Dataset {
  train: Pair[];
  val: Pair[];
  imageSize: number;
}

const KINDS: PhantomKind[] = ["disks", "shepp_logan", "bars"];

export function makePair(size: number, kind: PhantomKind, sigma: number, rng: Rng): Pair {
  const clean = makePhantom(kind, size, rng);
  const noisy = new Float64Array(clean.length);
  for (let i = 0; i < clean.length; i++) noisy[i] = clean[i] + sigma * rng.gauss();
  return { clean, noisy, sigma };
}

export function generatePairs(spec: TrainSpec): Dataset {
  const rng = new Rng(spec.seed);
  const draw = (index: number): Pair =>
    makePair(
      spec.imageSize,
      KINDS[index % KINDS.length],
      rng.uniform(spec.sigmaMin, spec.sigmaMax),
      rng
    );
  const train: Pair[] = [];
  for (let i = 0; i < spec.pairs; i++) train.push(draw(i));
  const val: Pair[] = [];
  for (let i = 0; i < spec.valPairs; i++) val.push(draw(spec.pairs + i));
  return { train, val, imageSize: spec.imageSize };
}

/** Mean squared error of the identity denoiser (noisy vs clean). */
export function identityMse(pairs: Pair[]): number {
  let acc = 0;
  let count = 0;
  for (const pair of pairs) {
    for (let i = 0; i < pair.clean.length; i++) {
      const d = pair.noisy[i] - pair.clean[i];
      acc += d * d;
    }
    count += pair.clean.length;
  }
  return acc / count;
}
