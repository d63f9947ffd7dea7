/**
 * Training spec files use the same line grammar as the reconstruction
 * package's configs: one `section.key = value` per line, `#` comments, no
 * nesting, unknown keys rejected with the line number.
 *
 * Keys (defaults in parentheses):
 *   data.image_size (16)     data.pairs (48)       data.val_pairs (12)
 *   data.sigma_min (0.05)    data.sigma_max (0.15)
 *   train.epochs (30)        train.learning_rate (1e-3)
 *   train.batch (8)          train.seed (0)
 *   output.path (weights.dnwt)
 */

export interface TrainSpec {
  imageSize: number;
  pairs: number;
  valPairs: number;
  sigmaMin: number;
  sigmaMax: number;
  epochs: number;
  learningRate: number;
  batch: number;
  seed: number;
  outputPath: string;
}

const DEFAULTS: TrainSpec = {
  imageSize: 16,
  pairs: 48,
  valPairs: 12,
  sigmaMin: 0.05,
  sigmaMax: 0.15,
  epochs: 30,
  learningRate: 1e-3,
  batch: 8,
  seed: 0,
  outputPath: "weights.dnwt",
};

const KEYS: Record<string, { field: keyof TrainSpec; kind: "int" | "float" | "string" }> = {
  "data.image_size": { field: "imageSize", kind: "int" },
  "data.pairs": { field: "pairs", kind: "int" },
  "data.val_pairs": { field: "valPairs", kind: "int" },
  "data.sigma_min": { field: "sigmaMin", kind: "float" },
  "data.sigma_max": { field: "sigmaMax", kind: "float" },
  "train.epochs": { field: "epochs", kind: "int" },
  "train.learning_rate": { field: "learningRate", kind: "float" },
  "train.batch": { field: "batch", kind: "int" },
  "train.seed": { field: "seed", kind: "int" },
  "output.path": { field: "outputPath", kind: "string" },
};

export function parseSpecText(text: string): TrainSpec {
  const spec: TrainSpec = { ...DEFAULTS };
  const lines = text.split(/\r?\n/);
  for (let n = 0; n < lines.length; n++) {
    const line = lines[n].trim();
    if (line === "" || line.startsWith("#")) continue;
    const eq = line.indexOf("=");
    if (eq < 0) throw new Error(`line ${n + 1}: expected 'section.key = value'`);
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    const entry = KEYS[key];
    if (!entry) throw new Error(`line ${n + 1}: unknown key '${key}'`);
    if (entry.kind === "string") {
      (spec[entry.field] as string) = value;
    } else {
      const parsed = entry.kind === "int" ? parseInt(value, 10) : parseFloat(value);
      if (!Number.isFinite(parsed)) throw new Error(`line ${n + 1}: bad value for '${key}'`);
      (spec[entry.field] as number) = parsed;
    }
  }
  validateSpec(spec);
  return spec;
}

export function validateSpec(spec: TrainSpec): void {
  if (spec.imageSize < 8) throw new Error("data.image_size must be at least 8");
  if (spec.pairs < 1) throw new Error("data.pairs must be at least 1");
  if (spec.valPairs < 1) throw new Error("data.val_pairs must be at least 1");
  if (!(spec.sigmaMin > 0) || !(spec.sigmaMax >= spec.sigmaMin)) {
    throw new Error("noise sigma range must be positive with sigma_max >= sigma_min");
  }
  if (spec.epochs < 0) throw new Error("train.epochs must be nonnegative");
  if (!(spec.learningRate > 0)) throw new Error("train.learning_rate must be positive");
  if (spec.batch < 1) throw new Error("train.batch must be at least 1");
}
