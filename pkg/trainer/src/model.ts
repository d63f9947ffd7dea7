/**
 * Residual denoising CNN with hand-rolled forward/backward passes.
 *
 * Fixed architecture, mirroring the reconstruction package: five 3x3 conv
 * layers, 1 -> 16 -> 16 -> 16 -> 16 -> 1 channels, relu between, linear last
 * layer.  The network predicts the noise; the denoised image is
 * input - net(input).  Convolutions use whole-sample reflect padding, and the
 * backward pass folds pad gradients back onto their mirror sources, so the
 * gradient is exact for the padded convolution.
 *
 * Training math runs in float64; export quantizes to float32 (the wire
 * format).  The last layer starts at zero so the untrained network is exactly
 * the identity denoiser.
 */
import { Rng } from "./rng.js";
import { ConvLayer } from "./dnwt.js";

export const CHANNELS = 16;
export const LAYERS = 5;
const K = 3; // kernel side, fixed

export interface LayerParams {
  kernel: Float64Array; // outCh*inCh*9, out-major
  bias: Float64Array;
  outCh: number;
  inCh: number;
}

export interface LayerGrads {
  kernel: Float64Array;
  bias: Float64Array;
}

interface LayerCache {
  padded: Float64Array[]; // per input channel, (h+2)*(w+2)
  preAct: Float64Array[]; // per output channel, pre-activation
  relu: boolean;
}

function reflectIndex(i: number, n: number): number {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

export function reflectPad(src: Float64Array, h: number, w: number): Float64Array {
  const ph = h + 2;
  const pw = w + 2;
  const out = new Float64Array(ph * pw);
  for (let i = 0; i < ph; i++) {
    const si = reflectIndex(i - 1, h);
    for (let j = 0; j < pw; j++) {
      out[i * pw + j] = src[si * w + reflectIndex(j - 1, w)];
    }
  }
  return out;
}

function foldReflect(padGrad: Float64Array, h: number, w: number): Float64Array {
  const pw = w + 2;
  const out = new Float64Array(h * w);
  for (let i = 0; i < h + 2; i++) {
    const si = reflectIndex(i - 1, h);
    for (let j = 0; j < w + 2; j++) {
      out[si * w + reflectIndex(j - 1, w)] += padGrad[i * pw + j];
    }
  }
  return out;
}

export class Model {
  layers: LayerParams[];

  constructor(seed: number) {
    const rng = new Rng(seed ^ 0x5eed);
    const dims: Array<[number, number]> = [
      [CHANNELS, 1],
      [CHANNELS, CHANNELS],
      [CHANNELS, CHANNELS],
      [CHANNELS, CHANNELS],
      [1, CHANNELS],
    ];
    this.layers = dims.map(([outCh, inCh], index) => {
      const kernel = new Float64Array(outCh * inCh * K * K);
      if (index < LAYERS - 1) {
        const std = Math.sqrt(2.0 / (inCh * K * K));
        for (let i = 0; i < kernel.length; i++) kernel[i] = std * rng.gauss();
      }
      // last layer stays zero: the fresh network is the identity denoiser
      return { kernel, bias: new Float64Array(outCh), outCh, inCh };
    });
  }

  /** net(x); caches for the backward pass are returned alongside. */
  forward(x: Float64Array, h: number, w: number): { output: Float64Array; caches: LayerCache[] } {
    let act: Float64Array[] = [x];
    const caches: LayerCache[] = [];
    for (let li = 0; li < this.layers.length; li++) {
      const layer = this.layers[li];
      const relu = li < this.layers.length - 1;
      const padded = act.map((c) => reflectPad(c, h, w));
      const preAct: Float64Array[] = [];
      const next: Float64Array[] = [];
      const pw = w + 2;
      for (let o = 0; o < layer.outCh; o++) {
        const out = new Float64Array(h * w).fill(layer.bias[o]);
        for (let c = 0; c < layer.inCh; c++) {
          const pad = padded[c];
          const kBase = (o * layer.inCh + c) * K * K;
          for (let ki = 0; ki < K; ki++) {
            for (let kj = 0; kj < K; kj++) {
              const kv = layer.kernel[kBase + ki * K + kj];
              if (kv === 0) continue;
              for (let i = 0; i < h; i++) {
                let src = (i + ki) * pw + kj;
                let dst = i * w;
                for (let j = 0; j < w; j++) out[dst + j] += kv * pad[src + j];
              }
            }
          }
        }
        preAct.push(out);
        if (relu) {
          const activated = new Float64Array(h * w);
          for (let i = 0; i < out.length; i++) activated[i] = out[i] > 0 ? out[i] : 0;
          next.push(activated);
        } else {
          next.push(out);
        }
      }
      caches.push({ padded, preAct, relu });
      act = next;
    }
    return { output: act[0], caches };
  }

  /** Gradients of a scalar loss given dL/d net-output; exact for the padded conv. */
  backward(
    gradOutput: Float64Array,
    caches: LayerCache[],
    h: number,
    w: number
  ): LayerGrads[] {
    const grads: LayerGrads[] = this.layers.map((layer) => ({
      kernel: new Float64Array(layer.kernel.length),
      bias: new Float64Array(layer.bias.length),
    }));
    let gradAct: Float64Array[] = [gradOutput];
    const pw = w + 2;
    for (let li = this.layers.length - 1; li >= 0; li--) {
      const layer = this.layers[li];
      const cache = caches[li];
      const g: Float64Array[] = [];
      for (let o = 0; o < layer.outCh; o++) {
        if (cache.relu) {
          const masked = new Float64Array(h * w);
          const pre = cache.preAct[o];
          const src = gradAct[o];
          for (let i = 0; i < masked.length; i++) masked[i] = pre[i] > 0 ? src[i] : 0;
          g.push(masked);
        } else {
          g.push(gradAct[o]);
        }
      }
      const padGrads: Float64Array[] = [];
      for (let c = 0; c < layer.inCh; c++) padGrads.push(new Float64Array((h + 2) * (w + 2)));
      for (let o = 0; o < layer.outCh; o++) {
        const go = g[o];
        let biasAcc = 0;
        for (let i = 0; i < go.length; i++) biasAcc += go[i];
        grads[li].bias[o] = biasAcc;
        for (let c = 0; c < layer.inCh; c++) {
          const pad = cache.padded[c];
          const padGrad = padGrads[c];
          const kBase = (o * layer.inCh + c) * K * K;
          for (let ki = 0; ki < K; ki++) {
            for (let kj = 0; kj < K; kj++) {
              const kv = layer.kernel[kBase + ki * K + kj];
              let acc = 0;
              for (let i = 0; i < h; i++) {
                let src = (i + ki) * pw + kj;
                let dst = i * w;
                for (let j = 0; j < w; j++) {
                  const gv = go[dst + j];
                  acc += pad[src + j] * gv;
                  padGrad[src + j] += kv * gv;
                }
              }
              grads[li].kernel[kBase + ki * K + kj] = acc;
            }
          }
        }
      }
      if (li > 0) {
        gradAct = padGrads.map((pg) => foldReflect(pg, h, w));
      }
    }
    return grads;
  }

  /** Denoised image: input - net(input). */
  denoise(x: Float64Array, h: number, w: number): Float64Array {
    const { output } = this.forward(x, h, w);
    const out = new Float64Array(x.length);
    for (let i = 0; i < x.length; i++) out[i] = x[i] - output[i];
    return out;
  }

  toWire(): ConvLayer[] {
    return this.layers.map((layer, index) => ({
      kernel: Float32Array.from(layer.kernel),
      bias: Float32Array.from(layer.bias),
      activation: index < this.layers.length - 1 ? ("relu" as const) : ("none" as const),
      outCh: layer.outCh,
      inCh: layer.inCh,
      kh: K,
      kw: K,
    }));
  }

  loadWire(wire: ConvLayer[]): void {
    if (wire.length !== this.layers.length) throw new Error("architecture mismatch");
    this.layers = wire.map((layer) => ({
      kernel: Float64Array.from(layer.kernel),
      bias: Float64Array.from(layer.bias),
      outCh: layer.outCh,
      inCh: layer.inCh,
    }));
  }
}

/** Adam with the standard defaults; one state slot per layer parameter array. */
export class Adam {
  private m: LayerGrads[];
  private v: LayerGrads[];
  private t = 0;

  constructor(
    private model: Model,
    private lr: number,
    private beta1 = 0.9,
    private beta2 = 0.999,
    private eps = 1e-8
  ) {
    this.m = model.layers.map((l) => ({
      kernel: new Float64Array(l.kernel.length),
      bias: new Float64Array(l.bias.length),
    }));
    this.v = model.layers.map((l) => ({
      kernel: new Float64Array(l.kernel.length),
      bias: new Float64Array(l.bias.length),
    }));
  }

  step(grads: LayerGrads[]): void {
    this.t += 1;
    const c1 = 1.0 - Math.pow(this.beta1, this.t);
    const c2 = 1.0 - Math.pow(this.beta2, this.t);
    for (let li = 0; li < this.model.layers.length; li++) {
      for (const field of ["kernel", "bias"] as const) {
        const p = this.model.layers[li][field];
        const g = grads[li][field];
        const m = this.m[li][field];
        const v = this.v[li][field];
        for (let i = 0; i < p.length; i++) {
          m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
          v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
          p[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
        }
      }
    }
  }
}
