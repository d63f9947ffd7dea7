/**
 * DNWT weight-file format, bit-exact with the reconstruction package's loader:
 * magic "DNWT", version u32 LE = 1, layer count u32 LE; per layer an
 * activation tag u8 (0 none, 1 relu), out/in channels and kernel height/width
 * as u32 LE, the kernel as out-major float32 LE, then out_ch float32 biases.
 * No padding bytes.
 */

export type Activation = "none" | "relu";

export interface ConvLayer {
  kernel: Float32Array; // outCh * inCh * kh * kw, out-major
  bias: Float32Array; // outCh
  activation: Activation;
  outCh: number;
  inCh: number;
  kh: number;
  kw: number;
}

const MAGIC = Buffer.from("DNWT", "ascii");
const VERSION = 1;
const TAGS: Record<Activation, number> = { none: 0, relu: 1 };

export function serializeWeights(layers: ConvLayer[]): Buffer {
  let size = 12;
  for (const layer of layers) {
    size += 17 + 4 * (layer.kernel.length + layer.bias.length);
  }
  const buf = Buffer.alloc(size);
  MAGIC.copy(buf, 0);
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(layers.length, 8);
  let off = 12;
  for (const layer of layers) {
    buf.writeUInt8(TAGS[layer.activation], off);
    buf.writeUInt32LE(layer.outCh, off + 1);
    buf.writeUInt32LE(layer.inCh, off + 5);
    buf.writeUInt32LE(layer.kh, off + 9);
    buf.writeUInt32LE(layer.kw, off + 13);
    off += 17;
    for (const v of layer.kernel) {
      buf.writeFloatLE(v, off);
      off += 4;
    }
    for (const v of layer.bias) {
      buf.writeFloatLE(v, off);
      off += 4;
    }
  }
  return buf;
}

export function parseWeights(buf: Buffer): ConvLayer[] {
  if (buf.length < 12 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new Error("not a DNWT weight file (byte offset 0)");
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`unsupported DNWT version ${version} (byte offset 4)`);
  }
  const count = buf.readUInt32LE(8);
  let off = 12;
  const layers: ConvLayer[] = [];
  let prevOut = 1;
  for (let i = 0; i < count; i++) {
    if (off + 17 > buf.length) throw new Error(`truncated layer ${i} header (byte offset ${off})`);
    const tag = buf.readUInt8(off);
    const activation = (Object.keys(TAGS) as Activation[]).find((k) => TAGS[k] === tag);
    if (activation === undefined) throw new Error(`unknown activation tag ${tag} (byte offset ${off})`);
    const outCh = buf.readUInt32LE(off + 1);
    const inCh = buf.readUInt32LE(off + 5);
    const kh = buf.readUInt32LE(off + 9);
    const kw = buf.readUInt32LE(off + 13);
    off += 17;
    if (kh !== kw || kh % 2 === 0) throw new Error(`layer ${i}: kernels must be square and odd`);
    if (inCh !== prevOut) throw new Error(`layer ${i}: channel chain broken (${inCh} != ${prevOut})`);
    const kernelLen = outCh * inCh * kh * kw;
    if (off + 4 * (kernelLen + outCh) > buf.length) {
      throw new Error(`truncated layer ${i} weights (byte offset ${off})`);
    }
    const kernel = new Float32Array(kernelLen);
    for (let k = 0; k < kernelLen; k++) kernel[k] = buf.readFloatLE(off + 4 * k);
    off += 4 * kernelLen;
    const bias = new Float32Array(outCh);
    for (let k = 0; k < outCh; k++) bias[k] = buf.readFloatLE(off + 4 * k);
    off += 4 * outCh;
    layers.push({ kernel, bias, activation, outCh, inCh, kh, kw });
    prevOut = outCh;
  }
  if (off !== buf.length) throw new Error(`trailing bytes after last layer (byte offset ${off})`);
  if (prevOut !== 1) throw new Error("final layer must emit a single channel");
  return layers;
}
