/**
 * Synthetic training images in [0, 1]: the same phantom families the
 * reconstruction pipeline uses (ellipse head phantom, random disks, bars).
 */
import { Rng } from "./rng.js";

// (value, a, b, x0, y0, phiDegrees) on [-1, 1]^2
const SHEPP_LOGAN: Array<[number, number, number, number, number, number]> = [
  [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
  [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
  [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
  [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
  [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
  [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
  [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
  [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
  [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
  [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

export type PhantomKind = "shepp_logan" | "disks" | "bars";

export function makePhantom(kind: PhantomKind, size: number, rng: Rng): Float64Array {
  const img = new Float64Array(size * size);
  if (kind === "shepp_logan") {
    for (let r = 0; r < size; r++) {
      const y = 1.0 - ((r + 0.5) / size) * 2.0;
      for (let c = 0; c < size; c++) {
        const x = ((c + 0.5) / size) * 2.0 - 1.0;
        let v = 0.0;
        for (const [value, a, b, x0, y0, phi] of SHEPP_LOGAN) {
          const rad = (phi * Math.PI) / 180.0;
          const xr = (x - x0) * Math.cos(rad) + (y - y0) * Math.sin(rad);
          const yr = -(x - x0) * Math.sin(rad) + (y - y0) * Math.cos(rad);
          if ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0) v += value;
        }
        img[r * size + c] = Math.min(Math.max(v, 0.0), 1.0);
      }
    }
    return img;
  }
  if (kind === "disks") {
    const count = 4 + rng.int(5);
    for (let d = 0; d < count; d++) {
      const cy = rng.uniform(0.2 * size, 0.8 * size);
      const cx = rng.uniform(0.2 * size, 0.8 * size);
      const radius = rng.uniform(0.05, 0.2) * size;
      const value = rng.uniform(0.3, 1.0);
      for (let r = 0; r < size; r++) {
        for (let c = 0; c < size; c++) {
          const dy = r + 0.5 - cy;
          const dx = c + 0.5 - cx;
          if (dy * dy + dx * dx <= radius * radius) {
            const i = r * size + c;
            img[i] = Math.max(img[i], value);
          }
        }
      }
    }
    return img;
  }
  // bars: alternating vertical bands with a quiet margin
  const width = Math.max(1, Math.floor(size / 8));
  const row0 = Math.floor(size / 8);
  const row1 = size - Math.floor(size / 8);
  for (let r = row0; r < row1; r++) {
    for (let c = 0; c < size; c++) {
      if (Math.floor(c / width) % 2 === 1) img[r * size + c] = 1.0;
    }
  }
  return img;
}
