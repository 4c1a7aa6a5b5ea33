import type { FlatBuffer, RegionBitmap } from "../src/index.js";

/** Deterministic 32-bit PRNG so case corpora are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(rng: () => number, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo + 1));
}

export function f32Uniform(
  rng: () => number,
  n: number,
  lo: number,
  hi: number
): number[] {
  return Array.from({ length: n }, () => Math.fround(lo + rng() * (hi - lo)));
}

export function toFlat(shape: number[], data: number[]): FlatBuffer {
  return { shape, data: Float32Array.from(data) };
}

export function randomBitmap(
  rng: () => number,
  h: number,
  w: number
): RegionBitmap {
  const bits = new Uint8Array(h * w);
  for (let i = 0; i < bits.length; i++) {
    bits[i] = rng() < 0.5 ? 0 : 1;
  }
  return { h, w, bits };
}

/** Distance in representable doubles; 0 for bit-identical values. */
export function ulpDiff(a: number, b: number): bigint {
  if (Object.is(a, b)) {
    return 0n;
  }
  if (Number.isNaN(a) || Number.isNaN(b)) {
    return 1n << 62n;
  }
  const buf = new ArrayBuffer(8);
  const f = new Float64Array(buf);
  const i = new BigInt64Array(buf);
  const order = (x: number): bigint => {
    f[0] = x;
    const bits = i[0];
    return bits >= 0n ? bits : -(1n << 63n) - bits;
  };
  const d = order(a) - order(b);
  return d < 0n ? -d : d;
}
