import { afterAll, describe, expect, it } from "vitest";

import {
  mht_v1_assign_regions_by_attention,
  mht_v1_hungarian_id_similarity,
  mht_v1_shutdown,
  type RegionBitmap,
} from "../src/index.js";
import { toFlat } from "./helpers.js";

afterAll(() => {
  mht_v1_shutdown();
});

function bitmap(rows: number[][]): RegionBitmap {
  const h = rows.length;
  const w = rows[0].length;
  return { h, w, bits: Uint8Array.from(rows.flat()) };
}

describe("mht_v1_hungarian_id_similarity", () => {
  it("scores identical orthonormal sets as 1.0", async () => {
    const refs = toFlat([2, 2], [1, 0, 0, 1]);
    const result = await mht_v1_hungarian_id_similarity(refs, refs);
    expect(result.code).toBe(0);
    if (result.code === 0) {
      expect(result.value.sId).toBe(1.0);
      expect(result.value.unmatchedRefs).toEqual([]);
    }
  });

  it("scores an empty generated set as 0.0", async () => {
    const refs = toFlat([2, 3], [1, 0, 0, 0, 1, 0]);
    const gens = toFlat([0, 3], []);
    const result = await mht_v1_hungarian_id_similarity(refs, gens);
    expect(result.code).toBe(0);
    if (result.code === 0) {
      expect(result.value.sId).toBe(0.0);
      expect(result.value.unmatchedRefs).toEqual([0, 1]);
      expect(result.value.matches).toEqual([]);
    }
  });

  it("reproduces the 0.85 two-person matching", async () => {
    const refs = toFlat([2, 3], [1, 0, 0, 0, 1, 0]);
    const gens = toFlat(
      [2, 3],
      [0.9, 0.2, Math.sqrt(0.15), 0.1, 0.8, Math.sqrt(0.35)]
    );
    const result = await mht_v1_hungarian_id_similarity(refs, gens);
    expect(result.code).toBe(0);
    if (result.code === 0) {
      expect(result.value.sId).toBeCloseTo(0.85, 6);
      expect(result.value.matches.map((m) => [m[0], m[1]])).toEqual([
        [0, 0],
        [1, 1],
      ]);
    }
  });

  it("rejects shape mismatches with code 1 before reaching the worker", async () => {
    const refs = toFlat([4], [1, 0, 0, 1]);
    const gens = toFlat([2, 2], [1, 0, 0, 1]);
    const result = await mht_v1_hungarian_id_similarity(refs, gens);
    expect(result.code).toBe(1);
    if (result.code !== 0) {
      expect(result.message).toMatch(/rank 2/);
    }
  });

  it("maps worker validation failures to code 1 with a message", async () => {
    const refs = toFlat([1, 2], [0, 0]); // zero-norm vector
    const gens = toFlat([1, 2], [1, 0]);
    const result = await mht_v1_hungarian_id_similarity(refs, gens);
    expect(result.code).toBe(1);
    if (result.code !== 0) {
      expect(result.message).toMatch(/zero-norm/);
    }
  });

  it("never mutates caller buffers", async () => {
    const refsData = Float32Array.from([1, 0, 0, 1]);
    const gensData = Float32Array.from([0, 1, 1, 0]);
    const refsCopy = refsData.slice();
    const gensCopy = gensData.slice();
    await mht_v1_hungarian_id_similarity(
      { shape: [2, 2], data: refsData },
      { shape: [2, 2], data: gensData }
    );
    expect(refsData).toEqual(refsCopy);
    expect(gensData).toEqual(gensCopy);
  });
});

describe("mht_v1_assign_regions_by_attention", () => {
  it("matches a concentrated map to its segment", async () => {
    const sims = toFlat([1, 2, 2], [1, 0, 0, 0]);
    const segs = [bitmap([[1, 0], [0, 0]]), bitmap([[0, 0], [0, 1]])];
    const result = await mht_v1_assign_regions_by_attention(sims, segs);
    expect(result.code).toBe(0);
    if (result.code === 0) {
      expect(result.value.fillPolicy).toBe("ones");
      expect(result.value.matched).toEqual([[0, 0]]);
      expect(Array.from(result.value.maps[0].bits)).toEqual([1, 0, 0, 0]);
    }
  });

  it("falls back to all-ones maps when no segments survive", async () => {
    const sims = toFlat([2, 2, 2], [1, 0, 0, 0, 0, 0, 0, 1]);
    const result = await mht_v1_assign_regions_by_attention(sims, []);
    expect(result.code).toBe(0);
    if (result.code === 0) {
      expect(result.value.matched).toEqual([]);
      for (const m of result.value.maps) {
        expect(Array.from(m.bits)).toEqual([1, 1, 1, 1]);
      }
    }
  });

  it("rejects non-square similarity buffers", async () => {
    const sims = toFlat([1, 2, 3], [0, 0, 0, 0, 0, 0]);
    const result = await mht_v1_assign_regions_by_attention(sims, []);
    expect(result.code).toBe(1);
  });
});
