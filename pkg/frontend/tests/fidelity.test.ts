/**
 * Delegation fidelity: 500 random calls per exported function must return
 * exactly what the toolkit's in-process Python API returns on the same
 * inputs (integers exact, floats within 1 ulp), and caller buffers must
 * come back untouched.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import {
  mht_v1_assign_regions_by_attention,
  mht_v1_hungarian_id_similarity,
  mht_v1_shutdown,
  type RegionBitmap,
} from "../src/index.js";
import { f32Uniform, mulberry32, randInt, randomBitmap, toFlat, ulpDiff } from "./helpers.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const N_CALLS = 500;

interface IdSimCase {
  refs: { dim: number; data: number[] };
  gens: { dim: number; data: number[] };
}

interface AssignCase {
  sim_maps: Array<{ d: number; data: number[] }>;
  segments: Array<{ h: number; w: number; bits: string }>;
  theta: number;
  nms_applied: boolean;
}

function packBase64(bitmap: RegionBitmap): string {
  const bytesPerRow = Math.ceil(bitmap.w / 8);
  const packed = new Uint8Array(bitmap.h * bytesPerRow);
  for (let r = 0; r < bitmap.h; r++) {
    for (let c = 0; c < bitmap.w; c++) {
      if (bitmap.bits[r * bitmap.w + c]) {
        packed[r * bytesPerRow + (c >> 3)] |= 0x80 >> (c & 7);
      }
    }
  }
  return Buffer.from(packed).toString("base64");
}

const rng = mulberry32(0xc0ffee);
const idSimCases: IdSimCase[] = [];
const idSimBuffers: Array<{ refs: Float32Array; gens: Float32Array }> = [];
for (let i = 0; i < N_CALLS; i++) {
  const n = randInt(rng, 1, 6);
  const m = randInt(rng, 0, 6);
  const d = randInt(rng, 2, 16);
  const refs = f32Uniform(rng, n * d, -1, 1);
  const gens = f32Uniform(rng, m * d, -1, 1);
  idSimCases.push({ refs: { dim: d, data: refs }, gens: { dim: d, data: gens } });
  idSimBuffers.push({
    refs: Float32Array.from(refs),
    gens: Float32Array.from(gens),
  });
}

const assignCases: AssignCase[] = [];
const assignBitmaps: RegionBitmap[][] = [];
const assignBuffers: Float32Array[] = [];
for (let i = 0; i < N_CALLS; i++) {
  const k = randInt(rng, 1, 5);
  const q = randInt(rng, 0, 5);
  const d = randInt(rng, 1, 4);
  const maps = Array.from({ length: k }, () => f32Uniform(rng, d * d, 0, 1));
  const segments = Array.from({ length: q }, () => randomBitmap(rng, d, d));
  assignCases.push({
    sim_maps: maps.map((data) => ({ d, data })),
    segments: segments.map((s) => ({ h: s.h, w: s.w, bits: packBase64(s) })),
    theta: i % 3 === 0 ? 0.3 : 0.5,
    nms_applied: i % 4 !== 0,
  });
  assignBitmaps.push(segments);
  assignBuffers.push(Float32Array.from(maps.flat()));
}

let reference: {
  id_sim: Array<{
    s_id: number;
    matches: Array<[number, number, number]>;
    unmatched_refs: number[];
  }>;
  assign_regions: Array<{
    fill_policy: string;
    matched: Array<[number, number]>;
    maps: Array<{ h: number; w: number; bits: string }>;
  }>;
};
let workdir: string;

beforeAll(() => {
  workdir = mkdtempSync(join(tmpdir(), "mht-fidelity-"));
  const casesPath = join(workdir, "cases.json");
  const outPath = join(workdir, "reference.json");
  writeFileSync(
    casesPath,
    JSON.stringify({ id_sim: idSimCases, assign_regions: assignCases })
  );
  const proc = spawnSync(
    "python3",
    [join(HERE, "reference_inprocess.py"), casesPath, outPath],
    { encoding: "utf-8" }
  );
  if (proc.status !== 0) {
    throw new Error(`reference run failed: ${proc.stderr}`);
  }
  reference = JSON.parse(readFileSync(outPath, "utf-8"));
});

afterAll(() => {
  mht_v1_shutdown();
  rmSync(workdir, { recursive: true, force: true });
});

describe("delegation fidelity", () => {
  it(`id similarity matches in-process results on ${N_CALLS} random calls`, async () => {
    for (let i = 0; i < N_CALLS; i++) {
      const c = idSimCases[i];
      const bufs = idSimBuffers[i];
      const refsCopy = bufs.refs.slice();
      const gensCopy = bufs.gens.slice();
      const result = await mht_v1_hungarian_id_similarity(
        { shape: [c.refs.data.length / c.refs.dim, c.refs.dim], data: bufs.refs },
        { shape: [c.gens.data.length / c.gens.dim, c.gens.dim], data: bufs.gens }
      );
      expect(result.code).toBe(0);
      if (result.code !== 0) {
        continue;
      }
      const expected = reference.id_sim[i];
      expect(ulpDiff(result.value.sId, expected.s_id) <= 1n).toBe(true);
      expect(result.value.matches.length).toBe(expected.matches.length);
      for (let t = 0; t < expected.matches.length; t++) {
        expect(result.value.matches[t][0]).toBe(expected.matches[t][0]);
        expect(result.value.matches[t][1]).toBe(expected.matches[t][1]);
        expect(
          ulpDiff(result.value.matches[t][2], expected.matches[t][2]) <= 1n
        ).toBe(true);
      }
      expect(result.value.unmatchedRefs).toEqual(expected.unmatched_refs);
      expect(bufs.refs).toEqual(refsCopy);
      expect(bufs.gens).toEqual(gensCopy);
    }
  });

  it(`region assignment matches in-process results on ${N_CALLS} random calls`, async () => {
    for (let i = 0; i < N_CALLS; i++) {
      const c = assignCases[i];
      const d = c.sim_maps[0].d;
      const buffer = assignBuffers[i];
      const bufferCopy = buffer.slice();
      const segs = assignBitmaps[i];
      const segCopies = segs.map((s) => s.bits.slice());
      const result = await mht_v1_assign_regions_by_attention(
        { shape: [c.sim_maps.length, d, d], data: buffer },
        segs,
        c.theta,
        c.nms_applied
      );
      expect(result.code).toBe(0);
      if (result.code !== 0) {
        continue;
      }
      const expected = reference.assign_regions[i];
      expect(result.value.fillPolicy).toBe(expected.fill_policy);
      expect(result.value.matched).toEqual(
        expected.matched.map((m) => [m[0], m[1]])
      );
      expect(result.value.maps.length).toBe(expected.maps.length);
      for (let t = 0; t < expected.maps.length; t++) {
        expect(result.value.maps[t].h).toBe(expected.maps[t].h);
        expect(result.value.maps[t].w).toBe(expected.maps[t].w);
        expect(packBase64(result.value.maps[t])).toBe(expected.maps[t].bits);
      }
      expect(buffer).toEqual(bufferCopy);
      segs.forEach((s, t) => expect(s.bits).toEqual(segCopies[t]));
    }
  });
});
