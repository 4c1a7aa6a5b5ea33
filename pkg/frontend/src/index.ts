/**
 * Flat-function export table (versioned `mht_v1_` prefix) exposing the
 * evaluation toolkit's identity matching and attention-based region
 * assignment to pipelines holding embeddings and maps in memory.
 *
 * Inputs are flat row-major float32 buffers plus shape arrays; bitmaps are
 * unpacked 0/1 byte grids. Caller buffers are never written to. Errors come
 * back as `(code, message)` results (1 validation, 2 I/O or worker failure),
 * never as thrown exceptions.
 */

import { RpcWorker, type RpcResponse } from "./worker.js";

export interface FlatBuffer {
  /** Row-major dimensions, e.g. `[n, d]` for an embedding set. */
  shape: number[];
  /** Contiguous row-major float32 payload; length must equal the shape product. */
  data: Float32Array;
}

export interface RegionBitmap {
  h: number;
  w: number;
  /** Row-major 0/1 bytes, length `h * w`. */
  bits: Uint8Array;
}

export interface IdSimilarity {
  sId: number;
  /** Matched (refIndex, genIndex, rawCosine) triples. */
  matches: Array<[number, number, number]>;
  unmatchedRefs: number[];
}

export interface RegionAssignment {
  fillPolicy: "ones" | "zeros";
  matched: Array<[number, number]>;
  maps: RegionBitmap[];
}

export type Result<T> =
  | { code: 0; value: T }
  | { code: number; message: string };

const VALIDATION = 1;

const sharedWorker = new RpcWorker();

function err<T>(message: string, code = VALIDATION): Result<T> {
  return { code, message };
}

function shapeProduct(shape: number[]): number {
  return shape.reduce((acc, dim) => acc * dim, 1);
}

function checkBuffer(buf: FlatBuffer, rank: number, name: string): string | null {
  if (buf.shape.length !== rank) {
    return `${name} must be rank ${rank}, got shape [${buf.shape.join(", ")}]`;
  }
  if (buf.shape.some((d) => d < 0 || !Number.isInteger(d))) {
    return `${name} has an invalid dimension in [${buf.shape.join(", ")}]`;
  }
  if (shapeProduct(buf.shape) !== buf.data.length) {
    return (
      `${name} buffer holds ${buf.data.length} floats, expected ` +
      `${shapeProduct(buf.shape)}`
    );
  }
  return null;
}

function embeddingSetPayload(buf: FlatBuffer): { dim: number; data: number[] } {
  const [, d] = buf.shape;
  return { dim: d, data: Array.from(buf.data) };
}

function packBitsBase64(bitmap: RegionBitmap): string {
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

function unpackRegion(obj: { h: number; w: number; bits: string }): RegionBitmap {
  const packed = Buffer.from(obj.bits, "base64");
  const bytesPerRow = Math.ceil(obj.w / 8);
  const bits = new Uint8Array(obj.h * obj.w);
  for (let r = 0; r < obj.h; r++) {
    for (let c = 0; c < obj.w; c++) {
      const byte = packed[r * bytesPerRow + (c >> 3)];
      bits[r * obj.w + c] = (byte >> (7 - (c & 7))) & 1;
    }
  }
  return { h: obj.h, w: obj.w, bits };
}

function fromResponse<T>(
  response: RpcResponse,
  map: (result: unknown) => T
): Result<T> {
  if (!response.ok) {
    return { code: response.code || VALIDATION, message: response.message };
  }
  return { code: 0, value: map(response.result) };
}

/**
 * Identity similarity between reference and generated embedding sets
 * (optimal matching on cosine similarity, averaged over all references).
 * Shapes must be rank-2 with a shared embedding dimension; `gens` may have
 * zero rows.
 */
export async function mht_v1_hungarian_id_similarity(
  refs: FlatBuffer,
  gens: FlatBuffer
): Promise<Result<IdSimilarity>> {
  const bad =
    checkBuffer(refs, 2, "refs") ??
    checkBuffer(gens, 2, "gens") ??
    (refs.shape[1] !== gens.shape[1] && gens.shape[0] > 0
      ? `dimension mismatch: refs d=${refs.shape[1]}, gens d=${gens.shape[1]}`
      : null) ??
    (refs.shape[0] < 1 ? "refs needs at least one row" : null);
  if (bad) {
    return err(bad);
  }
  const response = await sharedWorker.request({
    op: "id_sim",
    refs: embeddingSetPayload(refs),
    gens: embeddingSetPayload(gens),
  });
  return fromResponse(response, (result) => {
    const r = result as {
      s_id: number;
      matches: Array<[number, number, number]>;
      unmatched_refs: number[];
    };
    return {
      sId: r.s_id,
      matches: r.matches.map((m) => [m[0], m[1], m[2]] as [number, number, number]),
      unmatchedRefs: [...r.unmatched_refs],
    };
  });
}

/**
 * Attention-route region assignment: `simMaps` is a rank-3 buffer of K
 * nonnegative D x D similarity maps; `segments` are candidate bitmaps.
 * With `nmsApplied=false` the worker NMS-filters them at `theta` first.
 */
export async function mht_v1_assign_regions_by_attention(
  simMaps: FlatBuffer,
  segments: RegionBitmap[],
  theta = 0.5,
  nmsApplied = true
): Promise<Result<RegionAssignment>> {
  const bad =
    checkBuffer(simMaps, 3, "simMaps") ??
    (simMaps.shape[0] < 1 ? "simMaps needs at least one map" : null) ??
    (simMaps.shape[1] !== simMaps.shape[2]
      ? "similarity maps must be square"
      : null);
  if (bad) {
    return err(bad);
  }
  for (const [i, seg] of segments.entries()) {
    if (seg.bits.length !== seg.h * seg.w) {
      return err(`segments[${i}] holds ${seg.bits.length} bytes, expected ${seg.h * seg.w}`);
    }
  }
  const [k, d] = simMaps.shape;
  const maps = [];
  for (let i = 0; i < k; i++) {
    maps.push({
      d,
      data: Array.from(simMaps.data.subarray(i * d * d, (i + 1) * d * d)),
    });
  }
  const response = await sharedWorker.request({
    op: "assign_regions_attention",
    sim_maps: maps,
    segments: segments.map((s) => ({ h: s.h, w: s.w, bits: packBitsBase64(s) })),
    theta,
    nms_applied: nmsApplied,
  });
  return fromResponse(response, (result) => {
    const r = result as {
      fill_policy: "ones" | "zeros";
      matched: Array<[number, number]>;
      maps: Array<{ h: number; w: number; bits: string }>;
    };
    return {
      fillPolicy: r.fill_policy,
      matched: r.matched.map((m) => [m[0], m[1]] as [number, number]),
      maps: r.maps.map(unpackRegion),
    };
  });
}

/** Stops the shared worker process; the next call restarts it. */
export function mht_v1_shutdown(): void {
  sharedWorker.shutdown();
}
