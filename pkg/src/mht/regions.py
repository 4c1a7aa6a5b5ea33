"""Implicit region assignment from precomputed model artifacts.

Two routes produce one region of interest per reference image:

* attention route: aggregate probed self-attention mass from latent tokens
  onto each reference image's token group, reshape to the latent grid, and
  match the resulting similarity maps against candidate segmentation masks
  by maximum overlap (minimum negative-overlap cost);
* identity route: match reference face embeddings against embeddings of
  segmented generated faces by cosine dissimilarity and adopt the matched
  face's segmentation mask.

Unmatched references fall back asymmetrically: all-ones grids on the
attention route, all-zeros pixel masks on the identity route. Candidate
segments are deduplicated with greedy area-descending NMS at an IoU
threshold.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .assignment import solve_assignment
from .core import (
    Embedding,
    EmbeddingSet,
    RegionMap,
    SimilarityMap,
    TokenLayout,
    ValidationError,
    load_json,
    parse_token_layout,
    validate_layout,
)
from .metrics import similarity_matrix

DEFAULT_NMS_THETA = 0.5


@dataclass(frozen=True)
class AttentionProbe:
    """Per-layer L x L self-attention matrices (heads pre-averaged) captured
    at one timestep, plus the token layout they were probed under."""

    layers: tuple[np.ndarray, ...]
    layout: TokenLayout
    timestep_tag: str = ""

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("attention probe needs at least one layer")
        L = self.layout.L
        frozen = []
        for idx, mat in enumerate(self.layers):
            m = np.asarray(mat, dtype=np.float64)
            if m.shape != (L, L):
                raise ValidationError(
                    f"layer matrix is {m.shape}, expected ({L}, {L})",
                    f"layers[{idx}]",
                )
            if not np.all(np.isfinite(m)):
                raise ValidationError("non-finite attention entry", f"layers[{idx}]")
            if m.size and m.min() < 0:
                raise ValidationError(
                    "negative attention entry", f"layers[{idx}]"
                )
            m = m.copy()
            m.flags.writeable = False
            frozen.append(m)
        object.__setattr__(self, "layers", tuple(frozen))


@dataclass(frozen=True)
class RegionAssignment:
    """One region map per reference image plus the matched (k, q) pairs."""

    maps: tuple[RegionMap, ...]
    matched: tuple[tuple[int, int], ...]
    fill_policy: str  # "ones" | "zeros"

    def __post_init__(self):
        if self.fill_policy not in ("ones", "zeros"):
            raise ValidationError(f"unknown fill policy {self.fill_policy!r}")
        ks = [k for k, _ in self.matched]
        qs = [q for _, q in self.matched]
        if len(set(ks)) != len(ks) or len(set(qs)) != len(qs):
            raise ValidationError("matched pairs must be injective in k and q")
        fill = 1 if self.fill_policy == "ones" else 0
        for k, rm in enumerate(self.maps):
            if k not in ks and not np.all(rm.bits == fill):
                raise ValidationError(
                    f"unmatched map {k} is not the {self.fill_policy} constant"
                )


def aggregate_attention_maps(probe: AttentionProbe) -> list[SimilarityMap]:
    """Sum attention from each latent token onto each image group, across all
    probed layers, reshaped row-major onto the D x D latent grid."""
    layout = probe.layout
    validate_layout(layout)
    k_groups = layout.images
    if not k_groups:
        raise ValidationError("layout declares no image groups")
    d = layout.grid_side
    latent = np.asarray(layout.latent, dtype=np.intp)  # sorted
    acc = [np.zeros(latent.size, dtype=np.float64) for _ in k_groups]
    for mat in probe.layers:
        for k, group in enumerate(k_groups):
            if not group:
                continue
            cols = np.asarray(group, dtype=np.intp)
            acc[k] += mat[np.ix_(latent, cols)].sum(axis=1)
    return [SimilarityMap(v.reshape(d, d)) for v in acc]


def iou(a: RegionMap, b: RegionMap) -> float:
    """Intersection over union of two binary masks; 0 when both are empty."""
    if a.shape != b.shape:
        raise ValidationError(f"mask shape mismatch: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    return inter / union if union else 0.0


def nms_masks(candidates: list[RegionMap], theta: float) -> list[RegionMap]:
    """Greedy NMS: visit masks by descending area (ties: original order) and
    keep each iff its IoU with every already-kept mask is <= theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValidationError(f"theta={theta} out of [0,1]")
    shapes = {c.shape for c in candidates}
    if len(shapes) > 1:
        raise ValidationError(f"candidate masks disagree on shape: {shapes}")
    order = sorted(range(len(candidates)), key=lambda i: (-candidates[i].area, i))
    kept: list[RegionMap] = []
    for i in order:
        if all(iou(candidates[i], k) <= theta for k in kept):
            kept.append(candidates[i])
    return kept


def overlap_cost(
    sim_maps: list[SimilarityMap], segments: list[RegionMap]
) -> np.ndarray:
    """K x Q matrix of negative overlap scores -sum(S_k * G_q)."""
    if not sim_maps:
        raise ValidationError("need at least one similarity map")
    d = sim_maps[0].side
    for k, sm in enumerate(sim_maps):
        if sm.side != d:
            raise ValidationError(
                f"similarity map {k} is {sm.side}x{sm.side}, expected {d}x{d}"
            )
    for q, g in enumerate(segments):
        if g.shape != (d, d):
            raise ValidationError(
                f"segment {q} is {g.shape}, expected ({d}, {d})"
            )
    cost = np.empty((len(sim_maps), len(segments)), dtype=np.float64)
    for k, sm in enumerate(sim_maps):
        for q, g in enumerate(segments):
            cost[k, q] = -float((sm.grid * g.bits).sum())
    return cost


def assign_regions_by_attention(
    sim_maps: list[SimilarityMap],
    segments: list[RegionMap],
    nms_applied: bool = True,
    theta: float = DEFAULT_NMS_THETA,
) -> RegionAssignment:
    """Match similarity maps to candidate segments by maximum overlap.

    With no surviving segments every reference keeps the all-ones grid.
    Callers that have not yet NMS-filtered their segments pass
    ``nms_applied=False`` to have it applied here at ``theta``.
    """
    if not sim_maps:
        raise ValidationError("need at least one similarity map")
    if not nms_applied:
        segments = nms_masks(segments, theta)
    d = sim_maps[0].side
    if not segments:
        return RegionAssignment(
            maps=tuple(RegionMap.ones(d, d) for _ in sim_maps),
            matched=(),
            fill_policy="ones",
        )
    result = solve_assignment(overlap_cost(sim_maps, segments))
    chosen = dict(result.pairs)
    maps = tuple(
        segments[chosen[k]] if k in chosen else RegionMap.ones(d, d)
        for k in range(len(sim_maps))
    )
    return RegionAssignment(
        maps=maps, matched=tuple(result.pairs), fill_policy="ones"
    )


def assign_regions_by_identity(
    ref_embs: EmbeddingSet,
    faces: list[tuple[RegionMap, np.ndarray]],
    shape: tuple[int, int] | None = None,
) -> RegionAssignment:
    """Match reference embeddings to segmented generated faces by cosine
    dissimilarity (cost 1 - cos); unmatched references get all-zeros masks.

    ``shape`` supplies the mask resolution when ``faces`` is empty.
    """
    k_count = len(ref_embs)
    if k_count < 1:
        raise ValidationError("need at least one reference embedding")
    if not faces:
        if shape is None:
            raise ValidationError("mask shape required when no faces are given")
        h, w = shape
        return RegionAssignment(
            maps=tuple(RegionMap.zeros(h, w) for _ in range(k_count)),
            matched=(),
            fill_policy="zeros",
        )
    shapes = {rm.shape for rm, _ in faces}
    if len(shapes) > 1:
        raise ValidationError(f"face masks disagree on shape: {shapes}")
    h, w = faces[0][0].shape
    face_vectors = np.stack(
        [
            e.values if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
            for _, e in faces
        ]
    )
    gen_set = EmbeddingSet(face_vectors, role="generated")
    cost = 1.0 - similarity_matrix(ref_embs, gen_set)
    result = solve_assignment(cost)
    chosen = dict(result.pairs)
    maps = tuple(
        faces[chosen[k]][0] if k in chosen else RegionMap.zeros(h, w)
        for k in range(k_count)
    )
    return RegionAssignment(
        maps=maps, matched=tuple(result.pairs), fill_policy="zeros"
    )


def load_attention_probe(path: str) -> AttentionProbe:
    """Load ``{"L", "layers": [{"file": relpath.f32}...], "layout": {...}}``;
    each layer file is L x L row-major little-endian float32."""
    doc = load_json(path)
    layout = parse_token_layout(doc.get("layout", {}))
    L = doc.get("L")
    if L != layout.L:
        raise ValidationError(f"probe L={L!r} disagrees with layout L={layout.L}")
    layers_spec = doc.get("layers")
    if not isinstance(layers_spec, list) or not layers_spec:
        raise ValidationError("probe needs a non-empty layers array")
    base = os.path.dirname(path) or "."
    layers = []
    for i, entry in enumerate(layers_spec):
        if not isinstance(entry, dict) or "file" not in entry:
            raise ValidationError("layer entry needs a file field", f"layers[{i}]")
        fname = os.path.join(base, entry["file"])
        try:
            raw = np.fromfile(fname, dtype="<f4")
        except OSError as e:
            raise ValidationError(f"cannot read layer file: {e}", f"layers[{i}]")
        if raw.size != layout.L * layout.L:
            raise ValidationError(
                f"layer file holds {raw.size} floats, expected {layout.L}^2",
                f"layers[{i}]",
            )
        layers.append(raw.reshape(layout.L, layout.L).astype(np.float64))
    return AttentionProbe(
        layers=tuple(layers),
        layout=layout,
        timestep_tag=str(doc.get("timestep_tag", "")),
    )
