"""Per-sample evaluation metrics.

Identity similarity matches reference and generated face embeddings with the
assignment solver on negated cosine similarities, then averages the matched
similarities over the declared reference count N (never the detected count).
Matched similarities are clamped below at 0 before averaging so the score
stays in [0, 1]; the assignment itself is solved on unclamped values.

Score conventions, fixed here and used everywhere downstream:

* QA raw scores (the 1/5/10 choice scale, or any integer 1..10) normalize
  as ``raw / 10``.
* The action aggregate is the arithmetic mean of whichever of the simple and
  complex scores are present.
* HPS enters the alignment mean as its native [0, 1] value, unrescaled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import solve_assignment
from .core import Embedding, EmbeddingSet, ValidationError


@dataclass(frozen=True)
class IdSimilarityResult:
    s_id: float
    matches: tuple[tuple[int, int, float], ...]  # (ref i, gen j, raw cosine)
    unmatched_refs: tuple[int, ...]


@dataclass(frozen=True)
class SampleScores:
    count: int
    s_id: float
    hps: float | None
    action_simple: float | None
    action_complex: float | None
    s_align: float | None
    s_unified: float | None


def cosine_similarity(a: Embedding | np.ndarray, b: Embedding | np.ndarray) -> float:
    """(a . b) / (|a| |b|), clipped into [-1, 1]. Zero-norm input is an
    error, never NaN."""
    va = a.values if isinstance(a, Embedding) else np.asarray(a, dtype=np.float64)
    vb = b.values if isinstance(b, Embedding) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValidationError(
            f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}"
        )
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine similarity undefined for zero-norm vector")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def similarity_matrix(refs: EmbeddingSet, gens: EmbeddingSet) -> np.ndarray:
    """N x M matrix of pairwise cosine similarities."""
    if len(refs) and len(gens) and refs.dim != gens.dim:
        raise ValidationError(
            f"dimension mismatch: refs d={refs.dim}, gens d={gens.dim}"
        )
    n, m = len(refs), len(gens)
    if m == 0 or n == 0:
        return np.zeros((n, m), dtype=np.float64)
    ref_norms = np.linalg.norm(refs.vectors, axis=1)
    gen_norms = np.linalg.norm(gens.vectors, axis=1)
    for i in np.flatnonzero(ref_norms == 0.0):
        raise ValidationError("zero-norm vector", f"refs[{i}]")
    for j in np.flatnonzero(gen_norms == 0.0):
        raise ValidationError("zero-norm vector", f"gens[{j}]")
    sims = (refs.vectors @ gens.vectors.T) / np.outer(ref_norms, gen_norms)
    return np.clip(sims, -1.0, 1.0)


def hungarian_id_similarity(
    refs: EmbeddingSet, gens: EmbeddingSet
) -> IdSimilarityResult:
    """Optimal-matching identity similarity averaged over all N references.

    Unmatched references (M < N) contribute 0.
    """
    n = len(refs)
    if n < 1:
        raise ValidationError("need at least one reference embedding")
    sims = similarity_matrix(refs, gens)
    result = solve_assignment(-sims) if sims.shape[1] else None
    matches = []
    matched_rows = set()
    total = 0.0
    if result is not None:
        for i, j in result.pairs:
            matches.append((i, j, float(sims[i, j])))
            matched_rows.add(i)
            total += max(float(sims[i, j]), 0.0)
    unmatched = tuple(i for i in range(n) if i not in matched_rows)
    return IdSimilarityResult(
        s_id=total / n,
        matches=tuple(matches),
        unmatched_refs=unmatched,
    )


def count_accuracy(n_refs: int, n_gen_faces: int) -> int:
    """Kronecker delta between reference count and detected face count."""
    if n_refs < 1:
        raise ValidationError("n_refs must be >= 1")
    if n_gen_faces < 0:
        raise ValidationError("n_gen_faces must be >= 0")
    return int(n_refs == n_gen_faces)


def action_score(raw_scores) -> float:
    """Mean of raw 1..10 choice scores normalized by /10."""
    raw_scores = list(raw_scores)
    if not raw_scores:
        raise ValidationError("action score needs at least one QA item")
    for s in raw_scores:
        if not isinstance(s, int) or isinstance(s, bool) or not 1 <= s <= 10:
            raise ValidationError(f"raw score {s!r} out of range 1..10")
    return sum(s / 10.0 for s in raw_scores) / len(raw_scores)


def alignment_score(
    hps: float,
    action_simple: float | None,
    action_complex: float | None,
    count: int,
) -> float:
    """(hps + mean of present action scores + count) / 3."""
    if hps is None:
        raise ValidationError("alignment score requires hps")
    if action_simple is None and action_complex is None:
        raise ValidationError("alignment score requires at least one action score")
    for name, v in (("hps", hps), ("action_simple", action_simple),
                    ("action_complex", action_complex)):
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name}={v} out of [0,1]")
    if count not in (0, 1):
        raise ValidationError(f"count must be 0 or 1, got {count!r}")
    present = [a for a in (action_simple, action_complex) if a is not None]
    s_act = sum(present) / len(present)
    return (hps + s_act + count) / 3.0


def unified_score(s_id: float, s_align: float) -> float:
    """Geometric composite (s_id * s_align^2)^(1/3)."""
    if not 0.0 <= s_id <= 1.0:
        raise ValidationError(f"s_id={s_id} out of [0,1]")
    if not 0.0 <= s_align <= 1.0:
        raise ValidationError(f"s_align={s_align} out of [0,1]")
    return float(np.cbrt(s_id * s_align * s_align))
