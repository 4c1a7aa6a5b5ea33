"""Self-attention mask construction: base and regional-isolation variants.

Query rows are masked by token type: text rows attend causally (``j <= i``,
diagonal included), every other declared row attends bidirectionally. The
isolation variant additionally restricts each reference image's rows so they
reach only their assigned latent region: row ``i`` in image group ``k`` keeps
column ``j`` iff ``j`` is not a latent token or ``j`` is in ROI ``k``.

Tokens outside all declared sets are legal and treated as non-text
bidirectional queries in both masks (unified backbones carry auxiliary tokens
beyond the four enumerated types). Masks are stored as row-major packed
bitmaps; ``dense()`` gives an 8-bit matrix for interop. Token indices are
0-based throughout.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import numpy as np

from .core import RegionMap, TokenLayout, ValidationError, validate_layout


@dataclass(frozen=True, eq=False)
class AttentionMaskMatrix:
    """L x L binary mask packed row-major, MSB-first within each byte."""

    L: int
    packed: np.ndarray  # (L, ceil(L/8)) uint8

    def __post_init__(self):
        p = np.asarray(self.packed, dtype=np.uint8)
        if p.shape != (self.L, (self.L + 7) // 8):
            raise ValidationError(
                f"packed shape {p.shape} inconsistent with L={self.L}"
            )
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "packed", p)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "AttentionMaskMatrix":
        d = np.asarray(dense, dtype=np.uint8)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValidationError("mask must be square")
        L = d.shape[0]
        packed = (
            np.packbits(d, axis=1) if L else np.zeros((0, 0), dtype=np.uint8)
        )
        return cls(L=L, packed=packed)

    def dense(self) -> np.ndarray:
        """Dense 8-bit export (L x L of {0, 1})."""
        if self.L == 0:
            return np.zeros((0, 0), dtype=np.uint8)
        return np.unpackbits(self.packed, axis=1)[:, : self.L]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttentionMaskMatrix):
            return NotImplemented
        return self.L == other.L and np.array_equal(self.packed, other.packed)


@dataclass(frozen=True)
class IsolationSpec:
    """Layout plus one latent-index ROI per reference image group."""

    layout: TokenLayout
    rois: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "rois", tuple(tuple(sorted(int(i) for i in r)) for r in self.rois)
        )
        if len(self.rois) != self.layout.num_images:
            raise ValidationError(
                f"got {len(self.rois)} ROIs for {self.layout.num_images} "
                "image groups"
            )
        latent = set(self.layout.latent)
        for k, roi in enumerate(self.rois):
            outside = [i for i in roi if i not in latent]
            if outside:
                raise ValidationError(
                    f"ROI index {outside[0]} not a latent token", f"rois[{k}]"
                )


def _base_dense(layout: TokenLayout) -> np.ndarray:
    L = layout.L
    dense = np.ones((L, L), dtype=np.uint8)
    if layout.text:
        rows = np.asarray(layout.text, dtype=np.intp)
        cols = np.arange(L)
        dense[rows, :] = (cols[None, :] <= rows[:, None]).astype(np.uint8)
    return dense


def build_base_mask(layout: TokenLayout) -> AttentionMaskMatrix:
    """Base mask: causal for text queries, bidirectional for everything else."""
    validate_layout(layout)
    return AttentionMaskMatrix.from_dense(_base_dense(layout))


def build_isolated_mask(spec: IsolationSpec) -> AttentionMaskMatrix:
    """Isolation mask: image rows lose the latent columns outside their ROI."""
    validate_layout(spec.layout)
    dense = _base_dense(spec.layout)
    latent = np.asarray(spec.layout.latent, dtype=np.intp)
    for group, roi in zip(spec.layout.images, spec.rois):
        if not group:
            continue
        roi_set = set(roi)
        blocked = latent[[i not in roi_set for i in spec.layout.latent]]
        if blocked.size:
            dense[np.ix_(np.asarray(group, dtype=np.intp), blocked)] = 0
    return AttentionMaskMatrix.from_dense(dense)


def roi_from_region_map(rmap: RegionMap, layout: TokenLayout) -> tuple[int, ...]:
    """Convert a D x D latent-grid map to latent token indices (row-major
    over sorted latent indices, matching the similarity-map reshape)."""
    d = layout.grid_side
    if rmap.shape != (d, d):
        raise ValidationError(
            f"region map is {rmap.shape}, layout grid is {d}x{d}"
        )
    latent = layout.latent  # already sorted
    flat = rmap.bits.ravel()
    return tuple(latent[i] for i in np.flatnonzero(flat))


def mask_to_json(mask: AttentionMaskMatrix) -> dict:
    """Export form: base64 packed bits per row, MSB-first."""
    return {
        "L": mask.L,
        "rows": [
            base64.b64encode(mask.packed[i].tobytes()).decode("ascii")
            for i in range(mask.L)
        ],
    }


def mask_from_json(obj: dict) -> AttentionMaskMatrix:
    L = obj.get("L")
    rows = obj.get("rows")
    if not isinstance(L, int) or not isinstance(rows, list) or len(rows) != L:
        raise ValidationError("mask export needs L and a row list of length L")
    width = (L + 7) // 8
    packed = np.zeros((L, width), dtype=np.uint8)
    for i, b64 in enumerate(rows):
        raw = np.frombuffer(base64.b64decode(b64), dtype=np.uint8)
        if raw.size != width:
            raise ValidationError(f"row {i} has {raw.size} bytes, expected {width}")
        packed[i] = raw
    return AttentionMaskMatrix(L=L, packed=packed)
