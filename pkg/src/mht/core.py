"""Shared domain types, file parsing, and validation.

File formats handled here:

* Manifest JSON: ``{"version": 1, "samples": [...]}``. Each sample carries
  reference/generated embedding sets, per-reference attribute labels, an
  optional HPS value in [0, 1], and MLLM QA items. Embedding sets are stored
  inline as ``{"dim": d, "data": [f32...]}`` (row-major, length divisible by
  ``dim``) or externally as ``{"dim": d, "rows": n, "file": "relpath.f32"}``
  pointing at a raw little-endian float32 sidecar.
* Token layout JSON: ``{"L", "text", "images", "timestep", "latent",
  "grid_side"}`` with index sets as sorted integer arrays (canonicalized on
  parse).
* Region map JSON: ``{"h", "w", "bits"}`` where ``bits`` is base64 of the
  row-major bit matrix packed MSB-first.

All indices are 0-based. Scores are stored in [0, 1]; report rendering is
responsible for the 0-100 presentation scale.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field

import numpy as np

AGE_BUCKETS = ("young_adult", "middle_aged", "aged")
GENDERS = ("male", "female")
ETHNICITIES = (
    "white",
    "black",
    "south_asian",
    "east_asian",
    "hispanic_latin",
    "middle_eastern",
)
STATUSES = ("anonymous", "celebrity")
DATA_ORIGINS = ("real", "synthetic")
QA_KINDS = ("simple", "complex")

ATTRIBUTE_BUCKETS = {
    "age_bucket": AGE_BUCKETS,
    "gender": GENDERS,
    "ethnicity": ETHNICITIES,
    "status": STATUSES,
    "data_origin": DATA_ORIGINS,
}


class ValidationError(ValueError):
    """Input failed validation. ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{message} at {path}" if path else message)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Embedding:
    """A d-dimensional feature vector. Zero norm is legal but degenerate:
    cosine similarity against it raises instead of returning NaN."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(v)):
            raise ValidationError("embedding has non-finite entries")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def dim(self) -> int:
        return int(self.values.size)

    @property
    def is_degenerate(self) -> bool:
        return not np.any(self.values)


@dataclass(frozen=True)
class EmbeddingSet:
    """Ordered embeddings sharing one dimension; order carries identity."""

    vectors: np.ndarray  # (n, d) float64
    role: str = "reference"

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError("embedding set must be a 2-d array")
        if v.shape[0] > 0 and v.shape[1] < 1:
            raise ValidationError("embedding dimension must be >= 1")
        if not np.all(np.isfinite(v)):
            raise ValidationError("embedding set has non-finite entries")
        if self.role not in ("reference", "generated"):
            raise ValidationError(f"unknown embedding-set role {self.role!r}")
        object.__setattr__(self, "vectors", _freeze(v))

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def __getitem__(self, i: int) -> Embedding:
        return Embedding(self.vectors[i].copy())

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class AttributeLabel:
    age_bucket: str
    gender: str
    ethnicity: str
    status: str
    data_origin: str

    def __post_init__(self):
        for name, allowed in ATTRIBUTE_BUCKETS.items():
            value = getattr(self, name)
            if value not in allowed:
                raise ValidationError(
                    f"unknown {name} {value!r} (expected one of {allowed})"
                )


@dataclass(frozen=True)
class TokenLayout:
    """Partition of sequence indices {0..L-1} into token-type sets.

    ``images`` holds one index set per reference image, in image order.
    ``grid_side`` is the latent grid side D; ``len(latent) == D * D``.
    """

    L: int
    text: tuple[int, ...]
    images: tuple[tuple[int, ...], ...]
    timestep: tuple[int, ...]
    latent: tuple[int, ...]
    grid_side: int

    def __post_init__(self):
        object.__setattr__(self, "text", tuple(sorted(int(i) for i in self.text)))
        object.__setattr__(
            self,
            "images",
            tuple(tuple(sorted(int(i) for i in g)) for g in self.images),
        )
        object.__setattr__(
            self, "timestep", tuple(sorted(int(i) for i in self.timestep))
        )
        object.__setattr__(self, "latent", tuple(sorted(int(i) for i in self.latent)))

    @property
    def num_images(self) -> int:
        return len(self.images)

    def all_sets(self) -> list[tuple[str, tuple[int, ...]]]:
        named = [("text", self.text)]
        named += [(f"images[{k}]", g) for k, g in enumerate(self.images)]
        named += [("timestep", self.timestep), ("latent", self.latent)]
        return named


@dataclass(frozen=True)
class RegionMap:
    """Binary spatial mask (latent-grid or pixel resolution)."""

    bits: np.ndarray  # (h, w) uint8 of {0, 1}

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValidationError("region map must be a 2-d bit matrix")
        if b.size and not np.isin(b, (0, 1)).all():
            raise ValidationError("region map entries must be 0 or 1")
        object.__setattr__(self, "bits", _freeze(b.astype(np.uint8)))

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    @classmethod
    def ones(cls, height: int, width: int) -> "RegionMap":
        return cls(np.ones((height, width), dtype=np.uint8))

    @classmethod
    def zeros(cls, height: int, width: int) -> "RegionMap":
        return cls(np.zeros((height, width), dtype=np.uint8))


@dataclass(frozen=True)
class SimilarityMap:
    """Nonnegative D x D map of aggregated attention mass."""

    grid: np.ndarray  # (D, D) float64

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValidationError("similarity map must be square")
        if not np.all(np.isfinite(g)):
            raise ValidationError("similarity map has non-finite entries")
        if g.size and g.min() < 0:
            raise ValidationError("similarity map entries must be >= 0")
        object.__setattr__(self, "grid", _freeze(g))

    @property
    def side(self) -> int:
        return int(self.grid.shape[0])


@dataclass(frozen=True)
class QAItem:
    kind: str
    raw_score: int

    def __post_init__(self):
        if self.kind not in QA_KINDS:
            raise ValidationError(f"unknown qa kind {self.kind!r}")
        if not isinstance(self.raw_score, int) or not 1 <= self.raw_score <= 10:
            raise ValidationError("score out of range")


@dataclass(frozen=True)
class SampleRecord:
    """One benchmark sample's precomputed artifacts."""

    sample_id: str
    prompt_id: str
    n_refs: int
    ref_embeddings: EmbeddingSet
    ref_attributes: tuple[AttributeLabel, ...]
    gen_embeddings: EmbeddingSet
    hps: float | None = None
    qa_items: tuple[QAItem, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_refs < 1:
            raise ValidationError("n_refs must be >= 1", f"sample {self.sample_id}")
        if len(self.ref_embeddings) != self.n_refs:
            raise ValidationError(
                f"ref_embeddings has {len(self.ref_embeddings)} rows, "
                f"expected n_refs={self.n_refs}",
                f"sample {self.sample_id}",
            )
        if len(self.ref_attributes) != self.n_refs:
            raise ValidationError(
                f"ref_attributes has length {len(self.ref_attributes)}, "
                f"expected n_refs={self.n_refs}",
                f"sample {self.sample_id}",
            )
        if self.hps is not None and not 0.0 <= self.hps <= 1.0:
            raise ValidationError("hps out of [0,1]", f"sample {self.sample_id}.hps")


def validate_layout(layout: TokenLayout) -> None:
    """Check the TokenLayout invariants; raise ValidationError on the first
    violation (overlapping sets, |latent| != D^2, index out of range)."""
    if layout.L < 0:
        raise ValidationError("L must be >= 0")
    if layout.grid_side < 0:
        raise ValidationError("grid_side must be >= 0")
    seen: dict[int, str] = {}
    for name, idxs in layout.all_sets():
        for i in idxs:
            if i < 0 or i >= layout.L:
                raise ValidationError(f"index {i} out of range [0,{layout.L})", name)
            if i in seen:
                raise ValidationError(
                    f"index {i} appears in both {seen[i]} and {name}"
                )
            seen[i] = name
        if len(set(idxs)) != len(idxs):
            raise ValidationError("duplicate index within set", name)
    if len(layout.latent) != layout.grid_side**2:
        raise ValidationError(
            f"|latent| = {len(layout.latent)} but grid_side^2 = "
            f"{layout.grid_side**2}"
        )


# ---------------------------------------------------------------------------
# JSON parsing helpers


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"missing field {key!r}", path)
    return obj[key]


def parse_embedding_set(
    obj: dict, role: str, base_dir: str = ".", path: str = ""
) -> EmbeddingSet:
    """Parse an inline or external embedding-set object.

    External sidecars are raw row-major little-endian float32, ``rows * dim``
    values, resolved relative to ``base_dir``. Inline data is canonicalized
    through float32 to match the sidecar precision.
    """
    if not isinstance(obj, dict):
        raise ValidationError("embedding set must be an object", path)
    dim = _require(obj, "dim", path)
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}", path)
    if "file" in obj:
        rows = _require(obj, "rows", path)
        if not isinstance(rows, int) or rows < 0:
            raise ValidationError("rows must be a non-negative integer", path)
        if not isinstance(obj["file"], str):
            raise ValidationError("file must be a relative path string", path)
        fname = os.path.join(base_dir, obj["file"])
        try:
            raw = np.fromfile(fname, dtype="<f4")
        except OSError as e:
            raise ValidationError(f"cannot read sidecar {obj['file']!r}: {e}", path)
        if raw.size != rows * dim:
            raise ValidationError(
                f"sidecar {obj['file']!r} holds {raw.size} floats, "
                f"expected {rows}x{dim}",
                path,
            )
        data = raw.reshape(rows, dim)
    else:
        flat = _require(obj, "data", path)
        if not isinstance(flat, list):
            raise ValidationError("data must be an array of numbers", path)
        try:
            arr = np.asarray(flat, dtype=np.float64)
        except (TypeError, ValueError):
            raise ValidationError("data must be an array of numbers", path)
        if arr.ndim != 1:
            raise ValidationError("data must be a flat array", path)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("non-finite embedding entry", path)
        if arr.size % dim != 0:
            raise ValidationError(
                f"data length {arr.size} not divisible by dim {dim}", path
            )
        data = arr.reshape(-1, dim).astype(np.float32)
    return EmbeddingSet(data.astype(np.float64), role=role)


def embedding_set_to_json(es: EmbeddingSet) -> dict:
    """Canonical inline form (float32-exact values)."""
    flat = es.vectors.astype(np.float32).astype(np.float64).ravel()
    return {"dim": es.dim if len(es) else int(es.vectors.shape[1] or 1),
            "data": [float(x) for x in flat]}


def parse_attribute_label(obj: dict, path: str = "") -> AttributeLabel:
    if not isinstance(obj, dict):
        raise ValidationError("attribute label must be an object", path)
    try:
        return AttributeLabel(
            age_bucket=_require(obj, "age_bucket", path),
            gender=_require(obj, "gender", path),
            ethnicity=_require(obj, "ethnicity", path),
            status=_require(obj, "status", path),
            data_origin=_require(obj, "data_origin", path),
        )
    except ValidationError as e:
        if e.path:
            raise
        raise ValidationError(str(e), path)


def attribute_label_to_json(label: AttributeLabel) -> dict:
    return {name: getattr(label, name) for name in ATTRIBUTE_BUCKETS}


def _parse_sample(obj: dict, base_dir: str, index: int) -> SampleRecord:
    if not isinstance(obj, dict):
        raise ValidationError("sample must be an object", f"samples[{index}]")
    sid = obj.get("sample_id")
    if not isinstance(sid, str) or not sid:
        raise ValidationError("missing or empty sample_id", f"samples[{index}]")
    where = f"sample {sid}"
    prompt_id = _require(obj, "prompt_id", where)
    n_refs = _require(obj, "n_refs", where)
    if not isinstance(n_refs, int):
        raise ValidationError("n_refs must be an integer", where)
    refs = parse_embedding_set(
        _require(obj, "ref_embeddings", where),
        "reference", base_dir, f"{where}.ref_embeddings",
    )
    attrs = _require(obj, "ref_attributes", where)
    if not isinstance(attrs, list):
        raise ValidationError("ref_attributes must be an array", where)
    labels = tuple(
        parse_attribute_label(a, f"{where}.ref_attributes[{i}]")
        for i, a in enumerate(attrs)
    )
    gens = parse_embedding_set(
        _require(obj, "gen_embeddings", where),
        "generated", base_dir, f"{where}.gen_embeddings",
    )
    hps = obj.get("hps")
    if hps is not None:
        if not isinstance(hps, (int, float)) or isinstance(hps, bool):
            raise ValidationError("hps must be a number", f"{where}.hps")
        hps = float(hps)
        if not 0.0 <= hps <= 1.0:
            raise ValidationError("hps out of [0,1]", f"{where}.hps")
    qa_raw = obj.get("qa_items", [])
    if not isinstance(qa_raw, list):
        raise ValidationError("qa_items must be an array", where)
    qa_items = []
    for i, item in enumerate(qa_raw):
        qpath = f"{where}.qa_items[{i}]"
        if not isinstance(item, dict):
            raise ValidationError("qa item must be an object", qpath)
        kind = _require(item, "kind", qpath)
        score = _require(item, "raw_score", qpath)
        if kind not in QA_KINDS:
            raise ValidationError(f"unknown qa kind {kind!r}", qpath)
        if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 10:
            raise ValidationError("score out of range", qpath)
        qa_items.append(QAItem(kind, score))
    return SampleRecord(
        sample_id=sid,
        prompt_id=str(prompt_id),
        n_refs=n_refs,
        ref_embeddings=refs,
        ref_attributes=labels,
        gen_embeddings=gens,
        hps=hps,
        qa_items=tuple(qa_items),
    )


def parse_manifest_obj(doc: dict, base_dir: str = ".") -> list[SampleRecord]:
    if not isinstance(doc, dict):
        raise ValidationError("manifest must be a JSON object")
    version = doc.get("version")
    if version != 1:
        raise ValidationError(f"unsupported manifest version {version!r}")
    samples = doc.get("samples")
    if not isinstance(samples, list):
        raise ValidationError("manifest missing samples array")
    records = []
    seen_ids: set[str] = set()
    for i, obj in enumerate(samples):
        rec = _parse_sample(obj, base_dir, i)
        if rec.sample_id in seen_ids:
            raise ValidationError(
                f"duplicate sample_id {rec.sample_id!r}", f"samples[{i}]"
            )
        seen_ids.add(rec.sample_id)
        records.append(rec)
    return records


def parse_manifest(path: str) -> list[SampleRecord]:
    """Load and validate a manifest file; returns records in file order.

    Raises ValidationError (malformed document, bad field, duplicate id) with
    the sample id and field path, or OSError if the file cannot be read.
    """
    with open(path, "rb") as f:
        raw = f.read()
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError, ValueError) as e:
        raise ValidationError(f"malformed JSON: {e}")
    return parse_manifest_obj(doc, base_dir=os.path.dirname(path) or ".")


def sample_to_json(rec: SampleRecord) -> dict:
    obj = {
        "sample_id": rec.sample_id,
        "prompt_id": rec.prompt_id,
        "n_refs": rec.n_refs,
        "ref_embeddings": embedding_set_to_json(rec.ref_embeddings),
        "ref_attributes": [attribute_label_to_json(a) for a in rec.ref_attributes],
        "gen_embeddings": embedding_set_to_json(rec.gen_embeddings),
    }
    if rec.hps is not None:
        obj["hps"] = rec.hps
    if rec.qa_items:
        obj["qa_items"] = [
            {"kind": q.kind, "raw_score": q.raw_score} for q in rec.qa_items
        ]
    return obj


def serialize_manifest(records: list[SampleRecord]) -> dict:
    """Canonical manifest form: inline embeddings, fixed field order."""
    return {"version": 1, "samples": [sample_to_json(r) for r in records]}


def parse_token_layout(obj: dict) -> TokenLayout:
    """Parse and validate a token-layout object."""
    for key in ("L", "text", "images", "timestep", "latent", "grid_side"):
        _require(obj, key, "layout")
    layout = TokenLayout(
        L=int(obj["L"]),
        text=tuple(obj["text"]),
        images=tuple(tuple(g) for g in obj["images"]),
        timestep=tuple(obj["timestep"]),
        latent=tuple(obj["latent"]),
        grid_side=int(obj["grid_side"]),
    )
    validate_layout(layout)
    return layout


def token_layout_to_json(layout: TokenLayout) -> dict:
    return {
        "L": layout.L,
        "text": list(layout.text),
        "images": [list(g) for g in layout.images],
        "timestep": list(layout.timestep),
        "latent": list(layout.latent),
        "grid_side": layout.grid_side,
    }


def parse_region_map(obj: dict, path: str = "") -> RegionMap:
    """Parse ``{"h", "w", "bits"}`` with bits base64-packed MSB-first."""
    h = _require(obj, "h", path)
    w = _require(obj, "w", path)
    b64 = _require(obj, "bits", path)
    if not isinstance(h, int) or not isinstance(w, int) or h < 0 or w < 0:
        raise ValidationError("h and w must be non-negative integers", path)
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as e:
        raise ValidationError(f"invalid base64 bits: {e}", path)
    packed = np.frombuffer(raw, dtype=np.uint8)
    expected = h * ((w + 7) // 8)
    if packed.size != expected:
        raise ValidationError(
            f"bits payload is {packed.size} bytes, expected {expected}", path
        )
    if h == 0 or w == 0:
        return RegionMap(np.zeros((h, w), dtype=np.uint8))
    rows = np.unpackbits(packed.reshape(h, -1), axis=1)[:, :w]
    return RegionMap(rows)


def region_map_to_json(rm: RegionMap) -> dict:
    packed = np.packbits(rm.bits, axis=1) if rm.width else np.zeros(
        (rm.height, 0), dtype=np.uint8
    )
    return {
        "h": rm.height,
        "w": rm.width,
        "bits": base64.b64encode(packed.tobytes()).decode("ascii"),
    }


def load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"malformed JSON in {path}: {e}")


def dump_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=False)
        f.write("\n")
