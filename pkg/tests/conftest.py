import numpy as np
import pytest

from mht.core import ATTRIBUTE_BUCKETS, AttributeLabel


def make_label(i: int = 0) -> AttributeLabel:
    """Deterministic attribute label cycling through every bucket."""
    names = list(ATTRIBUTE_BUCKETS)
    values = {}
    for j, name in enumerate(names):
        buckets = ATTRIBUTE_BUCKETS[name]
        values[name] = buckets[(i + j) % len(buckets)]
    return AttributeLabel(**values)


def label_json(i: int = 0) -> dict:
    label = make_label(i)
    return {name: getattr(label, name) for name in ATTRIBUTE_BUCKETS}


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Random unit vectors, guaranteed nonzero norm."""
    v = rng.normal(size=(n, d))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return v / norms


def manifest_sample(
    sample_id: str,
    refs: np.ndarray,
    gens: np.ndarray,
    hps=None,
    qa=(),
) -> dict:
    n = refs.shape[0]
    obj = {
        "sample_id": sample_id,
        "prompt_id": f"p-{sample_id}",
        "n_refs": n,
        "ref_embeddings": {
            "dim": refs.shape[1],
            "data": [float(np.float32(x)) for x in refs.ravel()],
        },
        "ref_attributes": [label_json(i) for i in range(n)],
        "gen_embeddings": {
            "dim": refs.shape[1],
            "data": [float(np.float32(x)) for x in np.asarray(gens).ravel()],
        },
    }
    if hps is not None:
        obj["hps"] = hps
    if qa:
        obj["qa_items"] = [{"kind": k, "raw_score": s} for k, s in qa]
    return obj


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
