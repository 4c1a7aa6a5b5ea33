"""Stratified test-set construction and id-to-prompt assignment.

Joint bucket quotas are products of the per-attribute marginal targets
(attribute independence assumed), renormalized over the joint buckets that
actually occur in the pool, then rounded with the largest-remainder method so
they sum exactly to ``n``. Within each bucket, members are drawn uniformly
without replacement from a seeded PCG64 generator (numpy ``default_rng``), so
identical inputs reproduce the selection byte for byte.

Prompt assignment walks a single seeded shuffle of the id pool cyclically:
every id is used once before any id repeats, and usage counts never differ by
more than one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ATTRIBUTE_BUCKETS, AttributeLabel, ValidationError

STRATIFIED_ATTRIBUTES = ("age_bucket", "gender", "ethnicity")
RNG_ALGORITHM = "numpy-pcg64"

_TARGET_KEY_ALIASES = {"age": "age_bucket"}


@dataclass(frozen=True)
class TargetDistribution:
    """Marginal bucket weights per stratified attribute.

    Attributes may be omitted entirely (they are then not stratified);
    buckets omitted from a present attribute get weight 0. Each present
    attribute's weights must be nonnegative and sum to 1 within 1e-9.
    """

    weights: dict[str, dict[str, float]]

    def __post_init__(self):
        canonical: dict[str, dict[str, float]] = {}
        for attr, buckets in self.weights.items():
            attr = _TARGET_KEY_ALIASES.get(attr, attr)
            if attr not in STRATIFIED_ATTRIBUTES:
                raise ValidationError(f"unknown target attribute {attr!r}")
            allowed = ATTRIBUTE_BUCKETS[attr]
            clean = {}
            for bucket, w in buckets.items():
                if bucket not in allowed:
                    raise ValidationError(
                        f"unknown {attr} bucket {bucket!r}", "targets"
                    )
                w = float(w)
                if w < 0 or not np.isfinite(w):
                    raise ValidationError(
                        f"weight for {attr}.{bucket} must be >= 0", "targets"
                    )
                clean[bucket] = w
            total = sum(clean.values())
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(
                    f"{attr} weights sum to {total}, expected 1", "targets"
                )
            canonical[attr] = clean
        if not canonical:
            raise ValidationError("targets must stratify at least one attribute")
        object.__setattr__(self, "weights", canonical)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(a for a in STRATIFIED_ATTRIBUTES if a in self.weights)

    def joint_weight(self, label: AttributeLabel) -> float:
        w = 1.0
        for attr in self.attributes:
            w *= self.weights[attr].get(getattr(label, attr), 0.0)
        return w


def largest_remainder(weights: dict, total: int) -> dict:
    """Round ``total * weight`` per key so the integer quotas sum exactly to
    ``total``; leftovers go to the largest fractional remainders (ties broken
    by ascending key)."""
    wsum = sum(weights.values())
    if wsum <= 0:
        raise ValidationError("weights must have positive mass")
    raw = {k: total * w / wsum for k, w in weights.items()}
    quotas = {k: int(np.floor(v)) for k, v in raw.items()}
    leftover = total - sum(quotas.values())
    order = sorted(weights, key=lambda k: (-(raw[k] - quotas[k]), k))
    for k in order[:leftover]:
        quotas[k] += 1
    return quotas


def _bucket_key(label: AttributeLabel, attrs: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(getattr(label, a) for a in attrs)


def compute_quotas(
    pool: list[tuple[str, AttributeLabel]],
    targets: TargetDistribution,
    n: int,
    best_effort: bool = False,
) -> dict[tuple[str, ...], int]:
    """Joint-bucket quotas for ``stratified_sample``; exposed for reporting.

    Raises an infeasibility error listing per-bucket deficits when a quota
    exceeds that bucket's pool size, unless ``best_effort`` redistributes the
    deficit to buckets with spare capacity (largest remainder again).
    """
    attrs = targets.attributes
    sizes: dict[tuple[str, ...], int] = {}
    for _, label in pool:
        key = _bucket_key(label, attrs)
        sizes[key] = sizes.get(key, 0) + 1
    weights = {}
    for key in sizes:
        label_kwargs = dict(zip(attrs, key))
        w = 1.0
        for a in attrs:
            w *= targets.weights[a].get(label_kwargs[a], 0.0)
        weights[key] = w
    if sum(weights.values()) <= 0:
        raise ValidationError(
            "no pool member falls in a positive-weight joint bucket"
        )
    quotas = largest_remainder(weights, n)
    deficits = {k: q - sizes[k] for k, q in quotas.items() if q > sizes[k]}
    if deficits and not best_effort:
        listing = ", ".join(
            f"{'/'.join(k)} short by {d}" for k, d in sorted(deficits.items())
        )
        raise ValidationError(f"stratification infeasible: {listing}")
    while deficits:
        shortfall = sum(deficits.values())
        for k in deficits:
            quotas[k] = sizes[k]
        spare = {
            k: weights[k]
            for k in quotas
            if sizes[k] > quotas[k] and weights[k] > 0
        }
        if not spare:
            spare = {k: 1.0 for k in quotas if sizes[k] > quotas[k]}
        if not spare:
            raise ValidationError("pool too small to absorb redistributed quota")
        extra = largest_remainder(spare, shortfall)
        for k, e in extra.items():
            quotas[k] += e
        deficits = {k: q - sizes[k] for k, q in quotas.items() if q > sizes[k]}
    return quotas


def stratified_sample(
    pool: list[tuple[str, AttributeLabel]],
    targets: TargetDistribution,
    n: int,
    seed: int,
    best_effort: bool = False,
) -> list[str]:
    """Select ``n`` ids matching the target marginals; deterministic in
    (pool, targets, n, seed). Output preserves pool order."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    if n > len(pool):
        raise ValidationError(f"n={n} exceeds pool size {len(pool)}")
    ids = [pid for pid, _ in pool]
    if len(set(ids)) != len(ids):
        raise ValidationError("pool ids must be unique")
    if n == 0:
        return []
    attrs = targets.attributes
    quotas = compute_quotas(pool, targets, n, best_effort=best_effort)
    members: dict[tuple[str, ...], list[str]] = {}
    for pid, label in pool:
        members.setdefault(_bucket_key(label, attrs), []).append(pid)
    rng = np.random.default_rng(seed)
    selected: set[str] = set()
    for key in sorted(quotas):
        quota = quotas[key]
        if quota == 0:
            continue
        bucket = sorted(members[key])
        picks = rng.choice(len(bucket), size=quota, replace=False)
        selected.update(bucket[i] for i in picks)
    return [pid for pid in ids if pid in selected]


def assign_ids_to_prompts(
    ids: list[str],
    prompts: list[str],
    iterations_per_prompt: int,
    persons_per_prompt: dict[str, int],
    seed: int,
) -> list[tuple[str, int, list[str]]]:
    """Assign ids to (prompt, iteration) tuples by cycling a seeded shuffle.

    Each tuple receives ``persons_per_prompt[prompt]`` distinct ids; every id
    is used once before any repeats.
    """
    if len(set(ids)) != len(ids):
        raise ValidationError("ids must be unique")
    if not ids:
        raise ValidationError("need at least one id")
    if iterations_per_prompt < 1:
        raise ValidationError("iterations_per_prompt must be >= 1")
    for prompt in prompts:
        persons = persons_per_prompt.get(prompt)
        if persons is None:
            raise ValidationError(f"no person count for prompt {prompt!r}")
        if not 1 <= persons <= 5:
            raise ValidationError(
                f"persons={persons} out of 1..5 for prompt {prompt!r}"
            )
        if persons > len(ids):
            raise ValidationError(
                f"prompt {prompt!r} needs {persons} distinct ids "
                f"but only {len(ids)} exist"
            )
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    out = []
    ptr = 0
    for prompt in prompts:
        persons = persons_per_prompt[prompt]
        for iteration in range(iterations_per_prompt):
            chosen = [shuffled[(ptr + offset) % len(ids)] for offset in range(persons)]
            ptr += persons
            out.append((prompt, iteration, chosen))
    return out
