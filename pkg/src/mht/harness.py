"""Batch evaluation driver and report aggregation.

Per-sample evaluation composes the metric functions; aggregation is a
deterministic fold over samples sorted by sample_id, so reports are
byte-identical regardless of input order or worker count. Attribute tables
attribute each reference's own matched (clamped) similarity to that
reference's demographic buckets, which makes the per-bucket cells
single-person equivalents even though samples mix demographics.

Report values are kept at full precision on a 0-100 scale in the JSON form
(so aggregate cells stay re-derivable from the emitted per-sample scores);
the CSV and text renderings round to one decimal place.
"""

from __future__ import annotations

import concurrent.futures
import io
from dataclasses import dataclass, field

from .core import ATTRIBUTE_BUCKETS, SampleRecord, ValidationError
from .metrics import (
    SampleScores,
    action_score,
    alignment_score,
    count_accuracy,
    hungarian_id_similarity,
    unified_score,
)

METRIC_FIELDS = (
    ("count", "Count"),
    ("multi_id", "Multi-ID"),
    ("hps", "HPS"),
    ("action_simple", "Action-S"),
    ("action_complex", "Action-C"),
    ("align", "Align"),
    ("unified", "Unified"),
)

DEFAULT_BIAS_TIERS = (1.0, 2.5, 4.0)
_TIER_NAMES = ("light", "medium", "heavy")


@dataclass(frozen=True)
class MetricCell:
    mean: float  # 0-100 scale
    n: int


@dataclass(frozen=True)
class AttributeCell:
    mean: float  # 0-100 scale, per-reference
    n: int
    deviation: float  # points vs the count-weighted row mean


@dataclass(frozen=True)
class BenchReport:
    overall: dict[str, MetricCell]
    by_person_count: dict[int, dict[str, MetricCell]]
    by_attribute: dict[str, dict[str, AttributeCell]]
    sample_count: int
    per_sample: tuple[dict, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class BiasFlag:
    attribute: str
    bucket: str
    deviation: float
    tier: str  # none | light | medium | heavy


def per_reference_id_similarities(record: SampleRecord) -> list[float]:
    """Each reference's matched clamped similarity (0 when unmatched or no
    faces were generated). Their mean is the sample's identity score."""
    n = record.n_refs
    if len(record.gen_embeddings) == 0:
        return [0.0] * n
    result = hungarian_id_similarity(record.ref_embeddings, record.gen_embeddings)
    per_ref = [0.0] * n
    for i, _, sim in result.matches:
        per_ref[i] = max(sim, 0.0)
    return per_ref


def evaluate_sample(record: SampleRecord) -> SampleScores:
    """Score one sample. Alignment and unified scores are absent unless the
    sample carries an HPS value and at least one action kind."""
    n, m = record.n_refs, len(record.gen_embeddings)
    count = count_accuracy(n, m)
    per_ref = per_reference_id_similarities(record)
    s_id = sum(per_ref) / n
    simple_scores = [q.raw_score for q in record.qa_items if q.kind == "simple"]
    complex_scores = [q.raw_score for q in record.qa_items if q.kind == "complex"]
    a_simple = action_score(simple_scores) if simple_scores else None
    a_complex = action_score(complex_scores) if complex_scores else None
    s_align = None
    s_unified = None
    if record.hps is not None and (a_simple is not None or a_complex is not None):
        s_align = alignment_score(record.hps, a_simple, a_complex, count)
        s_unified = unified_score(s_id, s_align)
    return SampleScores(
        count=count,
        s_id=s_id,
        hps=record.hps,
        action_simple=a_simple,
        action_complex=a_complex,
        s_align=s_align,
        s_unified=s_unified,
    )


def evaluate_manifest(
    records: list[SampleRecord], jobs: int = 1, skip_invalid: bool = False
) -> tuple[list[tuple[SampleRecord, SampleScores]], list[tuple[str, str]]]:
    """Evaluate every record, optionally in parallel. Returns (scored,
    skipped) with scored sorted by sample_id; a failing sample aborts the run
    unless ``skip_invalid`` collects it instead."""

    def run(record: SampleRecord):
        try:
            return record.sample_id, evaluate_sample(record), None
        except ValidationError as e:
            if skip_invalid:
                return record.sample_id, None, str(e)
            raise ValidationError(
                f"sample {record.sample_id}: {e}"
            ) from e

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, records))
    else:
        outcomes = [run(r) for r in records]
    by_id = {r.sample_id: r for r in records}
    scored = []
    skipped = []
    for sid, scores, err in outcomes:
        if scores is None:
            skipped.append((sid, err))
        else:
            scored.append((by_id[sid], scores))
    scored.sort(key=lambda pair: pair[0].sample_id)
    skipped.sort()
    return scored, skipped


def _score_values(scores: SampleScores) -> dict[str, float | None]:
    return {
        "count": float(scores.count),
        "multi_id": scores.s_id,
        "hps": scores.hps,
        "action_simple": scores.action_simple,
        "action_complex": scores.action_complex,
        "align": scores.s_align,
        "unified": scores.s_unified,
    }


def _cells(samples: list[SampleScores]) -> dict[str, MetricCell]:
    cells = {}
    for name, _ in METRIC_FIELDS:
        values = [
            v for s in samples if (v := _score_values(s)[name]) is not None
        ]
        if values:
            cells[name] = MetricCell(
                mean=100.0 * sum(values) / len(values), n=len(values)
            )
    return cells


def aggregate_report(
    scored: list[tuple[SampleRecord, SampleScores]]
) -> BenchReport:
    """Fold per-sample scores into overall, per-person-count, and
    per-attribute tables. Deviations are cell mean minus the count-weighted
    row mean, so each row's deviations weighted by cell counts sum to 0."""
    if not scored:
        raise ValidationError("cannot aggregate an empty score list")
    scored = sorted(scored, key=lambda pair: pair[0].sample_id)
    all_scores = [s for _, s in scored]
    overall = _cells(all_scores)

    by_count: dict[int, dict[str, MetricCell]] = {}
    for n in sorted({r.n_refs for r, _ in scored}):
        group = [s for r, s in scored if r.n_refs == n]
        by_count[n] = _cells(group)

    # attribute -> bucket -> (sum, n) of per-reference similarities x100
    acc: dict[str, dict[str, list[float]]] = {
        attr: {} for attr in ATTRIBUTE_BUCKETS
    }
    for record, _ in scored:
        per_ref = per_reference_id_similarities(record)
        for label, sim in zip(record.ref_attributes, per_ref):
            for attr in ATTRIBUTE_BUCKETS:
                bucket = getattr(label, attr)
                acc[attr].setdefault(bucket, []).append(100.0 * sim)
    by_attribute: dict[str, dict[str, AttributeCell]] = {}
    for attr, buckets in acc.items():
        if not buckets:
            continue
        total = sum(sum(vals) for vals in buckets.values())
        count = sum(len(vals) for vals in buckets.values())
        row_mean = total / count
        cells = {}
        for bucket in ATTRIBUTE_BUCKETS[attr]:
            if bucket not in buckets:
                continue
            vals = buckets[bucket]
            mean = sum(vals) / len(vals)
            cells[bucket] = AttributeCell(
                mean=mean, n=len(vals), deviation=mean - row_mean
            )
        by_attribute[attr] = cells

    per_sample = []
    for record, scores in scored:
        row = {"sample_id": record.sample_id, "prompt_id": record.prompt_id,
               "n_refs": record.n_refs}
        row.update(_score_values(scores))
        per_sample.append(row)
    return BenchReport(
        overall=overall,
        by_person_count=by_count,
        by_attribute=by_attribute,
        sample_count=len(scored),
        per_sample=tuple(per_sample),
    )


def flag_bias(
    report: BenchReport, tiers: tuple[float, float, float] = DEFAULT_BIAS_TIERS
) -> list[BiasFlag]:
    """Tier every attribute cell by |deviation|: the largest threshold at or
    below it names the tier (none below the first)."""
    if list(tiers) != sorted(tiers) or len(set(tiers)) != len(tiers):
        raise ValidationError(f"bias tiers must be strictly increasing: {tiers}")
    if len(tiers) != len(_TIER_NAMES):
        raise ValidationError(f"expected {len(_TIER_NAMES)} tier thresholds")
    flags = []
    for attr, cells in report.by_attribute.items():
        for bucket, cell in cells.items():
            tier = "none"
            for threshold, name in zip(tiers, _TIER_NAMES):
                if abs(cell.deviation) >= threshold:
                    tier = name
            flags.append(
                BiasFlag(
                    attribute=attr,
                    bucket=bucket,
                    deviation=cell.deviation,
                    tier=tier,
                )
            )
    return flags


def select_pose_sources(
    per_prompt: dict[str, list[tuple[str, float, int]]]
) -> dict[str, str | None]:
    """Per prompt, keep candidates with action >= 0.97 and count == 1 and
    return the max-action one (ties: smallest image_id); None signals
    fallback to external pose generation."""
    out: dict[str, str | None] = {}
    for prompt, candidates in per_prompt.items():
        eligible = [
            (image_id, action)
            for image_id, action, count in candidates
            if action >= 0.97 and count == 1
        ]
        if not eligible:
            out[prompt] = None
        else:
            eligible.sort(key=lambda pair: (-pair[1], pair[0]))
            out[prompt] = eligible[0][0]
    return out


# ---------------------------------------------------------------------------
# Report emission


def report_to_json(report: BenchReport) -> dict:
    """Canonical machine form; field order is fixed for byte-stable dumps."""
    return {
        "sample_count": report.sample_count,
        "overall": {
            name: {"mean": cell.mean, "n": cell.n}
            for name, _ in METRIC_FIELDS
            if (cell := report.overall.get(name)) is not None
        },
        "by_person_count": {
            str(n): {
                name: {"mean": cell.mean, "n": cell.n}
                for name, _ in METRIC_FIELDS
                if (cell := cells.get(name)) is not None
            }
            for n, cells in sorted(report.by_person_count.items())
        },
        "by_attribute": {
            attr: {
                bucket: {
                    "mean": cell.mean,
                    "n": cell.n,
                    "deviation": cell.deviation,
                }
                for bucket, cell in cells.items()
            }
            for attr, cells in report.by_attribute.items()
        },
        "samples": list(report.per_sample),
    }


def report_to_csv(report: BenchReport) -> str:
    """One row per cell: section,key,metric,mean,n,deviation."""
    buf = io.StringIO()
    buf.write("section,key,metric,mean,n,deviation\n")
    for name, label in METRIC_FIELDS:
        cell = report.overall.get(name)
        if cell:
            buf.write(f"overall,,{label},{cell.mean:.1f},{cell.n},\n")
    for n, cells in sorted(report.by_person_count.items()):
        for name, label in METRIC_FIELDS:
            cell = cells.get(name)
            if cell:
                buf.write(
                    f"person_count,{n},{label},{cell.mean:.1f},{cell.n},\n"
                )
    for attr, cells in report.by_attribute.items():
        for bucket, cell in cells.items():
            buf.write(
                f"attribute,{attr}/{bucket},Multi-ID,{cell.mean:.1f},"
                f"{cell.n},{cell.deviation:.1f}\n"
            )
    return buf.getvalue()


def render_text_table(report: BenchReport) -> str:
    """Human-readable tables mirroring the benchmark presentation."""
    lines = []
    labels = [label for _, label in METRIC_FIELDS]
    widths = [max(7, len(label)) + 2 for label in labels]

    def row(cells: dict[str, MetricCell], key: str) -> str:
        vals = []
        for (name, _), width in zip(METRIC_FIELDS, widths):
            cell = cells.get(name)
            vals.append(f"{cell.mean:>{width}.1f}" if cell else f"{'-':>{width}}")
        return f"{key:<12}" + "".join(vals)

    header = f"{'':<12}" + "".join(
        f"{lab:>{w}}" for lab, w in zip(labels, widths)
    )
    lines.append("== Scores (0-100) ==")
    lines.append(header)
    lines.append(row(report.overall, "overall"))
    for n, cells in sorted(report.by_person_count.items()):
        lines.append(row(cells, f"{n}-person"))
    lines.append("")
    lines.append("== Single-person ID similarity by attribute ==")
    for attr, cells in report.by_attribute.items():
        lines.append(attr)
        for bucket, cell in cells.items():
            lines.append(
                f"  {bucket:<16}{cell.mean:6.1f}  (n={cell.n}, "
                f"dev={cell.deviation:+.1f})"
            )
    lines.append("")
    return "\n".join(lines)
