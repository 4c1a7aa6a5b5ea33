"""Evaluation toolkit for multi-human image generation benchmarks.

Operates entirely on precomputed artifacts (face embeddings, attention
probes, segmentation masks, externally computed quality scores); no neural
inference happens here.
"""

from .assignment import Assignment, brute_force_assignment, solve_assignment
from .core import (
    AttributeLabel,
    Embedding,
    EmbeddingSet,
    RegionMap,
    SampleRecord,
    SimilarityMap,
    TokenLayout,
    ValidationError,
    parse_manifest,
    serialize_manifest,
    validate_layout,
)
from .harness import (
    BenchReport,
    BiasFlag,
    aggregate_report,
    evaluate_manifest,
    evaluate_sample,
    flag_bias,
    select_pose_sources,
)
from .maskiso import (
    AttentionMaskMatrix,
    IsolationSpec,
    build_base_mask,
    build_isolated_mask,
    roi_from_region_map,
)
from .metrics import (
    IdSimilarityResult,
    SampleScores,
    action_score,
    alignment_score,
    cosine_similarity,
    count_accuracy,
    hungarian_id_similarity,
    similarity_matrix,
    unified_score,
)
from .regions import (
    AttentionProbe,
    RegionAssignment,
    aggregate_attention_maps,
    assign_regions_by_attention,
    assign_regions_by_identity,
    nms_masks,
    overlap_cost,
)
from .sampler import (
    TargetDistribution,
    assign_ids_to_prompts,
    stratified_sample,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "AttentionMaskMatrix",
    "AttentionProbe",
    "AttributeLabel",
    "BenchReport",
    "BiasFlag",
    "Embedding",
    "EmbeddingSet",
    "IdSimilarityResult",
    "IsolationSpec",
    "RegionAssignment",
    "RegionMap",
    "SampleRecord",
    "SampleScores",
    "SimilarityMap",
    "TargetDistribution",
    "TokenLayout",
    "ValidationError",
    "action_score",
    "aggregate_attention_maps",
    "aggregate_report",
    "alignment_score",
    "assign_ids_to_prompts",
    "assign_regions_by_attention",
    "assign_regions_by_identity",
    "brute_force_assignment",
    "build_base_mask",
    "build_isolated_mask",
    "cosine_similarity",
    "count_accuracy",
    "evaluate_manifest",
    "evaluate_sample",
    "flag_bias",
    "hungarian_id_similarity",
    "nms_masks",
    "overlap_cost",
    "parse_manifest",
    "roi_from_region_map",
    "select_pose_sources",
    "serialize_manifest",
    "similarity_matrix",
    "solve_assignment",
    "stratified_sample",
    "unified_score",
    "validate_layout",
]
